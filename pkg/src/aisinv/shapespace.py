"""Program fragments, their shape-space encoding and the two distances.

A fragment ``x := x op t`` is encoded in five slots::

    (lhs_id, op, term_kind, term_id, form)

Occurrences of the lhs inside the rhs are replaced by a self marker first, so
renaming the assigned variable consistently moves the point along slot 1 only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Union

from .lang import Assign, BinOp, Expr, If, IntLit, Program, SimAssign, Span, VarRef, While, expr_vars

if TYPE_CHECKING:
    from .ais import InvariantTemplate

SLOTS = ("lhs_id", "op", "term_kind", "term_id", "form")


class UnrecognizedForm(ValueError):
    pass


@dataclass(frozen=True)
class Fragment:
    lhs: str
    rhs: Expr
    loop_path: tuple[str, ...] = ()
    span: Span | None = field(default=None, compare=False)
    # program variables visible to the fragment; feeds mutation vocabulary
    scope: tuple[str, ...] = field(default=(), compare=False)

    @property
    def in_loop(self) -> bool:
        return bool(self.loop_path)

    def __str__(self):
        from .lang import format_expr
        return f"{self.lhs} := {format_expr(self.rhs)}"


@dataclass(frozen=True)
class ShapeVector:
    lhs_id: str
    op: str  # add, sub, mul, div, none
    term_kind: str  # const, var, self
    term_id: Union[str, int, None]
    form: str  # additive, multiplicative, self_product, other

    def slots(self) -> tuple:
        return (self.lhs_id, self.op, self.term_kind, self.term_id, self.form)

    def __str__(self):
        term = "⊥" if self.term_id is None else self.term_id
        return f"({self.lhs_id}, {self.op}, {self.term_kind}, {term}, {self.form})"

    def to_dict(self) -> dict:
        return {"lhs": self.lhs_id, "op": self.op, "term_kind": self.term_kind,
                "term": self.term_id, "form": self.form}

    @classmethod
    def from_dict(cls, d: dict) -> "ShapeVector":
        return cls(d["lhs"], d["op"], d["term_kind"], d["term"], d["form"])


def extract_fragments(p: Program) -> list[Fragment]:
    """Every assignment in program order, tagged with its enclosing loops."""
    scope = tuple(p.params) + tuple(p.assigned_vars())
    out: list[Fragment] = []

    def visit(stmts, path):
        for s in stmts:
            if isinstance(s, Assign):
                out.append(Fragment(s.lhs, s.rhs, path, s.span, scope))
            elif isinstance(s, SimAssign):
                out.extend(Fragment(n, e, path, s.span, scope) for n, e in zip(s.lhss, s.rhss))
            elif isinstance(s, While):
                visit(s.body, path + (s.loop_id,))
            elif isinstance(s, If):
                visit(s.then, path)
                visit(s.orelse, path)

    visit(p.body, ())
    return out


def _term(e: Expr, lhs: str):
    if isinstance(e, VarRef):
        return ("self", None) if e.name == lhs else ("var", e.name)
    if isinstance(e, IntLit):
        return ("const", e.value)
    return None


def encode(f: Fragment) -> ShapeVector:
    """Shape-space point of a fragment; raises UnrecognizedForm off the recurrence family."""
    e, x = f.rhs, f.lhs
    if isinstance(e, VarRef) and e.name == x:
        return ShapeVector(x, "none", "const", 0, "other")
    if not isinstance(e, BinOp) or e.op == "mod":
        raise UnrecognizedForm(f"{f}: not of the form {x} op term")
    left, right = _term(e.left, x), _term(e.right, x)
    if left is None or right is None:
        raise UnrecognizedForm(f"{f}: operands nest beyond one operator")
    form = "additive" if e.op in ("add", "sub") else "multiplicative"
    if left[0] == "self" and right[0] == "self":
        if e.op == "mul":
            return ShapeVector(x, "mul", "self", None, "self_product")
        raise UnrecognizedForm(f"{f}: {x} combined with itself")
    if left[0] == "self":
        return ShapeVector(x, e.op, right[0], right[1], form)
    if right[0] == "self" and e.op in ("add", "mul"):
        return ShapeVector(x, e.op, left[0], left[1], form)
    raise UnrecognizedForm(f"{f}: rhs does not update {x} by a recurrence")


def rename(f: Fragment, new: str) -> Fragment:
    """Consistently rename the fragment's lhs (in both lhs and rhs)."""

    def sub(e):
        if isinstance(e, VarRef):
            return VarRef(new) if e.name == f.lhs else e
        if isinstance(e, BinOp):
            return BinOp(e.op, sub(e.left), sub(e.right))
        return e

    if new in expr_vars(f.rhs) - {f.lhs}:
        raise ValueError(f"{new!r} already occurs in {f}")
    return Fragment(new, sub(f.rhs), f.loop_path, f.span, f.scope)


def hamming(a: tuple, b: tuple) -> int:
    return sum(1 for x, y in zip(a, b) if x != y)


def antigenic_distance(a: ShapeVector, b: ShapeVector) -> int:
    return hamming(a.slots(), b.slots())


def antibody_distance(a: "InvariantTemplate", b: "InvariantTemplate") -> int:
    return hamming(a.slots(), b.slots())
