"""Instantiate a predicted shape into concrete invariants from execution traces.

Each loop-head snapshot becomes one row of monomial values; the exact rational
null space of that matrix holds every linear combination of the columns that
vanishes on all observed states. Checking is trace-based only: an invariant
that survives here is not thereby proved inductive.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, islice
from typing import Iterable, Iterator, Sequence

from .config import AisConfig
from .interp import Trace, eval_cond, run, sample_inputs
from .lang import Program
from .synth import (
    ONE, ExponentCapExceeded, Monomial, ShapePolynomial, UnboundIdentifier, VarExpVar, parse_linear_form,
    parse_monomial, var,
)

logger = logging.getLogger(__name__)


class SolverError(Exception):
    pass


class ShapeInsufficient(SolverError):
    """The null space is empty: no combination of the shape's terms is invariant."""


class NotStabilized(SolverError):
    pass


def param_terms(params: Sequence[str]) -> list[Monomial]:
    """The constant-coefficient library: 1, p, p*q, p^2, exp(p,q) over the params."""
    terms = [ONE]
    terms += [var(p) for p in params]
    terms += [var(p) * var(q) for p, q in combinations(params, 2)]
    terms += [var(p, 2) for p in params]
    terms += [Monomial.of(VarExpVar(p, q)) for p, q in combinations(params, 2)]
    return terms


def evaluate_monomial(m: Monomial, vals, params=None, cap: int | None = 64) -> Fraction:
    env = dict(params or {})
    env.update(vals)
    return m.evaluate(env, cap)


@dataclass
class RationalMatrix:
    labels: list[Monomial]
    rows: list[list[Fraction]] = field(default_factory=list)
    skipped: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.labels)


def build_system(shape: ShapePolynomial, traces: Sequence[Trace], loop: str,
                 terms: Sequence[Monomial] | None = None, cap: int | None = 64) -> RationalMatrix:
    """One row per loop-head snapshot; columns are shape monomials then param terms."""
    if not traces:
        raise SolverError("no traces to build a system from")
    if terms is None:
        terms = param_terms(list(traces[0].inputs))
    labels = list(dict.fromkeys(list(shape.monomials) + list(terms)))
    m = RationalMatrix(labels)
    for t in traces:
        for snap in t.loop_snapshots(loop):
            try:
                m.rows.append([evaluate_monomial(c, snap, t.inputs, cap) for c in labels])
            except ExponentCapExceeded:
                m.skipped += 1
    if m.skipped:
        logger.warning("skipped %d snapshot(s) whose exponents exceed the cap of %s", m.skipped, cap)
    if not m.rows:
        raise SolverError(f"no usable snapshots for loop {loop!r}")
    return m


def _integer_rows(rows: Iterable[Sequence]) -> list[list[int]]:
    out = []
    for row in rows:
        row = [Fraction(x) for x in row]
        scale = math.lcm(*(x.denominator for x in row)) if row else 1
        out.append([int(x * scale) for x in row])
    return out


def _row_gcd_reduce(row: list[int]) -> list[int]:
    g = math.gcd(*row)
    return [x // g for x in row] if g > 1 else row


def rref(rows: Iterable[Sequence], ncols: int) -> tuple[list[list[int]], list[int]]:
    """Fraction-free Gauss-Jordan elimination over the integers.

    Pivots are taken leftmost column first, then smallest row index. Returns
    the nonzero rows (each reduced by its content) and the pivot columns.
    """
    m = _integer_rows(rows)
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        m[r] = _row_gcd_reduce(m[r])
        a = m[r][c]
        for i in range(len(m)):
            if i != r and m[i][c]:
                b = m[i][c]
                m[i] = _row_gcd_reduce([a * x - b * y for x, y in zip(m[i], m[r])])
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows: Sequence[Sequence], ncols: int) -> int:
    return len(rref(rows, ncols)[1])


def null_space(m: RationalMatrix | Sequence[Sequence], ncols: int | None = None) -> list[list[Fraction]]:
    """Exact basis of {v : m v = 0}, one vector per free column (left to right)."""
    if isinstance(m, RationalMatrix):
        rows, ncols = m.rows, len(m.labels)
    else:
        rows = m
        if ncols is None:
            ncols = len(rows[0]) if rows else 0
    reduced, pivots = rref(rows, ncols)
    basis = []
    pivot_set = set(pivots)
    for free in range(ncols):
        if free in pivot_set:
            continue
        v = [Fraction(0)] * ncols
        v[free] = Fraction(1)
        for row, pc in zip(reduced, pivots):
            v[pc] = Fraction(-row[free], row[pc])
        basis.append(v)
    return basis


def normalize(v: Sequence[Fraction]) -> list[int]:
    """Scale to coprime integers with a positive leading coefficient."""
    scale = math.lcm(*(Fraction(x).denominator for x in v))
    ints = [int(Fraction(x) * scale) for x in v]
    g = math.gcd(*ints)
    if g == 0:
        raise ValueError("cannot normalize the zero vector")
    ints = [x // g for x in ints]
    lead = next(x for x in ints if x)
    return [-x for x in ints] if lead < 0 else ints


# --------------------------------------------------------------------------- invariants


@dataclass(frozen=True)
class ConcreteInvariant:
    coefficients: dict  # Monomial -> Fraction, nonzero only, in column order
    loop_id: str

    def __post_init__(self):
        if not any(self.coefficients.values()):
            raise ValueError("an invariant needs a nonzero coefficient")

    def evaluate(self, env, cap: int | None = None) -> Fraction:
        return sum((c * m.evaluate(env, cap) for m, c in self.coefficients.items()), Fraction(0))

    def text(self, rank: dict[str, int] | None = None) -> str:
        parts = []
        for m, c in self.coefficients.items():
            mag = abs(c)
            label = m.render(rank)
            if m.is_constant:
                body = str(mag)
            elif mag == 1:
                body = label
            elif mag.denominator == 1:
                body = f"{mag}*{label}"
            else:
                body = f"({mag})*{label}"
            if not parts:
                parts.append(f"-{body}" if c < 0 else body)
            else:
                parts.append(f"{'-' if c < 0 else '+'} {body}")
        return " ".join(parts) + " = 0"

    def to_dict(self, rank: dict[str, int] | None = None) -> dict:
        return {
            "loop": self.loop_id,
            "coefficients": {m.render(rank): [c.numerator, c.denominator] for m, c in self.coefficients.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConcreteInvariant":
        coefs = {parse_monomial(k): Fraction(v[0], v[1]) for k, v in d["coefficients"].items()}
        return cls(coefs, d["loop"])

    @classmethod
    def parse(cls, text: str, loop_id: str) -> "ConcreteInvariant":
        stripped = text.strip()
        if stripped.startswith("{"):
            d = json.loads(stripped)
            d.setdefault("loop", loop_id)
            return cls.from_dict(d)
        coefs: dict[Monomial, Fraction] = {}
        for c, m in parse_linear_form(stripped):
            coefs[m] = coefs.get(m, Fraction(0)) + c
        return cls({m: c for m, c in coefs.items() if c}, loop_id)


@dataclass
class CheckReport:
    vanishes: bool
    snapshots: int = 0
    skipped: int = 0
    exit_condition: bool | None = None  # loop test false at the last snapshot
    postcondition: bool | None = None  # post evaluated at the program's exit state
    failures: list = field(default_factory=list)

    def __bool__(self):
        return self.vanishes


def check_invariant(inv: ConcreteInvariant, t: Trace, program: Program | None = None,
                    cap: int | None = 4096) -> CheckReport:
    """Does ``inv`` vanish at every head snapshot of its loop in ``t``?

    When a program is given, also evaluates the loop test on the final snapshot
    and the postcondition on the exit state.
    """
    snaps = t.loop_snapshots(inv.loop_id)
    report = CheckReport(True, len(snaps))
    for s in snaps:
        env = dict(t.inputs)
        env.update(s)
        try:
            value = inv.evaluate(env, cap)
        except ExponentCapExceeded:
            report.skipped += 1
            continue
        except UnboundIdentifier as exc:
            raise SolverError(f"invariant mentions unbound identifier {exc.args[0]!r}") from None
        if value != 0:
            report.vanishes = False
            report.failures.append(s)
    if program is not None and snaps:
        loop = next((w for w in program.loops() if w.loop_id == inv.loop_id), None)
        if loop is not None:
            report.exit_condition = not eval_cond(loop.cond, snaps[-1])
        if program.post is not None:
            report.postcondition = eval_cond(program.post, t.exit)
    return report


def _invariant(vec: Sequence[Fraction], labels: Sequence[Monomial], loop: str) -> ConcreteInvariant:
    ints = normalize(vec)
    return ConcreteInvariant({m: Fraction(c) for m, c in zip(labels, ints) if c}, loop)


STABLE_BATCHES = 2


def instantiate(shape: ShapePolynomial, traces: Iterable[Trace], loop: str, cfg: AisConfig | None = None,
                holdout: Sequence[Trace] = (), terms: Sequence[Monomial] | None = None) -> list[ConcreteInvariant]:
    """Grow the trace set batch by batch until the null space settles.

    Settled means: the null-space dimension stayed the same over the last
    two batch additions, and every basis vector also vanishes on the held-out
    traces.
    """
    cfg = cfg or AisConfig()
    stream: Iterator[Trace] = iter(traces)
    used: list[Trace] = []
    prev_dim = None
    unchanged = 0
    while True:
        batch = list(islice(stream, cfg.trace_batch))
        if not batch:
            raise NotStabilized(f"null space did not settle within {len(used)} traces")
        used.extend(batch)
        try:
            m = build_system(shape, used, loop, terms, cfg.exponent_cap)
        except SolverError:
            # every snapshot so far is over the exponent cap; keep sampling
            if len(used) >= cfg.max_traces:
                raise
            continue
        basis = null_space(m)
        dim = len(basis)
        logger.debug("%d traces, %d rows: null space dimension %d", len(used), len(m.rows), dim)
        if dim == 0:
            raise ShapeInsufficient("no combination of the shape's terms vanishes on the traces")
        unchanged = unchanged + 1 if dim == prev_dim else 0
        prev_dim = dim
        if unchanged < STABLE_BATCHES:
            if len(used) >= cfg.max_traces:
                raise NotStabilized(f"null space did not settle within {cfg.max_traces} traces")
            continue
        invariants = [_invariant(v, m.labels, loop) for v in basis]
        if all(check_invariant(inv, t, cap=cfg.exponent_cap) for inv in invariants for t in holdout):
            return invariants
        if len(used) >= cfg.max_traces:
            raise NotStabilized("basis keeps failing on held-out traces")


def trace_stream(p: Program, cfg: AisConfig, seed: int) -> Iterator[Trace]:
    """Traces on distinct sampled inputs; a repeated input adds no rows worth having."""
    seen = set()
    for inputs in sample_inputs(p, 4 * cfg.max_traces, cfg.input_range, seed):
        key = tuple(sorted(inputs.items()))
        if key in seen:
            continue
        seen.add(key)
        yield run(p, inputs, cfg.fuel)
        if len(seen) == cfg.max_traces:
            return


def holdout_traces(p: Program, cfg: AisConfig) -> list[Trace]:
    # a different seed from the construction traces
    return [run(p, v, cfg.fuel) for v in sample_inputs(p, cfg.holdout, cfg.input_range, cfg.seed + 7919)]


def default_loop(p: Program) -> str:
    loops = p.loops()
    if not loops:
        raise SolverError("program has no loop")
    return loops[0].loop_id


def solve_program(p: Program, shape: ShapePolynomial, cfg: AisConfig | None = None,
                  loop: str | None = None) -> tuple[list[ConcreteInvariant], list[Trace]]:
    """Instantiate ``shape`` for program ``p``; returns the invariants and the held-out traces."""
    cfg = cfg or AisConfig()
    loop = loop or default_loop(p)
    held = holdout_traces(p, cfg)
    invs = instantiate(shape, trace_stream(p, cfg, cfg.seed), loop, cfg, held, param_terms(p.params))
    return invs, held


def variable_rank(p: Program) -> dict[str, int]:
    names = p.assigned_vars() + list(p.params)
    return {n: i for i, n in enumerate(names)}
