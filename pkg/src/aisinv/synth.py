"""Combine per-fragment invariant templates into an invariant-shape polynomial.

The iteration counter of each template is replaced by every program variable
in turn and the resulting generalized monomials are collected; the shape is
``sum_i c_i * m_i + c_0 = 0`` with the coefficients left symbolic.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Union

from .ais import ADDITIVE, DOUBLE_EXP, MULTIPLICATIVE, InvariantTemplate
from .shapespace import Fragment

logger = logging.getLogger(__name__)


class ExponentCapExceeded(ArithmeticError):
    pass


class UnboundIdentifier(KeyError):
    pass


# --------------------------------------------------------------------------- factors


@dataclass(frozen=True)
class VarPow:
    var: str
    power: int = 1

    kind_rank = 0

    def ids(self):
        return (self.var,)

    def render(self) -> str:
        return self.var if self.power == 1 else f"{self.var}^{self.power}"

    def evaluate(self, env, cap):
        return _lookup(env, self.var) ** self.power


@dataclass(frozen=True)
class VarExpVar:
    """base ** exponent, both program identifiers."""

    base: str
    exponent: str

    kind_rank = 1

    def ids(self):
        return (self.base, self.exponent)

    def render(self) -> str:
        return f"exp({self.base},{self.exponent})"

    def evaluate(self, env, cap):
        return _lookup(env, self.base) ** _exponent(_lookup(env, self.exponent), cap)


@dataclass(frozen=True)
class VarExpExp:
    """base ** (inner_base ** inner_exp)."""

    base: str
    inner_base: int
    inner_exp: str

    kind_rank = 2

    def ids(self):
        return (self.base, self.inner_exp)

    def render(self) -> str:
        return f"exp({self.base},exp({self.inner_base},{self.inner_exp}))"

    def evaluate(self, env, cap):
        inner = self.inner_base ** _exponent(_lookup(env, self.inner_exp), cap)
        return _lookup(env, self.base) ** _exponent(inner, cap)


@dataclass(frozen=True)
class ConstExpVar:
    base: Fraction
    exponent: str

    kind_rank = 3

    def ids(self):
        return (self.exponent,)

    def render(self) -> str:
        return f"exp({self.base},{self.exponent})"

    def evaluate(self, env, cap):
        return self.base ** _exponent(_lookup(env, self.exponent), cap)


Factor = Union[VarPow, VarExpVar, VarExpExp, ConstExpVar]


def _lookup(env, name):
    try:
        return env[name]
    except KeyError:
        raise UnboundIdentifier(name) from None


def _exponent(k, cap):
    if k != int(k) or k < 0:
        raise ExponentCapExceeded(f"exponent {k} is not a non-negative integer")
    if cap is not None and k > cap:
        raise ExponentCapExceeded(f"exponent {k} exceeds cap {cap}")
    return int(k)


def _factor_key(f: Factor):
    return (f.kind_rank, tuple(str(x) for x in _fields(f)))


def _fields(f: Factor):
    return tuple(getattr(f, name) for name in f.__dataclass_fields__)


@dataclass(frozen=True)
class Monomial:
    """Product of factors in canonical order; the empty product is the constant 1."""

    factors: tuple[Factor, ...] = ()

    @classmethod
    def of(cls, *factors: Factor) -> "Monomial":
        powers: dict[str, int] = {}
        rest = []
        for f in factors:
            if isinstance(f, VarPow):
                powers[f.var] = powers.get(f.var, 0) + f.power
            else:
                rest.append(f)
        merged = [VarPow(v, k) for v, k in powers.items()] + rest
        return cls(tuple(sorted(merged, key=_factor_key)))

    def __mul__(self, other: "Monomial") -> "Monomial":
        return Monomial.of(*self.factors, *other.factors)

    @property
    def is_constant(self) -> bool:
        return not self.factors

    def degree(self) -> int:
        return sum(f.power if isinstance(f, VarPow) else 1 for f in self.factors)

    def ids(self) -> set[str]:
        return {i for f in self.factors for i in f.ids()}

    def render(self, rank: dict[str, int] | None = None) -> str:
        if not self.factors:
            return "1"
        rank = rank or {}
        ordered = sorted(self.factors, key=lambda f: (f.kind_rank, [rank.get(i, len(rank)) for i in f.ids()],
                                                      _factor_key(f)))
        return "*".join(f.render() for f in ordered)

    def __str__(self):
        return self.render()

    def sort_key(self, rank: dict[str, int] | None = None):
        rank = rank or {}
        inner = sorted((f.kind_rank, [rank.get(i, len(rank)) for i in f.ids()], _factor_key(f))
                       for f in self.factors)
        return (not self.factors, self.degree(), inner)

    def evaluate(self, env, cap: int | None = 64):
        value = Fraction(1)
        for f in self.factors:
            value *= f.evaluate(env, cap)
        return value

    def to_list(self) -> list[dict]:
        out = []
        for f in self.factors:
            d = {"factor": type(f).__name__}
            for name in f.__dataclass_fields__:
                v = getattr(f, name)
                d[name] = str(v) if isinstance(v, Fraction) else v
            out.append(d)
        return out

    @classmethod
    def from_list(cls, data: list[dict]) -> "Monomial":
        kinds = {k.__name__: k for k in (VarPow, VarExpVar, VarExpExp, ConstExpVar)}
        factors = []
        for d in data:
            d = dict(d)
            k = kinds[d.pop("factor")]
            if k is ConstExpVar:
                d["base"] = Fraction(d["base"])
            factors.append(k(**d))
        return cls.of(*factors)


ONE = Monomial()


def var(name: str, power: int = 1) -> Monomial:
    return Monomial.of(VarPow(name, power))


# --------------------------------------------------------------------------- shape


_LETTERS = [c for c in "ABCDEFGHJKLMNPQRSTUVWXYZ"]


def coefficient_names(count: int) -> list[str]:
    if count <= len(_LETTERS):
        return _LETTERS[:count]
    return [f"C{i}" for i in range(1, count + 1)]


@dataclass(frozen=True)
class ShapePolynomial:
    monomials: tuple[Monomial, ...]
    includes_constant: bool = True

    def monomial_set(self) -> frozenset[Monomial]:
        return frozenset(self.monomials)

    def sorted(self, rank: dict[str, int] | None = None) -> "ShapePolynomial":
        return ShapePolynomial(tuple(sorted(self.monomials, key=lambda m: m.sort_key(rank))),
                               self.includes_constant)

    def __len__(self):
        return len(self.monomials) + int(self.includes_constant)

    def text(self, rank: dict[str, int] | None = None) -> str:
        """Coefficient-named rendering: ``A*x + B*v + ... + Q = 0``."""
        names = coefficient_names(len(self))
        terms = [f"{c}*{m.render(rank)}" for c, m in zip(names, self.monomials)]
        if self.includes_constant:
            terms.append(names[-1])
        return (" + ".join(terms) or "0") + " = 0"

    def to_dict(self) -> dict:
        return {"monomials": [m.to_list() for m in self.monomials], "includes_constant": self.includes_constant}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "ShapePolynomial":
        return cls(tuple(Monomial.from_list(m) for m in d["monomials"]), bool(d.get("includes_constant", True)))


def fragment_monomials(f: Fragment, t: InvariantTemplate, vars: Iterable[str],
                       include_constant_updates: bool = False) -> set[Monomial]:
    """Monomials contributed by one fragment once ``n`` ranges over ``vars``."""
    vars = list(vars)
    lhs = var(t.lhs)
    if t.kind == DOUBLE_EXP:
        return {Monomial.of(VarExpExp(t.lhs, 2, v)) for v in vars}
    if isinstance(t.term, str):
        if t.kind == ADDITIVE:
            return {lhs} | {var(t.term) * var(v) for v in vars}
        if t.kind == MULTIPLICATIVE:
            return {lhs * Monomial.of(VarExpVar(t.term, v)) for v in vars}
    if not include_constant_updates or t.term is None:
        logger.debug("skipping constant-update fragment %s", f)
        return set()
    if t.kind == ADDITIVE:
        # c*v is v up to the symbolic coefficient
        return {lhs} | {var(v) for v in vars}
    if t.kind == MULTIPLICATIVE:
        return {lhs * Monomial.of(ConstExpVar(Fraction(t.term), v)) for v in vars}
    logger.warning("unsupported template %s for %s", t, f)
    return set()


def synthesize_shape(pairs: Iterable[tuple[Fragment, InvariantTemplate]], vars: Iterable[str],
                     include_constant_updates: bool = False,
                     rank: dict[str, int] | None = None) -> ShapePolynomial:
    vars = list(vars)
    if rank is None:
        rank = {v: i for i, v in enumerate(vars)}
    found: set[Monomial] = set()
    for f, t in pairs:
        found |= fragment_monomials(f, t, vars, include_constant_updates)
    if not found:
        logger.warning("no fragment contributed a monomial; shape is constant only")
    return ShapePolynomial(tuple(found), True).sorted(rank)


# --------------------------------------------------------------------------- text form

_POLY_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_]\w*)|(.))")


def _tokens(text: str) -> list[str]:
    out = []
    for num, ident, other in _POLY_TOKEN.findall(text):
        tok = num or ident or other
        if tok.strip():
            out.append(tok)
    return out


class _PolyParser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise ValueError(f"cannot parse {self.text!r}: expected {expected or 'more input'}, found {tok}")
        self.i += 1
        return tok

    def number(self) -> Fraction:
        neg = False
        if self.peek() == "-":
            self.take()
            neg = True
        value = Fraction(int(self.take()))
        if self.peek() == "/":
            self.take()
            value /= int(self.take())
        return -value if neg else value

    def exp_arg(self):
        tok = self.peek()
        if tok == "(":
            self.take()
            value = self.number()
            self.take(")")
            return value
        if tok is not None and (tok[0].isdigit() or tok == "-"):
            return self.number()
        if tok == "exp":
            self.take()
            self.take("(")
            base = self.number()
            self.take(",")
            exponent = self.take()
            self.take(")")
            return ("exp", int(base), exponent)
        return self.take()

    def factor(self):
        """Returns a Fraction coefficient, a Factor, or an identifier string (maybe with power)."""
        tok = self.peek()
        if tok == "(":
            self.take()
            value = self.number()
            self.take(")")
            return value
        if tok is not None and tok[0].isdigit():
            return self.number()
        if tok == "exp":
            self.take()
            self.take("(")
            base = self.exp_arg()
            self.take(",")
            exponent = self.exp_arg()
            self.take(")")
            if isinstance(exponent, tuple):
                return VarExpExp(base, exponent[1], exponent[2])
            if isinstance(base, Fraction):
                return ConstExpVar(base, exponent)
            return VarExpVar(base, exponent)
        name = self.take()
        if not re.match(r"[A-Za-z_]", name):
            raise ValueError(f"cannot parse {self.text!r}: unexpected {name!r}")
        if self.peek() == "^":
            self.take()
            nxt = self.peek()
            if nxt is not None and nxt[0].isdigit():
                return VarPow(name, int(self.take()))
            return VarExpVar(name, self.take())
        return VarPow(name)

    def terms(self):
        """List of (sign, [factors]) up to an optional ``= 0``."""
        out = []
        sign = 1
        if self.peek() in ("+", "-"):
            sign = -1 if self.take() == "-" else 1
        while True:
            factors = [self.factor()]
            while self.peek() in ("*", "."):
                self.take()
                factors.append(self.factor())
            out.append((sign, factors))
            if self.peek() in ("+", "-"):
                sign = -1 if self.take() == "-" else 1
                continue
            break
        if self.peek() == "=":
            self.take()
            if self.number() != 0:
                raise ValueError(f"cannot parse {self.text!r}: right-hand side must be 0")
        if self.peek() is not None:
            raise ValueError(f"cannot parse {self.text!r}: trailing {self.peek()!r}")
        return out


def parse_monomial(text: str) -> Monomial:
    terms = _PolyParser(text).terms()
    if len(terms) != 1 or terms[0][0] != 1:
        raise ValueError(f"not a single monomial: {text!r}")
    factors = terms[0][1]
    if factors == [Fraction(1)]:
        return ONE
    if any(isinstance(f, Fraction) for f in factors):
        raise ValueError(f"monomial labels carry no numeric factor: {text!r}")
    return Monomial.of(*factors)


def parse_linear_form(text: str) -> list[tuple[Fraction, Monomial]]:
    """``x*u + y*v - a*b = 0`` -> [(1, xu), (1, yv), (-1, ab)]."""
    out = []
    for sign, factors in _PolyParser(text).terms():
        coef = Fraction(sign)
        rest = []
        for f in factors:
            if isinstance(f, Fraction):
                coef *= f
            else:
                rest.append(f)
        out.append((coef, Monomial.of(*rest)))
    return out


def parse_shape(text: str) -> ShapePolynomial:
    """Read a shape from JSON or coefficient-named text (first factor of each term is its coefficient)."""
    stripped = text.strip()
    if stripped.startswith("{"):
        return ShapePolynomial.from_dict(json.loads(stripped))
    monomials: list[Monomial] = []
    has_const = False
    for _sign, factors in _PolyParser(stripped).terms():
        head, rest = factors[0], factors[1:]
        if not (isinstance(head, VarPow) and head.power == 1):
            raise ValueError(f"shape term must start with a coefficient name: {text!r}")
        m = Monomial.of(*rest)
        if m.is_constant:
            has_const = True
        elif m not in monomials:
            monomials.append(m)
    return ShapePolynomial(tuple(monomials), has_const)
