"""Clonal-selection engine that answers fragments with closed-form invariants.

Antibodies pair a shape-space pattern with an invariant template. A memory
pool of them is consulted first; on a miss the best-matching cells are cloned
and hypermutated until some clone's template survives the fragment oracle,
with receptor editing as the escape hatch when the search stalls.
"""

from __future__ import annotations

import json
import logging
import math
import random
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Union

from .config import AisConfig
from .interp import EvalError, eval_expr
from .lang import expr_vars, parse_assignment
from .shapespace import Fragment, ShapeVector, UnrecognizedForm, antigenic_distance, encode

logger = logging.getLogger(__name__)

ADDITIVE, MULTIPLICATIVE, DOUBLE_EXP = "additive", "multiplicative", "double_exp"
KINDS = (ADDITIVE, MULTIPLICATIVE, DOUBLE_EXP)

Term = Union[str, Fraction, None]

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


def _term_text(t: Term) -> str:
    if isinstance(t, Fraction) and t.denominator != 1:
        return f"({t})"
    return str(t)


@dataclass(frozen=True)
class InvariantTemplate:
    """Closed form of one assignment iterated ``n`` times.

    additive        x_n = x_0 + sign * term * n
    multiplicative  x_n = x_0 * term^n
    double_exp      x_n = exp(x_0, exp(2, n))
    """

    kind: str
    lhs: str
    sign: int = 1
    term: Term = None

    def value(self, x0, env, n: int):
        t = self.term
        if t is None and self.kind != DOUBLE_EXP:
            raise EvalError("template has no term")
        if isinstance(t, str):
            if t == self.lhs:
                raise EvalError("template term is the updated variable itself")
            t = env[t]
        if self.kind == ADDITIVE:
            return x0 + self.sign * t * n
        if self.kind == MULTIPLICATIVE:
            return x0 * t**n
        return x0 ** (2**n)

    @property
    def term_kind(self) -> str:
        if self.term is None:
            return "none"
        return "var" if isinstance(self.term, str) else "const"

    def slots(self) -> tuple:
        op = {ADDITIVE: "+" if self.sign > 0 else "-", MULTIPLICATIVE: "*", DOUBLE_EXP: "^2"}[self.kind]
        return (self.kind, op, self.term_kind, self.term, self.lhs)

    def __str__(self):
        x = self.lhs
        if self.kind == ADDITIVE:
            return f"{x} = {x}0 {'+' if self.sign > 0 else '-'} {_term_text(self.term)}*n"
        if self.kind == MULTIPLICATIVE:
            return f"{x} = {x}0 * {_term_text(self.term)}^n"
        return f"{x} = exp({x}0, exp(2, n))"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lhs": self.lhs, "sign": "+" if self.sign > 0 else "-",
                "term": _term_to_json(self.term)}

    @classmethod
    def from_dict(cls, d: dict) -> "InvariantTemplate":
        return cls(d["kind"], d["lhs"], 1 if d.get("sign", "+") == "+" else -1, _term_from_json(d.get("term")))


def _term_to_json(t: Term):
    if isinstance(t, Fraction):
        return t.numerator if t.denominator == 1 else str(t)
    return t


def _term_from_json(t) -> Term:
    if t is None:
        return None
    if isinstance(t, int):
        return Fraction(t)
    if isinstance(t, str) and _IDENT.match(t):
        return t
    return Fraction(t)


_NUM = r"-?\d+(?:/\d+)?"
_TERM = rf"(?:\(\s*{_NUM}\s*\)|{_NUM}|[A-Za-z_]\w*)"


def parse_template(text: str) -> InvariantTemplate:
    """Read ``x = x0 + 2*n``, ``z = z0 * x^n`` or ``x = exp(x0, exp(2, n))``."""
    s = " ".join(text.split())
    m = re.fullmatch(r"(\w+) = (\w+)0 ?([+-]) ?(?:(" + _TERM + r") ?\*? ?)?n", s)
    if m and m.group(1) == m.group(2):
        return InvariantTemplate(ADDITIVE, m.group(1), 1 if m.group(3) == "+" else -1,
                                 _parse_term(m.group(4) or "1"))
    m = re.fullmatch(r"(\w+) = (\w+)0 ?\* ?(" + _TERM + r") ?\^ ?n", s)
    if m and m.group(1) == m.group(2):
        return InvariantTemplate(MULTIPLICATIVE, m.group(1), 1, _parse_term(m.group(3)))
    m = re.fullmatch(r"(\w+) = exp\( ?(\w+)0 ?, ?exp\( ?2 ?, ?n ?\) ?\)", s)
    if m and m.group(1) == m.group(2):
        return InvariantTemplate(DOUBLE_EXP, m.group(1))
    raise ValueError(f"unrecognised invariant template {text!r}")


def _parse_term(t: str) -> Term:
    t = t.strip().strip("()").strip()
    return t if _IDENT.match(t) else Fraction(t)


# --------------------------------------------------------------------------- oracle


@dataclass(frozen=True)
class OracleFailure:
    n: int
    start: dict
    reason: str

    def __str__(self):
        vals = ", ".join(f"{k}={v}" for k, v in sorted(self.start.items()))
        return f"fails at n={self.n} from {{{vals}}}: {self.reason}"


ORACLE_VALUE_RANGE = (-9, 9)
_RESAMPLE = 50


def oracle_counterexample(f: Fragment, t: InvariantTemplate, trials: int = 20, horizon: int = 12,
                          seed: int = 0) -> OracleFailure | None:
    """First disagreement between iterating ``f`` and the template's closed form, if any."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if t.lhs != f.lhs:
        return OracleFailure(0, {}, f"template updates {t.lhs}, fragment updates {f.lhs}")
    names = sorted(expr_vars(f.rhs) | {f.lhs} | ({t.term} if isinstance(t.term, str) else set()))
    rng = random.Random(seed)
    lo, hi = ORACLE_VALUE_RANGE
    for _ in range(trials):
        for _attempt in range(_RESAMPLE):
            env = {v: Fraction(rng.randint(lo, hi)) for v in names}
            try:
                seq = [env[f.lhs]]
                cur = dict(env)
                for _n in range(horizon):
                    cur[f.lhs] = eval_expr(f.rhs, cur, exact=True)
                    seq.append(cur[f.lhs])
            except EvalError:
                continue  # a frozen zero divisor: not a meaningful start
            break
        else:
            return OracleFailure(0, env, "no start state avoids evaluation errors")
        x0 = seq[0]
        for n, actual in enumerate(seq):
            try:
                expected = t.value(x0, env, n)
            except (EvalError, ZeroDivisionError) as exc:
                return OracleFailure(n, env, str(exc))
            if expected != actual:
                return OracleFailure(n, env, f"closed form gives {expected}, iteration gives {actual}")
    return None


def fragment_oracle(f: Fragment, t: InvariantTemplate, trials: int = 20, horizon: int = 12,
                    seed: int = 0) -> bool:
    return oracle_counterexample(f, t, trials, horizon, seed) is None


# --------------------------------------------------------------------------- antibodies & memory


@dataclass
class Antibody:
    pattern: ShapeVector
    template: InvariantTemplate
    hits: int = 0
    created_at: int = 0

    def to_dict(self) -> dict:
        return {"pattern": self.pattern.to_dict(), "template": self.template.to_dict(),
                "hits": self.hits, "created_at": self.created_at}

    @classmethod
    def from_dict(cls, d: dict) -> "Antibody":
        return cls(ShapeVector.from_dict(d["pattern"]), InvariantTemplate.from_dict(d["template"]),
                   d.get("hits", 0), d.get("created_at", 0))


@dataclass
class MemoryPool:
    capacity: int = 64
    cells: list[Antibody] = field(default_factory=list)
    clock: int = 0

    def __len__(self):
        return len(self.cells)

    def find(self, pattern: ShapeVector) -> Antibody | None:
        return next((c for c in self.cells if c.pattern == pattern), None)

    def tick(self) -> int:
        self.clock += 1
        return self.clock

    def insert(self, ab: Antibody) -> None:
        existing = self.find(ab.pattern)
        if existing is not None:
            existing.template = ab.template
            return
        if len(self.cells) >= self.capacity:
            victim = min(self.cells, key=lambda c: (c.hits, c.created_at))
            self.cells.remove(victim)
            logger.debug("evicted %s", victim.pattern)
        self.cells.append(ab)

    def to_json(self) -> str:
        return json.dumps([c.to_dict() for c in self.cells], indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str, capacity: int = 64) -> "MemoryPool":
        data = json.loads(text) if text.strip() else []
        cells = [Antibody.from_dict(d) for d in data]
        pool = cls(capacity, [], max((c.created_at for c in cells), default=0))
        for c in cells:
            pool.insert(c)
        return pool

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path, capacity: int = 64) -> "MemoryPool":
        return cls.from_json(Path(path).read_text(), capacity)


def affinity(ab: Antibody, ag: ShapeVector) -> Fraction:
    return Fraction(1, 1 + antigenic_distance(ab.pattern, ag))


class OracleRejected(ValueError):
    def __init__(self, fragment, template, failure: OracleFailure):
        super().__init__(f"{template} is not an invariant of {fragment}: {failure}")
        self.failure = failure


def train(pool: MemoryPool, f: Fragment, t: InvariantTemplate, cfg: AisConfig | None = None) -> MemoryPool:
    cfg = cfg or AisConfig()
    failure = oracle_counterexample(f, t, cfg.oracle_trials, cfg.oracle_horizon, cfg.seed)
    if failure is not None:
        raise OracleRejected(f, t, failure)
    pattern = encode(f)
    if pool.find(pattern) is None:
        pool.insert(Antibody(pattern, t, 0, pool.tick()))
    return pool


def training_fragment(source: str = "x := x + 2") -> Fragment:
    s = parse_assignment(source)
    return Fragment(s.lhs, s.rhs, ("train",), s.span, tuple(sorted(expr_vars(s.rhs) | {s.lhs})))


def default_pool(cfg: AisConfig | None = None) -> MemoryPool:
    """A pool holding only the seed pair ``x := x + 2`` / ``x = x0 + 2*n``."""
    cfg = cfg or AisConfig()
    pool = MemoryPool(cfg.capacity)
    return train(pool, training_fragment(), InvariantTemplate(ADDITIVE, "x", 1, Fraction(2)), cfg)


# --------------------------------------------------------------------------- mutation


def _template_term_for(op: str, term_kind: str, term_id) -> Term:
    if term_kind == "var":
        return term_id
    if term_kind == "self" or term_id is None:
        return None
    c = Fraction(term_id)
    if op == "div":
        return 1 / c if c else None
    return c


def _applicable(ab: Antibody, scope: tuple[str, ...]) -> list[str]:
    p = ab.pattern
    others = [v for v in scope if v != p.lhs_id]
    ops = []
    if [v for v in others if v != p.term_id]:
        ops.append("rename")
    if p.op in ("add", "sub") or (p.op in ("mul", "div") and p.term_kind == "const"):
        ops.append("flip")
    if p.op == "none" or p.term_kind == "self":
        return ops
    if p.term_kind == "var":
        if [v for v in others if v != p.term_id]:
            ops.append("swap_var")
        if p.op != "div":
            ops.append("to_const")
    else:
        ops.append("perturb")
        if p.op != "div" and others:
            ops.append("to_var")
    return ops


def _mutate_once(ab: Antibody, rng: random.Random, scope: tuple[str, ...]) -> Antibody:
    p, t = ab.pattern, ab.template
    ops = _applicable(ab, scope)
    if not ops:
        return ab
    op = rng.choice(ops)
    others = [v for v in scope if v != p.lhs_id]
    if op == "rename":
        new = rng.choice([v for v in others if v != p.term_id])
        return replace(ab, pattern=replace(p, lhs_id=new), template=replace(t, lhs=new))
    if op == "flip":
        new_op = {"add": "sub", "sub": "add", "mul": "div", "div": "mul"}[p.op]
        if t.kind == ADDITIVE:
            t = replace(t, sign=-t.sign)
        elif t.kind == MULTIPLICATIVE and isinstance(t.term, Fraction) and t.term:
            t = replace(t, term=1 / t.term)
        return replace(ab, pattern=replace(p, op=new_op), template=t)
    if op == "swap_var":
        new = rng.choice([v for v in others if v != p.term_id])
        pattern = replace(p, term_id=new)
    elif op == "to_var":
        pattern = replace(p, term_kind="var", term_id=rng.choice(others))
    elif op == "to_const":
        pattern = replace(p, term_kind="const", term_id=rng.choice((1, 2, 3)))
    else:  # perturb
        c = p.term_id + rng.choice((-1, 1))
        if c == 0 and p.op == "div":
            c = p.term_id + (1 if p.term_id > 0 else -1)
        pattern = replace(p, term_id=c)
    if t.kind != DOUBLE_EXP:
        t = replace(t, term=_template_term_for(pattern.op, pattern.term_kind, pattern.term_id))
    return replace(ab, pattern=pattern, template=t)


def _mutate(ab: Antibody, rng: random.Random, rate: float, scope: tuple[str, ...]) -> tuple[Antibody, int]:
    k = max(1, sum(rng.random() < rate for _ in range(len(ab.pattern.slots()))))
    child = replace(ab, hits=0)
    for _ in range(k):
        child = _mutate_once(child, rng, scope)
    return child, k


def hypermutate(ab: Antibody, rng: random.Random, rate: float,
                scope: tuple[str, ...] | None = None) -> Antibody:
    """Copy of ``ab`` with one or more paired pattern/template mutations.

    The number of mutations is the count of slots that fire with probability
    ``rate``, but never less than one.
    """
    if not 0 < rate <= 1:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    if scope is None:
        p = ab.pattern
        scope = tuple(v for v in (p.lhs_id, p.term_id) if isinstance(v, str))
    return _mutate(ab, rng, rate, tuple(scope))[0]


_KINDS_FOR_FORM = {
    "additive": (ADDITIVE,),
    "multiplicative": (MULTIPLICATIVE,),
    "self_product": (DOUBLE_EXP, MULTIPLICATIVE),
    "other": KINDS,
}


def receptor_edit(ab: Antibody, ag: ShapeVector, rng: random.Random) -> Antibody:
    """Jump straight to the antigen's pattern with a freshly drawn template kind."""
    kinds = _KINDS_FOR_FORM[ag.form]
    if ab.pattern == ag and len(kinds) > 1:
        # the current kind already failed on this exact pattern
        kinds = tuple(k for k in kinds if k != ab.template.kind) or kinds
    kind = rng.choice(kinds)
    sign = -1 if ag.op == "sub" else 1
    if kind == DOUBLE_EXP:
        t = InvariantTemplate(DOUBLE_EXP, ag.lhs_id)
    else:
        term = ag.lhs_id if ag.term_kind == "self" else _template_term_for(ag.op, ag.term_kind, ag.term_id)
        t = InvariantTemplate(kind, ag.lhs_id, sign if kind == ADDITIVE else 1, term)
    return Antibody(ag, t, 0, ab.created_at)


# --------------------------------------------------------------------------- response


@dataclass
class ResponseStats:
    iterations: int = 0
    mutations_applied: int = 0
    edits_applied: int = 0
    memory_hit: bool = False
    seed_pattern: ShapeVector | None = None


class BudgetExhausted(RuntimeError):
    def __init__(self, fragment: Fragment, stats: ResponseStats):
        super().__init__(f"no invariant for {fragment} within {stats.iterations} generations")
        self.stats = stats


def _antigen(f: Fragment) -> ShapeVector:
    try:
        return encode(f)
    except UnrecognizedForm:
        return ShapeVector(f.lhs, "none", "const", None, "other")


def respond(pool: MemoryPool, f: Fragment, cfg: AisConfig | None = None):
    """Present fragment ``f`` to the pool.

    Returns ``(template, stats, pool)``; the pool is updated in place with the
    learned antibody. Raises BudgetExhausted when no clone passes the oracle
    within ``cfg.max_generations``.
    """
    cfg = cfg or AisConfig()
    if not f.loop_path:
        raise ValueError(f"{f} is outside every loop and has no invariant")
    ag = _antigen(f)
    rng = random.Random(cfg.seed)
    verdicts: dict[InvariantTemplate, bool] = {}

    def passes(t: InvariantTemplate) -> bool:
        if t not in verdicts:
            verdicts[t] = fragment_oracle(f, t, cfg.oracle_trials, cfg.oracle_horizon, cfg.seed)
        return verdicts[t]

    stats = ResponseStats()
    hit = pool.find(ag)
    if hit is not None and passes(hit.template):
        hit.hits += 1
        stats.memory_hit = True
        stats.seed_pattern = hit.pattern
        return hit.template, stats, pool

    scope = tuple(dict.fromkeys(f.scope + tuple(sorted(expr_vars(f.rhs) | {f.lhs}))))
    ranked = sorted(pool.cells, key=lambda c: (-affinity(c, ag), -c.created_at))
    # (candidate, pool cell it descends from)
    population: list[tuple[Antibody, Antibody | None]] = [(c, c) for c in ranked[:cfg.select]]
    if not population:
        seed_ab = Antibody(ShapeVector(f.lhs, "none", "const", None, "other"), InvariantTemplate(ADDITIVE, f.lhs))
        population = [(receptor_edit(seed_ab, ag, rng), None)]
        stats.edits_applied += 1
    stats.seed_pattern = population[0][0].pattern

    def learn(winner: Antibody, root: Antibody | None):
        if root is not None:
            root.hits += 1
        pool.insert(Antibody(ag, winner.template, 0, pool.tick()))
        return winner.template, stats, pool

    if stats.edits_applied and passes(population[0][0].template):
        return learn(*population[0])

    best = affinity(population[0][0], ag)
    stall = 0
    for gen in range(1, cfg.max_generations + 1):
        stats.iterations = gen
        clones = []
        for rank, (cell, root) in enumerate(population):
            aff = affinity(cell, ag)
            n_clones = math.ceil(cfg.clone_factor * aff / (rank + 1))
            rate = cfg.base_rate * (1 - float(aff))
            for _ in range(n_clones):
                child, k = _mutate(cell, rng, rate, scope)
                stats.mutations_applied += k
                clones.append((child, root))
        for child, root in clones:
            if passes(child.template):
                return learn(child, root)

        merged, seen = [], set()
        for cand in population + clones:
            key = (cand[0].pattern, cand[0].template)
            if key not in seen:
                seen.add(key)
                merged.append(cand)
        merged.sort(key=lambda c: -affinity(c[0], ag))
        population = merged[:cfg.select]

        top = affinity(population[0][0], ag)
        if top > best:
            best, stall = top, 0
        else:
            stall += 1
        if stall >= cfg.stall:
            edited = receptor_edit(population[0][0], ag, rng)
            stats.edits_applied += 1
            stall = 0
            if passes(edited.template):
                return learn(edited, population[0][1])
            population = [(edited, population[0][1])] + population[:cfg.select - 1]
            best = affinity(edited, ag)

    raise BudgetExhausted(f, stats)
