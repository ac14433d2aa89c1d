"""Deterministic big-integer interpreter with loop-head snapshots."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction

from .lang import (
    And, Assign, Cmp, Cond, ExpFn, Expr, If, IntLit, Not, Odd, Or, Program, SimAssign, VarRef, While,
)

DEFAULT_FUEL = 10**6
SAMPLE_ATTEMPTS = 10_000

Valuation = dict[str, int]


class RunError(Exception):
    pass


class PreconditionError(RunError):
    pass


class EvalError(RunError):
    """Division or modulus by zero, negative exponent, unbound variable."""


class FuelExhausted(RunError):
    pass


class SamplingError(RunError):
    pass


def eval_expr(e: Expr, env, exact: bool = False):
    """Evaluate ``e``; integer semantics with floor division unless ``exact``.

    With ``exact=True`` values are Fractions and ``/`` is rational division.
    """
    if isinstance(e, IntLit):
        return Fraction(e.value) if exact else e.value
    if isinstance(e, VarRef):
        try:
            return env[e.name]
        except KeyError:
            raise EvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, ExpFn):
        base = eval_expr(e.base, env, exact)
        k = eval_expr(e.exponent, env, exact)
        if k < 0 or (exact and Fraction(k).denominator != 1):
            raise EvalError(f"exp() needs a non-negative integer exponent, got {k}")
        return base ** int(k)
    a = eval_expr(e.left, env, exact)
    b = eval_expr(e.right, env, exact)
    if e.op == "add":
        return a + b
    if e.op == "sub":
        return a - b
    if e.op == "mul":
        return a * b
    if b == 0:
        raise EvalError(f"{e.op} by zero")
    if e.op == "div":
        return Fraction(a) / b if exact else a // b
    return a % b


def eval_cond(c: Cond, env) -> bool:
    if isinstance(c, Cmp):
        a, b = eval_expr(c.left, env), eval_expr(c.right, env)
        return {
            "eq": a == b, "ne": a != b, "lt": a < b,
            "gt": a > b, "le": a <= b, "ge": a >= b,
        }[c.op]
    if isinstance(c, Odd):
        return eval_expr(c.arg, env) % 2 != 0
    if isinstance(c, Not):
        return not eval_cond(c.arg, env)
    if isinstance(c, And):
        return eval_cond(c.left, env) and eval_cond(c.right, env)
    if isinstance(c, Or):
        return eval_cond(c.left, env) or eval_cond(c.right, env)
    raise TypeError(c)


@dataclass(frozen=True)
class Trace:
    inputs: Valuation
    snapshots: tuple[tuple[str, Valuation], ...]
    exit: Valuation
    step_count: int

    def loop_snapshots(self, loop_id: str) -> list[Valuation]:
        return [v for lid, v in self.snapshots if lid == loop_id]

    def to_dict(self) -> dict:
        return {
            "inputs": self.inputs,
            "snapshots": [{"loop": lid, "vars": v} for lid, v in self.snapshots],
            "exit": self.exit,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "Trace":
        snaps = tuple((s["loop"], dict(s["vars"])) for s in d["snapshots"])
        return cls(dict(d["inputs"]), snaps, dict(d["exit"]), d.get("step_count", 0))


class _Machine:
    def __init__(self, fuel: int):
        self.fuel = fuel
        self.steps = 0
        self.snapshots: list[tuple[str, Valuation]] = []

    def tick(self):
        self.steps += 1
        if self.steps > self.fuel:
            raise FuelExhausted(f"no termination within {self.fuel} steps")

    def block(self, stmts, env):
        for s in stmts:
            self.tick()
            if isinstance(s, Assign):
                env[s.lhs] = eval_expr(s.rhs, env)
            elif isinstance(s, SimAssign):
                values = [eval_expr(e, env) for e in s.rhss]
                env.update(zip(s.lhss, values))
            elif isinstance(s, While):
                while True:
                    self.snapshots.append((s.loop_id, dict(env)))
                    if not eval_cond(s.cond, env):
                        break
                    self.block(s.body, env)
                    self.tick()
            elif isinstance(s, If):
                self.block(s.then if eval_cond(s.cond, env) else s.orelse, env)


def run(p: Program, inputs: Valuation, fuel: int = DEFAULT_FUEL) -> Trace:
    missing = [n for n in p.params if n not in inputs]
    if missing:
        raise PreconditionError(f"missing inputs for {', '.join(missing)}")
    env = {n: int(inputs[n]) for n in p.params}
    if p.pre is not None and not eval_cond(p.pre, env):
        raise PreconditionError(f"precondition fails on {env}")
    m = _Machine(fuel)
    m.block(p.body, env)
    return Trace(dict((n, env[n]) for n in p.params), tuple(m.snapshots), dict(env), m.steps)


def sample_inputs(p: Program, count: int, range_: tuple[int, int], seed: int) -> list[Valuation]:
    """Rejection-sample ``count`` valuations over the params within ``range_``."""
    lo, hi = range_
    if lo > hi:
        raise ValueError(f"empty input range [{lo}, {hi}]")
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        for _attempt in range(SAMPLE_ATTEMPTS):
            v = {n: rng.randint(lo, hi) for n in p.params}
            if p.pre is None or eval_cond(p.pre, v):
                out.append(v)
                break
        else:
            raise SamplingError(
                f"precondition unsatisfied after {SAMPLE_ATTEMPTS} attempts in range [{lo}, {hi}]"
            )
    return out
