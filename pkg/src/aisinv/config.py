"""Run configuration shared by the engine, the solver and the CLI."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class AisConfig:
    seed: int = 42
    capacity: int = 64
    clone_factor: int = 8
    base_rate: float = 0.3
    max_generations: int = 500
    stall: int = 10
    select: int = 3
    oracle_trials: int = 20
    oracle_horizon: int = 12
    include_constant_updates: bool = False
    trace_batch: int = 5
    max_traces: int = 100
    holdout: int = 10
    input_range: tuple[int, int] = (1, 8)
    exponent_cap: int = 64
    fuel: int = 10**6

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name in ("seed", "include_constant_updates", "input_range"):
                continue
            if v <= 0:
                raise ValueError(f"{f.name} must be positive, got {v}")
        if not 0 < self.base_rate <= 1:
            raise ValueError(f"base_rate must lie in (0, 1], got {self.base_rate}")
        lo, hi = self.input_range
        if lo > hi:
            raise ValueError(f"input_range is empty: {self.input_range}")

    def replace(self, **changes) -> "AisConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


def parse_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.strip().strip("[]").partition(",")
    return int(lo), int(hi)


def _coerce(name: str, raw: str):
    kind = {f.name: f.type for f in dataclasses.fields(AisConfig)}.get(name)
    if kind is None:
        raise ValueError(f"unknown config key {name!r}")
    if name == "input_range":
        return parse_range(raw)
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: expected a boolean, got {raw!r}")
    if kind == "float":
        return float(raw)
    return int(raw)


def load_config(path: str | Path | None, **overrides) -> AisConfig:
    """Read a flat ``key = value`` file; keyword overrides win over the file."""
    values = {}
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, raw = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            values[key.strip()] = _coerce(key.strip(), raw.strip())
    values.update({k: v for k, v in overrides.items() if v is not None})
    return AisConfig(**values)
