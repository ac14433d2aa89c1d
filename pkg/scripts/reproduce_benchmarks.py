"""Seed sweep over the corpus: predicted shape, instantiated invariant, timings.

    python scripts/reproduce_benchmarks.py --seeds 20
    python scripts/reproduce_benchmarks.py --seeds 100 --range 1,6 --program gcd_lcm
"""

import argparse
import collections
import logging
import statistics
import time
from importlib import resources

from aisinv import AisConfig, default_pool, extract_fragments, parse, respond
from aisinv.config import parse_range
from aisinv.solver import SolverError, solve_program, variable_rank
from aisinv.synth import parse_shape, synthesize_shape

CORPUS = resources.files("aisinv") / "corpus"
# per-program input ranges small enough to keep exponent columns under the cap
RANGES = {"gcd_lcm": (1, 8), "power": (0, 5), "multiply": (1, 8)}
SHAPE_FILES = {"multiply": "multiply_shape.txt"}


def sweep(name: str, seeds: int, range_override):
    p = parse((CORPUS / f"{name}.whl").read_text())
    rank = variable_rank(p)
    shapes, invariants, iters, times = collections.Counter(), collections.Counter(), [], []
    for seed in range(seeds):
        cfg = AisConfig(seed=seed, input_range=range_override or RANGES[name])
        start = time.perf_counter()
        pool = default_pool(cfg)
        pairs = []
        for f in extract_fragments(p):
            if f.in_loop:
                t, stats, _ = respond(pool, f, cfg)
                pairs.append((f, t))
                iters.append(stats.iterations)
        shape = synthesize_shape(pairs, p.assigned_vars(), rank=rank)
        shapes[shape.text(rank)] += 1
        if name in SHAPE_FILES:
            shape = parse_shape((CORPUS / SHAPE_FILES[name]).read_text())
        try:
            invs, _ = solve_program(p, shape, cfg)
            invariants[" | ".join(i.text(rank) for i in invs)] += 1
        except SolverError as exc:
            invariants[f"{type(exc).__name__}: {exc}"] += 1
        times.append(time.perf_counter() - start)
    return shapes, invariants, iters, times


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--program", choices=sorted(RANGES), action="append")
    ap.add_argument("--range", type=parse_range, help="override every program's input range, lo,hi")
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)

    for name in args.program or sorted(RANGES):
        shapes, invariants, iters, times = sweep(name, args.seeds, args.range)
        print(f"== {name} ({args.seeds} seeds)")
        print(f"   generations per fragment: median {statistics.median(iters)}, max {max(iters)}")
        print(f"   wall time per seed: median {statistics.median(times):.3f}s, max {max(times):.3f}s")
        for text, n in shapes.most_common():
            print(f"   shape    {n:4d}x  {text}")
        for text, n in invariants.most_common():
            print(f"   solved   {n:4d}x  {text}")


if __name__ == "__main__":
    main()
