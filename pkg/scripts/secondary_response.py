"""Generations needed to answer an antigen, by its distance from the seed memory cell.

A fresh pool holding only ``x := x + 2`` meets each antigen once (primary
response) and then again (secondary response).
"""

import argparse
import statistics

from aisinv import AisConfig, antigenic_distance, default_pool, encode, respond
from aisinv.ais import training_fragment

ANTIGENS = [
    "x := x + 3", "t := t + 2", "x := x - 2",
    "x := x - y", "y := y - 1", "v := v + u",
    "y := y * 2", "z := x * z", "y := y / 2", "x := x * x",
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=50)
    args = ap.parse_args()

    seed_pattern = default_pool().cells[0].pattern
    print(f"{'antigen':<12} {'dist':>4} {'median':>7} {'mean':>6} {'max':>4} {'repeat':>7}")
    for src in ANTIGENS:
        f = training_fragment(src)
        primary, repeat_ok = [], 0
        for seed in range(args.seeds):
            cfg = AisConfig(seed=seed)
            pool = default_pool(cfg)
            primary.append(respond(pool, f, cfg)[1].iterations)
            _, again, _ = respond(pool, f, cfg)
            repeat_ok += again.memory_hit and again.iterations == 0
        d = antigenic_distance(seed_pattern, encode(f))
        print(f"{src:<12} {d:>4} {statistics.median(primary):>7} {statistics.mean(primary):>6.1f} "
              f"{max(primary):>4} {repeat_ok:>4}/{args.seeds}")


if __name__ == "__main__":
    main()
