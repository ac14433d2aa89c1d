"""Command-line front end: train, predict, solve, check, run, memory."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .ais import (
    BudgetExhausted, MemoryPool, OracleRejected, default_pool, parse_template, respond, train, training_fragment,
)
from .config import AisConfig, load_config, parse_range
from .interp import RunError, run, sample_inputs
from .lang import ParseError, Program, parse
from .shapespace import UnrecognizedForm, encode, extract_fragments
from .solver import (
    ConcreteInvariant, NotStabilized, ShapeInsufficient, SolverError, check_invariant, default_loop,
    solve_program, variable_rank,
)
from .synth import parse_shape, synthesize_shape

logger = logging.getLogger("aisinv")

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_BUDGET, EXIT_SHAPE, EXIT_CHECK = 0, 1, 2, 3, 4, 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_program(path) -> Program:
    return parse(Path(path).read_text(encoding="utf-8"))


def _config(args) -> AisConfig:
    overrides = {
        "seed": args.seed,
        "input_range": parse_range(args.range) if args.range else None,
        "include_constant_updates": True if getattr(args, "include_constant_updates", False) else None,
        "holdout": getattr(args, "traces", None),
    }
    return load_config(args.config, **overrides)


def _load_pool(args, cfg: AisConfig) -> MemoryPool:
    if args.memory is None:
        return default_pool(cfg)
    path = Path(args.memory)
    if not path.exists():
        logger.warning("memory file %s not found; starting from an empty pool", path)
        return MemoryPool(cfg.capacity)
    return MemoryPool.load(path, cfg.capacity)


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=False))


# --------------------------------------------------------------------------- commands


def cmd_train(args) -> int:
    cfg = _config(args)
    selector = args.fragment
    if args.program:
        frags = extract_fragments(_read_program(args.program))
        if selector.isdigit():
            f = frags[int(selector)]
        else:
            matches = [f for f in frags if str(f).replace(" ", "") == selector.replace(" ", "").rstrip(";")]
            if not matches:
                raise UsageError(f"no fragment {selector!r} in {args.program}")
            f = matches[0]
    else:
        f = training_fragment(selector)
    template = parse_template(args.template)
    path = Path(args.memory)
    pool = MemoryPool.load(path, cfg.capacity) if path.exists() else MemoryPool(cfg.capacity)
    before = pool.to_json()
    train(pool, f, template, cfg)
    if pool.to_json() != before or not path.exists():
        pool.save(path)
    print(f"trained {f} -> {template}; pool holds {len(pool)} cell(s)")
    return EXIT_OK


def _predict(p: Program, pool: MemoryPool, cfg: AisConfig):
    records, pairs, exhausted = [], [], False
    for f in extract_fragments(p):
        rec = {"fragment": str(f), "loop_path": list(f.loop_path)}
        try:
            rec["pattern"] = str(encode(f))
        except UnrecognizedForm:
            rec["pattern"] = None
        if not f.in_loop:
            rec["template"] = None
            records.append(rec)
            continue
        try:
            template, stats, _ = respond(pool, f, cfg)
        except BudgetExhausted as exc:
            logger.warning("%s", exc)
            exhausted = True
            rec.update(template=None, iterations=exc.stats.iterations, memory_hit=False, exhausted=True)
            records.append(rec)
            continue
        pairs.append((f, template))
        rec.update(template=str(template), iterations=stats.iterations, memory_hit=stats.memory_hit,
                   mutations=stats.mutations_applied, edits=stats.edits_applied)
        records.append(rec)
    if not p.loops():
        logger.warning("program has no loops; the shape is constant only")
    shape = synthesize_shape(pairs, p.assigned_vars(), cfg.include_constant_updates, variable_rank(p))
    return records, shape, exhausted


def cmd_predict(args) -> int:
    cfg = _config(args)
    p = _read_program(args.program)
    pool = _load_pool(args, cfg)
    records, shape, exhausted = _predict(p, pool, cfg)
    rank = variable_rank(p)
    if args.memory is not None:
        pool.save(args.memory)
    if args.shape_out:
        Path(args.shape_out).write_text(shape.to_json() + "\n")
    if args.json:
        _emit({"fragments": records, "shape": {"text": shape.text(rank), **shape.to_dict()}})
    else:
        for r in records:
            loops = "/".join(r["loop_path"]) or "-"
            if not r["loop_path"]:
                print(f"[{loops}] {r['fragment']}: outside every loop, no invariant")
            elif r.get("exhausted"):
                print(f"[{loops}] {r['fragment']}: budget exhausted after {r['iterations']} generations")
            else:
                print(f"[{loops}] {r['fragment']}: {r['template']}  "
                      f"(iterations={r['iterations']}, memory_hit={str(r['memory_hit']).lower()})")
        print(f"shape: {shape.text(rank)}")
        print(f"shape-json: {shape.to_json()}")
    return EXIT_BUDGET if exhausted else EXIT_OK


def cmd_solve(args) -> int:
    cfg = _config(args)
    p = _read_program(args.program)
    if not p.loops():
        raise UsageError("program has no loop to solve for")
    if args.shape:
        shape = parse_shape(Path(args.shape).read_text())
    else:
        _, shape, exhausted = _predict(p, _load_pool(args, cfg), cfg)
        if exhausted:
            logger.warning("some fragments were skipped; solving with a partial shape")
    rank = variable_rank(p)
    loop = args.loop or default_loop(p)
    invariants, held = solve_program(p, shape, cfg, loop)
    reports = [[check_invariant(inv, t, p) for t in held] for inv in invariants]
    ok = all(bool(r) for rs in reports for r in rs)
    post = [r.postcondition for rs in reports for r in rs
            if r and r.exit_condition and r.postcondition is not None]
    post_ok = all(post)
    if args.invariant_out:
        Path(args.invariant_out).write_text(
            json.dumps([inv.to_dict(rank) for inv in invariants], indent=2) + "\n")
    if args.json:
        _emit({
            "loop": loop,
            "shape": shape.text(rank),
            "invariants": [{"text": inv.text(rank), **inv.to_dict(rank)} for inv in invariants],
            "held_out": {"traces": len(held), "passed": ok},
            "postcondition": None if not post else post_ok,
        })
    else:
        print(f"loop {loop}: {len(invariants)} invariant(s)")
        for inv in invariants:
            print(f"  {inv.text(rank)}")
        print(f"held-out check: {'passed' if ok else 'FAILED'} on {len(held)} traces")
        if post:
            print(f"postcondition at exit: {'holds' if post_ok else 'VIOLATED'} "
                  f"({sum(post)}/{len(post)} exits)")
    return EXIT_OK if ok and post_ok else EXIT_CHECK


def _read_invariants(path, loop: str) -> list[ConcreteInvariant]:
    text = Path(path).read_text().strip()
    if text.startswith("["):
        return [ConcreteInvariant.from_dict({"loop": loop, **d}) for d in json.loads(text)]
    if text.startswith("{"):
        return [ConcreteInvariant.parse(text, loop)]
    return [ConcreteInvariant.parse(line, loop) for line in text.splitlines() if line.strip()]


def cmd_check(args) -> int:
    cfg = _config(args)
    p = _read_program(args.program)
    rank = variable_rank(p)
    invariants = _read_invariants(args.invariant, args.loop or default_loop(p))
    traces = [run(p, v, cfg.fuel) for v in sample_inputs(p, cfg.holdout, cfg.input_range, cfg.seed)]
    results = []
    for inv in invariants:
        reports = [check_invariant(inv, t, p) for t in traces]
        results.append({"invariant": inv.text(rank), "loop": inv.loop_id, "traces": len(traces),
                        "passed": sum(bool(r) for r in reports),
                        "postcondition": [r.postcondition for r in reports]})
    ok = all(r["passed"] == r["traces"] for r in results)
    if args.json:
        _emit({"ok": ok, "results": results})
    else:
        for r in results:
            print(f"{r['invariant']}  [{r['loop']}]: holds on {r['passed']}/{r['traces']} traces")
        print("check passed" if ok else "check FAILED")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_run(args) -> int:
    p = _read_program(args.program)
    inputs = {}
    for item in args.inputs:
        name, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"expected name=value, got {item!r}")
        inputs[name.strip()] = int(value)
    cfg = _config(args)
    trace = run(p, inputs, cfg.fuel)
    print(trace.to_json(indent=None if args.json else 2))
    return EXIT_OK


def cmd_memory(args) -> int:
    path = Path(args.file)
    pool = MemoryPool.load(path) if path.exists() else MemoryPool()
    if args.json:
        print(pool.to_json(), end="")
        return EXIT_OK
    print(f"{len(pool)} cells")
    for c in pool.cells:
        print(f"  {c.pattern}  ->  {c.template}  hits={c.hits} age={pool.clock - c.created_at}")
    return EXIT_OK


# --------------------------------------------------------------------------- wiring


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="random seed (default 42)")
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--range", help="input sampling range lo,hi")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = _Parser(prog="aisinv", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("train", parents=[common], help="store a (fragment, invariant) pair in memory")
    sp.add_argument("program", nargs="?", help="program containing the fragment (optional)")
    sp.add_argument("--fragment", required=True, help="fragment index or assignment text, e.g. 'x := x + 2'")
    sp.add_argument("--template", required=True, help="invariant template, e.g. 'x = x0 + 2*n'")
    sp.add_argument("--memory", required=True, help="memory pool JSON file")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", parents=[common], help="predict the invariant shape of a program")
    sp.add_argument("program")
    sp.add_argument("--memory", help="memory pool JSON file (updated in place)")
    sp.add_argument("--include-constant-updates", action="store_true")
    sp.add_argument("--shape-out", help="write the shape as JSON to this file")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("solve", parents=[common], help="instantiate a shape into concrete invariants")
    sp.add_argument("program")
    sp.add_argument("--shape", help="shape file (text or JSON); predicted when omitted")
    sp.add_argument("--memory", help="memory pool JSON file used for prediction")
    sp.add_argument("--include-constant-updates", action="store_true")
    sp.add_argument("--loop", help="loop id (default: first loop)")
    sp.add_argument("--traces", type=int, help="number of held-out traces")
    sp.add_argument("--invariant-out", help="write the invariants as JSON to this file")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("check", parents=[common], help="check invariants on fresh traces")
    sp.add_argument("program")
    sp.add_argument("invariant", help="invariant file (text lines or JSON)")
    sp.add_argument("--traces", type=int, help="number of traces (default 10)")
    sp.add_argument("--loop", help="loop id for text invariants (default: first loop)")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("run", parents=[common], help="execute a program and print its trace")
    sp.add_argument("program")
    sp.add_argument("inputs", nargs="*", help="name=value pairs")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("memory", parents=[common], help="list memory pool cells")
    sp.add_argument("file")
    sp.set_defaults(func=cmd_memory)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OracleRejected as exc:
        print(f"oracle rejected the training pair: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except BudgetExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ShapeInsufficient as exc:
        print(f"shape insufficient: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except NotStabilized as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (UsageError, RunError, SolverError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
