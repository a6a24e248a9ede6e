"""
Command-line surface
Subcommands stereo, segment, gen, compare and bench.
"""
from __future__ import annotations

import argparse
import re
from pathlib import Path
from typing import Callable

from pydantic import ValidationError

from liftedmap import __version__
from liftedmap.core.exceptions import ConfigError
from liftedmap.harness.compare import compare_traces
from liftedmap.harness.runner import bench, run
from liftedmap.harness.synthetic import generate
from liftedmap.schemas.run import DEGENERATE, RunConfig, ScheduleEntry
from liftedmap.solvers.trace import AnytimeTrace

MODES = ("flat", "static", "c2f", "threshold")
_SCHEDULE_TOKEN = re.compile(r"\s*(?:CP\(\s*(\d+)\s*,\s*(\d+)\s*\)|(\d+)\s*:\s*(\d+)|(degenerate))\s*(?:[,;]|$)")


def parse_schedule(text: str) -> list[ScheduleEntry]:
    """
    Parse "1:1,2:1,3:1", "CP(1,1),CP(2,1)" or "degenerate" entries

    Raises:
        ConfigError: On anything else
    """
    entries: list[ScheduleEntry] = []
    position = 0
    text = text.strip()
    while position < len(text):
        match = _SCHEDULE_TOKEN.match(text, position)
        if match is None or match.end() == position:
            raise ConfigError(f"Cannot parse schedule {text!r} at position {position}")
        cp_l, cp_i, n_l, n_iter, degenerate = match.groups()
        if degenerate:
            entries.append(DEGENERATE)
        elif cp_l is not None:
            entries.append((int(cp_l), int(cp_i)))
        else:
            entries.append((int(n_l), int(n_iter)))
        position = match.end()
    return entries


def _common_run_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=MODES, default="c2f")
    parser.add_argument("--schedule", type=parse_schedule, default=[], help='e.g. "1:1,2:1,3:1" or "degenerate"')
    parser.add_argument("--threshold", type=float, help="Fixed unary-distance threshold for --mode threshold")
    parser.add_argument("--k", type=int, help="Consecutive non-improving attempts before refining")
    parser.add_argument("--count-unit", choices=("move", "cycle"), default="move")
    parser.add_argument("--budget", type=float, help="Global wall-clock budget in seconds")
    parser.add_argument("--solver", choices=("expansion", "icm"), default="expansion")
    parser.add_argument("--out", type=Path, default=Path("out"))
    parser.add_argument("--trace", action="store_true", help="Write trace.csv")
    parser.add_argument("--debug-partitions", action="store_true", help="Write per-level partition diagnostics")
    parser.add_argument("--seed", type=int, default=0)


def _stereo_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--left", type=Path, required=True)
    parser.add_argument("--right", type=Path, required=True)
    parser.add_argument("--truth", type=Path, help="Ground-truth disparity PGM (raw disparities)")
    parser.add_argument("--max-disp", type=int, default=85, help="Number of disparity labels")


def _segment_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--image", type=Path, required=True)
    parser.add_argument("--seeds", type=Path, required=True, help="PGM: label per seeded pixel, 255 elsewhere")
    parser.add_argument("--labels", type=int, default=2)
    parser.add_argument("--groups-bins", type=int, default=4)
    parser.add_argument("--cell", type=int, default=16)


def config_from_args(args: argparse.Namespace, task: str, **overrides) -> RunConfig:
    """
    Build a RunConfig from parsed arguments

    Raises:
        ConfigError: If the combination is invalid
    """
    fields = dict(
        task=task,
        mode=args.mode,
        schedule=args.schedule,
        threshold=args.threshold,
        k=args.k,
        count_unit=args.count_unit,
        budget=args.budget,
        solver=args.solver,
        out=args.out,
        write_trace=args.trace,
        debug_partitions=args.debug_partitions,
        seed=args.seed,
    )
    if task == "stereo":
        fields.update(left=args.left, right=args.right, truth=args.truth, max_disparity=args.max_disp)
    else:
        fields.update(image=args.image, seeds=args.seeds, labels=args.labels, groups_bins=args.groups_bins, cell=args.cell)
    fields.update(overrides)
    try:
        return RunConfig(**fields)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _print(entries: dict) -> None:
    for key, value in entries.items():
        print(f"{key}={value}")


def cmd_run(args: argparse.Namespace) -> int:
    result = run(config_from_args(args, args.command))
    _print({"final_energy": repr(result.final_energy), "out": result.config.out})
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    for path in generate(args.kind, args.size, args.seed, args.out, labels=args.labels):
        print(path)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    summary = compare_traces(
        AnytimeTrace.read_csv(args.a),
        AnytimeTrace.read_csv(args.b),
        points=args.points,
        kind="random" if args.random_grid else "log",
        seed=args.seed,
        within_percent=args.within,
    )
    if args.out is not None:
        summary.write_csv(args.out)
    _print(summary.as_dict())
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    modes = [mode.strip() for mode in args.modes.split(",") if mode.strip()]
    unknown = [mode for mode in modes if mode not in MODES]
    if unknown:
        raise ConfigError(f"Unknown bench modes: {', '.join(unknown)}")
    configs = [config_from_args(args, args.task, mode=mode, out=args.out / mode) for mode in modes]
    for result in bench(configs, args.out, parallel=args.parallel):
        print(f"{result.config.mode}={result.final_energy!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="liftedmap", description="Coarse-to-fine lifted MAP inference")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    stereo = sub.add_parser("stereo", help="Disparity estimation on a rectified pair")
    _stereo_args(stereo)
    _common_run_args(stereo)
    stereo.set_defaults(handler=cmd_run)

    segment = sub.add_parser("segment", help="Seeded cooperative-cut segmentation")
    _segment_args(segment)
    _common_run_args(segment)
    segment.set_defaults(handler=cmd_run)

    gen = sub.add_parser("gen", help="Write a synthetic instance")
    gen.add_argument("--kind", choices=("stereo", "segment"), required=True)
    gen.add_argument("--size", type=int, default=64)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--labels", type=int, help="Disparities (stereo) or segments (segment)")
    gen.add_argument("--out", type=Path, required=True)
    gen.set_defaults(handler=cmd_gen)

    compare = sub.add_parser("compare", help="Anytime dominance of trace a over trace b")
    compare.add_argument("--a", type=Path, required=True)
    compare.add_argument("--b", type=Path, required=True)
    compare.add_argument("--out", type=Path, help="CSV of the sampled curves")
    compare.add_argument("--points", type=int)
    compare.add_argument("--random-grid", action="store_true", help="Seeded uniform sampling instead of log-spaced")
    compare.add_argument("--seed", type=int, default=0)
    compare.add_argument("--within", type=float, default=1.0, help="Percent for time-to-within")
    compare.set_defaults(handler=cmd_compare)

    bench_parser = sub.add_parser("bench", help="Several modes on the same inputs")
    bench_parser.add_argument("--task", choices=("stereo", "segment"), required=True)
    bench_parser.add_argument("--modes", default="flat,c2f", help="Comma-separated modes")
    bench_parser.add_argument("--parallel", action="store_true", help="Run in parallel; final energies only")
    for name in ("--left", "--right", "--truth", "--image", "--seeds"):
        bench_parser.add_argument(name, type=Path)
    bench_parser.add_argument("--max-disp", type=int, default=85)
    bench_parser.add_argument("--labels", type=int, default=2)
    bench_parser.add_argument("--groups-bins", type=int, default=4)
    bench_parser.add_argument("--cell", type=int, default=16)
    _common_run_args(bench_parser)
    bench_parser.set_defaults(handler=cmd_bench)
    return parser


def dispatch(argv: list[str]) -> int:
    args = build_parser().parse_args(argv)
    handler: Callable[[argparse.Namespace], int] = args.handler
    return handler(args)
