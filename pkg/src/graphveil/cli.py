"""Command line: ``graphveil {gen,run,attack,report,all,serve}``.

All subcommands share ``--seed``, ``--out``, ``--clock`` and ``--config``.
``--out`` is a work directory holding ``dataset/`` and ``run/``; the
``--dataset`` and ``--run`` flags override those locations.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from graphveil import config as cfgfile
from graphveil.costmodel import ClockMode, Simulated, WallClock
from graphveil.errors import GraphVeilError, InputError
from graphveil.experiments import (
    MODEL_KINDS, ExperimentSettings, attack, read_run, render_report, render_timing, run_sweep,
    write_attack, write_run,
)
from graphveil.service import DEFAULT_BIND, ServiceConfig, serve
from graphveil.workloads import default_class_suite, generate_dataset, load_class_suite, read_dataset, write_dataset

log = logging.getLogger("graphveil")


def _clock(name: str) -> ClockMode:
    return WallClock() if name == "wall" else Simulated()


def _settings(args: argparse.Namespace, **overrides) -> ExperimentSettings:
    return cfgfile.load(ExperimentSettings, args.config, **overrides)


def _dataset_dir(args) -> Path:
    return Path(args.dataset) if getattr(args, "dataset", None) else Path(args.out) / "dataset"


def _run_dir(args) -> Path:
    return Path(args.run) if getattr(args, "run", None) else Path(args.out) / "run"


def cmd_gen(args: argparse.Namespace) -> int:
    settings = _settings(args, samples_per_class=args.samples)
    suite = load_class_suite(args.classes) if args.classes else default_class_suite()
    samples = generate_dataset(suite, settings.samples_per_class, args.seed)
    path = write_dataset(samples, _dataset_dir(args))
    print(f"wrote {len(samples)} samples of {len(suite)} classes to {path.parent}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    settings = _settings(args)
    samples = read_dataset(_dataset_dir(args))
    runs = run_sweep(samples, settings, args.seed, _clock(args.clock))
    out = _run_dir(args)
    write_run(out, runs)
    print(f"ran {len(runs)} configurations over {len(samples)} samples into {out}")
    return 0


def cmd_attack(args: argparse.Namespace) -> int:
    models = tuple(m.strip() for m in args.models.split(",") if m.strip()) if args.models else None
    settings = _settings(args, models=models)
    run_dir = _run_dir(args)
    configs, records = read_run(run_dir)
    res = attack(records, configs, settings, args.seed)
    write_attack(run_dir, res)
    best = max(r["accuracy"] for r in res.baseline_reports.values())
    print(f"attacked {len(res.accuracy)} configurations; best baseline accuracy {100 * best:.1f}%")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = _run_dir(args)
    if not run_dir.is_dir():
        raise InputError(f"no run directory at {run_dir}")
    text = render_report(run_dir)
    (run_dir / "report.txt").write_text(text)
    print(text, end="")
    if args.timing and (run_dir / "timing.csv").exists():
        timing = render_timing(run_dir)
        (run_dir / "timing.txt").write_text(timing)
        print("\n" + timing, end="")
    return 0


def cmd_all(args: argparse.Namespace) -> int:
    for step in (cmd_gen, cmd_run, cmd_attack, cmd_report):
        step(args)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    overrides = {"bind": args.bind, "max_frame": args.max_frame, "batch_timeout_ms": args.batch_timeout_ms}
    if args.clock_given:
        overrides["clock"] = args.clock
    config = cfgfile.load(ServiceConfig, args.config, **overrides)
    print(f"serving on {config.bind}", flush=True)
    serve(config=config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="work directory (default ./out)")
    common.add_argument("--clock", choices=("sim", "wall"), default=argparse.SUPPRESS,
                        help="simulated cost model or measured time (default sim)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="key = value settings file")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="graphveil", parents=[common],
                                description="Anonymize computation graphs and measure attack accuracy.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate the synthetic dataset")
    g.add_argument("--samples", type=int, help="samples per class (default 100)")
    g.add_argument("--classes", help="class-suite JSON (default: built-in suite)")
    g.add_argument("--dataset", help="dataset directory (default OUT/dataset)")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", parents=[common], help="execute every configuration of the sweep")
    r.add_argument("--dataset", help="dataset directory (default OUT/dataset)")
    r.add_argument("--run", help="results directory (default OUT/run)")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("attack", parents=[common], help="train attack models and score each configuration")
    a.add_argument("--run", help="results directory (default OUT/run)")
    a.add_argument("--models", help=f"comma-separated subset of {','.join(MODEL_KINDS)}")
    a.set_defaults(func=cmd_attack)

    rep = sub.add_parser("report", parents=[common], help="render report.txt from a results directory")
    rep.add_argument("--run", help="results directory (default OUT/run)")
    rep.add_argument("--timing", action="store_true", help="also render the wall-clock timing table")
    rep.set_defaults(func=cmd_report)

    al = sub.add_parser("all", parents=[common], help="gen, run, attack and report in one go")
    al.add_argument("--samples", type=int)
    al.add_argument("--classes")
    al.add_argument("--dataset")
    al.add_argument("--run")
    al.add_argument("--models")
    al.add_argument("--timing", action="store_true")
    al.set_defaults(func=cmd_all)

    s = sub.add_parser("serve", parents=[common], help="run the network engine")
    s.add_argument("--bind", help=f"host:port (default {DEFAULT_BIND})")
    s.add_argument("--max-frame", type=int, help="largest accepted frame in bytes (default 64 MiB)")
    s.add_argument("--batch-timeout-ms", type=float, help="mixing batch wait (default 100)")
    s.set_defaults(func=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    args.clock_given = hasattr(args, "clock")
    for name, default in (("seed", 0), ("out", "out"), ("clock", "sim"), ("config", None), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except GraphVeilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
