"""Command-line entry point: ``icsim run | validate | sweep | dump-trace``.

Exit codes: 0 when every invariant held, 2 on an invariant violation, 1 on a
usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .adversaries import AdversaryConfigError
from .config import ConfigError, load_config, with_param
from .experiment import InvariantViolation, run_experiment, run_trial

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VIOLATION = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with 2, which we reserve
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="icsim", description="Noise-resilient multiparty interactive coding simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run the configured trials")
    run.add_argument("--config", required=True)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--out", help="output directory (default: the config's 'output')")

    val = sub.add_parser("validate", help="check a config file and exit")
    val.add_argument("--config", required=True)

    sweep = sub.add_parser("sweep", help="run the trials once per value of one parameter")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--param", required=True, help="dotted config field, e.g. epsilon or adversary.params.count")
    sweep.add_argument("--values", required=True, nargs="+")
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--out")

    dump = sub.add_parser("dump-trace", help="write the per-round channel trace of one trial")
    dump.add_argument("--config", required=True)
    dump.add_argument("--seed", type=int, help="trial seed (default: the config's base_seed)")
    dump.add_argument("--out", help="file to write (default: stdout)")
    return parser


def _print_violation(exc: InvariantViolation) -> None:
    print(f"invariant violation: {exc}", file=sys.stderr)
    if exc.snapshot is not None:
        print(json.dumps(exc.snapshot, sort_keys=True), file=sys.stderr)


def _summary_line(agg: dict) -> str:
    return (
        f"variant {agg['variant']} eps={agg['epsilon']} adversary={agg['adversary']}: "
        f"success {agg['correct_trials']}/{agg['trials']}, mean CC {agg['cc']['mean']:.0f} "
        f"({agg['cc_overhead_mean']:.1f}x protocol), mean Err {agg['err']['mean']:.1f}, "
        f"violations {agg['invariant_violations']}"
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: ok (variant {cfg.variant}, {cfg.trials} trial(s))")
            return EXIT_OK
        if args.command == "run":
            if args.jobs < 1:
                raise ConfigError("--jobs must be at least 1")
            agg = run_experiment(cfg, jobs=args.jobs, out=args.out)
            print(_summary_line(agg))
            return EXIT_OK if agg["invariant_violations"] == 0 else EXIT_VIOLATION
        if args.command == "sweep":
            base_out = Path(args.out) if args.out else (Path(cfg.output) if cfg.output else None)
            points = []
            for raw in args.values:
                value = _parse_value(raw)
                point_cfg = with_param(cfg, args.param, value)
                out = base_out / f"{args.param}={raw}" if base_out is not None else None
                agg = run_experiment(point_cfg, jobs=args.jobs, out=out)
                print(_summary_line(agg))
                points.append({"param": args.param, "value": value, "aggregate": agg})
            if base_out is not None:
                base_out.mkdir(parents=True, exist_ok=True)
                (base_out / "sweep.json").write_text(json.dumps(points, sort_keys=True, indent=1))
            return EXIT_OK
        if args.command == "dump-trace":
            seed = cfg.base_seed if args.seed is None else args.seed
            rep = run_trial(cfg, seed, record_trace=True)
            if args.out:
                Path(args.out).write_text(rep.trace)
            else:
                try:
                    sys.stdout.write(rep.trace)
                    sys.stdout.flush()
                except BrokenPipeError:  # e.g. piped into head
                    sys.stderr.close()
            return EXIT_OK if not rep.violations else EXIT_VIOLATION
    except (ConfigError, AdversaryConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        _print_violation(exc)
        return EXIT_VIOLATION
    return EXIT_CONFIG  # pragma: no cover - argparse requires a command


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
