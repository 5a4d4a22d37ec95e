"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ENGINES, ConfigError, apply_overrides, build_config, read_config, validate_config
from .experiment import emit_csv, emit_metadata, emit_tau_table, run_experiment, sweep_q
from .vqs import MODES

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qubitbath", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and write result.csv")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--engine", choices=ENGINES)
    run.add_argument("--backend-mode", choices=MODES)
    run.add_argument("--trajectories", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")

    sw = sub.add_parser("sweep-q", help="run once per q and write the tau_q table")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", required=True)
    sw.add_argument("--q", help="comma-separated q values")
    sw.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")

    orc = sub.add_parser("oracle", help="exact master-equation solution only")
    orc.add_argument("--config", required=True)
    orc.add_argument("--out", required=True)
    orc.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")

    val = sub.add_parser("validate", help="check a config file")
    val.add_argument("--config", required=True)
    val.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    return p


def _overrides(args) -> list[str]:
    out = list(args.set)
    if getattr(args, "seed", None) is not None:
        out.append(f"run.master_seed={args.seed}")
    if getattr(args, "engine", None):
        out.append(f"run.engine={args.engine}")
    if getattr(args, "backend_mode", None):
        out.append(f"run.backend_mode={args.backend_mode}")
    if getattr(args, "trajectories", None) is not None:
        out.append(f"run.n_traj={args.trajectories}")
    if getattr(args, "workers", None) is not None:
        out.append(f"run.workers={args.workers}")
    if getattr(args, "q", None):
        out.append(f"relaxation.q_list={args.q}")
    if args.command == "oracle":
        out.append("run.engine=oracle")
    return out


def _load(args):
    raw = apply_overrides(read_config(args.config), _overrides(args))
    return raw, build_config(raw)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            raw = apply_overrides(read_config(args.config), _overrides(args))
            errors = validate_config(raw)
            for e in errors:
                print(e, file=sys.stderr)
            if errors:
                return EXIT_CONFIG
            print("ok")
            return EXIT_OK
        _, cfg = _load(args)
    except (ConfigError, OSError, ValueError) as exc:
        errors = exc.errors if isinstance(exc, ConfigError) else [str(exc)]
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        os.makedirs(args.out, exist_ok=True)
        if args.command in ("run", "oracle"):
            result = run_experiment(cfg, out_dir=args.out)
            name = "oracle" if args.command == "oracle" else "result"
            emit_csv(result, os.path.join(args.out, f"{name}.csv"))
            emit_metadata(result, os.path.join(args.out, f"{name}.json"))
        else:
            sweep = sweep_q(cfg)
            emit_tau_table(sweep, os.path.join(args.out, "tau_q.csv"))
            for q, res in sweep.runs.items():
                emit_csv(res, os.path.join(args.out, f"q_{q:g}.csv"))
                emit_metadata(res, os.path.join(args.out, f"q_{q:g}.json"))
            for q, msg in sweep.errors.items():
                print(f"q={q:g}: {msg}", file=sys.stderr)
            if sweep.errors:
                return EXIT_CONFIG
    except Exception as exc:  # surfaced to the shell as a runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
