"""Command-line entry point: ``morse-maslov run`` and ``morse-maslov list``."""

import argparse
import sys

from threadpoolctl import threadpool_limits

from .exceptions import ConfigError
from .experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    emit_report,
    resolve_out_dir,
    run_experiment,
)

_DESCRIPTIONS = {
    "verify-dirichlet": "Mor(L_G) = -Mas(Sigma2) = conjugate-point count (Dirichlet)",
    "verify-neumann": "Mor(L_G) = -Mas(Sigma2) + Mor(-B) + Mor(Q0 V(0) Q0)",
    "verify-robin-scalar": "scalar Robin index formula",
    "loop-zero": "Maslov index over the closed loop is 0 (both methods)",
    "dtn-diagnostics": "DtN/NtD symmetry, inverse relation, frame agreement, isotropy",
    "asymptotics": "small-tau eigenvalue expansion and Morse decomposition",
}


def build_parser():
    p = argparse.ArgumentParser(prog="morse-maslov", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", required=True, help="JSON configuration file")
    run.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
    sub.add_parser("list", help="list experiments")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in EXPERIMENTS:
            print(f"{name:22s} {_DESCRIPTIONS[name]}")
        return 0
    try:
        cfg = ExperimentConfig.from_file(args.config)
        if args.seed is not None:
            cfg = cfg.with_overrides(seed=args.seed)
        out_dir = resolve_out_dir(args.out, cfg)
        with threadpool_limits(limits=args.threads):
            report = run_experiment(cfg, args.experiment)
        paths = emit_report(report, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    for rec in report.identities:
        mark = "PASS" if rec["equal"] else "FAIL"
        print(f"[{mark}] {rec['name']}: {rec['lhs']} vs {rec['rhs']}")
    for err in report.errors:
        print(f"[ERROR] {err}")
    print(f"{'PASS' if report.passed else 'FAIL'} {report.experiment} "
          f"({report.timing.get('seconds', 0)} s) -> {paths[0] if paths else out_dir}")
    return 0 if report.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
