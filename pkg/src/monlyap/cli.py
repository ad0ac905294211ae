"""Command line front end: one subcommand per experiment kind.

Option precedence: built-in defaults < --config JSON < explicit flags.
Exit codes: 0 success, 1 simulation error (partial artifacts retained and
marked in the manifest), 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .harness import ConfigError, ExperimentConfig, run_experiment

_KIND_BY_COMMAND = {
    "gap": "gap",
    "spectrum": "spectrum",
    "entropy": "entropy",
    "mutual-info": "mutual_info",
    "memory-loss": "memory_loss",
    "purification": "purification",
    "fit": "fit",
    "pauli-weights": "pauli_weights",
    "oracle-check": "oracle_check",
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, action="append", dest="seeds",
                        help="trajectory seed (repeatable)")
    parser.add_argument("--threads", type=int, help="worker pool size")
    parser.add_argument("--eta", type=float, action="append",
                        help="measurement strength (repeatable)")
    parser.add_argument("--L", type=int, action="append", dest="L",
                        help="chain length (repeatable)")
    parser.add_argument("--measurement-only", action="store_true",
                        default=None, help="disable the unitary layers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Monitored qubit-chain experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gap", help="Lyapunov gap estimate per (eta, L, seed)")
    _add_common(p)
    p.add_argument("--b", help="block length (integer or 'auto')")
    p.add_argument("--c", type=int, help="convergence window in blocks")
    p.add_argument("--d", type=float, help="convergence threshold")
    p.add_argument("--max-blocks", type=int, dest="max_blocks")
    p.add_argument("--n-tracked", type=int, dest="n_tracked")

    p = sub.add_parser("spectrum", help="full Lyapunov spectrum (L <= 10)")
    _add_common(p)
    p.add_argument("--b", help="block length (integer or 'auto')")
    p.add_argument("--num-blocks", type=int, dest="num_blocks")

    p = sub.add_parser("entropy", help="entanglement entropy series")
    _add_common(p)
    p.add_argument("--T", type=int, dest="T", help="recorded steps")
    p.add_argument("--tau-cap", type=int, dest="tau_cap")
    p.add_argument("--delta", type=float)
    p.add_argument("--cut", help="comma-separated subsystem sites")

    p = sub.add_parser("mutual-info", help="end-to-end mutual information")
    _add_common(p)
    p.add_argument("--T", type=int, dest="T")
    p.add_argument("--tau-cap", type=int, dest="tau_cap")
    p.add_argument("--delta", type=float)

    p = sub.add_parser("memory-loss", help="replayed <X>_t traces")
    _add_common(p)
    p.add_argument("--num-initial-states", type=int, dest="num_initial_states")
    p.add_argument("--t-max", type=int, dest="t_max")
    p.add_argument("--band", type=float)
    p.add_argument("--delta", type=float)

    p = sub.add_parser("purification", help="mixed-state purification gap")
    _add_common(p)
    p.add_argument("--trajectories", type=int)
    p.add_argument("--window", help="start,end window in steps")

    p = sub.add_parser("fit", help="thermodynamic-limit gap extrapolation")
    _add_common(p)
    p.add_argument("--inputs", dest="fit_inputs",
                   help="directory containing gap_*.json artifacts")
    p.add_argument("--d", type=float, help="relative weight factor")
    p.add_argument("--sweep-resolution", type=int, dest="sweep_resolution")

    p = sub.add_parser("pauli-weights", help="Pauli-string weight profile")
    _add_common(p)
    p.add_argument("--b", help="block length (integer or 'auto')")
    p.add_argument("--num-blocks", type=int, dest="num_blocks")
    p.add_argument("--window-hams", type=int, dest="window_hams")

    p = sub.add_parser("oracle-check", help="closed-form measurement-only gaps")
    _add_common(p)
    return parser


def _merge_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict = {}
    if args.config:
        import json
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    raw["kind"] = _KIND_BY_COMMAND[args.command]
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config") and v is not None}
    if "cut" in overrides and isinstance(overrides["cut"], str):
        overrides["cut"] = [int(s) for s in overrides["cut"].split(",")]
    if "window" in overrides and isinstance(overrides["window"], str):
        overrides["window"] = [int(s) for s in overrides["window"].split(",")]
    if "b" in overrides and overrides["b"] != "auto":
        overrides["b"] = int(overrides["b"])
    raw.update(overrides)
    return ExperimentConfig.from_dict(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _merge_config(args)
        config.validate()
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    result = run_experiment(config)
    if result.status != "ok":
        print(f"simulation error: {result.error}", file=sys.stderr)
        print(f"partial artifacts retained under {result.out_dir}",
              file=sys.stderr)
        return 1
    print(f"wrote {len(result.artifacts)} artifacts to {result.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
