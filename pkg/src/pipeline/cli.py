"""Command line: `solve` (oracle only), `evolve` (full pipeline), `sweep` (several K)."""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from src.utils.config import load_config_file, setup_logging
from .evolve import top_outcomes
from .graph_generator import PRESET_NAMES
from .report import (
    PipelineStageError,
    RunConfig,
    RunSummary,
    execute,
    optimum_for,
    run_sweep,
)

logger = logging.getLogger(__name__)

# Config-file / flag spellings that differ from RunConfig field names
ALIASES = {"graph": "graph_path", "edges": "graph_text", "mixer": "mixer_scale"}

RUN_FIELDS = set(RunConfig.model_fields)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectral-flow",
        description="Digitized adiabatic MaxCut runs with unitary spectral-flow diagnostics.",
    )
    parser.add_argument("--log-level", default="INFO", help="Logging level (default INFO).")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("solve", "Brute-force MaxCut optimum and degeneracy only."),
        ("evolve", "Full pipeline for one step count."),
        ("sweep", "Full pipeline for several step counts."),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", type=Path, help="key = value file; flags override it.")
        source = cmd.add_mutually_exclusive_group()
        source.add_argument("--graph", type=Path, help="Edge-list file.")
        source.add_argument("--edges", help="Inline edge list, lines separated by '\\n'.")
        source.add_argument("--preset", choices=PRESET_NAMES, help="Built-in instance.")
        cmd.add_argument("--preset-seed", type=int)
        if name == "solve":
            continue
        cmd.add_argument("--k", type=int, help="Trotter step count K.")
        cmd.add_argument("--t", type=float, help="Total evolution time T.")
        cmd.add_argument("--mixer-scale", type=float, help="Mixer rotation scale.")
        cmd.add_argument("--stride", type=int, help="Record a snapshot every stride steps.")
        cmd.add_argument("--out", type=Path, help="Output directory.")
        cmd.add_argument("--shots", type=int, help="Also sample this many shots.")
        cmd.add_argument("--seed", type=int, help="Seed for shot sampling.")
        cmd.add_argument("--workers", type=int, help="Concurrent workers.")
        cmd.add_argument("--assignment", choices=["optimal", "greedy"])
        cmd.add_argument("--max-qubits", type=int)
        cmd.add_argument("--check-refinement", action="store_true", default=None,
                         help="Also track at half the snapshot stride and compare permutations.")
        if name == "sweep":
            cmd.add_argument("--sweep", help="Comma-separated K values, e.g. 160,240,500.")
    return parser


def _normalize(values: Dict[str, object]) -> Dict[str, object]:
    normalized = {}
    for key, value in values.items():
        key = ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
        if key not in RUN_FIELDS:
            raise ValueError(f"Unknown configuration key {key!r}")
        normalized[key] = value
    return normalized


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults < config file < command-line flags."""
    merged = _normalize(load_config_file(getattr(args, "config", None)))
    flags = {k: v for k, v in vars(args).items()
             if v is not None and k not in ("command", "config", "log_level")}
    flags = _normalize(flags)
    if any(k in flags for k in ("graph_path", "graph_text", "preset")):
        for key in ("graph_path", "graph_text", "preset"):
            merged.pop(key, None)
    merged.update(flags)
    return RunConfig.model_validate(merged)


def print_summary(summary: RunSummary) -> None:
    print(f"\nRun summary (n={summary.n}, |E|={summary.num_edges}, K={summary.k}):")
    print("-" * 40)
    print(f"C*: {summary.c_star}   degeneracy: {summary.degeneracy}")
    print(f"P_succ: {summary.p_succ:.4f}")
    print(f"median Δθ_min: {summary.median_dtheta_min:.4g}   max Δθ_min: {summary.max_dtheta_min:.4g}")
    print(f"nontrivial cycles: {summary.nontrivial_cycle_count} "
          f"(min tracking overlap {summary.min_tracking_confidence:.3f})")


def print_table(summaries: List[RunSummary]) -> None:
    print(f"\n{'K':>6} {'C*':>4} {'deg':>4} {'P_succ':>8} {'median':>11} {'max':>11} {'cycles':>7}")
    print("-" * 56)
    for s in summaries:
        print(f"{s.k:>6} {s.c_star:>4} {s.degeneracy:>4} {s.p_succ:>8.4f} "
              f"{s.median_dtheta_min:>11.4g} {s.max_dtheta_min:>11.4g} {s.nontrivial_cycle_count:>7}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        try:
            cfg = resolve_config(args)
        except (ValueError, ValidationError, FileNotFoundError) as e:
            raise PipelineStageError("config", str(e)) from e

        if args.command == "solve":
            g, oracle = optimum_for(cfg)
            print(f"\nMaxCut optimum for {g.describe()}:")
            print("-" * 40)
            print(f"C*: {oracle.c_star}   degeneracy: {oracle.degeneracy}")
            for z in oracle.optimal_set:
                print(f"  {z}")
        elif args.command == "evolve":
            artifacts = execute(cfg)
            print_summary(artifacts.summary)
            print("\nTop outcomes:")
            for item in top_outcomes(artifacts.distribution, artifacts.oracle):
                marker = "*" if item["is_optimal"] else " "
                print(f" {marker} {item['bitstring']}  {item['probability']:.4f}")
            if artifacts.refinement is not None:
                verdict = "agrees" if artifacts.refinement.agree else "DIFFERS"
                print(f"\nRefined tracking {verdict} with the reported permutation")
            print(f"\nOutputs written to {cfg.out}")
        else:
            if not cfg.sweep:
                raise PipelineStageError("config", "sweep needs --sweep K1,K2,...")
            print_table(run_sweep(cfg))
            print(f"\nSweep outputs written to {cfg.out}")
    except PipelineStageError as e:
        logger.error("%s", e)
        print(f"Error {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
