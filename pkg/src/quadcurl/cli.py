"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 geometry-assumption failure,
4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .solver import SolverError
from .study import GeometryAssumptionError, StudyConfig, run_study

EXIT_CONFIG = 2
EXIT_GEOMETRY = 3
EXIT_SOLVER = 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="quadcurl",
        description=(
            "Unfitted FEM studies for the quad-curl interface problem on "
            "[-1,1]^2: convergence ladders, condition-number scaling, or "
            "single solves for the four benchmark examples."
        ),
    )
    p.add_argument("--config", help="JSON config file; flags override its entries")
    p.add_argument("--example", type=str, default=None, help="1|2|3|4 (custom only via API)")
    p.add_argument(
        "--n",
        action="append",
        default=None,
        help="cells per side; repeat or comma-separate for a ladder",
    )
    p.add_argument("--alpha-minus", type=float, default=None)
    p.add_argument("--alpha-plus", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="interface penalty")
    p.add_argument("--mode", choices=("convergence", "condition", "single-solve"), default=None)
    p.add_argument("--format", choices=("csv", "markdown", "json"), default=None)
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--parallel", action="store_true", default=None,
                   help="run independent ladder entries concurrently")
    return p


def _parse_n_list(values) -> tuple:
    out = []
    for v in values:
        for tok in str(v).split(","):
            tok = tok.strip()
            if tok:
                out.append(int(tok))
    return tuple(out)


def config_from_args(argv=None) -> StudyConfig:
    args = build_parser().parse_args(argv)
    settings: dict = {}
    if args.config:
        with open(args.config) as f:
            settings.update(json.load(f))
    overrides = {
        "example": args.example,
        "n_list": _parse_n_list(args.n) if args.n else None,
        "alpha_minus": args.alpha_minus,
        "alpha_plus": args.alpha_plus,
        "gamma": args.gamma,
        "lam": args.lam,
        "mode": args.mode,
        "output_format": args.format,
        "output_path": args.out,
        "parallel": args.parallel,
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    if "lambda" in settings:  # accept the paper-facing key in config files
        settings["lam"] = settings.pop("lambda")
    example = settings.get("example", 1)
    if isinstance(example, str) and example.isdigit():
        example = int(example)
    if example == "custom":
        raise ValueError("custom problems are only available through the library API")
    settings["example"] = example
    if "n_list" not in settings or not settings["n_list"]:
        raise ValueError("no refinement levels given (use --n)")
    settings["n_list"] = tuple(int(v) for v in settings["n_list"])
    known = {k for k in StudyConfig.__dataclass_fields__}
    unknown = set(settings) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return StudyConfig(**settings)


def main(argv=None) -> int:
    try:
        config = config_from_args(argv)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        run_study(config)
    except GeometryAssumptionError as exc:
        print(f"geometry assumption failure: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return 0


if __name__ == "__main__":
    sys.exit(main())
