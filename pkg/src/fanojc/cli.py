"""Command-line interface: named pipelines plus the Lorentzian fit utility.

Each subcommand reads a key=value config file, applies ``--set`` overrides,
and writes ``<out>.csv`` with a ``<out>.manifest.json`` beside it.  Outputs
are byte-deterministic for a fixed config.  ``--check`` runs the convergence
gate and consistency assertions without writing; ``--strict`` turns an
unconverged gate into a nonzero exit.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, apply_overrides, parse_config, serialize_config
from .fitting import FitError, fit_lorentzian_constant
from .pipelines import PIPELINES, SweepResult, run_pipeline

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_UNCONVERGED = 3

_COMMANDS = ("ladder", "spectrum", "power", "g2tau", "bundling", "detuning", "fit")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fanojc",
        description="Driven Jaynes-Cummings photon statistics with self-homodyne "
        "output; writes CSV datasets plus JSON manifests.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} pipeline")
        p.add_argument("--config", required=True, help="key=value config file")
        p.add_argument("--out", default=None, help="output base path (no suffix)")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key (repeatable)",
        )
        p.add_argument(
            "--strict",
            action="store_true",
            help="exit nonzero when the convergence gate fails",
        )
        p.add_argument(
            "--check",
            action="store_true",
            help="run the convergence gate and invariant checks only; write nothing",
        )
        p.add_argument(
            "--workers", type=int, default=1, help="parallel sweep workers"
        )
    return parser


def _load_config(path: str, overrides):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    cfg = parse_config(text)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg


def _out_base(args, cfg) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.out:
        return Path(cfg.out)
    return Path(args.config).with_suffix("")


def _check_result(result: SweepResult) -> list[str]:
    """Internal consistency assertions for --check; returns failure messages."""
    failures = []
    manifest = result.manifest
    if manifest["row_count"] != result.rows.shape[0]:
        failures.append("manifest row_count disagrees with the table")
    if list(result.columns) != manifest["columns"]:
        failures.append("manifest columns disagree with the table")
    conv = manifest["convergence"]
    if conv["enabled"] and not conv["converged"]:
        failures.append(
            f"convergence gate failed: drift {conv['max_relative_drift']:.3e} "
            f">= {conv['tolerance']:.1e}"
        )
    if manifest["errors"]:
        failures.append(f"{len(manifest['errors'])} sweep point(s) failed")
    axis = result.rows[:, 0]
    if np.any(~np.isfinite(axis)):
        failures.append("sweep axis contains non-finite values")
    return failures


def _run_fit(args, cfg) -> int:
    if not cfg.input:
        print("fit: config key 'input' (data file) is required", file=sys.stderr)
        return EXIT_ERROR
    try:
        raw = Path(cfg.input).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"fit: cannot read input {cfg.input!r}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    lines = [ln for ln in raw.splitlines() if ln.strip()]
    if lines and not lines[0].split(",")[0].strip().lstrip("+-").replace(".", "", 1)[:1].isdigit():
        lines = lines[1:]  # header row
    try:
        data = np.array(
            [[float(part) for part in ln.split(",")[:2]] for ln in lines]
        )
        x, y = data[:, 0], data[:, 1]
    except (ValueError, IndexError) as exc:
        print(f"fit: input is not two-column numeric CSV: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        fit = fit_lorentzian_constant(x, y)
    except (ValueError, FitError) as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_ERROR

    columns = (
        "amplitude",
        "center",
        "width",
        "offset",
        "amplitude_err",
        "center_err",
        "width_err",
        "offset_err",
        "residual_norm",
    )
    row = [getattr(fit, c) for c in columns]
    result = SweepResult(
        columns=columns,
        rows=np.array([row], dtype=float),
        manifest={
            "pipeline": "fit",
            "engine_version": __version__,
            "config": {"input": cfg.input},
            "config_sha256": hashlib.sha256(
                serialize_config(cfg).encode()
            ).hexdigest(),
            "resolved": {
                "model": "offset + amplitude*(w/2)^2/((x-center)^2+(w/2)^2)",
                "points": int(len(x)),
            },
            "columns": list(columns),
            "row_count": 1,
            "convergence": {"enabled": False, "tolerance": None,
                            "n_max": None, "n_max_check": None,
                            "max_relative_drift": None, "converged": None},
            "errors": [],
        },
    )
    if args.check:
        print("fit check: ok")
        return EXIT_OK
    csv_path, manifest_path = result.write(_out_base(args, cfg))
    print(f"wrote {csv_path} and {manifest_path}")
    return EXIT_OK


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    try:
        cfg = _load_config(args.config, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    if args.command == "fit":
        return _run_fit(args, cfg)

    if args.check:
        cfg = apply_overrides(cfg, ["convergence_gate=true"])
    try:
        result = run_pipeline(args.command, cfg, workers=max(1, args.workers))
    except (ValueError, RuntimeError) as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return EXIT_ERROR

    conv = result.manifest["convergence"]
    if args.check:
        failures = _check_result(result)
        drift = conv["max_relative_drift"]
        print(
            f"{args.command} check: rows={result.rows.shape[0]} "
            f"columns={len(result.columns)} "
            f"gate_drift={'n/a' if drift is None else f'{drift:.3e}'}"
        )
        for message in failures:
            print(f"FAIL: {message}")
        if failures:
            return EXIT_ERROR
        print("all checks passed")
        return EXIT_OK

    try:
        csv_path, manifest_path = result.write(_out_base(args, cfg))
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"wrote {csv_path} and {manifest_path}")
    if conv["enabled"] and not conv["converged"]:
        print(
            f"warning: convergence gate failed "
            f"(drift {conv['max_relative_drift']:.3e})",
            file=sys.stderr,
        )
        if args.strict:
            return EXIT_UNCONVERGED
    return EXIT_OK


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
