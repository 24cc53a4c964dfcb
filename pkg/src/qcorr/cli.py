"""Command line entry point: ``qcorr run`` and ``qcorr analyze``.

Exit codes: 0 success, 2 configuration or input error, 3 runtime error
(partial outputs removed), 4 a ``--check`` assertion failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import shutil
import sys
import tempfile
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__, correlator
from .core import ValidationError, read_events
from .scenarios import SCENARIOS, Check, ConfigError, parse_config, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_CHECK = 4

log = logging.getLogger("qcorr")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def versions() -> dict:
    return {
        "qcorr": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "python": platform.python_version(),
    }


def build_manifest(config, files: dict) -> bytes:
    canon = json.dumps(config.canonical(), sort_keys=True, separators=(",", ":")).encode()
    doc = {
        "scenario": config.scenario,
        "config_sha256": _sha256(canon),
        "config": config.canonical(),
        "seed": config.rng.seed,
        "stream_id": config.rng.stream_id,
        "versions": versions(),
        "outputs": {name: _sha256(data) for name, data in sorted(files.items())},
    }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode()


def _publish(staging: Path, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for f in sorted(staging.iterdir()):
        shutil.move(str(f), out / f.name)


def cmd_run(args) -> int:
    try:
        doc = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON in {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = parse_config(doc, seed=args.seed, output_dir=args.out)
    except (ConfigError, ValidationError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(config.output_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".qcorr-", dir=out.parent))
    try:
        log.info("running %s (seed %d)", config.scenario, config.rng.seed)
        try:
            files, checks = run(config)
        except ValidationError as exc:
            # parameters that pass the schema but violate a physical constraint
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except Exception as exc:  # noqa: BLE001 - any failure aborts the run cleanly
            print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        if args.check:
            files["checks.json"] = (json.dumps([c.as_dict() for c in checks], indent=2, sort_keys=True) + "\n").encode()
        for name, data in files.items():
            (staging / name).write_bytes(data)
        (staging / "manifest.json").write_bytes(build_manifest(config, files))
        _publish(staging, out)
    finally:
        shutil.rmtree(staging, ignore_errors=True)

    if args.check:
        return _report(checks)
    print(f"wrote {len(files) + 1} files to {out}")
    return EXIT_OK


def _report(checks: list[Check]) -> int:
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK


def parse_bins(text: str) -> tuple[float, ...]:
    """``lo:hi:n`` for n equal bins, or a comma-separated list of edges."""
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            return tuple(np.linspace(float(lo), float(hi), n + 1))
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad bin specification {text!r}; use lo:hi:n or e0,e1,...") from None


def parse_gate(text: str) -> tuple[str, float]:
    try:
        axis, width = text.split("=")
        return axis.strip(), float(width)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad gate {text!r}; use axis=width, e.g. dt=1.0") from None


def cmd_analyze(args) -> int:
    try:
        shots = read_events(args.events)
        binning = correlator.BinningSpec(args.axis, args.bins, dict(args.gate or []))
    except FileNotFoundError:
        print(f"error: events file not found: {args.events}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        curve = correlator.g2_from_events(shots, binning, args.norm)
        verdict = correlator.classicality_check(curve)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.events).stem
    (out / f"{stem}_g2.csv").write_text(curve.to_csv())
    (out / f"{stem}_verdict.json").write_text(verdict.to_json() + "\n")
    print(f"{verdict.verdict}: wrote {stem}_g2.csv and {stem}_verdict.json to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcorr", description="Simulate and analyze particle correlation experiments.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario from a JSON config")
    r.add_argument("config", help=f"config file; scenarios: {', '.join(SCENARIOS)}")
    r.add_argument("--check", action="store_true", help="evaluate acceptance assertions (exit 4 on failure)")
    r.add_argument("--out", help="output directory (overrides the config)")
    r.add_argument("--seed", type=int, help="master seed (overrides the config)")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="compute g2 from an events CSV")
    a.add_argument("events")
    a.add_argument("--axis", choices=("dx", "dy", "dt", "r"), required=True)
    a.add_argument("--bins", type=parse_bins, required=True, help="lo:hi:n or comma-separated edges")
    a.add_argument("--norm", choices=("mixed", "singles"), default="mixed")
    a.add_argument("--gate", type=parse_gate, action="append", help="coincidence gate axis=width (repeatable)")
    a.add_argument("--out", default=".", help="output directory")
    a.set_defaults(func=cmd_analyze)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
