#!/usr/bin/env python3
"""Run every shipped scenario config with ``--check`` and print a summary table.

    python3 scripts/run_all.py [--out out] [--only hom-photon bell-chsh]
"""

import argparse
import contextlib
import io
import sys
import time
from pathlib import Path

from qcorr import cli

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(ROOT / "out"))
    ap.add_argument("--only", nargs="*", help="config stems to run (default: all)")
    args = ap.parse_args()

    configs = sorted((ROOT / "configs").glob("*.json"))
    if args.only:
        configs = [c for c in configs if c.stem in args.only]
    worst = 0
    for cfg in configs:
        buf = io.StringIO()
        t = time.perf_counter()
        with contextlib.redirect_stdout(buf):
            rc = cli.main(["run", str(cfg), "--check", "--out", str(Path(args.out) / cfg.stem)])
        status = {cli.EXIT_OK: "ok", cli.EXIT_CHECK: "CHECK FAILED"}.get(rc, f"error {rc}")
        print(f"{cfg.stem:<24} {status:<13} {time.perf_counter() - t:7.1f} s")
        for line in buf.getvalue().splitlines():
            if line.startswith(("PASS", "FAIL")):
                print(f"    {line}")
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    sys.exit(main())
