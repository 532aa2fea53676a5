#!/usr/bin/env python3
"""Desk-scale reference run.

Trains the full method and its three ablations with the standard desk
preset, prints every measured number, and writes ``reference_run.json``
at the repository root.  The committed file is the oracle the acceptance
suite compares against: the reconstruction threshold is set to twice the
reference run's final value to leave room for platform-level numeric
drift, while the directional ratios are recomputed from scratch by the
suite itself.
"""

import argparse
import json
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from styleinv.desk import desk_experiment, run_protocol  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=None,
                        help="output JSON path (default: repo root)")
    args = parser.parse_args()

    t0 = time.time()
    results = run_protocol(desk_experiment())
    results["recon_threshold"] = 2.0 * results["full_recon"]
    results["wall_seconds"] = round(time.time() - t0, 1)

    out = pathlib.Path(args.out) if args.out else \
        pathlib.Path(__file__).resolve().parents[1] / "reference_run.json"
    out.write_text(json.dumps(results, indent=2) + "\n")
    for key, value in results.items():
        print(f"{key}={value}")
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
