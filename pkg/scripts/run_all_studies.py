"""Run every study with its reference settings and write one CSV per study.

    python scripts/run_all_studies.py --outdir results --workers 4
"""

import argparse
import sys
from pathlib import Path

from moranlab.cli import run

STUDIES = {
    "approx_e2": ["approx", "--n", "10,40,160,640", "--f", "poly:0,0,1"],
    "approx_abs": ["approx", "--n", "10,40,160,640", "--f", "abs:0.5"],
    "approx_sin": ["approx", "--n", "10,40,160,640", "--f", "sin:1"],
    "kelisky_e2_n20": ["kelisky", "--n", "20", "--variant", "standard", "--f", "poly:0,0,1", "--kmax", "10000000", "--tol", "1e-8"],
    "kelisky_abs_n20": ["kelisky", "--n", "20", "--variant", "standard", "--f", "abs:0.5", "--kmax", "10000000", "--tol", "1e-8"],
    "voronovskaya_x4": ["voronovskaya", "--n", "5,10,20,40,80", "--f", "poly:0,0,0,0,1"],
    "semigroup_t025": ["semigroup", "--n", "10,20,40,80", "--f", "poly:0,0,1", "--t", "0.25"],
    "semigroup_t1": ["semigroup", "--n", "10,20,40,80", "--f", "poly:0,0,1", "--t", "1.0"],
    "tightness_m1": ["tightness", "--n", "50", "--variant", "standard", "--m", "1", "--samples", "10000"],
    "tightness_m2": ["tightness", "--n", "50", "--variant", "standard", "--m", "2", "--samples", "10000"],
    "absorption": ["absorption", "--n", "20,50,100", "--variant", "standard", "--samples", "10000"],
}


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--outdir", default="results")
    parser.add_argument("--seed", type=int, default=20240601)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--plots", action="store_true", help="write gnuplot scripts as well")
    args = parser.parse_args()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    failed = []
    for name, argv in STUDIES.items():
        extra = ["--seed", str(args.seed), "--workers", str(args.workers), "--out", str(outdir / f"{name}.csv")]
        if args.plots:
            extra.append("--emit-plot")
        print(f"[{name}] ", end="", flush=True)
        if run(argv + extra) != 0:
            failed.append(name)
    if failed:
        print("studies with a failing verdict: " + ", ".join(failed))
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
