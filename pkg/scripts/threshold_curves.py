#!/usr/bin/env python3
"""Emit the closed-form curves (cascade margin f, exponent multipliers a and
b, exact unhappy probability) over a tau grid, one CSV per curve."""

import argparse
from pathlib import Path

import numpy as np

from segsim.theory import curve, tau2


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tau-from", type=float, default=None)
    ap.add_argument("--tau-to", type=float, default=0.4999)
    ap.add_argument("--step", type=float, default=0.0025)
    ap.add_argument("--N", type=int, default=441)
    ap.add_argument("--out-dir", default="theory_out")
    args = ap.parse_args()

    lo = args.tau_from if args.tau_from is not None else tau2() + args.step
    taus = np.round(np.arange(lo, args.tau_to + 1e-12, args.step), 12)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in ("f", "a", "b", "pu"):
        rows = curve(name, taus, N=args.N)
        path = out / f"curve_{name}.csv"
        with open(path, "w") as fh:
            fh.write("tau,value,finite_N_value\n")
            for t, limit, finite in rows:
                fh.write(f"{t!r},{limit!r},{finite!r}\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
