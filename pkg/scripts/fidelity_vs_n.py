"""Encode/decode reconstruction error of one window as the state size grows."""

import argparse

import numpy as np

from hippokan.hippo import legs_operator, reconstruct_window


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--length", type=int, default=1200)
    ap.add_argument("--period", type=float, default=100.0)
    ap.add_argument("--offset", type=float, default=0.0, help="non-zero offsets expose the start-up transient")
    ap.add_argument("--dims", type=int, nargs="+", default=[16, 32, 64, 128, 256])
    ap.add_argument("--discretization", default="bilinear")
    args = ap.parse_args()

    window = args.offset + np.sin(2 * np.pi * np.arange(args.length) / args.period)
    norm = np.linalg.norm(window)
    print("N,l2_error,relative_l2_error")
    for n in args.dims:
        err = np.linalg.norm(reconstruct_window(window, legs_operator(n, args.discretization)) - window)
        print(f"{n},{err:.6g},{err / norm:.6g}")


if __name__ == "__main__":
    main()
