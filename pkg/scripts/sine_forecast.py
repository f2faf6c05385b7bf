"""Train HiPPO-KAN on a noiseless sine and compare against persistence.

Pass several learning rates to see how sensitive the result is to the step size.
"""

import argparse
import time

from hippokan.data import chronological_split, gen_synthetic, windowize
from hippokan.models import HippoKanModel
from hippokan.training import TrainConfig, evaluate, persistence_predictions, report, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--period", type=float, default=60.0)
    ap.add_argument("--window", type=int, default=120)
    ap.add_argument("--widths", type=int, nargs="+", default=[16, 16])
    ap.add_argument("--lr", type=float, nargs="+", default=[1e-3, 3e-4, 1e-4])
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    ds = windowize(gen_synthetic("sine", 3000, {"period": args.period}), args.window)
    tr, _, te = chronological_split(ds)
    base = report(persistence_predictions(te), te).mse
    print(f"persistence test mse {base:.4g}")
    for lr in args.lr:
        t0 = time.perf_counter()
        model = HippoKanModel(args.widths[0], args.widths, seed=args.seed)
        train(model, tr, TrainConfig(learning_rate=lr, max_steps=args.steps, seed=args.seed))
        rep = evaluate(model, te)
        print(f"lr {lr:g}: test mse {rep.mse:.4g} ({rep.mse / base:.3f} x persistence), lag {rep.lag_steps}, {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()
