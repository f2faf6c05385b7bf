"""Lag of time- vs coefficient-domain training on the step wave, over widths, seeds and noise."""

import argparse
import itertools
import json
from concurrent.futures import ProcessPoolExecutor

from hippokan.data import chronological_split, gen_synthetic, windowize
from hippokan.models import LOSS_MODES, HippoKanModel
from hippokan.training import TrainConfig, evaluate, train


def run(job):
    widths, seed, noise, lr, steps = job
    series = gen_synthetic("step", 3000, {"period": 40, "noise": noise}, seed=0)
    tr, _, te = chronological_split(windowize(series, 120))
    out = {"widths": widths, "seed": seed, "noise": noise, "lr": lr}
    for mode in LOSS_MODES:
        model = HippoKanModel(16, widths, seed=seed, loss_mode=mode)
        train(model, tr, TrainConfig(learning_rate=lr, max_steps=steps, seed=seed, loss_mode=mode))
        rep = evaluate(model, te)
        out[f"lag_{mode}"], out[f"mse_{mode}"] = rep.lag_steps, rep.mse
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--widths", default="16,16;16,2,16", help="semicolon-separated width lists")
    ap.add_argument("--seeds", type=int, nargs="+", default=[42])
    ap.add_argument("--noise", type=float, nargs="+", default=[0.0])
    ap.add_argument("--lr", type=float, nargs="+", default=[3e-4, 1e-3])
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    widths = [[int(w) for w in spec.split(",")] for spec in args.widths.split(";")]
    jobs = list(itertools.product(widths, args.seeds, args.noise, args.lr, [args.steps]))
    with ProcessPoolExecutor(args.workers) as pool:
        for row in pool.map(run, jobs):
            print(json.dumps(row))


if __name__ == "__main__":
    main()
