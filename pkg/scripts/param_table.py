"""Parameter counts versus window size for every model family."""

import argparse

from hippokan.models import DirectKanModel, HippoKanModel, HippoMlpModel, model_param_count


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--windows", type=int, nargs="+", default=[120, 500, 1200, 2500, 3000, 3500, 4000])
    args = ap.parse_args()

    rows = {
        "HiPPO-KAN [16,16]": lambda L: HippoKanModel(16, [16, 16]),
        "HiPPO-KAN [16,4,16]": lambda L: HippoKanModel(16, [16, 4, 16]),
        "HiPPO-KAN [16,2,16]": lambda L: HippoKanModel(16, [16, 2, 16]),
        "HiPPO-MLP": lambda L: HippoMlpModel(16),
        "KAN [L,1]": lambda L: DirectKanModel(L),
    }
    print("| model | " + " | ".join(f"L={L}" for L in args.windows) + " |")
    print("|---" * (len(args.windows) + 1) + "|")
    for name, make in rows.items():
        print(f"| {name} | " + " | ".join(str(model_param_count(make(L))) for L in args.windows) + " |")


if __name__ == "__main__":
    main()
