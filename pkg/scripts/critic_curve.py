"""Train the critic on random episodes and write held-out error curves.

Writes one CSV row per (seed, t) with the per-timestep held-out MSE, plus a
summary of the held-out L1 at the first and last epoch.

    python scripts/critic_curve.py --seeds 10 --out results/critic_curve.csv
"""
import argparse
import csv
import sys
from pathlib import Path

from sgf import experiments as X


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--netlist", choices=["toy3", "r10"], default="toy3")
    ap.add_argument("--out", type=Path, default=Path("results/critic_curve.csv"))
    args = ap.parse_args(argv)

    netlist, cfg = X.toy_setup() if args.netlist == "toy3" else X.ten_module_setup()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["seed", "t", "mse_w", "mse_c", "mse_h"])
        for seed in range(args.seeds):
            run = X.critic_from_random(netlist, cfg, seed)
            for t, row in enumerate(run.mse):
                w.writerow([seed, t, *map(repr, map(float, row))])
            print(f"seed {seed} held-out L1 first {run.held_curve[0]:.4f} "
                  f"final {run.held_curve[-1]:.4f} ratio {run.ratio:.3f} "
                  f"mse t=0 {run.mse[0].sum():.4f} t=T-1 {run.mse[-1].sum():.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
