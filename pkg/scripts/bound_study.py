"""Measure the one-step error bound on toy3 over seeded noisy rollouts.

    python scripts/bound_study.py --rollouts 20 --out results/bound.csv
"""
import argparse
import sys
from pathlib import Path

from sgf import experiments as X
from sgf.pipeline import bound_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rollouts", type=int, default=20)
    ap.add_argument("--noise", type=float, default=0.02)
    ap.add_argument("--component", choices=["w", "c", "h"], default="w")
    ap.add_argument("--seed", type=int, default=0, help="training seed")
    ap.add_argument("--out", type=Path, default=Path("results/bound.csv"))
    args = ap.parse_args(argv)

    netlist, cfg = X.toy_setup()
    policy = X.train_policy(netlist, cfg, args.seed, k=5)
    rows = X.bound_study(policy, args.rollouts, args.noise, args.component)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(bound_csv(rows))
    holds = sum(r.holds for r in rows) / len(rows)
    tri = sum(r.triangle_ok for r in rows) / len(rows)
    print(f"{len(rows)} steps, bound holds {holds:.3f}, triangle inequality {tri:.0%}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
