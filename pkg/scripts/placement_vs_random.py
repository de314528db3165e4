"""Compare best-of-3 prompted placement against uniform-random placement.

    python scripts/placement_vs_random.py --seeds 10
"""
import argparse
import sys

from sgf import experiments as X


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--samples", type=int, default=3)
    ap.add_argument("--netlist", choices=["toy3", "r10"], default="r10")
    args = ap.parse_args(argv)

    netlist, cfg = X.toy_setup() if args.netlist == "toy3" else X.ten_module_setup()
    baseline = X.random_baseline(netlist, cfg)
    print(f"random mean wirelength over 30 placements: {baseline:.2f}")
    for seed in range(args.seeds):
        policy = X.train_policy(netlist, cfg, seed, k=args.k)
        wl = X.sgf_placement(policy, seed, samples=args.samples)
        print(f"seed {seed} wirelength {wl:.1f} ratio {wl / baseline:.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
