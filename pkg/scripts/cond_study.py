"""Two-joint versus one-joint collection: condition numbers and held-out error.

usage: python3 scripts/cond_study.py [--sigma 0.01] [--seed 0]
"""

import argparse

from gravcomp.disturbance import DEFAULT_ORDERS
from gravcomp.gravity import default_spec
from gravcomp.kinematics import default_model
from gravcomp.metrics import condition_study
from gravcomp.plant import Plant, mtm_plant_spec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sigma", type=float, default=0.01)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    plant = Plant(mtm_plant_spec("in-class", args.sigma, seed=args.seed))
    rows = condition_study(plant, default_spec(default_model()), DEFAULT_ORDERS, seed=args.seed)
    print(f"{'joint':>5} {'strategy':<14} {'cond':>12} {'held-out rms N m':>18}")
    for r in rows:
        print(f"{r['joint']:>5} {r['strategy']:<14} {r['condition_number']:>12.4g} {r['heldout_rms_abs']:>18.4g}")


if __name__ == "__main__":
    main()
