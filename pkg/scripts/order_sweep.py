"""Train/test RMS versus polynomial order on a simulated plant, several seeds.

usage: python3 scripts/order_sweep.py [--truth 4|6] [--seeds 10] [--sigma 0.005]
"""

import argparse

import numpy as np

from gravcomp.estimation import order_sweep
from gravcomp.excitation import default_plans
from gravcomp.gravity import default_spec
from gravcomp.kinematics import default_model
from gravcomp.plant import Plant, mtm_plant_spec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--truth", type=int, default=4)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--sigma", type=float, default=0.005)
    ap.add_argument("--k-max", type=int, default=8)
    args = ap.parse_args()
    model = default_model()
    spec = default_spec(model)
    ks = range(args.k_max + 1)
    test = np.full((args.seeds, model.n_joints, len(ks)), np.nan)
    for s in range(args.seeds):
        plant = Plant(mtm_plant_spec((args.truth,) * model.n_joints, args.sigma, seed=s))
        data = [plant.collect(p.configs, p.dirs, {"estimated_joint": p.estimated_joint})
                for p in default_plans(model)]
        res = order_sweep(data, spec, ks, base_orders=(4,) * model.n_joints)
        for r in res["rows"]:
            test[s, r["joint"] - 1, r["order"]] = r["test_rms"]
        print(f"seed {s}: argmin {res['best_order']}")
    mean = np.nanmean(test, axis=0)
    print("\nmean test RMS (mN m), rows = joints, columns = order 0..")
    for j, row in enumerate(mean, 1):
        print(f"joint {j}: " + " ".join(f"{1e3 * x:7.3f}" for x in row)
              + f"   argmin {int(np.nanargmin(row))}")


if __name__ == "__main__":
    main()
