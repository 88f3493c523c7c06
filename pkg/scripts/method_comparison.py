"""Full method against the symmetric order-1 baseline: trajectory and drift tests.

usage: python3 scripts/method_comparison.py [--plant in-class|order6] [--sigma 0.01] [--poses 400]
"""

import argparse

import numpy as np

from gravcomp.dataset import Dataset
from gravcomp.disturbance import DEFAULT_ORDERS
from gravcomp.estimation import mlse, slse
from gravcomp.excitation import default_plans
from gravcomp.gcc import GccConfig
from gravcomp.gravity import default_spec
from gravcomp.kinematics import default_model
from gravcomp.metrics import drift_test, trajectory_test
from gravcomp.plant import Plant, mtm_plant_spec, random_poses


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--plant", default="in-class")
    ap.add_argument("--sigma", type=float, default=0.01)
    ap.add_argument("--poses", type=int, default=400)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    model = default_model()
    spec = default_spec(model)
    plant = Plant(mtm_plant_spec(args.plant, args.sigma, seed=args.seed))
    data = [plant.collect(p.configs, p.dirs, {"estimated_joint": p.estimated_joint})
            for p in default_plans(model)]
    methods = {
        "mlse": mlse(data, spec, DEFAULT_ORDERS),
        "slse": slse(Dataset.concatenate(data), spec, DEFAULT_ORDERS),
        "fontanelli-like": slse(Dataset.concatenate(data), spec, (1,) * 6, symmetric=True),
    }
    W = random_poses(model, 10, args.seed + 100)
    poses = random_poses(model, args.poses, args.seed + 101)
    cfg = GccConfig.default(6)
    for name, p in methods.items():
        eps = trajectory_test(plant, p, W).rms_relative_pct
        d = drift_test(plant, p, cfg, poses)
        print(f"{name:<16} eps_rms % {np.array2string(eps, precision=3)}")
        print(f"{'':<16} drift {d.mean_translational:.4g} +/- {d.std_translational:.3g} m, "
              f"{d.mean_rotational:.4g} +/- {d.std_rotational:.3g} deg")


if __name__ == "__main__":
    main()
