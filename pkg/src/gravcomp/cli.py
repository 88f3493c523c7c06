"""Command-line front end: collect, estimate, validate.

Exit status: 0 ok, 2 usage, 3 validation, 4 identifiability, 5 I/O.
Log verbosity comes from ``GRAVCOMP_LOG_LEVEL`` (default WARNING).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from gravcomp import io as gio
from gravcomp.dataset import Dataset
from gravcomp.disturbance import DEFAULT_ORDERS
from gravcomp.errors import GravcompError, ValidationError
from gravcomp.excitation import JointRanges, two_joint_plan
from gravcomp.gcc import GccConfig
from gravcomp.gravity import default_spec
from gravcomp.kinematics import default_model, load_model

log = logging.getLogger("gravcomp")

DEFAULTS = {
    "trajectory": {"poses": 10, "duration": 5.0},
    "drift": {"poses": 400, "duration": 2.0},
}


def _counts(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected NxM, e.g. 30x20") from None
    if a < 1 or b < 1:
        raise argparse.ArgumentTypeError("counts must be positive")
    return a, b


def _orders(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated integers") from None
    if any(k < 0 for k in ks):
        raise argparse.ArgumentTypeError("orders must be >= 0")
    return ks


def _joint(text: str):
    if text == "all":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a joint number or 'all'") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gravcomp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("collect", help="simulate static data collection")
    c.add_argument("--plant", required=True, help="plant spec file")
    c.add_argument("--joint", type=_joint, default="all")
    c.add_argument("--counts", type=_counts, default=(30, 20), help="NxM grid, default 30x20")
    c.add_argument("--seed", type=int, default=None, help="noise seed (default: plant spec seed)")
    c.add_argument("--out", required=True, help="output directory")

    e = sub.add_parser("estimate", help="identify gravity and disturbance parameters")
    e.add_argument("--data", required=True, help="directory with joint{i}.csv files")
    e.add_argument("--method", choices=("slse", "mlse", "fontanelli-like"), default="mlse")
    e.add_argument("--orders", type=_orders, default=None, help="k1,...,kn")
    e.add_argument("--kinematics", default=None, help="kinematic model file (default: shipped)")
    e.add_argument("--alpha", type=float, default=None, help="controller direction ratio")
    e.add_argument("--out", required=True, help="model file to write")

    v = sub.add_parser("validate", help="run a validation protocol against a plant")
    v.add_argument("--model", required=True)
    v.add_argument("--plant", required=True)
    v.add_argument("--mode", required=True,
                   choices=("trajectory", "drift", "order-sweep", "cond-study"))
    v.add_argument("--poses", type=int, default=None, help="waypoints or drift poses")
    v.add_argument("--duration", type=float, default=None, help="hold time or release time, s")
    v.add_argument("--k-max", type=int, default=None, help="highest order in the sweep")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", required=True, help="output directory")
    return p


# commands ----------------------------------------------------------------


def cmd_collect(args, parser) -> int:
    from gravcomp.plant import Plant

    spec = gio.read_plant_spec(args.plant)
    if args.seed is not None:
        spec.seed = int(args.seed)
    model = spec.model
    joints = range(1, model.n_joints + 1) if args.joint == "all" else [args.joint]
    if any(not 1 <= j <= model.n_joints for j in joints):
        parser.error(f"--joint must lie in 1..{model.n_joints}")
    plant = Plant(spec)
    ranges = JointRanges.table()
    for j in joints:
        plan = two_joint_plan(model, j, ranges, args.counts)
        # one stream per joint so a single-joint run matches the full run
        plant.reset_noise(np.random.SeedSequence([spec.seed, j]))
        meta = {
            "estimated_joint": j,
            "auxiliary_joint": plan.auxiliary_joint,
            "strategy": plan.meta["strategy"],
            "counts": plan.meta["counts"],
            "plant_seed": spec.seed,
            "source": "simulated",
        }
        ds = plant.collect(plan.configs, plan.dirs, meta)
        path = gio.write_dataset(gio.dataset_path(args.out, j), ds, model, DEFAULT_ORDERS)
        log.info("joint %d: %d samples -> %s", j, len(ds), path)
        print(f"wrote {path} ({len(ds)} samples)")
    return 0


def cmd_estimate(args, parser) -> int:
    from gravcomp.estimation import estimation_report, mlse, slse

    model = load_model(args.kinematics) if args.kinematics else default_model()
    datasets = gio.read_dataset_dir(args.data, model)
    n = model.n_joints
    orders = args.orders or DEFAULT_ORDERS
    if args.method == "fontanelli-like":
        orders = (1,) * n
    if len(orders) != n:
        parser.error(f"--orders needs {n} values, got {len(orders)}")
    missing = [i + 1 for i, d in enumerate(datasets) if d is None]
    if args.method == "mlse" and missing:
        raise gio.FileError(f"mlse needs every joint dataset; missing joint(s) {missing}")
    present = [d for d in datasets if d is not None]
    if not present:
        raise gio.FileError(f"{args.data}: no joint{{i}}.csv datasets found")
    spec = default_spec(model)
    if args.method == "mlse":
        params = mlse(datasets, spec, orders)
    else:
        params = slse(Dataset.concatenate(present), spec, orders,
                      symmetric=args.method == "fontanelli-like")
        params.method = args.method
    report = estimation_report(params, [d if d is not None else present[0] for d in datasets])
    for j in missing:
        report.pop(f"joint{j}", None)
    config = GccConfig.default(n) if args.alpha is None else GccConfig.default(n, args.alpha)
    out = Path(args.out)
    gio.write_model(out, params, config, report)
    text = gio.report_text(report, f"estimation report ({args.method})")
    gio.write_text(out.with_name(out.stem + ".report.txt"), text)
    sys.stdout.write(text)
    return 0


def cmd_validate(args, parser) -> int:
    from gravcomp.estimation import order_sweep
    from gravcomp.excitation import default_plans
    from gravcomp.metrics import (
        condition_study,
        condition_study_csv,
        drift_test,
        trajectory_test,
    )
    from gravcomp.plant import Plant, random_poses

    mode = args.mode
    if mode in ("order-sweep", "cond-study") and (args.poses is not None or args.duration is not None):
        parser.error(f"--poses/--duration do not apply to --mode {mode}")
    if mode in ("trajectory", "drift") and args.k_max is not None:
        parser.error(f"--k-max does not apply to --mode {mode}")
    params, config = gio.read_model(args.model)
    spec = gio.read_plant_spec(args.plant)
    if spec.model != params.model:
        raise ValidationError("model and plant use different kinematic models")
    plant = Plant(spec)
    out = Path(args.out)
    label = params.method
    if mode in DEFAULTS:
        poses = DEFAULTS[mode]["poses"] if args.poses is None else args.poses
        duration = DEFAULTS[mode]["duration"] if args.duration is None else args.duration
        if poses < 1 or duration <= 0:
            parser.error("--poses must be >= 1 and --duration > 0")
        Q = random_poses(plant.model, poses, args.seed)
        if mode == "trajectory":
            rep = trajectory_test(plant, params, Q, hold=duration, method=label)
            csv_text, text = rep.to_csv(), rep.summary()
        else:
            res = drift_test(plant, params, config, Q, T=duration)
            csv_text, text = res.to_csv(), res.summary(f"({label})")
    elif mode == "order-sweep":
        k_max = 8 if args.k_max is None else args.k_max
        if k_max < 0:
            parser.error("--k-max must be >= 0")
        data = [plant.collect(p.configs, p.dirs, {"estimated_joint": p.estimated_joint})
                for p in default_plans(plant.model)]
        res = order_sweep(data, params.spec, range(0, k_max + 1), base_orders=params.orders)
        csv_text = gio.rows_csv(res["rows"], ["joint", "order", "train_rms", "test_rms", "identifiable"])
        text = "order sweep (test-error argmin per joint)\n" + "".join(
            f"joint {j}: k = {k}\n" for j, k in res["best_order"].items()
        )
    else:
        rows = condition_study(plant, params.spec, params.orders, seed=args.seed)
        csv_text = condition_study_csv(rows)
        text = "condition study\n" + "".join(
            f"joint {r['joint']} {r['strategy']:<14} cond {r['condition_number']:.6g} "
            f"held-out rms {r['heldout_rms_abs']:.6g} N m\n"
            for r in rows
        )
    stem = mode.replace("-", "_")
    gio.write_text(out / f"{stem}.csv", csv_text)
    gio.write_text(out / f"{stem}.txt", text)
    sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    level = os.environ.get("GRAVCOMP_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "collect":
            return cmd_collect(args, parser)
        if args.command == "estimate":
            return cmd_estimate(args, parser)
        return cmd_validate(args, parser)
    except GravcompError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
