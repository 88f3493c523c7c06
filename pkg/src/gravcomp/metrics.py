"""Evaluation metrics and the trajectory and drift test protocols."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gravcomp.disturbance import direction_tag
from gravcomp.errors import SimulationError, UndefinedMetricError, ValidationError


def rms_relative(predicted, measured) -> float:
    """||predicted - measured|| / ||measured|| in percent."""
    p = np.asarray(predicted, dtype=float).reshape(-1)
    m = np.asarray(measured, dtype=float).reshape(-1)
    if p.shape != m.shape or p.size == 0:
        raise ValidationError("sequences must be non-empty and of equal length")
    denom = np.linalg.norm(m)
    if denom == 0:
        raise UndefinedMetricError("relative error undefined for an all-zero measurement")
    return float(np.linalg.norm(p - m) / denom * 100.0)


def rms_abs(predicted, measured) -> float:
    e = np.asarray(predicted, dtype=float) - np.asarray(measured, dtype=float)
    return float(np.sqrt(np.mean(e**2)))


@dataclass
class TorqueEvalReport:
    rms_relative_pct: np.ndarray
    rms_abs: np.ndarray
    max_abs: np.ndarray
    method: str = ""
    dataset: str = ""

    @classmethod
    def from_torques(cls, predicted, measured, method="", dataset="") -> "TorqueEvalReport":
        P = np.atleast_2d(predicted)
        M = np.atleast_2d(measured)
        rel = []
        for i in range(M.shape[1]):
            try:
                rel.append(rms_relative(P[:, i], M[:, i]))
            except UndefinedMetricError:
                rel.append(float("nan"))
        err = P - M
        return cls(
            np.array(rel),
            np.sqrt(np.mean(err**2, axis=0)),
            np.max(np.abs(err), axis=0),
            method,
            dataset,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["joint", "rms_relative_pct", "rms_abs_Nm", "max_abs_Nm"])
        for i in range(len(self.rms_abs)):
            w.writerow([i + 1, repr(float(self.rms_relative_pct[i])), repr(float(self.rms_abs[i])),
                        repr(float(self.max_abs[i]))])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"trajectory test ({self.method or 'model'})"]
        lines.append(f"{'joint':>5} {'eps_rms %':>12} {'rms N m':>12} {'max N m':>12}")
        for i in range(len(self.rms_abs)):
            lines.append(
                f"{i + 1:>5} {self.rms_relative_pct[i]:>12.6g} {self.rms_abs[i]:>12.6g} "
                f"{self.max_abs[i]:>12.6g}"
            )
        return "\n".join(lines) + "\n"


def trajectory_test(
    plant,
    params,
    waypoints,
    hold: float = 5.0,
    sample_rate: float = 10.0,
    start=None,
    method: str = "",
) -> TorqueEvalReport:
    """Hold at each waypoint, record steady-state torques, compare with predictions.

    The direction tag of each joint is the direction it arrived from; the
    prediction is the model's directional torque for that tag.
    """
    W = np.atleast_2d(np.asarray(waypoints, dtype=float))
    if len(W) < 2:
        raise ValidationError("trajectory test needs at least 2 waypoints")
    plant.model.check_limits(W)
    prev = plant.model.mid_range() if start is None else np.asarray(start, dtype=float)
    per_hold = max(1, int(round(hold * sample_rate)))
    Q, D = [], []
    for wp in W:
        tags = direction_tag(wp - prev)
        Q.append(np.repeat(wp[None], per_hold, axis=0))
        D.append(np.repeat(tags[None], per_hold, axis=0))
        prev = wp
    Q, D = np.vstack(Q), np.vstack(D)
    measured = plant.measure_static(Q, D)
    predicted = params.predict(Q, D)
    return TorqueEvalReport.from_torques(predicted, measured, method, f"{len(W)} waypoints")


@dataclass
class DriftSummary:
    translational: np.ndarray  # per pose, m
    rotational_deg: np.ndarray
    poses: np.ndarray = field(repr=False)

    @property
    def mean_translational(self) -> float:
        return float(np.mean(self.translational))

    @property
    def std_translational(self) -> float:
        return float(np.std(self.translational))

    @property
    def mean_rotational(self) -> float:
        return float(np.mean(self.rotational_deg))

    @property
    def std_rotational(self) -> float:
        return float(np.std(self.rotational_deg))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.poses.shape[1]
        w.writerow(["pose"] + [f"q{i + 1}" for i in range(n)] + ["translational_m", "rotational_deg"])
        for k, q in enumerate(self.poses):
            w.writerow([k] + [repr(float(x)) for x in q]
                       + [repr(float(self.translational[k])), repr(float(self.rotational_deg[k]))])
        return buf.getvalue()

    def summary(self, label: str = "") -> str:
        return (
            f"drift test {label}\n"
            f"poses: {len(self.translational)}\n"
            f"translational drift mean {self.mean_translational:.6g} m, std {self.std_translational:.6g} m\n"
            f"rotational drift mean {self.mean_rotational:.6g} deg, std {self.std_rotational:.6g} deg\n"
        )


def drift_test(plant, params, config, poses, T: float = 2.0, dt: float = 1e-3) -> DriftSummary:
    """Release the arm under the compensation controller at every pose."""
    from gravcomp.gcc import compensation_torque

    P = np.atleast_2d(np.asarray(poses, dtype=float))
    if len(P) < 1:
        raise ValidationError("drift test needs at least one pose")

    def controller(q, dq):
        return compensation_torque(params, config, q, dq)

    try:
        results = plant.drift_batch(controller, P, T, dt)
    except SimulationError as exc:
        raise SimulationError(f"pose {exc.pose}: {exc}", step=exc.step, pose=exc.pose) from exc
    trans = np.array([r.translational for r in results])
    rot = np.array([r.rotational_deg for r in results])
    return DriftSummary(trans, rot, P)


STRATEGIES = ("two-joint", "one-joint-lo", "one-joint-mid", "one-joint-hi")


def condition_study(
    plant,
    spec,
    orders,
    counts=(20, 20),
    test_count: int = 400,
    seed: int = 0,
    joints=None,
) -> list[dict]:
    """Two-joint versus one-joint collection, per joint that has an auxiliary joint.

    Every strategy gets the same number of samples (400 configurations by
    default, each visited in both directions). Only the dataset of the
    studied joint changes, so the distal steps of the sequential estimate are
    shared. Held-out error is measured against the noise-free plant on random
    (joint, auxiliary) configurations.
    """
    from gravcomp.estimation import build_partition, mlse
    from gravcomp.excitation import JointRanges, default_plans, one_joint_plan, two_joint_plan
    from gravcomp.errors import IdentifiabilityError

    model = plant.model
    ranges = JointRanges.table()
    rng = np.random.default_rng(seed)
    part = build_partition(spec)
    base = [
        plant.collect(p.configs, p.dirs, {"estimated_joint": p.estimated_joint})
        for p in default_plans(model, counts, ranges)
    ]
    joints = [j for j in (joints or range(1, model.n_joints + 1)) if ranges.auxiliary.get(j)]
    rows = []
    for j in joints:
        i, aux = j - 1, ranges.auxiliary[j]
        Q = np.tile(model.mid_range(), (test_count, 1))
        Q[:, i] = rng.uniform(*ranges.estimated[j], test_count)
        Q[:, aux - 1] = rng.uniform(*ranges.auxiliary_range[j], test_count)
        D = np.where(rng.random(Q.shape) < 0.5, 1, -1)
        truth = plant.gravity(Q) + plant.disturbance(Q, D)
        for name in STRATEGIES:
            if name == "two-joint":
                plan = two_joint_plan(model, j, ranges, counts)
            else:
                plan = one_joint_plan(model, j, name.rsplit("-", 1)[1], counts[0] * counts[1], ranges)
            data = list(base)
            data[i] = plant.collect(plan.configs, plan.dirs, {"estimated_joint": j})
            try:
                p = mlse(data, spec, orders, partition=part)
                cond = p.provenance["steps"][j]["condition_number"]
                err = rms_abs(p.predict(Q, D)[:, i], truth[:, i])
            except IdentifiabilityError:
                cond, err = float("inf"), float("inf")
            rows.append(
                {"joint": j, "auxiliary": aux, "strategy": name, "samples": len(plan),
                 "condition_number": float(cond), "heldout_rms_abs": float(err)}
            )
    return rows


def condition_study_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keys = ["joint", "auxiliary", "strategy", "samples", "condition_number", "heldout_rms_abs"]
    w.writerow(keys)
    for r in rows:
        w.writerow([repr(r[k]) if isinstance(r[k], float) else r[k] for k in keys])
    return buf.getvalue()
