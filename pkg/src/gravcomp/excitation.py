"""Data-collection plans: two-joint grids, one-joint baselines and directional sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gravcomp.disturbance import NEGATIVE, POSITIVE
from gravcomp.errors import ValidationError
from gravcomp.kinematics import KinematicModel

_D = math.pi / 180.0

# joint -> (estimated range, auxiliary joint, auxiliary range), degrees, 1-based
TABLE_RANGES_DEG = {
    6: ((-40, 40), 5, (-90, 90)),
    5: ((-85, 175), 3, (-10, 20)),
    4: ((-190, 80), 3, (-10, 20)),
    3: ((-34, 34), 2, (-14, 40)),
    2: ((-14, 40), None, None),
    1: ((-7, 40), None, None),
}

DEFAULT_COUNTS = (30, 20)  # 600 configurations per joint


@dataclass
class JointRanges:
    """Estimated range and auxiliary mapping per joint, radians, 1-based keys."""

    estimated: dict[int, tuple[float, float]]
    auxiliary: dict[int, int | None]
    auxiliary_range: dict[int, tuple[float, float] | None]

    @classmethod
    def table(cls) -> "JointRanges":
        est, aux, aux_rng = {}, {}, {}
        for j, (r, a, ar) in TABLE_RANGES_DEG.items():
            est[j] = (r[0] * _D, r[1] * _D)
            aux[j] = a
            aux_rng[j] = None if ar is None else (ar[0] * _D, ar[1] * _D)
        return cls(est, aux, aux_rng)


@dataclass
class CollectionPlan:
    estimated_joint: int  # 1-based
    auxiliary_joint: int | None
    configs: np.ndarray  # (M, n) visit order
    dirs: np.ndarray  # (M, n)
    settle_time: float = 0.5
    samples_per_hold: int = 1
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.configs)

    @property
    def per_direction(self) -> int:
        return int(np.sum(self.dirs[:, self.estimated_joint - 1] > 0))


def _check_joint(model: KinematicModel, joint: int):
    if not 1 <= joint <= model.n_joints:
        raise ValidationError(f"joint {joint} out of range 1..{model.n_joints}")


def _rest(model: KinematicModel, rest) -> np.ndarray:
    r = model.mid_range() if rest is None else np.asarray(rest, dtype=float)
    if r.shape != (model.n_joints,):
        raise ValidationError("rest: one value per joint required")
    return r


def _sweep(model, joint, grid_est, aux, aux_values, rest, aux_tag) -> tuple[np.ndarray, np.ndarray]:
    i = joint - 1
    n = model.n_joints
    configs, dirs = [], []
    for a in aux_values:
        base = rest.copy()
        if aux is not None:
            base[aux - 1] = a
        for tag, values in ((POSITIVE, grid_est), (NEGATIVE, grid_est[::-1])):
            for v in values:
                q = base.copy()
                q[i] = v
                d = np.full(n, NEGATIVE)
                d[i] = tag
                if aux is not None:
                    d[aux - 1] = aux_tag
                configs.append(q)
                dirs.append(d)
    configs = np.array(configs)
    model.check_limits(configs)
    return configs, np.array(dirs, dtype=int)


def two_joint_plan(
    model: KinematicModel,
    joint: int,
    ranges: JointRanges | None = None,
    counts: tuple[int, int] = DEFAULT_COUNTS,
    rest=None,
    auxiliary: int | None | str = "table",
) -> CollectionPlan:
    """Grid over the estimated joint and its auxiliary joint.

    At each auxiliary setting (ascending) the estimated joint sweeps lo->hi with
    positive tags, then hi->lo with negative tags. Joints without an auxiliary
    joint get a 1-D grid of ``N_i * N_aux`` points. The auxiliary joint is
    tagged positive (reached from below); pinned joints are tagged negative.
    """
    _check_joint(model, joint)
    ranges = ranges or JointRanges.table()
    n_est, n_aux = (int(c) for c in counts)
    if n_est < 1 or n_aux < 1:
        raise ValidationError("counts must be >= 1")
    aux = ranges.auxiliary.get(joint) if auxiliary == "table" else auxiliary
    if aux is not None and joint <= 2:
        raise ValidationError(f"joint {joint} takes no auxiliary joint")
    rest = _rest(model, rest)
    lo, hi = ranges.estimated[joint]
    if aux is None:
        grid = np.linspace(lo, hi, n_est * n_aux)
        aux_values = [None]
    else:
        _check_joint(model, aux)
        if aux >= joint:
            raise ValidationError("auxiliary joint must be a parent of the estimated joint")
        alo, ahi = ranges.auxiliary_range.get(joint) or tuple(model.joint_limits[aux - 1])
        grid = np.linspace(lo, hi, n_est)
        aux_values = np.linspace(alo, ahi, n_aux)
    configs, dirs = _sweep(model, joint, grid, aux, aux_values, rest, POSITIVE)
    return CollectionPlan(
        joint, aux, configs, dirs, meta={"strategy": "two-joint", "counts": f"{n_est}x{n_aux}"}
    )


def one_joint_plan(
    model: KinematicModel,
    joint: int,
    aux_setting: str,
    count: int,
    ranges: JointRanges | None = None,
    rest=None,
) -> CollectionPlan:
    """Sweep only the estimated joint with the auxiliary joint pinned at lo, mid or hi."""
    _check_joint(model, joint)
    ranges = ranges or JointRanges.table()
    aux = ranges.auxiliary.get(joint)
    if aux is None:
        raise ValidationError(f"joint {joint} has no auxiliary joint to pin")
    if aux_setting not in ("lo", "mid", "hi"):
        raise ValidationError("aux_setting must be 'lo', 'mid' or 'hi'")
    if count < 1:
        raise ValidationError("count must be >= 1")
    alo, ahi = ranges.auxiliary_range[joint]
    a = {"lo": alo, "mid": 0.5 * (alo + ahi), "hi": ahi}[aux_setting]
    lo, hi = ranges.estimated[joint]
    grid = np.linspace(lo, hi, count)
    configs, dirs = _sweep(model, joint, grid, aux, [a], _rest(model, rest), NEGATIVE)
    return CollectionPlan(
        joint, aux, configs, dirs, meta={"strategy": f"one-joint-{aux_setting}", "count": count}
    )


def default_plans(model: KinematicModel, counts=DEFAULT_COUNTS, ranges=None, rest=None):
    return [two_joint_plan(model, j, ranges, counts, rest) for j in range(1, model.n_joints + 1)]


def scaling_estimate(n_joints: int, N: int) -> tuple[int, int]:
    """Sample counts for the full grid and for the two-joint strategy."""
    if N < 1:
        raise ValidationError("N must be >= 1")
    return N**n_joints, n_joints * N**2
