"""Single-step and multi-step least-squares identification.

Both estimators solve with orthogonal decompositions (SVD through
``np.linalg.lstsq``); normal equations are never formed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gravcomp.disturbance import PolyDisturbance, disturbance_regressor_batch, phi
from gravcomp.errors import IdentifiabilityError, ModelInconsistencyError, ValidationError
from gravcomp.gravity import GravityRegressorSpec, rank_tolerance
from gravcomp.kinematics import KinematicModel, random_configurations
from gravcomp.dataset import Dataset
from gravcomp.metrics import rms_relative

log = logging.getLogger(__name__)

PARTITION_ZERO = 1e-10


@dataclass
class ParamSet:
    """Identified gravity base parameters and disturbance coefficients."""

    spec: GravityRegressorSpec
    gravity_base: np.ndarray
    disturbance: PolyDisturbance
    method: str = "mlse"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.gravity_base = np.asarray(self.gravity_base, dtype=float).reshape(-1)
        if len(self.gravity_base) != self.spec.b:
            raise ValidationError(
                f"gravity_base: expected {self.spec.b} values, got {len(self.gravity_base)}"
            )
        if self.disturbance.n_joints != self.spec.model.n_joints:
            raise ValidationError("disturbance: joint count does not match the model")
        if not np.all(np.isfinite(self.gravity_base)) or not np.all(
            np.isfinite(self.disturbance.stacked())
        ):
            raise ValidationError("parameters must be finite")

    @property
    def model(self) -> KinematicModel:
        return self.spec.model

    @property
    def orders(self) -> tuple[int, ...]:
        return self.disturbance.orders

    def gravity(self, Q) -> np.ndarray:
        return self.spec.regressor(Q) @ self.gravity_base

    def predict(self, Q, dirs) -> np.ndarray:
        """Directional torque prediction tau_g + tau_ext."""
        return self.gravity(Q) + self.disturbance.torque(Q, dirs)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "gravity_base": [float(x) for x in self.gravity_base],
            "gravity_labels": self.spec.column_labels(),
            "disturbance": self.disturbance.to_dict(),
        }

    @classmethod
    def from_dict(cls, spec: GravityRegressorSpec, data: dict, provenance=None) -> "ParamSet":
        try:
            gb = np.asarray(data["gravity_base"], dtype=float)
            dist = PolyDisturbance.from_dict(data["disturbance"], spec.model.n_joints)
        except KeyError as exc:
            raise ValidationError(f"params.{exc.args[0]}: missing") from None
        return cls(spec, gb, dist, str(data.get("method", "mlse")), dict(provenance or {}))


@dataclass(frozen=True)
class MlsePartition:
    """Per joint: base columns first estimated at that step, and those known from later steps."""

    steps: tuple[np.ndarray, ...]  # new columns per joint
    known: tuple[np.ndarray, ...]  # columns from more distal steps

    @property
    def n_joints(self) -> int:
        return len(self.steps)


def _param_labels(spec: GravityRegressorSpec, orders, symmetric=False) -> list[str]:
    labels = [f"g.{s}" for s in spec.column_labels()]
    signs = ("",) if symmetric else ("+", "-")
    for s in signs:
        for i, k in enumerate(orders):
            labels += [f"a{s}_{i + 1}[{j}]" for j in range(k + 1)]
    return labels


def _check_rank(W: np.ndarray, labels, joint=None, what="regressor") -> None:
    rows, cols = W.shape
    _, s, vt = np.linalg.svd(W, full_matrices=rows < cols)
    tol = np.finfo(float).eps * max(W.shape) * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    if rank == cols:
        return
    dirs = []
    for v in vt[rank:][:3]:
        top = np.argsort(-np.abs(v))[:3]
        dirs.append(" + ".join(f"{v[t]:.3g}*{labels[t]}" for t in top))
    where = f"joint {joint}" if joint is not None else what
    raise IdentifiabilityError(
        f"{where}: regressor is rank deficient (null directions: {'; '.join(dirs)}); "
        "collect more excitation or lower the polynomial order",
        joint=joint,
        null_directions=dirs,
    )


def condition_number(W) -> float:
    """Largest over smallest singular value; inf when rank deficient."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.size == 0:
        raise ValueError("empty matrix")
    s = np.linalg.svd(W, compute_uv=False)
    if len(s) < W.shape[1] or s[-1] <= np.finfo(float).eps * max(W.shape) * s[0]:
        return float("inf")
    return float(s[0] / s[-1])


def stack_regressor(
    dataset: Dataset,
    spec: GravityRegressorSpec,
    orders: Sequence[int],
    centers=None,
    symmetric: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """W (n p x m) and omega (n p) in sample-major order."""
    if len(dataset) == 0:
        raise ValidationError("dataset is empty")
    Yg = spec.regressor(dataset.q)
    Ye = disturbance_regressor_batch(dataset.q, dataset.dirs, orders, centers)
    if symmetric:
        half = Ye.shape[-1] // 2
        Ye = Ye[..., :half] + Ye[..., half:]
    W = np.concatenate([Yg, Ye], axis=-1).reshape(-1, spec.b + Ye.shape[-1])
    return W, dataset.tau.reshape(-1)


def _lstsq(W, y):
    beta, *_ = np.linalg.lstsq(W, y, rcond=None)
    return beta


def slse(
    dataset: Dataset,
    spec: GravityRegressorSpec,
    orders: Sequence[int],
    centers=None,
    symmetric: bool = False,
) -> ParamSet:
    """One global least-squares solve over all joints and samples.

    ``symmetric`` ties a+ = a- (a direction-blind baseline).
    """
    W, omega = stack_regressor(dataset, spec, orders, centers, symmetric)
    _check_rank(W, _param_labels(spec, orders, symmetric), what="SLSE")
    beta = _lstsq(W, omega)
    gb = beta[: spec.b]
    ext = beta[spec.b:]
    if symmetric:
        ext = np.concatenate([ext, ext])
    dist = PolyDisturbance.from_stacked(orders, ext, centers)
    resid = W @ beta - omega
    prov = {
        "method": "slse-symmetric" if symmetric else "slse",
        "condition_number": condition_number(W),
        "residual_rms": float(np.sqrt(np.mean(resid**2))),
    }
    return ParamSet(spec, gb, dist, prov["method"], prov)


def build_partition(spec: GravityRegressorSpec, probes: int = 200, seed: int = 1) -> MlsePartition:
    """Assign each base column to the most distal joint row where it is nonzero."""
    model = spec.model
    n = model.n_joints
    Y = spec.regressor(random_configurations(model, probes, seed))
    nonzero = np.abs(Y).max(axis=0) > PARTITION_ZERO  # (n, b)
    step_of = np.full(spec.b, -1)
    for c in range(spec.b):
        rows = np.flatnonzero(nonzero[:, c])
        if len(rows):
            step_of[c] = rows.max()
    if np.any(step_of < 0):
        raise ModelInconsistencyError("base column with no nonzero row")
    if n > 1 and np.any(step_of == 0):
        bad = [spec.column_labels()[c] for c in np.flatnonzero(step_of == 0)]
        raise ModelInconsistencyError(
            f"columns {bad} act only on joint 1; the first joint must carry no gravity load"
        )
    steps = tuple(np.flatnonzero(step_of == i) for i in range(n))
    known = tuple(np.flatnonzero(step_of > i) for i in range(n))
    return MlsePartition(steps, known)


def _step_regressor(spec, part, i, ds: Dataset, order: int, center: float, Yg=None):
    if Yg is None:
        Yg = spec.regressor(ds.q)
    G = Yg[:, i, :]
    basis = phi(ds.q[:, i] - center, order)
    u = (ds.dirs[:, i] > 0).astype(float)[:, None]
    W_hat = np.hstack([G[:, part.steps[i]], basis * u, basis * (1.0 - u)])
    W_bar = G[:, part.known[i]]
    return W_hat, W_bar


def mlse(
    datasets: Sequence[Dataset],
    spec: GravityRegressorSpec,
    orders: Sequence[int],
    centers=None,
    partition: MlsePartition | None = None,
    gravity_regressors: Sequence[np.ndarray] | None = None,
) -> ParamSet:
    """Distal-to-proximal sequential estimation, one joint row per step.

    ``datasets[i]`` is the dataset collected for joint i. Each step subtracts
    the gravity contribution of parameters fixed at earlier (more distal)
    steps before solving for its own columns and disturbance coefficients.
    """
    n = spec.model.n_joints
    if len(datasets) != n or any(d is None for d in datasets):
        missing = [i + 1 for i in range(n) if i >= len(datasets) or datasets[i] is None]
        raise ValidationError(f"mlse needs one dataset per joint; missing joints {missing}")
    orders = tuple(orders)
    centers = np.zeros(n) if centers is None else np.asarray(centers, dtype=float)
    part = partition or build_partition(spec)
    gb = np.full(spec.b, np.nan)
    a_plus, a_minus = [None] * n, [None] * n
    steps = {}
    for i in reversed(range(n)):
        ds = datasets[i]
        if len(ds) == 0:
            raise ValidationError(f"joint {i + 1}: dataset is empty")
        Yg = gravity_regressors[i] if gravity_regressors is not None else None
        W_hat, W_bar = _step_regressor(spec, part, i, ds, orders[i], centers[i], Yg)
        rhs = ds.tau[:, i] - W_bar @ gb[part.known[i]]
        labels = [spec.column_labels()[c] for c in part.steps[i]]
        labels += [f"a+_{i + 1}[{j}]" for j in range(orders[i] + 1)]
        labels += [f"a-_{i + 1}[{j}]" for j in range(orders[i] + 1)]
        _check_rank(W_hat, labels, joint=i + 1)
        beta = _lstsq(W_hat, rhs)
        ng = len(part.steps[i])
        gb[part.steps[i]] = beta[:ng]
        a_plus[i] = beta[ng: ng + orders[i] + 1]
        a_minus[i] = beta[ng + orders[i] + 1:]
        pred = W_hat @ beta + W_bar @ gb[part.known[i]]
        err = pred - ds.tau[:, i]
        steps[i + 1] = {
            "condition_number": condition_number(W_hat),
            "residual_rms": float(np.sqrt(np.mean(err**2))),
            "max_abs": float(np.max(np.abs(err))),
            "rms_relative_pct": _safe_rel(pred, ds.tau[:, i]),
        }
        log.debug("mlse step %d: %s", i + 1, steps[i + 1])
    # columns no step touched (cannot happen for a consistent partition)
    gb = np.nan_to_num(gb)
    dist = PolyDisturbance(orders, a_plus, a_minus, centers)
    return ParamSet(spec, gb, dist, "mlse", {"method": "mlse", "steps": steps})


def _safe_rel(pred, meas) -> float:
    try:
        return rms_relative(pred, meas)
    except ValueError:
        return float("nan")


def joint_errors(params: ParamSet, dataset: Dataset, joint: int) -> dict:
    """Row-``joint`` (0-based) errors of the directional prediction on ``dataset``."""
    pred = params.predict(dataset.q, dataset.dirs)[:, joint]
    meas = dataset.tau[:, joint]
    err = pred - meas
    return {
        "rms_relative_pct": _safe_rel(pred, meas),
        "rms_abs": float(np.sqrt(np.mean(err**2))),
        "max_abs": float(np.max(np.abs(err))),
    }


def estimation_report(params: ParamSet, datasets: Sequence[Dataset]) -> dict:
    """Per-joint fit diagnostics on each joint's own dataset."""
    report = {}
    steps = params.provenance.get("steps", {})
    for i, ds in enumerate(datasets):
        row = joint_errors(params, ds, i)
        cond = steps.get(i + 1, {}).get(
            "condition_number", params.provenance.get("condition_number", float("nan"))
        )
        report[f"joint{i + 1}"] = {"condition_number": float(cond), **row}
    return report


def interleaved_split(count: int, train_fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic, evenly interleaved train/test indices."""
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError("split must lie in (0, 1)")
    f = 1.0 - train_fraction
    idx = np.arange(count)
    is_test = np.floor((idx + 1) * f) > np.floor(idx * f)
    train, test = idx[~is_test], idx[is_test]
    if len(train) == 0 or len(test) == 0:
        raise ValidationError(f"not enough samples ({count}) for a train/test split")
    return train, test


def order_sweep(
    datasets: Sequence[Dataset],
    spec: GravityRegressorSpec,
    k_range: Sequence[int],
    split: float = 0.7,
    base_orders: Sequence[int] | None = None,
    joints: Sequence[int] | None = None,
) -> dict:
    """Train/test RMS absolute error versus polynomial order.

    The order of one joint (1-based in ``joints``) is varied at a time while the
    others keep ``base_orders``, so the training error is nested in k.
    """
    k_range = list(k_range)
    if not k_range:
        raise ValidationError("k_range is empty")
    n = spec.model.n_joints
    base_orders = tuple(base_orders or (4,) * n)
    joints = list(joints or range(1, n + 1))
    part = build_partition(spec)
    trains, tests = [], []
    for ds in datasets:
        tr, te = interleaved_split(len(ds), split)
        trains.append(ds.subset(tr))
        tests.append(ds.subset(te))
    Ytr = [spec.regressor(d.q) for d in trains]
    rows = []
    best = {}
    for j in joints:
        i = j - 1
        for k in k_range:
            orders = list(base_orders)
            orders[i] = k
            try:
                p = mlse(trains, spec, orders, partition=part, gravity_regressors=Ytr)
            except IdentifiabilityError as exc:
                # high orders can absorb the gravity columns of a joint swept alone
                log.info("order %d on joint %d not identifiable: %s", k, j, exc)
                rows.append({"joint": j, "order": k, "train_rms": float("nan"),
                             "test_rms": float("nan"), "identifiable": False})
                continue
            rows.append(
                {
                    "joint": j,
                    "order": k,
                    "train_rms": joint_errors(p, trains[i], i)["rms_abs"],
                    "test_rms": joint_errors(p, tests[i], i)["rms_abs"],
                    "identifiable": True,
                }
            )
        mine = [r for r in rows if r["joint"] == j and r["identifiable"]]
        if not mine:
            raise IdentifiabilityError(f"no order in {k_range} is identifiable", joint=j)
        best[j] = min(mine, key=lambda r: r["test_rms"])["order"]
    return {"rows": rows, "best_order": best}
