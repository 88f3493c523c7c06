"""Ground-truth plant: static torque measurements and release (drift) dynamics.

The static measurement is tau = tau_g(q) + tau_ext(q, dir) + noise. For the
drift dynamics each joint obeys

    J q'' = tau_c - tau_g - tau_ec - c q' - s tau_ed

with s = sign(q') while moving. At rest the direction-dependent part acts
like static friction: the joint stays put while |tau_c - tau_g - tau_ec| does
not exceed |tau_ed|, and breaks away in the direction of the excess otherwise.
A joint whose velocity would change sign within a step is stopped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from gravcomp.dataset import Dataset
from gravcomp.disturbance import DEFAULT_ORDERS, PolyDisturbance
from gravcomp.errors import SimulationError, ValidationError
from gravcomp.gravity import G, gravity_torque
from gravcomp.kinematics import (
    KinematicModel,
    LinkMassParams,
    default_model,
    forward,
    random_configurations,
    rotation_angle,
)

log = logging.getLogger(__name__)

DEFAULT_INERTIA = 0.05
DEFAULT_DAMPING = 0.1
DEFAULT_DT = 1e-3
DEFAULT_DURATION = 2.0


# true disturbance curves -------------------------------------------------


@dataclass(frozen=True)
class PolynomialCurve:
    coefficients: tuple[float, ...]  # power basis in raw radians

    def __call__(self, q):
        return np.polynomial.polynomial.polyval(q, np.asarray(self.coefficients, dtype=float))

    def to_dict(self):
        return {"family": "polynomial", "coefficients": [float(c) for c in self.coefficients]}


@dataclass(frozen=True)
class PiecewiseLinearCurve:
    knots: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.knots) != len(self.values) or len(self.knots) < 2:
            raise ValidationError("piecewise_linear: need >= 2 knots with matching values")
        if np.any(np.diff(self.knots) <= 0):
            raise ValidationError("piecewise_linear.knots: must be strictly increasing")

    def __call__(self, q):
        return np.interp(q, self.knots, self.values)

    def to_dict(self):
        return {
            "family": "piecewise_linear",
            "knots": [float(x) for x in self.knots],
            "values": [float(x) for x in self.values],
        }


@dataclass(frozen=True)
class SinusoidPolyCurve:
    amplitude: float
    frequency: float  # rad^-1
    phase: float
    coefficients: tuple[float, ...] = ()

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        poly = np.polynomial.polynomial.polyval(q, np.asarray(self.coefficients or (0.0,), dtype=float))
        return self.amplitude * np.sin(self.frequency * q + self.phase) + poly

    def to_dict(self):
        return {
            "family": "sinusoid_polynomial",
            "amplitude": float(self.amplitude),
            "frequency": float(self.frequency),
            "phase": float(self.phase),
            "coefficients": [float(c) for c in self.coefficients],
        }


def curve_from_dict(data: dict, key: str):
    if not isinstance(data, dict):
        raise ValidationError(f"{key}: expected a mapping")
    family = data.get("family")
    try:
        if family == "polynomial":
            return PolynomialCurve(tuple(float(c) for c in data["coefficients"]))
        if family == "piecewise_linear":
            return PiecewiseLinearCurve(
                tuple(float(x) for x in data["knots"]), tuple(float(x) for x in data["values"])
            )
        if family == "sinusoid_polynomial":
            return SinusoidPolyCurve(
                float(data["amplitude"]),
                float(data["frequency"]),
                float(data.get("phase", 0.0)),
                tuple(float(c) for c in data.get("coefficients", ())),
            )
    except KeyError as exc:
        raise ValidationError(f"{key}.{exc.args[0]}: missing") from None
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{key}: {exc}") from None
    raise ValidationError(f"{key}.family: unknown family {family!r}")


def curves_from_poly(d: PolyDisturbance) -> list[tuple[PolynomialCurve, PolynomialCurve]]:
    """True curves equal to a model-class disturbance (centers must be zero)."""
    if np.any(d.centers != 0):
        raise ValueError("centered coefficients are not supported here")
    return [
        (PolynomialCurve(tuple(d.a_plus[i])), PolynomialCurve(tuple(d.a_minus[i])))
        for i in range(d.n_joints)
    ]


# plant -------------------------------------------------------------------


@dataclass
class PlantSpec:
    model: KinematicModel
    masses: LinkMassParams
    curves: list  # per joint (positive curve, negative curve)
    noise_sigma: float = 0.0
    inertia: np.ndarray = None
    damping: np.ndarray = None
    seed: int = 0
    g: float = G

    def __post_init__(self):
        n = self.model.n_joints
        if len(self.masses.mass) != self.model.n_links:
            raise ValidationError(f"links: expected {self.model.n_links} entries")
        if len(self.curves) != n:
            raise ValidationError(f"disturbance: expected {n} entries")
        self.inertia = np.broadcast_to(
            np.asarray(DEFAULT_INERTIA if self.inertia is None else self.inertia, dtype=float), (n,)
        ).copy()
        self.damping = np.broadcast_to(
            np.asarray(DEFAULT_DAMPING if self.damping is None else self.damping, dtype=float), (n,)
        ).copy()
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma: must be >= 0")
        if np.any(self.inertia <= 0):
            raise ValidationError("inertia: must be > 0")
        if np.any(self.damping < 0):
            raise ValidationError("damping: must be >= 0")
        if np.any(self.masses.mass < 0):
            raise ValidationError("links.mass: must be >= 0")
        self.seed = int(self.seed)
        probe = np.linspace(self.model.joint_limits[:, 0], self.model.joint_limits[:, 1], 257)
        for i, (cp, cm) in enumerate(self.curves):
            if not (np.all(np.isfinite(cp(probe[:, i]))) and np.all(np.isfinite(cm(probe[:, i])))):
                raise ValidationError(f"disturbance[{i}]: curve not finite on the joint range")

    def to_dict(self, model_ref=None) -> dict:
        return {
            "format": 1,
            "model": model_ref if model_ref is not None else self.model.to_dict(),
            "seed": self.seed,
            "noise_sigma": float(self.noise_sigma),
            "gravity": float(self.g),
            "inertia": [float(x) for x in self.inertia],
            "damping": [float(x) for x in self.damping],
            "links": [
                {"mass": float(m), "com": [float(x) for x in r]}
                for m, r in zip(self.masses.mass, self.masses.com)
            ],
            "disturbance": [
                {"positive": cp.to_dict(), "negative": cm.to_dict()} for cp, cm in self.curves
            ],
        }


@dataclass
class DriftResult:
    translational: float  # m
    rotational_deg: float
    q_trace: np.ndarray = field(repr=False)


Controller = Callable[[np.ndarray, np.ndarray], np.ndarray]


class Plant:
    """Simulated arm. Owns a noise stream, so one instance per collection run."""

    def __init__(self, spec: PlantSpec):
        self.spec = spec
        self.model = spec.model
        self._rng = np.random.default_rng(spec.seed)
        self._lo = self.model.joint_limits[:, 0]
        self._hi = self.model.joint_limits[:, 1]

    def reset_noise(self, seed: int | None = None):
        self._rng = np.random.default_rng(self.spec.seed if seed is None else seed)

    # true torques ---------------------------------------------------------

    def gravity(self, q) -> np.ndarray:
        return gravity_torque(self.model, self.spec.masses, q, self.spec.g)

    def _branches(self, q) -> tuple[np.ndarray, np.ndarray]:
        # curves are held constant outside the joint range
        q = np.clip(np.asarray(q, dtype=float), self._lo, self._hi)
        plus = np.stack([cp(q[..., i]) for i, (cp, _) in enumerate(self.spec.curves)], -1)
        minus = np.stack([cm(q[..., i]) for i, (_, cm) in enumerate(self.spec.curves)], -1)
        return plus, minus

    def disturbance(self, q, dirs) -> np.ndarray:
        plus, minus = self._branches(q)
        return np.where(np.asarray(dirs) > 0, plus, minus)

    def tau_ec(self, q) -> np.ndarray:
        plus, minus = self._branches(q)
        return 0.5 * (plus + minus)

    def tau_ed(self, q) -> np.ndarray:
        plus, minus = self._branches(q)
        return 0.5 * (plus - minus)

    # measurements ---------------------------------------------------------

    def measure_static(self, q, dirs) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        self.model.check_limits(q)
        tau = self.gravity(q) + self.disturbance(q, dirs)
        if self.spec.noise_sigma > 0:
            tau = tau + self._rng.normal(0.0, self.spec.noise_sigma, size=tau.shape)
        return tau

    def collect(self, configs, dirs, meta=None) -> Dataset:
        """Measure a whole schedule in order; noise draws follow the schedule."""
        configs = np.atleast_2d(np.asarray(configs, dtype=float))
        dirs = np.atleast_2d(np.asarray(dirs)).astype(int)
        tau = self.measure_static(configs, dirs)
        meta = dict(meta or {})
        meta.setdefault("source", "plant")
        meta.setdefault("plant_seed", self.spec.seed)
        return Dataset(configs, dirs, tau, meta)

    # release dynamics -----------------------------------------------------

    def drift_simulate(
        self,
        controller: Controller,
        q0,
        T: float = DEFAULT_DURATION,
        dt: float = DEFAULT_DT,
    ) -> DriftResult:
        """Release the arm at rest at ``q0`` under ``controller(q, dq)`` for ``T`` seconds."""
        q0 = np.asarray(q0, dtype=float)
        trace = self._integrate(lambda Q, dQ: controller(Q[0], dQ[0])[None], q0[None], T, dt, True)
        return _drift_metrics(self.model, trace[:, 0])

    def drift_batch(
        self,
        controller: Controller,
        Q0,
        T: float = DEFAULT_DURATION,
        dt: float = DEFAULT_DT,
    ) -> list[DriftResult]:
        """Independent releases from each row of ``Q0``; ``controller`` sees (P, n) arrays."""
        Q0 = np.atleast_2d(np.asarray(Q0, dtype=float))
        ends = self._integrate(controller, Q0, T, dt, False)
        return [_drift_metrics(self.model, ends[:, k]) for k in range(len(Q0))]

    def _integrate(self, controller, Q0, T, dt, keep_trace):
        if not (T > 0 and dt > 0 and dt <= T):
            raise ValidationError("need T > 0, dt > 0 and dt <= T")
        J, c = self.spec.inertia, self.spec.damping
        q = Q0.copy()
        q_prev = q.copy()
        v = np.zeros_like(q)
        steps = int(round(T / dt))
        trace = [q.copy()]
        for k in range(steps):
            tau_c = np.asarray(controller(q, q - q_prev), dtype=float)
            if not np.all(np.isfinite(tau_c)):
                bad = np.flatnonzero(~np.all(np.isfinite(np.atleast_2d(tau_c)), axis=-1))
                raise SimulationError(f"non-finite controller torque at step {k}", step=k, pose=int(bad[0]))
            plus, minus = self._branches(q)
            ec, ed = 0.5 * (plus + minus), 0.5 * (plus - minus)
            F = tau_c - self.gravity(q) - ec - c * v
            moving = v != 0.0
            s = np.where(moving, np.where(v > 0, 1.0, -1.0), np.sign(F))
            breakaway = ~moving & (np.abs(F) > np.abs(ed))
            acc = np.where(moving | breakaway, (F - s * ed) / J, 0.0)
            v_new = v + dt * acc
            v_new[moving & (np.sign(v_new) != np.sign(v))] = 0.0
            q_prev = q
            q = q + dt * v_new
            v = v_new
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v))):
                bad = np.flatnonzero(~np.all(np.isfinite(q) & np.isfinite(v), axis=1))
                raise SimulationError(
                    f"non-finite state at step {k}", step=k, pose=int(bad[0])
                )
            if keep_trace:
                trace.append(q.copy())
        if not keep_trace:
            trace.append(q)
        return np.stack(trace)

    def exact_inverse(self) -> Controller:
        """Controller that supplies true gravity plus true configuration-dependent torque."""
        return lambda q, dq: self.gravity(q) + self.tau_ec(q)


def _drift_metrics(model: KinematicModel, trace: np.ndarray) -> DriftResult:
    T0 = forward(model, trace[0])
    T1 = forward(model, trace[-1])
    return DriftResult(
        float(np.linalg.norm(T1[:3, 3] - T0[:3, 3])),
        float(np.degrees(rotation_angle(T0[:3, :3], T1[:3, :3]))),
        trace,
    )


def random_poses(model: KinematicModel, count: int, seed: int) -> np.ndarray:
    """Uniform per-joint samples inside the joint limits."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    return random_configurations(model, count, seed)


# presets -----------------------------------------------------------------

# (mass kg, COM in link frame m); primary chain then parallelogram
MTM_LIKE_LINKS = [
    (0.80, (0.0, 0.0, 0.0)),
    (0.60, (-0.14, 0.012, 0.0)),
    (0.35, (-0.18, 0.0, 0.015)),
    (0.25, (0.0, -0.05, -0.02)),
    (0.12, (0.02, 0.0, 0.03)),
    (0.08, (0.01, 0.02, 0.05)),
    (0.30, (0.0, 0.0, 0.0)),
    (0.15, (-0.05, 0.0, 0.0)),
    (0.20, (-0.14, 0.0, 0.02)),
]

# Chebyshev coefficients (N m) of the configuration-dependent part over each
# joint's limit range, orders 0..6.
_EC_CHEB = [
    (0.040, 0.080, -0.050, 0.040, 0.030, 0.020, -0.025),
    (-0.060, 0.090, 0.030, 0.025, -0.020, 0.015, 0.020),
    (0.030, -0.070, 0.040, 0.050, -0.030, -0.020, 0.020),
    (-0.020, 0.100, -0.060, -0.040, 0.040, 0.025, -0.020),
    (0.050, -0.090, 0.070, 0.030, 0.040, -0.030, 0.025),
    (0.010, 0.040, -0.030, 0.020, 0.020, 0.015, -0.015),
]
# direction-dependent half-width: mean and linear tilt
_ED = [(0.015, 0.004), (0.020, -0.005), (0.018, 0.003), (0.015, 0.005), (0.012, -0.003), (0.008, 0.002)]


def _power_coeffs(cheb, lo, hi) -> np.ndarray:
    c = np.polynomial.Chebyshev(cheb, domain=[lo, hi])
    coef = c.convert(kind=np.polynomial.Polynomial).coef
    return np.pad(coef, (0, len(cheb) - len(coef)))


def mtm_disturbance(model: KinematicModel, orders: Sequence[int] = DEFAULT_ORDERS) -> PolyDisturbance:
    """Model-class disturbance with per-joint true orders ``orders`` (max 6)."""
    a_plus, a_minus = [], []
    for i, k in enumerate(orders):
        lo, hi = model.joint_limits[i]
        ec = np.zeros(k + 1)
        ec[: min(k, 6) + 1] = _power_coeffs(_EC_CHEB[i][: min(k, 6) + 1], lo, hi)
        mean, tilt = _ED[i]
        ed = np.zeros(k + 1)
        ed[: min(k, 1) + 1] = _power_coeffs((mean, tilt)[: min(k, 1) + 1], lo, hi)
        a_plus.append(ec + ed)
        a_minus.append(ec - ed)
    return PolyDisturbance(tuple(orders), a_plus, a_minus)


def mtm_plant_spec(
    disturbance: str | Sequence[int] = "in-class",
    noise_sigma: float = 0.0,
    seed: int = 0,
    model: KinematicModel | None = None,
) -> PlantSpec:
    """Preset plant on the shipped model.

    ``disturbance``: ``"in-class"`` (orders 4,1,4,4,4,4, matching the default
    model), ``"order6"`` (order 6 on every joint), ``"none"``, or explicit orders.
    """
    model = model or default_model()
    masses = LinkMassParams(
        np.array([m for m, _ in MTM_LIKE_LINKS]), np.array([r for _, r in MTM_LIKE_LINKS])
    )
    if disturbance == "in-class":
        orders = DEFAULT_ORDERS
    elif disturbance == "order6":
        orders = (6,) * model.n_joints
    elif disturbance == "none":
        orders = None
    else:
        orders = tuple(int(k) for k in disturbance)
    if orders is None:
        zero = PolynomialCurve((0.0,))
        curves = [(zero, zero)] * model.n_joints
    else:
        curves = curves_from_poly(mtm_disturbance(model, orders))
    return PlantSpec(model, masses, curves, noise_sigma=noise_sigma, seed=seed)


def true_params(spec: PlantSpec, gspec, orders: Sequence[int] | None = None):
    """ParamSet equal to the plant when its curves lie in the polynomial class."""
    from gravcomp.estimation import ParamSet

    gb = gspec.reduce(spec.masses.to_full())
    polys = []
    for cp, cm in spec.curves:
        if not (isinstance(cp, PolynomialCurve) and isinstance(cm, PolynomialCurve)):
            raise ValidationError("true_params needs polynomial curves")
        polys.append((np.asarray(cp.coefficients), np.asarray(cm.coefficients)))
    if orders is None:
        orders = [max(len(p), len(m)) - 1 for p, m in polys]
    a_plus, a_minus = [], []
    for (p, m), k in zip(polys, orders):
        if max(len(p), len(m)) > k + 1:
            raise ValidationError("true curve order exceeds requested model order")
        a_plus.append(np.pad(p, (0, k + 1 - len(p))))
        a_minus.append(np.pad(m, (0, k + 1 - len(m))))
    return ParamSet(gspec, gb, PolyDisturbance(tuple(orders), a_plus, a_minus), "truth")
