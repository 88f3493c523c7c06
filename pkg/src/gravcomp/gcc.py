"""Gravity compensation controller.

tau_c = tau_g_hat(q) + tau_ec_hat(q) + xi(dq) * tau_ed_hat(q), where tau_ec is
the mean and tau_ed half the difference of the two directional polynomials,
and xi ramps from 0 inside a dead band to +/-alpha past saturation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gravcomp.errors import ValidationError

# No values are reported for these; chosen so encoder-noise dq stays in the
# dead band while deliberate motion saturates.
DEFAULT_DEADBAND = 1e-3
DEFAULT_SATURATION = 8e-3
DEFAULT_ALPHA = 0.5


@dataclass(frozen=True, eq=False)
class GccConfig:
    deadband: np.ndarray
    saturation: np.ndarray
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        db = np.asarray(self.deadband, dtype=float).reshape(-1)
        sat = np.asarray(self.saturation, dtype=float).reshape(-1)
        if db.shape != sat.shape:
            raise ValidationError("gcc: deadband and saturation need one value per joint")
        if np.any(db < 0):
            raise ValidationError("gcc.deadband: must be >= 0")
        if np.any(db >= sat):
            raise ValidationError("gcc.saturation: must exceed the dead band on every joint")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError("gcc.alpha: must lie in [0, 1]")
        object.__setattr__(self, "deadband", db)
        object.__setattr__(self, "saturation", sat)
        object.__setattr__(self, "alpha", float(self.alpha))

    def __eq__(self, other):
        if not isinstance(other, GccConfig):
            return NotImplemented
        return (
            np.array_equal(self.deadband, other.deadband)
            and np.array_equal(self.saturation, other.saturation)
            and self.alpha == other.alpha
        )

    @classmethod
    def default(cls, n_joints: int, alpha: float = DEFAULT_ALPHA) -> "GccConfig":
        return cls(
            np.full(n_joints, DEFAULT_DEADBAND), np.full(n_joints, DEFAULT_SATURATION), alpha
        )

    def to_dict(self) -> dict:
        return {
            "deadband": [float(x) for x in self.deadband],
            "saturation": [float(x) for x in self.saturation],
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GccConfig":
        try:
            return cls(data["deadband"], data["saturation"], float(data.get("alpha", DEFAULT_ALPHA)))
        except KeyError as exc:
            raise ValidationError(f"gcc.{exc.args[0]}: missing") from None


def tau_ec_hat(params, q) -> np.ndarray:
    d = params.disturbance
    return 0.5 * (d.plus(q) + d.minus(q))


def tau_ed_hat(params, q) -> np.ndarray:
    d = params.disturbance
    return 0.5 * (d.plus(q) - d.minus(q))


def xi(config: GccConfig, dq) -> np.ndarray:
    """Per-joint direction compensation ratio (diagonal of the ratio matrix)."""
    dq = np.asarray(dq, dtype=float)
    mag = np.abs(dq)
    ramp = (mag - config.deadband) / (config.saturation - config.deadband)
    ramp = np.clip(ramp, 0.0, 1.0)
    return ramp * np.sign(dq) * config.alpha


def compensation_torque(params, config: GccConfig, q, dq) -> np.ndarray:
    """Total compensation torque for joint angles ``q`` and last joint step ``dq``."""
    q = np.asarray(q, dtype=float)
    d = params.disturbance
    plus, minus = d.plus(q), d.minus(q)
    ec = 0.5 * (plus + minus)
    ed = 0.5 * (plus - minus)
    return params.gravity(q) + ec + xi(config, dq) * ed


class Compensator:
    """Stateful wrapper that remembers the previous joint reading.

    Single owner; the first call sees dq = 0.
    """

    def __init__(self, params, config: GccConfig):
        self.params = params
        self.config = config
        self._prev = None

    def reset(self, q=None):
        self._prev = None if q is None else np.asarray(q, dtype=float).copy()

    def __call__(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        dq = np.zeros_like(q) if self._prev is None else q - self._prev
        self._prev = q.copy()
        return compensation_torque(self.params, self.config, q, dq)

    def as_controller(self):
        """Adapter for the drift simulator's (q, dq) controller signature."""
        return lambda q, dq: compensation_torque(self.params, self.config, q, dq)
