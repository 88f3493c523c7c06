"""Direction-dependent polynomial model of cable and spring disturbance torques."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gravcomp.errors import ValidationError

POSITIVE = 1
NEGATIVE = -1

# Order 4 everywhere except joint 2, whose narrow sweep only supports a linear term.
DEFAULT_ORDERS = (4, 1, 4, 4, 4, 4)


def step(dq) -> np.ndarray:
    """u(x): 1 for x > 0, 0 otherwise (so u(0) = 0)."""
    return (np.asarray(dq, dtype=float) > 0).astype(float)


def direction_tag(dq) -> np.ndarray:
    """Map joint differences to +1/-1 tags with the u(0) = 0 convention."""
    return np.where(np.asarray(dq, dtype=float) > 0, POSITIVE, NEGATIVE).astype(int)


def phi(q, k: int) -> np.ndarray:
    """[1, q, ..., q^k]; broadcasts over a leading axis of ``q``."""
    if k < 0:
        raise ValueError("polynomial order must be >= 0")
    q = np.asarray(q, dtype=float)
    return q[..., None] ** np.arange(k + 1)


@dataclass
class PolyDisturbance:
    """Per-joint positive/negative polynomial coefficients.

    ``centers`` shifts q before powering (zero by default).
    """

    orders: tuple[int, ...]
    a_plus: list[np.ndarray]
    a_minus: list[np.ndarray]
    centers: np.ndarray = field(default=None)

    def __post_init__(self):
        self.orders = tuple(int(k) for k in self.orders)
        self.a_plus = [np.asarray(a, dtype=float).reshape(-1) for a in self.a_plus]
        self.a_minus = [np.asarray(a, dtype=float).reshape(-1) for a in self.a_minus]
        n = len(self.orders)
        if self.centers is None:
            self.centers = np.zeros(n)
        self.centers = np.asarray(self.centers, dtype=float).reshape(n)
        if len(self.a_plus) != n or len(self.a_minus) != n:
            raise ValidationError("disturbance: need one coefficient pair per joint")
        for i, k in enumerate(self.orders):
            if k < 0:
                raise ValidationError(f"disturbance.joint{i + 1}.order: must be >= 0")
            if len(self.a_plus[i]) != k + 1 or len(self.a_minus[i]) != k + 1:
                raise ValidationError(
                    f"disturbance.joint{i + 1}: coefficient vectors must have length {k + 1}"
                )

    @classmethod
    def zeros(cls, orders: Sequence[int], centers=None) -> "PolyDisturbance":
        return cls(
            tuple(orders),
            [np.zeros(k + 1) for k in orders],
            [np.zeros(k + 1) for k in orders],
            centers,
        )

    @property
    def n_joints(self) -> int:
        return len(self.orders)

    def basis(self, i: int, q) -> np.ndarray:
        return phi(np.asarray(q, dtype=float) - self.centers[i], self.orders[i])

    def plus(self, q) -> np.ndarray:
        """Positive-direction torques for a joint vector (or batch)."""
        q = np.asarray(q, dtype=float)
        return np.stack([self.basis(i, q[..., i]) @ self.a_plus[i] for i in range(self.n_joints)], -1)

    def minus(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return np.stack([self.basis(i, q[..., i]) @ self.a_minus[i] for i in range(self.n_joints)], -1)

    def torque(self, q, dirs) -> np.ndarray:
        u = (np.asarray(dirs) > 0).astype(float)
        return u * self.plus(q) + (1.0 - u) * self.minus(q)

    def stacked(self) -> np.ndarray:
        """Parameter vector [a_1+ .. a_n+, a_1- .. a_n-]."""
        return np.concatenate(self.a_plus + self.a_minus)

    @classmethod
    def from_stacked(cls, orders, beta, centers=None) -> "PolyDisturbance":
        sizes = [k + 1 for k in orders]
        beta = np.asarray(beta, dtype=float)
        if len(beta) != 2 * sum(sizes):
            raise ValidationError("disturbance: stacked vector has the wrong length")
        cuts = np.cumsum(sizes)[:-1]
        half = sum(sizes)
        return cls(
            tuple(orders),
            np.split(beta[:half], cuts),
            np.split(beta[half:], cuts),
            centers,
        )

    def to_dict(self) -> dict:
        return {
            f"joint{i + 1}": {
                "order": k,
                "center": float(self.centers[i]),
                "positive": [float(x) for x in self.a_plus[i]],
                "negative": [float(x) for x in self.a_minus[i]],
            }
            for i, k in enumerate(self.orders)
        }

    @classmethod
    def from_dict(cls, data: dict, n_joints: int) -> "PolyDisturbance":
        orders, ap, am, centers = [], [], [], []
        for i in range(n_joints):
            key = f"joint{i + 1}"
            entry = data.get(key) if isinstance(data, dict) else None
            if entry is None:
                raise ValidationError(f"disturbance.{key}: missing")
            try:
                orders.append(int(entry["order"]))
                ap.append(entry["positive"])
                am.append(entry["negative"])
                centers.append(float(entry.get("center", 0.0)))
            except (KeyError, TypeError, ValueError):
                raise ValidationError(f"disturbance.{key}: malformed entry") from None
        return cls(tuple(orders), ap, am, np.asarray(centers))


def tau_ext_joint(d: PolyDisturbance, i: int, q: float, direction: int) -> float:
    coeffs = d.a_plus[i] if direction > 0 else d.a_minus[i]
    return float(d.basis(i, q) @ coeffs)


def activation_matrix(dq, orders: Sequence[int]) -> np.ndarray:
    """Diagonal U with k_i + 1 copies of u(dq_i) per joint."""
    u = step(dq)
    return np.diag(np.repeat(u, [k + 1 for k in orders]))


def phi_matrix(q, orders: Sequence[int], centers=None) -> np.ndarray:
    """Block-diagonal Phi(q), n x sum(k_i + 1)."""
    q = np.asarray(q, dtype=float)
    centers = np.zeros(len(orders)) if centers is None else np.asarray(centers)
    sizes = [k + 1 for k in orders]
    out = np.zeros((len(orders), sum(sizes)))
    col = 0
    for i, k in enumerate(orders):
        out[i, col: col + k + 1] = phi(q[i] - centers[i], k)
        col += k + 1
    return out


def disturbance_regressor(q, dq, orders: Sequence[int], centers=None) -> np.ndarray:
    """[Phi U, Phi (1 - U)] for one sample. ``dq`` may be motion or +/-1 tags."""
    Phi = phi_matrix(q, orders, centers)
    U = activation_matrix(dq, orders)
    return np.hstack([Phi @ U, Phi @ (np.eye(U.shape[0]) - U)])


def disturbance_regressor_batch(Q, dirs, orders: Sequence[int], centers=None) -> np.ndarray:
    """Vectorized form over samples, shape (P, n, 2 sum(k_i + 1))."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    u = step(np.atleast_2d(dirs))
    P, n = Q.shape
    centers = np.zeros(n) if centers is None else np.asarray(centers)
    sizes = [k + 1 for k in orders]
    half = sum(sizes)
    out = np.zeros((P, n, 2 * half))
    col = 0
    for i, k in enumerate(orders):
        basis = phi(Q[:, i] - centers[i], k)
        out[:, i, col: col + k + 1] = basis * u[:, i, None]
        out[:, i, half + col: half + col + k + 1] = basis * (1.0 - u[:, i, None])
        col += k + 1
    return out
