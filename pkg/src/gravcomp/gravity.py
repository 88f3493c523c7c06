"""Static gravity torque, its linear regressor and numerical base-parameter reduction.

Full parameters are four per link: (m r_x, m r_y, m r_z, m), with r in the
link frame. Torques follow the holding convention tau = +dP/dq.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from gravcomp.errors import IllConditionedProbeError, ValidationError
from gravcomp.kinematics import (
    KinematicModel,
    LinkMassParams,
    chain_frames,
    random_configurations,
)

G = 9.81
PARAMS_PER_LINK = 4
RANK_TOL_FACTOR = 1e-8


def rank_tolerance(s: np.ndarray, shape: tuple[int, int]) -> float:
    """Rank threshold: largest singular value x 1e-8 x largest dimension."""
    if s.size == 0:
        return 0.0
    return float(s[0]) * RANK_TOL_FACTOR * max(shape)


def potential_energy(model: KinematicModel, masses: LinkMassParams, q, g: float = G) -> float:
    """P = sum_i m_i g h_i, h measured against the gravity direction."""
    q = np.asarray(q, dtype=float)
    up = -model.gravity_direction
    total = 0.0
    link = 0
    for c, chain in enumerate(model.chains):
        T = chain_frames(model, c, q[None])[0]
        for r in range(len(chain)):
            p = T[r + 1, :3, :3] @ masses.com[link] + T[r + 1, :3, 3]
            total += masses.mass[link] * g * float(up @ p)
            link += 1
    return total


def gravity_regressor_full(model: KinematicModel, Q, g: float = G) -> np.ndarray:
    """Full regressor. ``Q`` (n,) -> (n, 4L); ``Q`` (P, n) -> (P, n, 4L).

    Uses dp/dtheta_k = z_k x (p - o_k), so up . dp = (p - o_k) . (up x z_k).
    """
    Q = np.asarray(Q, dtype=float)
    single = Q.ndim == 1
    Q = np.atleast_2d(Q)
    P, n = Q.shape
    up = -model.gravity_direction
    Y = np.zeros((P, n, PARAMS_PER_LINK * model.n_links))
    link = 0
    for c, chain in enumerate(model.chains):
        T = chain_frames(model, c, Q)
        C, _ = model.coupling_matrix(c)
        z = T[:, :, :3, 2]
        o = T[:, :, :3, 3]
        e = np.cross(up, z)  # (P, R+1, 3)
        for r in range(len(chain)):
            R = T[:, r + 1, :3, :3]
            p0 = o[:, r + 1]
            block = np.zeros((P, n, PARAMS_PER_LINK))
            for k in range(r + 1):
                drive = C[k]
                if not drive.any():
                    continue
                ek = e[:, k]
                w = np.empty((P, PARAMS_PER_LINK))
                w[:, :3] = np.einsum("pi,pij->pj", ek, R)
                w[:, 3] = np.einsum("pi,pi->p", p0 - o[:, k], ek)
                block += drive[None, :, None] * w[:, None, :]
            Y[:, :, PARAMS_PER_LINK * link: PARAMS_PER_LINK * (link + 1)] = g * block
            link += 1
    return Y[0] if single else Y


def gravity_torque(model: KinematicModel, masses: LinkMassParams, q, g: float = G) -> np.ndarray:
    """Holding torque against gravity, analytic."""
    return gravity_regressor_full(model, q, g) @ masses.to_full()


@dataclass(frozen=True)
class GravityRegressorSpec:
    """Numerically reduced (lumped) gravity parametrization.

    base = beta_full[base_columns] + combination @ beta_full[dependent_columns]
    """

    model: KinematicModel
    base_columns: np.ndarray
    dependent_columns: np.ndarray
    combination: np.ndarray  # (b, full - b)
    g: float = G

    @property
    def full_param_count(self) -> int:
        return PARAMS_PER_LINK * self.model.n_links

    @property
    def b(self) -> int:
        return len(self.base_columns)

    def reduce(self, beta_full) -> np.ndarray:
        beta_full = np.asarray(beta_full, dtype=float)
        return beta_full[self.base_columns] + self.combination @ beta_full[self.dependent_columns]

    def regressor(self, Q) -> np.ndarray:
        return gravity_regressor_full(self.model, Q, self.g)[..., self.base_columns]

    def column_labels(self) -> list[str]:
        names = ("mrx", "mry", "mrz", "m")
        return [f"link{c // 4 + 1}.{names[c % 4]}" for c in self.base_columns]

    def to_dict(self) -> dict:
        return {
            "g": float(self.g),
            "b": int(self.b),
            "base_columns": [int(i) for i in self.base_columns],
            "dependent_columns": [int(i) for i in self.dependent_columns],
            "combination": [[float(x) for x in row] for row in self.combination],
        }

    @classmethod
    def from_dict(cls, model: KinematicModel, data: dict) -> "GravityRegressorSpec":
        try:
            base = np.asarray(data["base_columns"], dtype=int)
            dep = np.asarray(data["dependent_columns"], dtype=int)
            K = np.asarray(data["combination"], dtype=float).reshape(len(base), len(dep))
            g = float(data.get("g", G))
        except (KeyError, TypeError, ValueError):
            raise ValidationError("gravity: malformed regressor spec") from None
        if int(data.get("b", len(base))) != len(base):
            raise ValidationError("gravity.b: does not match base_columns")
        full = PARAMS_PER_LINK * model.n_links
        if sorted(np.concatenate([base, dep]).tolist()) != list(range(full)):
            raise ValidationError("gravity: base/dependent columns must partition the full set")
        return cls(model, base, dep, K, g)


def _numerical_rank(W: np.ndarray) -> int:
    s = np.linalg.svd(W, compute_uv=False)
    return int(np.sum(s > rank_tolerance(s, W.shape)))


def reduce_columns(W: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rank-revealing QR column selection on a stacked regressor.

    Returns (base, dependent, K) with W[:, dependent] ~= W[:, base] @ K.
    """
    rank = _numerical_rank(W)
    _, _, piv = scipy.linalg.qr(W, mode="economic", pivoting=True)
    base = np.sort(piv[:rank])
    dep = np.sort(piv[rank:])
    if len(dep):
        K, *_ = np.linalg.lstsq(W[:, base], W[:, dep], rcond=None)
    else:
        K = np.zeros((rank, 0))
    return base, dep, K


def reduce_to_base(
    model: KinematicModel,
    probe_configs,
    g: float = G,
    check: bool = True,
    check_seed: int = 0,
) -> GravityRegressorSpec:
    """Reduce the full gravity parametrization to identifiable base parameters.

    With ``check`` the rank is compared against ten times as many uniformly
    drawn configurations; a lower rank on the given probes means they do not
    excite the workspace.
    """
    Q = np.atleast_2d(np.asarray(probe_configs, dtype=float))
    full = PARAMS_PER_LINK * model.n_links
    if Q.shape[0] < 2 * full:
        raise IllConditionedProbeError(
            f"need at least {2 * full} probe configurations, got {Q.shape[0]}"
        )
    W = gravity_regressor_full(model, Q, g).reshape(-1, full)
    base, dep, K = reduce_columns(W)
    if check:
        Qc = random_configurations(model, 10 * Q.shape[0], check_seed)
        Wc = gravity_regressor_full(model, Qc, g).reshape(-1, full)
        rank_ref = _numerical_rank(Wc)
        if len(base) < rank_ref:
            raise IllConditionedProbeError(
                f"probe set reaches rank {len(base)}, workspace rank is {rank_ref}"
            )
    return GravityRegressorSpec(model, base, dep, K, g)


def default_spec(model: KinematicModel, probes: int = 500, seed: int = 0) -> GravityRegressorSpec:
    return reduce_to_base(model, random_configurations(model, probes, seed))
