"""Serial-chain DH kinematics with affine joint coupling.

A model is a list of chains sharing the base frame. Every DH row is driven by
an affine combination of the actuated joint coordinates, which lets a second
chain reproduce a parallelogram mechanism. Every row also counts as a link
that may carry mass; links are numbered chain-major.

Batched helpers take ``Q`` of shape ``(P, n)`` and return arrays with a
leading ``P`` axis.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from gravcomp.errors import ValidationError

FORMAT_VERSION = 1
DEFAULT_MODEL_PATH = Path(__file__).parent / "data" / "mtm_like.yaml"


def wrap_angle(x: float) -> float:
    """Map an angle to (-pi, pi]."""
    y = math.remainder(float(x), 2.0 * math.pi)
    if y <= -math.pi:
        y += 2.0 * math.pi
    return y


@dataclass(frozen=True)
class DhRow:
    """One standard-DH row. ``coupling`` maps joint index -> coefficient and
    ``offset`` is the constant term of the affine drive q_eff = offset + sum c_j q_j."""

    a: float
    alpha: float
    d: float
    theta_offset: float = 0.0
    coupling: dict[int, float] = field(default_factory=dict)
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", wrap_angle(self.alpha))
        object.__setattr__(self, "theta_offset", wrap_angle(self.theta_offset))
        object.__setattr__(
            self, "coupling", {int(k): float(v) for k, v in self.coupling.items()}
        )

    @property
    def joint_index(self) -> int | str:
        """Single driving joint, or ``"fixed"`` when nothing drives the row."""
        if not self.coupling:
            return "fixed"
        if len(self.coupling) == 1:
            (j, c), = self.coupling.items()
            if c == 1.0 and self.offset == 0.0:
                return j
        return "coupled"


@dataclass(frozen=True)
class KinematicModel:
    chains: tuple[tuple[DhRow, ...], ...]
    n_joints: int
    joint_limits: np.ndarray  # (n, 2) radians
    gravity_direction: np.ndarray = field(
        default_factory=lambda: np.array([0.0, 0.0, -1.0])
    )
    name: str = "model"
    chain_names: tuple[str, ...] = ()

    def __post_init__(self):
        lim = np.asarray(self.joint_limits, dtype=float).reshape(self.n_joints, 2)
        g = np.asarray(self.gravity_direction, dtype=float).reshape(3)
        if np.any(lim[:, 0] > lim[:, 1]):
            raise ValidationError("joint_limits: lower bound above upper bound")
        if abs(np.linalg.norm(g) - 1.0) > 1e-12:
            raise ValidationError("gravity_direction: must have unit norm")
        for c, chain in enumerate(self.chains):
            for r, row in enumerate(chain):
                for j in row.coupling:
                    if not 0 <= j < self.n_joints:
                        raise ValidationError(
                            f"chains[{c}].rows[{r}].coupling: joint {j + 1} does not exist"
                        )
        object.__setattr__(self, "joint_limits", lim)
        object.__setattr__(self, "gravity_direction", g)
        object.__setattr__(self, "chains", tuple(tuple(ch) for ch in self.chains))
        if not self.chain_names:
            object.__setattr__(
                self, "chain_names", tuple(f"chain{i}" for i in range(len(self.chains)))
            )

    @property
    def links(self) -> list[tuple[int, int]]:
        """(chain, row) for every link, chain-major."""
        return [(c, r) for c, ch in enumerate(self.chains) for r in range(len(ch))]

    @property
    def n_links(self) -> int:
        return sum(len(ch) for ch in self.chains)

    def coupling_matrix(self, chain: int) -> tuple[np.ndarray, np.ndarray]:
        """(C, c0) with q_eff = c0 + C @ q for the rows of ``chain``."""
        rows = self.chains[chain]
        C = np.zeros((len(rows), self.n_joints))
        c0 = np.zeros(len(rows))
        for r, row in enumerate(rows):
            c0[r] = row.offset
            for j, v in row.coupling.items():
                C[r, j] = v
        return C, c0

    def within_limits(self, q, tol: float = 1e-12) -> bool:
        q = np.asarray(q, dtype=float)
        lo, hi = self.joint_limits[:, 0], self.joint_limits[:, 1]
        return bool(np.all(q >= lo - tol) and np.all(q <= hi + tol))

    def check_limits(self, q) -> None:
        q = np.atleast_2d(np.asarray(q, dtype=float))
        for k, qk in enumerate(q):
            if not self.within_limits(qk):
                raise ValidationError(f"configuration {k} outside joint limits: {qk.tolist()}")

    def mid_range(self) -> np.ndarray:
        return self.joint_limits.mean(axis=1)

    # serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        chains = []
        for name, chain in zip(self.chain_names, self.chains):
            rows = []
            for row in chain:
                rows.append(
                    {
                        "a": float(row.a),
                        "alpha": float(row.alpha),
                        "d": float(row.d),
                        "theta_offset": float(row.theta_offset),
                        "coupling": {
                            "offset": float(row.offset),
                            "terms": {j + 1: float(c) for j, c in sorted(row.coupling.items())},
                        },
                    }
                )
            chains.append({"name": name, "rows": rows})
        return {
            "format": FORMAT_VERSION,
            "name": self.name,
            "angle_unit": "rad",
            "joints": self.n_joints,
            "joint_limits": [[float(lo), float(hi)] for lo, hi in self.joint_limits],
            "gravity_direction": [float(x) for x in self.gravity_direction],
            "chains": chains,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KinematicModel":
        if not isinstance(data, dict):
            raise ValidationError("model: expected a mapping")
        if data.get("format") != FORMAT_VERSION:
            raise ValidationError(f"format: unsupported version {data.get('format')!r}")
        unit = data.get("angle_unit", "rad")
        if unit not in ("rad", "deg"):
            raise ValidationError(f"angle_unit: expected 'rad' or 'deg', got {unit!r}")
        scale = math.pi / 180.0 if unit == "deg" else 1.0
        try:
            n = int(data["joints"])
        except (KeyError, TypeError, ValueError):
            raise ValidationError("joints: missing or not an integer") from None
        try:
            limits = np.asarray(data["joint_limits"], dtype=float) * scale
        except (KeyError, TypeError, ValueError):
            raise ValidationError("joint_limits: missing or malformed") from None
        if limits.shape != (n, 2):
            raise ValidationError(f"joint_limits: expected {n} [lo, hi] pairs")
        chains, names = [], []
        for c, ch in enumerate(data.get("chains") or []):
            names.append(str(ch.get("name", f"chain{c}")))
            rows = []
            for r, rd in enumerate(ch.get("rows") or []):
                key = f"chains[{c}].rows[{r}]"
                try:
                    a, alpha, d = float(rd["a"]), float(rd["alpha"]) * scale, float(rd["d"])
                except (KeyError, TypeError, ValueError):
                    raise ValidationError(f"{key}: a/alpha/d missing or not numeric") from None
                theta = float(rd.get("theta_offset", 0.0)) * scale
                coupling, offset = _parse_drive(rd, key, scale)
                rows.append(DhRow(a, alpha, d, theta, coupling, offset))
            chains.append(tuple(rows))
        if not chains:
            raise ValidationError("chains: at least one chain required")
        return cls(
            chains=tuple(chains),
            n_joints=n,
            joint_limits=limits,
            gravity_direction=np.asarray(data.get("gravity_direction", [0, 0, -1]), dtype=float),
            name=str(data.get("name", "model")),
            chain_names=tuple(names),
        )

    def digest(self) -> str:
        """Stable hash of the model contents."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, KinematicModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None


def _parse_drive(rd: dict, key: str, scale: float) -> tuple[dict[int, float], float]:
    if "joint" in rd and "coupling" in rd:
        raise ValidationError(f"{key}: give either 'joint' or 'coupling', not both")
    if "joint" in rd:
        j = rd["joint"]
        if j == "fixed":
            return {}, 0.0
        try:
            return {int(j) - 1: 1.0}, 0.0
        except (TypeError, ValueError):
            raise ValidationError(f"{key}.joint: expected an index or 'fixed'") from None
    if "coupling" in rd:
        cp = rd["coupling"] or {}
        try:
            terms = {int(j) - 1: float(v) for j, v in (cp.get("terms") or {}).items()}
            offset = float(cp.get("offset", 0.0)) * scale
        except (TypeError, ValueError, AttributeError):
            raise ValidationError(f"{key}.coupling: malformed terms") from None
        return terms, offset
    return {}, 0.0


def load_model(path: str | Path | None = None) -> KinematicModel:
    path = DEFAULT_MODEL_PATH if path is None else Path(path)
    with open(path) as fh:
        return KinematicModel.from_dict(yaml.safe_load(fh))


def default_model() -> KinematicModel:
    """The shipped 6-DOF MTM-like description (representative geometry)."""
    return load_model(DEFAULT_MODEL_PATH)


@dataclass(frozen=True)
class LinkMassParams:
    mass: np.ndarray  # (L,)
    com: np.ndarray  # (L, 3), each in its own link frame

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float).reshape(-1)
        r = np.asarray(self.com, dtype=float).reshape(len(m), 3)
        object.__setattr__(self, "mass", m)
        object.__setattr__(self, "com", r)

    def to_full(self) -> np.ndarray:
        """Stack (m r_x, m r_y, m r_z, m) per link."""
        return np.column_stack([self.mass[:, None] * self.com, self.mass]).reshape(-1)

    @classmethod
    def from_full(cls, beta: np.ndarray) -> "LinkMassParams":
        b = np.asarray(beta, dtype=float).reshape(-1, 4)
        m = b[:, 3]
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(m[:, None] != 0, b[:, :3] / m[:, None], 0.0)
        return cls(m, r)

    def scaled(self, factor: float) -> "LinkMassParams":
        return LinkMassParams(self.mass * factor, self.com.copy())


# transforms -------------------------------------------------------------


def _dh_batch(theta: np.ndarray, row: DhRow) -> np.ndarray:
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = math.cos(row.alpha), math.sin(row.alpha)
    A = np.zeros(theta.shape + (4, 4))
    A[..., 0, 0] = ct
    A[..., 0, 1] = -st * ca
    A[..., 0, 2] = st * sa
    A[..., 0, 3] = row.a * ct
    A[..., 1, 0] = st
    A[..., 1, 1] = ct * ca
    A[..., 1, 2] = -ct * sa
    A[..., 1, 3] = row.a * st
    A[..., 2, 1] = sa
    A[..., 2, 2] = ca
    A[..., 2, 3] = row.d
    A[..., 3, 3] = 1.0
    return A


def link_transform(row: DhRow, q: float) -> np.ndarray:
    """A(q) = Rot_z(theta_offset + q) Trans_z(d) Trans_x(a) Rot_x(alpha).

    ``q`` is the row's effective coordinate (after coupling).
    """
    return _dh_batch(np.asarray(row.theta_offset + q, dtype=float), row)


def resolve_coupling(model: KinematicModel, q) -> list[np.ndarray]:
    """Effective row coordinates per chain for an actuated joint vector."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.n_joints,):
        raise ValidationError(f"expected {model.n_joints} joint values, got shape {q.shape}")
    out = []
    for c in range(len(model.chains)):
        C, c0 = model.coupling_matrix(c)
        out.append(c0 + C @ q)
    return out


def chain_frames(model: KinematicModel, chain: int, Q: np.ndarray) -> np.ndarray:
    """Cumulative frames of one chain, shape (P, R+1, 4, 4); index 0 is the base."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    rows = model.chains[chain]
    C, c0 = model.coupling_matrix(chain)
    qeff = c0 + Q @ C.T
    P = Q.shape[0]
    T = np.empty((P, len(rows) + 1, 4, 4))
    T[:, 0] = np.eye(4)
    for r, row in enumerate(rows):
        T[:, r + 1] = T[:, r] @ _dh_batch(row.theta_offset + qeff[:, r], row)
    return T


def forward(model: KinematicModel, q, chain: int = 0) -> np.ndarray:
    """Base-to-tip transform of a chain (last frame of the primary chain by default)."""
    return chain_frames(model, chain, np.asarray(q, dtype=float)[None])[0, -1]


def com_position(
    model: KinematicModel,
    masses: LinkMassParams,
    q,
    link: int,
    check_limits: bool = True,
) -> np.ndarray:
    """Base-frame COM of ``link`` (0-based, chain-major numbering)."""
    if not 0 <= link < model.n_links:
        raise IndexError(f"link {link} out of range 0..{model.n_links - 1}")
    q = np.asarray(q, dtype=float)
    if check_limits:
        model.check_limits(q)
    c, r = model.links[link]
    T = chain_frames(model, c, q[None])[0, r + 1]
    return T[:3, :3] @ masses.com[link] + T[:3, 3]


def random_configurations(model: KinematicModel, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    lo, hi = model.joint_limits[:, 0], model.joint_limits[:, 1]
    return lo + (hi - lo) * rng.random((count, model.n_joints))


def rotation_angle(R0: np.ndarray, R1: np.ndarray) -> float:
    """Geodesic angle between two rotations, radians."""
    R = R0.T @ R1
    cos = (np.trace(R) - 1.0) / 2.0
    sin = 0.5 * np.linalg.norm([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return float(np.arctan2(sin, cos))


def serial_model(rows: Sequence[DhRow], limits, gravity=(0.0, 0.0, -1.0), name="serial"):
    """Convenience constructor for a single uncoupled chain (row k driven by joint k)."""
    chain = tuple(
        DhRow(r.a, r.alpha, r.d, r.theta_offset, r.coupling or {k: 1.0}, r.offset)
        for k, r in enumerate(rows)
    )
    return KinematicModel(
        chains=(chain,),
        n_joints=len(rows),
        joint_limits=np.asarray(limits, dtype=float),
        gravity_direction=np.asarray(gravity, dtype=float),
        name=name,
    )
