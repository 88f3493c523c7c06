"""Static measurement samples."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gravcomp.errors import ValidationError


@dataclass
class Dataset:
    """Static samples: joint angles, per-joint direction tags (+1/-1) and torques."""

    q: np.ndarray
    dirs: np.ndarray
    tau: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        self.dirs = np.atleast_2d(np.asarray(self.dirs)).astype(int)
        self.tau = np.atleast_2d(np.asarray(self.tau, dtype=float))
        if not (self.q.shape == self.dirs.shape == self.tau.shape):
            raise ValidationError(
                f"dataset: q{self.q.shape}, dirs{self.dirs.shape}, tau{self.tau.shape} disagree"
            )
        if not np.all(np.isin(self.dirs, (-1, 1))):
            raise ValidationError("dataset: direction tags must be +1 or -1")

    def __len__(self) -> int:
        return self.q.shape[0]

    @property
    def n_joints(self) -> int:
        return self.q.shape[1]

    @property
    def estimated_joint(self) -> int | None:
        """0-based index of the joint this dataset was collected for."""
        j = self.meta.get("estimated_joint")
        return None if j is None else int(j) - 1

    def subset(self, idx) -> "Dataset":
        return Dataset(self.q[idx], self.dirs[idx], self.tau[idx], dict(self.meta))

    @staticmethod
    def concatenate(datasets: Sequence["Dataset"]) -> "Dataset":
        return Dataset(
            np.vstack([d.q for d in datasets]),
            np.vstack([d.dirs for d in datasets]),
            np.vstack([d.tau for d in datasets]),
            {"source": "concatenated"},
        )
