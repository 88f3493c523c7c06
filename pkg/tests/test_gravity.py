import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gravcomp.errors import IllConditionedProbeError, ValidationError
from gravcomp.gravity import (
    G,
    GravityRegressorSpec,
    default_spec,
    gravity_regressor_full,
    gravity_torque,
    potential_energy,
    reduce_columns,
    reduce_to_base,
)
from gravcomp.kinematics import DhRow, LinkMassParams, random_configurations, serial_model
from gravcomp.plant import MTM_LIKE_LINKS

# regression constant: base-parameter count of the shipped model
SHIPPED_B = 10


def _true_masses():
    return LinkMassParams([m for m, _ in MTM_LIKE_LINKS], [r for _, r in MTM_LIKE_LINKS])


def _fd_torque(model, masses, q, h=1e-6):
    out = np.empty(len(q))
    for i in range(len(q)):
        e = np.zeros(len(q))
        e[i] = h
        out[i] = (potential_energy(model, masses, q + e) - potential_energy(model, masses, q - e)) / (2 * h)
    return out


def test_pendulum_closed_form():
    # joint axis horizontal, gravity along -y of the base
    m = serial_model([DhRow(0.0, 0.0, 0.0)], [[-4, 4]], gravity=(0, -1, 0))
    masses = LinkMassParams([1.3], [[0.25, 0.0, 0.0]])
    for q in np.linspace(-3, 3, 13):
        assert gravity_torque(m, masses, [q])[0] == pytest.approx(1.3 * G * 0.25 * math.cos(q), abs=1e-12)


def test_vertical_axis_has_no_gravity_torque():
    m = serial_model([DhRow(0.3, 0.0, 0.0)], [[-4, 4]])
    masses = LinkMassParams([2.0], [[0.1, 0.2, 0.0]])
    assert gravity_torque(m, masses, [0.7])[0] == 0.0


def test_matches_finite_differences(model):
    masses = _true_masses()
    t = time.perf_counter()
    Q = random_configurations(model, 100, 5)
    tau = gravity_torque(model, masses, Q)
    err = max(np.max(np.abs(tau[k] - _fd_torque(model, masses, q))) for k, q in enumerate(Q))
    assert err < 1e-5
    assert time.perf_counter() - t < 5.0


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 5.0), st.integers(0, 1000))
def test_linear_in_mass_parameters(scale, seed):
    m = serial_model([DhRow(0.3, math.pi / 2, 0.1), DhRow(0.2, 0.0, 0.0)], [[-3, 3], [-3, 3]], (0, -1, 0))
    rng = np.random.default_rng(seed)
    masses = LinkMassParams(rng.uniform(0.1, 2, 2), rng.normal(0, 0.1, (2, 3)))
    q = rng.uniform(-3, 3, 2)
    a = gravity_torque(m, masses.scaled(scale), q)
    assert np.allclose(a, scale * gravity_torque(m, masses, q), atol=1e-12)
    W = gravity_regressor_full(m, q[None])[0]
    assert np.allclose(W @ masses.to_full(), gravity_torque(m, masses, q), atol=1e-12)


def test_base_count_and_echelon_pattern(model, gspec):
    assert gspec.b == SHIPPED_B
    Q = random_configurations(model, 200, 9)
    Y = gspec.regressor(Q)
    rows_used = [int(np.max(np.nonzero(np.abs(Y[:, :, c]).max(axis=0) > 1e-10)[0])) + 1
                 for c in range(gspec.b)]
    assert np.abs(Y[:, 0, :]).max() < 1e-10
    assert sorted(rows_used) == [2, 2, 3, 3, 4, 4, 5, 5, 6, 6]


def test_base_count_stable_across_seeds(model):
    assert {default_spec(model, seed=s).b for s in range(5)} == {SHIPPED_B}


def test_reduction_consistency(model, gspec):
    rng = np.random.default_rng(0)
    Q = random_configurations(model, 100, 1)
    B = rng.normal(size=(100, gspec.full_param_count))
    full = gravity_regressor_full(model, Q)
    red = gspec.regressor(Q)
    for k in range(100):
        assert np.max(np.abs(red[k] @ gspec.reduce(B[k]) - full[k] @ B[k])) < 1e-9


def test_reduce_columns_on_known_matrix():
    rng = np.random.default_rng(2)
    A = rng.normal(size=(30, 3))
    W = np.column_stack([A, A[:, 0] + 2 * A[:, 2], np.zeros(30)])
    base, dep, K = reduce_columns(W)
    assert len(base) == 3
    assert np.allclose(W[:, base] @ K, W[:, dep])


def test_too_few_probes(model):
    with pytest.raises(IllConditionedProbeError):
        reduce_to_base(model, random_configurations(model, 10, 0))


def test_degenerate_probes_detected(model):
    q = random_configurations(model, 1, 0)
    with pytest.raises(IllConditionedProbeError):
        reduce_to_base(model, np.repeat(q, 100, axis=0))


def test_spec_round_trip(model, gspec):
    again = GravityRegressorSpec.from_dict(model, gspec.to_dict())
    assert np.array_equal(again.base_columns, gspec.base_columns)
    assert np.array_equal(again.combination, gspec.combination)
    bad = gspec.to_dict()
    bad["base_columns"] = bad["base_columns"][1:]
    with pytest.raises(ValidationError):
        GravityRegressorSpec.from_dict(model, bad)
