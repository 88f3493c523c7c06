import numpy as np
import pytest

from gravcomp.disturbance import DEFAULT_ORDERS
from gravcomp.errors import SimulationError, ValidationError
from gravcomp.gcc import GccConfig, compensation_torque
from gravcomp.gravity import gravity_torque
from gravcomp.metrics import drift_test
from gravcomp.plant import (
    PiecewiseLinearCurve,
    Plant,
    PlantSpec,
    PolynomialCurve,
    SinusoidPolyCurve,
    curve_from_dict,
    mtm_plant_spec,
    random_poses,
    true_params,
)
from gravcomp.kinematics import DhRow, KinematicModel, serial_model


def test_zero_disturbance_equals_gravity(model):
    spec = mtm_plant_spec("none")
    Q = random_poses(model, 20, 1)
    D = np.ones_like(Q, dtype=int)
    assert np.array_equal(Plant(spec).measure_static(Q, D), gravity_torque(model, spec.masses, Q))


def test_in_class_equals_model_prediction(model, gspec):
    spec = mtm_plant_spec("in-class")
    truth = true_params(spec, gspec, DEFAULT_ORDERS)
    Q = random_poses(model, 20, 2)
    D = np.where(np.arange(120).reshape(20, 6) % 2 == 0, 1, -1)
    assert np.allclose(Plant(spec).measure_static(Q, D), truth.predict(Q, D), atol=1e-12)


def test_noise_level(model):
    plant = Plant(mtm_plant_spec("in-class", 0.01, seed=4))
    q = np.tile(model.mid_range(), (10_000, 1))
    tau = plant.measure_static(q, np.ones_like(q, dtype=int))
    std = tau.std(axis=0)
    assert np.all((std > 0.009) & (std < 0.011))


def test_noise_determinism(model):
    q = random_poses(model, 50, 0)
    d = np.ones_like(q, dtype=int)
    a = Plant(mtm_plant_spec("in-class", 0.01, seed=9)).measure_static(q, d)
    b = Plant(mtm_plant_spec("in-class", 0.01, seed=9)).measure_static(q, d)
    c = Plant(mtm_plant_spec("in-class", 0.01, seed=10)).measure_static(q, d)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_out_of_limits_rejected(model):
    q = model.joint_limits[:, 1] + 0.1
    with pytest.raises(ValidationError):
        Plant(mtm_plant_spec()).measure_static(q, np.ones(6, dtype=int))


def test_exact_inverse_holds_rest_state(model):
    plant = Plant(mtm_plant_spec("order6"))
    ctrl = plant.exact_inverse()
    for q0 in random_poses(model, 5, 6):
        r = plant.drift_simulate(ctrl, q0)
        assert r.translational < 1e-9
        assert np.all(r.q_trace == q0)


def test_zero_torque_falls(model):
    plant = Plant(mtm_plant_spec("in-class"))
    r = plant.drift_simulate(lambda q, dq: np.zeros(6), model.mid_range(), T=0.5)
    assert r.translational > 1e-3
    assert r.rotational_deg > 0


def test_batch_matches_single(model, clean_mlse):
    plant = Plant(mtm_plant_spec("in-class"))
    cfg = GccConfig.default(6)
    wrong = true_params(plant.spec, clean_mlse.spec, DEFAULT_ORDERS)
    wrong.gravity_base = wrong.gravity_base * 1.05

    def ctrl(q, dq):
        return compensation_torque(wrong, cfg, q, dq)

    Q = random_poses(model, 3, 8)
    batch = plant.drift_batch(ctrl, Q, T=0.3)
    for q0, b in zip(Q, batch):
        s = plant.drift_simulate(ctrl, q0, T=0.3)
        assert s.translational == pytest.approx(b.translational, rel=1e-12, abs=1e-15)


def test_identified_vs_heavier_masses(model, gspec, clean_mlse, clean_plant):
    poses = random_poses(model, 100, 12)
    cfg = GccConfig.default(6)
    good = drift_test(clean_plant, clean_mlse, cfg, poses)
    heavy_spec = PlantSpec(model, clean_plant.spec.masses.scaled(1.2), clean_plant.spec.curves)
    heavy = true_params(heavy_spec, gspec, DEFAULT_ORDERS)
    bad = drift_test(clean_plant, heavy, cfg, poses)
    assert bad.mean_translational > 0
    assert good.mean_translational * 50 <= bad.mean_translational


def test_non_finite_state_reported(model):
    plant = Plant(mtm_plant_spec("in-class"))
    with pytest.raises(SimulationError) as info:
        plant.drift_simulate(lambda q, dq: np.full(6, np.nan), model.mid_range(), T=0.01)
    assert info.value.step == 0


def test_bad_integration_arguments(model):
    plant = Plant(mtm_plant_spec("in-class"))
    with pytest.raises(ValidationError):
        plant.drift_simulate(plant.exact_inverse(), model.mid_range(), T=0.001, dt=0.01)


def test_random_poses():
    m = serial_model([DhRow(1, 0, 0), DhRow(1, 0, 0)], [[0.2, 0.2], [-1, 1]])
    P = random_poses(m, 400, 3)
    assert P.shape == (400, 2)
    assert np.all(P[:, 0] == 0.2)
    assert np.array_equal(P, random_poses(m, 400, 3))
    with pytest.raises(ValidationError):
        random_poses(m, 0, 3)


def test_curve_families():
    pw = PiecewiseLinearCurve((0.0, 1.0), (0.0, 2.0))
    assert pw(0.25) == pytest.approx(0.5)
    sp = SinusoidPolyCurve(0.5, 2.0, 0.0, (0.1,))
    assert sp(np.pi / 4) == pytest.approx(0.6)
    for c in (pw, sp, PolynomialCurve((1.0, -2.0))):
        assert curve_from_dict(c.to_dict(), "x") == c
    with pytest.raises(ValidationError, match="x.family"):
        curve_from_dict({"family": "spline"}, "x")
    with pytest.raises(ValidationError):
        PiecewiseLinearCurve((1.0, 0.0), (0.0, 1.0))


def test_spec_validation(model):
    spec = mtm_plant_spec()
    with pytest.raises(ValidationError, match="noise_sigma"):
        PlantSpec(model, spec.masses, spec.curves, noise_sigma=-1)
    with pytest.raises(ValidationError, match="inertia"):
        PlantSpec(model, spec.masses, spec.curves, inertia=0.0)
    with pytest.raises(ValidationError, match="disturbance"):
        PlantSpec(model, spec.masses, spec.curves[:5])
