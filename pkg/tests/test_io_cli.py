import hashlib
from pathlib import Path

import numpy as np
import pytest
import yaml
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from gravcomp import cli
from gravcomp import io as gio
from gravcomp.dataset import Dataset
from gravcomp.errors import ValidationError
from gravcomp.gcc import GccConfig
from gravcomp.plant import PiecewiseLinearCurve, PlantSpec, SinusoidPolyCurve, mtm_plant_spec

PLANTS = Path(gio.__file__).parent / "data" / "plants"
finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=40, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(1, 6), st.integers(1, 8), st.data())
def test_dataset_round_trip_is_exact(n, rows, data):
    q = np.array(data.draw(st.lists(finite, min_size=n * rows, max_size=n * rows))).reshape(rows, n)
    tau = np.array(data.draw(st.lists(finite, min_size=n * rows, max_size=n * rows))).reshape(rows, n)
    dirs = np.array(data.draw(st.lists(st.sampled_from([-1, 1]), min_size=n * rows, max_size=n * rows))).reshape(rows, n)
    ds = Dataset(q, dirs, tau, {"estimated_joint": 1, "plant_seed": 3})
    back, header = gio.dataset_from_text(gio.dataset_to_text(ds))
    assert np.array_equal(back.q, q)
    assert np.array_equal(back.tau, tau)
    assert np.array_equal(back.dirs, dirs)
    assert back.meta == ds.meta
    assert header["joints"] == n


def test_dataset_header_checks(tmp_path, model):
    ds = Dataset(np.zeros((2, 6)), np.ones((2, 6)), np.zeros((2, 6)))
    p = gio.write_dataset(tmp_path / "d.csv", ds, model, (4, 1, 4, 4, 4, 4))
    text = p.read_text()
    assert text.startswith("# format: 1\n# joints: 6\n# model_hash:")
    assert "# orders: [4, 1, 4, 4, 4, 4]" in text
    gio.read_dataset(p, model)
    with pytest.raises(ValidationError, match="format"):
        gio.dataset_from_text(text.replace("# format: 1", "# format: 2"))
    with pytest.raises(ValidationError, match="row 2"):
        gio.dataset_from_text(text.rstrip("\n") + ",7\n")
    with pytest.raises(ValidationError, match="direction"):
        gio.dataset_from_text(text.replace(",1,1,1,1,1,1,", ",1,1,0,1,1,1,", 1))
    tampered = text.replace(model.digest(), "0" * 16)
    (tmp_path / "t.csv").write_text(tampered)
    with pytest.raises(ValidationError, match="model_hash"):
        gio.read_dataset(tmp_path / "t.csv", model)


def test_model_file_round_trip(tmp_path, clean_mlse, clean_data):
    from gravcomp.estimation import estimation_report

    cfg = GccConfig.default(6, alpha=0.3)
    p = gio.write_model(tmp_path / "m.yaml", clean_mlse, cfg, estimation_report(clean_mlse, clean_data))
    params, cfg2 = gio.read_model(p)
    assert cfg2 == cfg
    assert np.array_equal(params.gravity_base, clean_mlse.gravity_base)
    assert np.array_equal(params.disturbance.stacked(), clean_mlse.disturbance.stacked())
    assert params.model == clean_mlse.model
    assert np.array_equal(params.spec.combination, clean_mlse.spec.combination)
    # rewriting gives the same bytes
    p2 = gio.write_model(tmp_path / "m2.yaml", params, cfg2, estimation_report(clean_mlse, clean_data))
    assert yaml.safe_load(p.read_text())["params"] == yaml.safe_load(p2.read_text())["params"]


def test_plant_spec_round_trip(tmp_path, model):
    base = mtm_plant_spec("in-class", 0.02, seed=7)
    curves = list(base.curves)
    curves[0] = (PiecewiseLinearCurve((-1.0, 0.0, 1.0), (0.1, -0.2, 0.3)), SinusoidPolyCurve(0.1, 3.0, 0.2, (0.0, 0.01)))
    spec = PlantSpec(model, base.masses, curves, 0.02, [0.04] * 6, [0.2] * 6, 7)
    p = gio.write_plant_spec(tmp_path / "p.yaml", spec)
    back = gio.read_plant_spec(p)
    assert back.to_dict("default") == spec.to_dict("default")


@pytest.mark.parametrize(
    "doc, key",
    [
        ({"preset": "in-class", "noise_sigma": -1}, "noise_sigma"),
        ({"links": "x"}, "links"),
        ({"links": [{"mass": 1, "com": [0, 0, 0]}] * 9, "disturbance": [{"positive": {"family": "poly"}}] * 6},
         "disturbance"),
        ({"preset": "in-class", "model": 3}, "model"),
        ({"format": 7}, "format"),
    ],
)
def test_plant_spec_diagnostics_name_key(doc, key):
    with pytest.raises(ValidationError, match=key):
        gio.plant_spec_from_dict(doc)


def test_shipped_presets_load():
    for name in ("in-class", "order6"):
        spec = gio.read_plant_spec(PLANTS / f"{name}.yaml")
        assert spec.noise_sigma == 0.0


def _digest(directory: Path) -> dict:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.rglob("*")) if p.is_file()}


def _run(argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workflow(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    plant = PLANTS / "in-class.yaml"
    assert _run(["collect", "--plant", plant, "--counts", "6x4", "--seed", 2, "--out", root / "data"]) == 0
    assert _run(["estimate", "--data", root / "data", "--out", root / "m.yaml"]) == 0
    return root, plant


def test_collect_writes_one_file_per_joint(workflow):
    root, _ = workflow
    files = sorted(p.name for p in (root / "data").glob("*.csv"))
    assert files == [f"joint{i}.csv" for i in range(1, 7)]
    ds = gio.read_dataset(root / "data" / "joint3.csv")
    assert len(ds) == 48
    assert ds.meta["plant_seed"] == 2


def test_single_joint_collect_matches_full_run(workflow, tmp_path):
    root, plant = workflow
    _run(["collect", "--plant", plant, "--counts", "6x4", "--seed", 2, "--joint", 4, "--out", tmp_path])
    assert (tmp_path / "joint4.csv").read_bytes() == (root / "data" / "joint4.csv").read_bytes()


def test_smoke_counts(tmp_path):
    assert _run(["collect", "--plant", PLANTS / "in-class.yaml", "--counts", "1x1", "--out", tmp_path]) == 0
    assert len(gio.read_dataset(tmp_path / "joint6.csv")) == 2


def test_estimate_report_and_cross_method(workflow, model):
    root, _ = workflow
    assert (root / "m.report.txt").read_text().startswith("estimation report (mlse)")
    assert _run(["estimate", "--data", root / "data", "--method", "slse", "--out", root / "s.yaml"]) == 0
    a, _ = gio.read_model(root / "m.yaml")
    b, _ = gio.read_model(root / "s.yaml")
    Q = np.random.default_rng(0).uniform(model.joint_limits[:, 0], model.joint_limits[:, 1], (50, 6))
    D = np.where(np.random.default_rng(1).random((50, 6)) < 0.5, 1, -1)
    assert np.abs(a.predict(Q, D) - b.predict(Q, D)).max() < 1e-6


def test_fontanelli_like_is_symmetric_linear(workflow):
    root, _ = workflow
    assert _run(["estimate", "--data", root / "data", "--method", "fontanelli-like", "--out", root / "f.yaml"]) == 0
    p, _ = gio.read_model(root / "f.yaml")
    assert p.orders == (1,) * 6
    assert all(np.array_equal(a, b) for a, b in zip(p.disturbance.a_plus, p.disturbance.a_minus))


def test_drift_on_exact_model(workflow):
    root, plant = workflow
    out = root / "drift"
    assert _run(["validate", "--model", root / "m.yaml", "--plant", plant, "--mode", "drift",
                 "--poses", 5, "--duration", 0.5, "--out", out]) == 0
    text = (out / "drift.txt").read_text()
    mean = float(text.split("translational drift mean ")[1].split(" m")[0])
    assert mean < 1e-9


def test_validate_cond_study_and_sweep(workflow):
    root, plant = workflow
    assert _run(["validate", "--model", root / "m.yaml", "--plant", plant, "--mode", "cond-study",
                 "--out", root / "v"]) == 0
    lines = (root / "v" / "cond_study.csv").read_text().splitlines()
    assert lines[0] == "joint,auxiliary,strategy,samples,condition_number,heldout_rms_abs"
    assert len(lines) == 1 + 4 * 4
    assert _run(["validate", "--model", root / "m.yaml", "--plant", plant, "--mode", "order-sweep",
                 "--k-max", 2, "--out", root / "v"]) == 0
    assert len((root / "v" / "order_sweep.csv").read_text().splitlines()) == 1 + 6 * 3


def test_exit_codes(workflow, tmp_path):
    root, plant = workflow
    with pytest.raises(SystemExit) as e:
        _run(["validate", "--model", root / "m.yaml", "--plant", plant, "--mode", "order-sweep",
              "--poses", 3, "--out", tmp_path])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        _run(["estimate", "--data", root / "data", "--orders", "1,2", "--out", tmp_path / "x.yaml"])
    assert e.value.code == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("format: 1\npreset: in-class\nnoise_sigma: -3\n")
    assert _run(["collect", "--plant", bad, "--out", tmp_path]) == 3
    assert _run(["collect", "--plant", tmp_path / "missing.yaml", "--out", tmp_path]) == 5
    partial = tmp_path / "partial"
    partial.mkdir()
    for j in (1, 2, 3, 4, 6):
        (partial / f"joint{j}.csv").write_bytes((root / "data" / f"joint{j}.csv").read_bytes())
    assert _run(["estimate", "--data", partial, "--out", tmp_path / "x.yaml"]) == 5
    assert not (tmp_path / "x.yaml").exists()
    tiny = tmp_path / "tiny"
    tiny.mkdir()
    _run(["collect", "--plant", plant, "--counts", "1x1", "--out", tiny])
    assert _run(["estimate", "--data", tiny, "--out", tmp_path / "y.yaml"]) == 4


def test_log_level_env(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("GRAVCOMP_LOG_LEVEL", "debug")
    assert _run(["collect", "--plant", PLANTS / "in-class.yaml", "--counts", "1x1", "--joint", 1, "--out", tmp_path]) == 0
