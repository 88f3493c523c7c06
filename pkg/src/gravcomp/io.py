"""File formats: dataset CSV, model file, plant spec and reports.

Floats are written with ``repr`` (shortest round-trip form), so every numeric
field reads back bit-identical. Writers take an advisory lock on a sidecar
``.lock`` file and replace the target atomically.
"""

from __future__ import annotations

import contextlib
import csv
import fcntl
import json
import os
import tempfile
from pathlib import Path

import numpy as np
import yaml

from gravcomp.dataset import Dataset
from gravcomp.errors import GravcompError, ValidationError
from gravcomp.gcc import GccConfig
from gravcomp.gravity import G, GravityRegressorSpec
from gravcomp.kinematics import KinematicModel, LinkMassParams, default_model, load_model

DATASET_FORMAT = 1
MODEL_FORMAT = 1
PLANT_FORMAT = 1


class FileError(GravcompError, OSError):
    """Unreadable, missing or unwritable file."""

    exit_code = 5


# low-level ---------------------------------------------------------------


@contextlib.contextmanager
def _locked(path: Path):
    lock = path.with_name(path.name + ".lock")
    fd = os.open(lock, os.O_CREAT | os.O_RDWR, 0o644)
    try:
        fcntl.flock(fd, fcntl.LOCK_EX)
        yield
    finally:
        fcntl.flock(fd, fcntl.LOCK_UN)
        os.close(fd)
        with contextlib.suppress(OSError):
            lock.unlink()


def write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with _locked(path):
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
    except OSError as exc:
        raise FileError(f"cannot write {path}: {exc.strerror or exc}") from None
    return path


def read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise FileError(f"cannot read {path}: {exc.strerror or exc}") from None


def _yaml_load(path) -> dict:
    try:
        data = yaml.safe_load(read_text(path))
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected a mapping at the top level")
    return data


def _yaml_dump(data: dict) -> str:
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=None, width=100)


def _f(x) -> str:
    return repr(float(x))


# datasets ----------------------------------------------------------------


def dataset_to_text(ds: Dataset, model: KinematicModel | None = None, orders=None) -> str:
    n = ds.n_joints
    header = {"format": DATASET_FORMAT, "joints": n}
    if model is not None:
        header["model_hash"] = model.digest()
    if orders is not None:
        header["orders"] = list(int(k) for k in orders)
    for k, v in ds.meta.items():
        header.setdefault(k, v)
    buf = [f"# {k}: {json.dumps(v, sort_keys=True)}\n" for k, v in header.items()]
    out = _csv_buffer()
    w = csv.writer(out, lineterminator="\n")
    w.writerow([f"q{i + 1}" for i in range(n)] + [f"dir{i + 1}" for i in range(n)]
               + [f"tau{i + 1}" for i in range(n)])
    for q, d, t in zip(ds.q, ds.dirs, ds.tau):
        w.writerow([_f(x) for x in q] + [str(int(x)) for x in d] + [_f(x) for x in t])
    return "".join(buf) + out.getvalue()


def _csv_buffer():
    import io

    return io.StringIO()


def dataset_from_text(text: str, source: str = "<dataset>") -> tuple[Dataset, dict]:
    """Parse a dataset file; returns the dataset and its header."""
    header, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if not sep:
                raise ValidationError(f"{source}: malformed header line {line!r}")
            try:
                header[key.strip()] = json.loads(value)
            except json.JSONDecodeError:
                raise ValidationError(f"{source}: header {key.strip()!r} is not valid") from None
        elif line.strip():
            body.append(line)
    if header.get("format") != DATASET_FORMAT:
        raise ValidationError(f"{source}: format: unsupported version {header.get('format')!r}")
    n = header.get("joints")
    if not isinstance(n, int) or n < 1:
        raise ValidationError(f"{source}: joints: missing or invalid")
    rows = list(csv.reader(body))
    if not rows or len(rows[0]) != 3 * n:
        raise ValidationError(f"{source}: column header does not match {n} joints")
    data = rows[1:]
    for k, r in enumerate(data):
        if len(r) != 3 * n:
            raise ValidationError(f"{source}: row {k + 1} has {len(r)} fields, expected {3 * n}")
    try:
        arr = np.array([[float(x) for x in r] for r in data], dtype=float).reshape(-1, 3 * n)
    except ValueError as exc:
        raise ValidationError(f"{source}: {exc}") from None
    dirs = arr[:, n:2 * n]
    if not np.all(np.isin(dirs, (-1.0, 1.0))):
        raise ValidationError(f"{source}: direction columns must be +1 or -1")
    meta = {k: v for k, v in header.items() if k not in ("format", "joints", "model_hash", "orders")}
    return Dataset(arr[:, :n], dirs.astype(int), arr[:, 2 * n:], meta), header


def write_dataset(path, ds: Dataset, model=None, orders=None) -> Path:
    return write_text(path, dataset_to_text(ds, model, orders))


def read_dataset(path, model: KinematicModel | None = None) -> Dataset:
    ds, header = dataset_from_text(read_text(path), str(path))
    if model is not None:
        if ds.n_joints != model.n_joints:
            raise ValidationError(f"{path}: {ds.n_joints} joints, model has {model.n_joints}")
        h = header.get("model_hash")
        if h is not None and h != model.digest():
            raise ValidationError(f"{path}: model_hash {h} does not match the kinematic model")
    return ds


def dataset_path(directory, joint: int) -> Path:
    return Path(directory) / f"joint{joint}.csv"


def read_dataset_dir(directory, model: KinematicModel) -> list[Dataset | None]:
    """One dataset per joint (``joint{i}.csv``); None where the file is absent."""
    d = Path(directory)
    if not d.is_dir():
        raise FileError(f"{d}: not a directory")
    out = []
    for j in range(1, model.n_joints + 1):
        p = dataset_path(d, j)
        out.append(read_dataset(p, model) if p.exists() else None)
    return out


# plant spec --------------------------------------------------------------


def _model_from_ref(ref, base: Path | None) -> tuple[KinematicModel, object]:
    if ref is None or ref == "default":
        return default_model(), "default"
    if isinstance(ref, dict):
        return KinematicModel.from_dict(ref), ref
    if isinstance(ref, str):
        p = Path(ref)
        if not p.is_absolute() and base is not None:
            p = base / p
        if not p.exists():
            raise FileError(f"model: file {p} not found")
        return load_model(p), ref
    raise ValidationError("model: expected 'default', a mapping or a file path")


def plant_spec_from_dict(data: dict, base: Path | None = None):
    from gravcomp.plant import PlantSpec, curve_from_dict, mtm_plant_spec

    if data.get("format", PLANT_FORMAT) != PLANT_FORMAT:
        raise ValidationError(f"format: unsupported version {data.get('format')!r}")
    model, _ = _model_from_ref(data.get("model"), base)
    try:
        seed = int(data.get("seed", 0))
        sigma = float(data.get("noise_sigma", 0.0))
        g = float(data.get("gravity", G))
    except (TypeError, ValueError):
        raise ValidationError("seed/noise_sigma/gravity: expected numbers") from None
    preset = data.get("preset")
    if preset is not None:
        if "links" in data or "disturbance" in data:
            raise ValidationError("preset: cannot be combined with links or disturbance")
        try:
            spec = mtm_plant_spec(preset, sigma, seed, model)
        except (ValueError, TypeError) as exc:
            raise ValidationError(f"preset: {exc}") from None
        spec.g = g
        for key in ("inertia", "damping"):
            if key in data:
                setattr(spec, key, _per_joint(data[key], model.n_joints, key))
        PlantSpec.__post_init__(spec)
        return spec
    links = data.get("links")
    if not isinstance(links, list):
        raise ValidationError("links: expected a list of {mass, com}")
    try:
        masses = LinkMassParams(
            np.array([float(l["mass"]) for l in links]),
            np.array([[float(x) for x in l["com"]] for l in links]).reshape(len(links), 3),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"links: malformed entry ({exc})") from None
    dist = data.get("disturbance")
    if not isinstance(dist, list):
        raise ValidationError("disturbance: expected one entry per joint")
    curves = []
    for i, d in enumerate(dist):
        if not isinstance(d, dict) or "positive" not in d or "negative" not in d:
            raise ValidationError(f"disturbance[{i}]: needs positive and negative curves")
        curves.append(
            (curve_from_dict(d["positive"], f"disturbance[{i}].positive"),
             curve_from_dict(d["negative"], f"disturbance[{i}].negative"))
        )
    n = model.n_joints
    return PlantSpec(
        model, masses, curves, sigma,
        _per_joint(data["inertia"], n, "inertia") if "inertia" in data else None,
        _per_joint(data["damping"], n, "damping") if "damping" in data else None,
        seed, g,
    )


def _per_joint(value, n, key):
    try:
        arr = np.broadcast_to(np.asarray(value, dtype=float), (n,)).copy()
    except (TypeError, ValueError):
        raise ValidationError(f"{key}: expected a number or one value per joint") from None
    return arr


def read_plant_spec(path):
    return plant_spec_from_dict(_yaml_load(path), Path(path).parent)


def write_plant_spec(path, spec, model_ref="default") -> Path:
    ref = model_ref if model_ref is not None else spec.model.to_dict()
    return write_text(path, _yaml_dump(spec.to_dict(ref)))


# model file --------------------------------------------------------------


def model_file_dict(params, config: GccConfig, report: dict | None = None) -> dict:
    prov = _plain(params.provenance)
    if report is not None:
        prov["report"] = _plain(report)
    return {
        "format": MODEL_FORMAT,
        "kinematics": params.spec.model.to_dict(),
        "gravity_regressor": params.spec.to_dict(),
        "params": params.to_dict(),
        "gcc": config.to_dict(),
        "provenance": prov,
    }


def _plain(obj):
    """Convert numpy scalars and arrays to YAML-safe builtins."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_model(path, params, config: GccConfig, report: dict | None = None) -> Path:
    return write_text(path, _yaml_dump(model_file_dict(params, config, report)))


def model_from_dict(data: dict):
    """Rebuild (ParamSet, GccConfig) from a model-file mapping."""
    from gravcomp.estimation import ParamSet

    if data.get("format") != MODEL_FORMAT:
        raise ValidationError(f"format: unsupported version {data.get('format')!r}")
    for key in ("kinematics", "gravity_regressor", "params", "gcc"):
        if key not in data:
            raise ValidationError(f"{key}: missing")
    model = KinematicModel.from_dict(data["kinematics"])
    spec = GravityRegressorSpec.from_dict(model, data["gravity_regressor"])
    params = ParamSet.from_dict(spec, data["params"], data.get("provenance") or {})
    return params, GccConfig.from_dict(data["gcc"])


def read_model(path):
    return model_from_dict(_yaml_load(path))


# reports -----------------------------------------------------------------


def report_text(report: dict, title: str = "estimation report") -> str:
    lines = [title, f"{'joint':>6} {'cond':>12} {'eps_rms %':>12} {'rms N m':>12} {'max N m':>12}"]
    for key, r in report.items():
        lines.append(
            f"{key.removeprefix('joint'):>6} {r['condition_number']:>12.6g} "
            f"{r['rms_relative_pct']:>12.6g} {r['rms_abs']:>12.6g} {r['max_abs']:>12.6g}"
        )
    return "\n".join(lines) + "\n"


def rows_csv(rows: list[dict], keys: list[str]) -> str:
    out = _csv_buffer()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        w.writerow([_f(r[k]) if isinstance(r[k], (float, np.floating)) else r[k] for k in keys])
    return out.getvalue()
