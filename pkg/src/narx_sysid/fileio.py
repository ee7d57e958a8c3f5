"""Text formats: dataset CSV + sidecar, model file, training report, metrics.

All writers use LF line endings and ``.`` decimals.  Datasets carry 9
significant digits, model weights 17 (exact double round-trip).
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .control import Dataset
from .errors import ConfigurationError, ModelError
from .metrics import MetricsReport
from .narx import Architecture, DelayConfig, NarxModel, Normalization
from .signals import Signal

DATASET_HEADER = ["k", "t_s", "u", "y"]


def fmt9(v: float) -> str:
    return f"{v:.9g}"


def fmt17(v: float) -> str:
    return f"{v:.17g}"


def write_lines(path: Path, lines) -> None:
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.writelines(line + "\n" for line in lines)


def read_keyvalue(path: Path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def write_keyvalue(path: Path, items) -> None:
    write_lines(Path(path), (f"{k}={v}" for k, v in items))


def sidecar_path(csv_path: Path) -> Path:
    return Path(csv_path).with_suffix(".meta")


def write_dataset(path: Path, data: Dataset, config_digest: str = "") -> None:
    path = Path(path)
    rows = [",".join(DATASET_HEADER)]
    u, y, dt = data.u.samples, data.y.samples, data.dt
    rows += [f"{k},{fmt9(k * dt)},{fmt9(u[k])},{fmt9(y[k])}" for k in range(len(u))]
    write_lines(path, rows)
    write_keyvalue(sidecar_path(path), [
        ("axis", data.axis),
        ("dt", fmt17(dt)),
        ("split_index", data.split_index),
        ("seed", data.seed),
        ("n_samples", len(u)),
        ("config_digest", config_digest),
    ])


def read_dataset_table(path: Path) -> dict[str, np.ndarray]:
    """Parse a dataset CSV into ``k, t_s, u, y`` arrays (strict)."""
    path = Path(path)
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != DATASET_HEADER:
            raise ConfigurationError(f"{path}: header must be {','.join(DATASET_HEADER)}, got {header}")
        k, t, u, y = [], [], [], []
        for rownum, row in enumerate(reader, 2):
            try:
                if len(row) != 4:
                    raise ValueError(f"expected 4 fields, got {len(row)}")
                kk = int(row[0])
                vals = [float(v) for v in row[1:]]
                if kk != len(k) or not all(math.isfinite(v) for v in vals):
                    raise ValueError("bad index or non-finite value")
            except ValueError as exc:
                raise ConfigurationError(f"{path}: malformed row {rownum}: {exc}") from None
            k.append(kk)
            t.append(vals[0])
            u.append(vals[1])
            y.append(vals[2])
    return {"k": np.array(k), "t_s": np.array(t), "u": np.array(u), "y": np.array(y)}


def read_dataset(path: Path) -> Dataset:
    path = Path(path)
    table = read_dataset_table(path)
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        raise ConfigurationError(f"dataset metadata {meta_path} is missing")
    meta = read_keyvalue(meta_path)
    try:
        dt = float(meta["dt"])
        return Dataset(Signal(table["u"], dt), Signal(table["y"], dt), meta["axis"],
                       int(meta["split_index"]), int(meta.get("seed", 0)))
    except KeyError as exc:
        raise ConfigurationError(f"{meta_path}: missing key {exc}") from None


def dataset_meta(path: Path) -> dict[str, str]:
    return read_keyvalue(sidecar_path(path))


def save_model(path: Path, model: NarxModel, dt: float | None = None, axis: str | None = None) -> None:
    n = model.norm
    lines = [
        "# narx-sysid model",
        f"arch={model.arch.kind}",
        f"na={model.delays.na}",
        f"nb={model.delays.nb}",
        "layers=" + " ".join(str(h) for h in model.arch.layers),
        "act=" + " ".join(model.arch.activations),
        f"norm_u={fmt17(n.u_mean)} {fmt17(n.u_std)}",
        f"norm_y={fmt17(n.y_mean)} {fmt17(n.y_std)}",
    ]
    if dt is not None:
        lines.append(f"dt={fmt17(dt)}")
    if axis is not None:
        lines.append(f"axis={axis}")
    for name, arr in model.params.items():
        mat = np.atleast_2d(arr)
        lines.append(f"{name} " + " ".join(str(s) for s in arr.shape))
        lines += [" ".join(fmt17(v) for v in row) for row in mat]
    write_lines(Path(path), lines)


def load_model(path: Path) -> tuple[NarxModel, dict[str, str]]:
    """Read a model file; returns the model and its raw header fields."""
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    header: dict[str, str] = {}
    i = 0
    while i < len(lines) and "=" in lines[i]:
        key, value = lines[i].split("=", 1)
        header[key.strip()] = value.strip()
        i += 1
    try:
        arch = Architecture(header["arch"], tuple(int(v) for v in header["layers"].split()),
                            tuple(header["act"].split()))
        delays = DelayConfig(int(header["na"]), int(header["nb"]))
        um, us = (float(v) for v in header["norm_u"].split())
        ym, ys = (float(v) for v in header["norm_y"].split())
    except (KeyError, ValueError) as exc:
        raise ModelError(f"{path}: bad model header ({exc})") from None
    params = {}
    while i < len(lines):
        parts = lines[i].split()
        name, shape = parts[0], tuple(int(s) for s in parts[1:])
        rows = shape[0] if len(shape) == 2 else 1
        block = lines[i + 1:i + 1 + rows]
        if len(block) != rows:
            raise ModelError(f"{path}: truncated block {name}")
        params[name] = np.array([[float(v) for v in row.split()] for row in block]).reshape(shape)
        i += 1 + rows
    return NarxModel(arch, delays, params, Normalization(um, us, ym, ys)), header


def write_training_report(path: Path, train_mse, val_mse) -> None:
    rows = ["epoch,train_mse,val_mse"]
    rows += [f"{e},{fmt9(a)},{fmt9(b)}" for e, (a, b) in enumerate(zip(train_mse, val_mse))]
    write_lines(Path(path), rows)


def read_training_report(path: Path) -> dict[str, np.ndarray]:
    path = Path(path)
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["epoch", "train_mse", "val_mse"]:
            raise ConfigurationError(f"{path}: unexpected header {header}")
        rows = [(int(a), float(b), float(c)) for a, b, c in reader]
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    return {"epoch": arr[:, 0].astype(int), "train_mse": arr[:, 1], "val_mse": arr[:, 2]}


def write_metrics(path: Path, reports: dict[str, MetricsReport]) -> None:
    """``metrics.txt``: one ``<mode>.<field>=value`` line per field, 6 significant digits."""
    lines = []
    for mode, rep in reports.items():
        for name, value in rep.items():
            text = str(value) if isinstance(value, int) else f"{value:.6g}"
            lines.append(f"{mode}.{name}={text}")
    write_lines(Path(path), lines)


def write_predictions(path: Path, t, segment, y, y_sp, y_p) -> None:
    rows = ["k,t_s,segment,y,y_sp,y_p"]
    for k in range(len(y)):
        rows.append(f"{k},{fmt9(t[k])},{segment[k]},{fmt9(y[k])},{fmt9(y_sp[k])},{fmt9(y_p[k])}")
    write_lines(Path(path), rows)


def read_predictions(path: Path) -> dict[str, np.ndarray]:
    path = Path(path)
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ConfigurationError(f"{path}: no prediction rows")
    out = {"segment": np.array([r["segment"] for r in rows])}
    for key in ("k", "t_s", "y", "y_sp", "y_p"):
        out[key] = np.array([float(r[key]) for r in rows])
    return out
