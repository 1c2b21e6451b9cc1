"""File formats: the matrix dump, fixed-precision CSV, observable directories, atomic writes."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import Observable
from .errors import SchemaError, ValidationError

FLOAT_FMT = "%.17e"


def atomic_write(path, data: str | bytes):
    """Write through a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def format_matrix(m) -> str:
    """Text dump: header ``dim=D`` then ``row col re im`` per entry, row-major."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"matrix dump needs a square matrix, got shape {m.shape}")
    d = m.shape[0]
    r, c = np.divmod(np.arange(d * d), d)
    flat = m.ravel()
    body = "\n".join(f"{i} {j} {x.real:.17e} {x.imag:.17e}" for i, j, x in zip(r, c, flat))
    return f"dim={d}\n{body}\n"


def write_matrix(path, m):
    atomic_write(path, format_matrix(m))


def read_matrix(path) -> np.ndarray:
    with open(path) as f:
        header = f.readline().strip()
        if not header.startswith("dim="):
            raise ValidationError(f"{path}: missing 'dim=D' header")
        d = int(header[4:])
        data = np.loadtxt(f, ndmin=2)
    if data.shape != (d * d, 4):
        raise ValidationError(f"{path}: expected {d * d} rows of 'row col re im', got {data.shape[0]}")
    m = np.zeros((d, d), dtype=complex)
    m[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2] + 1j * data[:, 3]
    return m


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT % x
    return str(x)


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValidationError(f"row has {len(row)} cells, header has {len(header)}")
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    atomic_write(path, format_csv(header, rows))


def read_csv(path):
    """Return ``(header, rows)`` with every cell as a string."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise SchemaError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def write_json(path, obj):
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"cannot serialise {type(x).__name__}")


# observable directory: basis.dump (columns in (j,s) order), observable.dump, observable.json

def save_observable(directory, obs: Observable, meta=None):
    directory = Path(directory)
    write_matrix(directory / "basis.dump", obs.basis)
    write_matrix(directory / "observable.dump", obs.matrix())
    info = {"dim": obs.dim, "values": obs.values, "labels": obs.labels}
    info.update(meta or {})
    write_json(directory / "observable.json", info)


def load_observable(directory) -> Observable:
    directory = Path(directory)
    info_path = directory / "observable.json"
    if not info_path.exists():
        raise ValidationError(f"{directory}: not an observable directory (no observable.json)")
    info = json.loads(info_path.read_text())
    basis = read_matrix(directory / "basis.dump")
    return Observable(np.asarray(info["values"], dtype=float), basis, np.asarray(info["labels"], dtype=int))
