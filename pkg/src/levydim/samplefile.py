"""Columnar on-disk format for field samples and subordinator paths.

Both framings carry the same JSON header (format version, kind, spec hash,
seed, grid shape, mesh, ...).

CSV: ``#levydim-sample <version>`` then ``#<header json>`` then a column row
``i0,...,i{N-1},x0,...,x{d-1}`` and one row per grid node in C order.  Floats
are written with ``repr`` so reading them back is bit-exact.

Binary: magic ``LVYS``, uint16 version, uint32 header length, header JSON
(UTF-8), then the float64 little-endian values in C order.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import digest, exponent_from_config, exponent_to_config
from .exponents import AdditiveProcessSpec
from .simulation import FieldSample, SubordinatorPath

FORMAT_VERSION = 1
MAGIC = b"LVYS"


class SampleFileError(ValueError):
    pass


def spec_tree(spec: Optional[AdditiveProcessSpec]):
    if spec is None:
        return None
    try:
        return [exponent_to_config(e) for e in spec.exponents]
    except ValueError:
        return None


def spec_hash(tree) -> Optional[str]:
    return None if tree is None else digest(tree)


def field_header(sample: FieldSample, **extra) -> dict:
    tree = spec_tree(sample.spec)
    header = {
        "kind": "field",
        "spec": tree,
        "spec_hash": spec_hash(tree),
        "seed": sample.seed,
        "grid_shape": list(sample.grid_shape),
        "d": sample.d,
        "mesh": sample.mesh,
        "T": sample.T,
    }
    header.update(extra)
    return header


def subordinator_header(path: SubordinatorPath, **extra) -> dict:
    t = path.t_grid
    mesh = float(t[1] - t[0]) if t.size > 1 else 0.0
    if t.size > 1 and not np.array_equal(t, mesh * np.arange(t.size)):
        raise SampleFileError("only uniform subordinator grids can be written")
    header = {
        "kind": "subordinator",
        "alpha": path.alpha,
        "spec_hash": digest({"stable_subordinator": path.alpha}),
        "seed": path.seed,
        "grid_shape": [int(t.size)],
        "d": 1,
        "mesh": mesh,
        "T": float(t[-1]),
    }
    header.update(extra)
    return header


def _write_csv(path: Path, header: dict, values: np.ndarray):
    shape = tuple(header["grid_shape"])
    N, d = len(shape), header["d"]
    flat = values.reshape(-1, d)
    idx = np.indices(shape).reshape(N, -1).T
    cols = [f"i{j}" for j in range(N)] + [f"x{c}" for c in range(d)]
    lines = [f"#levydim-sample {FORMAT_VERSION}", "#" + json.dumps(header, sort_keys=True), ",".join(cols)]
    for ix, row in zip(idx.tolist(), flat.tolist()):
        lines.append(",".join(map(str, ix)) + "," + ",".join(map(repr, row)))
    path.write_text("\n".join(lines) + "\n")


def _read_csv(path: Path):
    with path.open() as fh:
        magic = fh.readline().strip()
        if not magic.startswith("#levydim-sample "):
            raise SampleFileError(f"{path}: not a levydim sample file")
        version = int(magic.split()[1])
        if version != FORMAT_VERSION:
            raise SampleFileError(f"{path}: unsupported format version {version}")
        header = json.loads(fh.readline()[1:])
        fh.readline()
        shape = tuple(header["grid_shape"])
        N, d = len(shape), header["d"]
        data = np.loadtxt(fh, delimiter=",", dtype=str, ndmin=2)
    if data.shape[0] != int(np.prod(shape)):
        raise SampleFileError(f"{path}: expected {int(np.prod(shape))} rows, got {data.shape[0]}")
    idx = data[:, :N].astype(np.int64)
    vals = data[:, N:N + d].astype(float)
    values = np.empty(shape + (d,))
    values[tuple(idx.T)] = vals
    return header, values


def _write_bin(path: Path, header: dict, values: np.ndarray):
    blob = json.dumps(header, sort_keys=True).encode()
    with path.open("wb") as fh:
        fh.write(MAGIC + struct.pack("<HI", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def _read_bin(path: Path):
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise SampleFileError(f"{path}: bad magic")
    version, n = struct.unpack("<HI", raw[4:10])
    if version != FORMAT_VERSION:
        raise SampleFileError(f"{path}: unsupported format version {version}")
    header = json.loads(raw[10:10 + n])
    shape = tuple(header["grid_shape"]) + (header["d"],)
    values = np.frombuffer(raw[10 + n:], dtype="<f8")
    if values.size != int(np.prod(shape)):
        raise SampleFileError(f"{path}: truncated data")
    return header, values.reshape(shape).astype(float)


def write_sample(obj, path: str | Path, fmt: Optional[str] = None, **extra) -> Path:
    """Write a FieldSample or SubordinatorPath; ``fmt`` defaults from the suffix."""
    path = Path(path)
    fmt = fmt or ("bin" if path.suffix == ".bin" else "csv")
    if isinstance(obj, FieldSample):
        header, values = field_header(obj, **extra), obj.values
    elif isinstance(obj, SubordinatorPath):
        header, values = subordinator_header(obj, **extra), obj.values.reshape(-1, 1)
    else:
        raise SampleFileError(f"cannot write {type(obj).__name__}")
    (_write_bin if fmt == "bin" else _write_csv)(path, header, values)
    return path


@dataclass
class LoadedSample:
    header: dict
    sample: object


def read_sample(path: str | Path) -> LoadedSample:
    path = Path(path)
    if not path.exists():
        raise SampleFileError(f"{path}: no such sample file")
    with path.open("rb") as fh:
        head = fh.read(4)
    header, values = _read_bin(path) if head == MAGIC else _read_csv(path)
    mesh, n = header["mesh"], header["grid_shape"][0]
    t_axis = mesh * np.arange(n)
    if header["kind"] == "subordinator":
        sample = SubordinatorPath(header["alpha"], t_axis, values[:, 0], header["seed"])
    elif header["kind"] == "field":
        spec = None
        if header.get("spec") is not None:
            spec = AdditiveProcessSpec(tuple(exponent_from_config(t) for t in header["spec"]))
        sample = FieldSample(spec, t_axis, values, mesh, header["T"], header["seed"])
    else:
        raise SampleFileError(f"{path}: unknown sample kind {header['kind']!r}")
    return LoadedSample(header, sample)
