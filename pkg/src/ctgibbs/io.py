"""On-disk formats: binary arrays, CSV mirrors, 16-bit PGM images, metadata.

Binary array layout (all fields little-endian)::

    offset  size  field
    0       8     magic  b"CTGARRAY"
    8       2     format version (uint16, currently 1)
    10      2     dtype code (uint16: 1 = float64, 2 = int64)
    12      4     number of dimensions (uint32, 0..4)
    16      32    dimensions (4 x uint64, unused trailing entries are 0)
    48      16    reserved (zero)
    64      ...   payload, C order

The payload is written with an explicit little-endian dtype, so files are
bit-identical across platforms.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"CTGARRAY"
VERSION = 1
HEADER_SIZE = 64
MAX_DIMS = 4
_HEADER = struct.Struct("<8sHHI4Q16x")
_DTYPES = {1: np.dtype("<f8"), 2: np.dtype("<i8")}
_CODES = {"f": 1, "i": 2, "u": 2, "b": 2}
PGM_MAXVAL = 65535

assert _HEADER.size == HEADER_SIZE


class BundleError(ValueError):
    """Missing, truncated or inconsistent file."""


def write_array(path, arr) -> Path:
    """Write ``arr`` (float or integer, up to 4-D) in the binary layout."""
    arr = np.asarray(arr)
    if arr.ndim > MAX_DIMS:
        raise ValueError(f"at most {MAX_DIMS} dimensions are supported, got {arr.ndim}")
    code = _CODES.get(arr.dtype.kind)
    if code is None:
        raise TypeError(f"unsupported dtype {arr.dtype}")
    data = np.ascontiguousarray(arr, dtype=_DTYPES[code])
    dims = list(arr.shape) + [0] * (MAX_DIMS - arr.ndim)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, code, arr.ndim, *dims))
        fh.write(data.tobytes(order="C"))
    return path


def read_header(path):
    """Return ``(dtype, shape)`` from a binary array file."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read(HEADER_SIZE)
    except OSError as exc:
        raise BundleError(f"cannot read {path}: {exc.strerror}") from None
    if len(raw) < HEADER_SIZE:
        raise BundleError(f"{path}: truncated header")
    magic, version, code, ndim, *dims = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise BundleError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise BundleError(f"{path}: unsupported format version {version}")
    if code not in _DTYPES:
        raise BundleError(f"{path}: unknown dtype code {code}")
    if ndim > MAX_DIMS:
        raise BundleError(f"{path}: invalid dimension count {ndim}")
    return _DTYPES[code], tuple(int(n) for n in dims[:ndim])


def read_array(path) -> np.ndarray:
    """Inverse of :func:`write_array`; returns native-endian data."""
    dtype, shape = read_header(path)
    count = int(np.prod(shape)) if shape else 1
    payload = Path(path).read_bytes()[HEADER_SIZE:]
    if len(payload) != count * dtype.itemsize:
        raise BundleError(f"{path}: payload has {len(payload)} bytes, header implies {count * dtype.itemsize}")
    out = np.frombuffer(payload, dtype=dtype, count=count).reshape(shape)
    return out.astype(dtype.newbyteorder("="))


def write_csv(path, columns: dict) -> Path:
    """Write equal-length 1-D columns with a header row (full float precision)."""
    names = list(columns)
    cols = [np.asarray(columns[k]).ravel() for k in names]
    n = {c.size for c in cols}
    if len(n) > 1:
        raise ValueError("columns must have equal length")
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*cols):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row])
    return path


def read_csv(path) -> dict:
    """Read a file written by :func:`write_csv` into float arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise BundleError(f"{path}: empty CSV")
    names, body = rows[0], rows[1:]
    data = np.array(body, dtype=np.float64).reshape(len(body), len(names))
    return {k: data[:, i] for i, k in enumerate(names)}


def write_pgm16(path, image) -> dict:
    """Export a 2-D array as a binary 16-bit PGM after min-max scaling.

    Pixel values are ``round((v - vmin) / (vmax - vmin) * 65535)``; a constant
    image maps to zeros.  Returns the scaling record ``{"vmin", "vmax",
    "maxval"}``, from which ``v = vmin + g / maxval * (vmax - vmin)``.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("image must be 2-D")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    vmin, vmax = float(img.min()), float(img.max())
    span = vmax - vmin
    if span > 0:
        g = np.rint((img - vmin) / span * PGM_MAXVAL)
    else:
        g = np.zeros_like(img)
    g = np.clip(g, 0, PGM_MAXVAL).astype(">u2")
    rows, cols = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n{PGM_MAXVAL}\n".encode("ascii"))
        fh.write(g.tobytes())
    return {"vmin": vmin, "vmax": vmax, "maxval": PGM_MAXVAL}


def read_pgm16(path) -> np.ndarray:
    """Read the raw gray levels of a file written by :func:`write_pgm16`."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise BundleError(f"{path}: not a binary PGM")
    cols, rows = (int(v) for v in parts[1].split())
    maxval = int(parts[2])
    dt = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(parts[3], dtype=dt, count=rows * cols).reshape(rows, cols).astype(np.int64)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleError(f"cannot read metadata {path}: {exc}") from None
