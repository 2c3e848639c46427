"""Computational domain: grid geometry, land/sea mask, correlation radii, file I/O.

Every file handled here shares one container layout: a JSON header followed by
named sections of ``ny * nx`` (or ``nz * ny * nx``) values stored row-major.

* binary: the header is the first line of the file, the payload is the raw
  little-endian concatenation of the sections (float64, ``mask`` as uint8).
* csv: the first line is ``# <json header>``, the second names the sections,
  then one row per grid point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "GridFormatError",
    "Grid2D",
    "ScaleField",
    "StateField",
    "uniform_scale",
    "load_grid",
    "save_grid",
    "load_scale_field",
    "save_scale_field",
    "load_field",
    "save_field",
]

MIN_POINTS = 4


class GridFormatError(ValueError):
    """Raised for malformed or inconsistent grid/scale/field files."""


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Rectangular grid with per-point spacing (meters) and a sea mask.

    Arrays are indexed ``[j, i]`` with ``j`` the row (y) and ``i`` the column (x).
    ``ghost_width`` of ``None`` lets the covariance operator choose its default.
    """

    nx: int
    ny: int
    dx: np.ndarray
    dy: np.ndarray
    mask: np.ndarray
    ghost_width: int | None = None

    def __post_init__(self):
        nx, ny = int(self.nx), int(self.ny)
        if nx < MIN_POINTS or ny < MIN_POINTS:
            raise ValueError(f"grid must be at least {MIN_POINTS}x{MIN_POINTS}, got nx={nx}, ny={ny}")
        object.__setattr__(self, "nx", nx)
        object.__setattr__(self, "ny", ny)
        shape = (ny, nx)
        for name in ("dx", "dy"):
            a = np.broadcast_to(np.asarray(getattr(self, name), dtype=np.float64), shape)
            if not np.all(np.isfinite(a)) or np.any(a <= 0.0):
                raise ValueError(f"non-positive or non-finite grid spacing in {name}")
            object.__setattr__(self, name, _frozen(a))
        mask = np.broadcast_to(np.asarray(self.mask, dtype=bool), shape)
        object.__setattr__(self, "mask", _frozen(mask, bool))
        if self.ghost_width is not None:
            gw = int(self.ghost_width)
            if gw < 0:
                raise ValueError("ghost_width must be >= 0")
            object.__setattr__(self, "ghost_width", gw)

    @classmethod
    def uniform(cls, nx, ny, dx, dy=None, mask=None, ghost_width=None):
        dy = dx if dy is None else dy
        mask = np.ones((ny, nx), dtype=bool) if mask is None else mask
        return cls(nx, ny, np.full((ny, nx), float(dx)), np.full((ny, nx), float(dy)), mask, ghost_width)

    @property
    def shape(self):
        return (self.ny, self.nx)

    def __eq__(self, other):
        if not isinstance(other, Grid2D):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.ghost_width == other.ghost_width
            and np.array_equal(self.dx, other.dx)
            and np.array_equal(self.dy, other.dy)
            and np.array_equal(self.mask, other.mask)
        )

    __hash__ = object.__hash__


@dataclass(frozen=True, eq=False)
class ScaleField:
    """Per-point correlation radii (meters) in the x and y directions."""

    rx: np.ndarray
    ry: np.ndarray

    def __post_init__(self):
        rx = np.asarray(self.rx, dtype=np.float64)
        ry = np.asarray(self.ry, dtype=np.float64)
        if rx.shape != ry.shape or rx.ndim != 2:
            raise ValueError(f"rx and ry must be 2-D arrays of equal shape, got {rx.shape} and {ry.shape}")
        for name, a in (("rx", rx), ("ry", ry)):
            if not np.all(np.isfinite(a)) or np.any(a <= 0.0):
                raise ValueError(f"correlation radii must be positive and finite ({name})")
        object.__setattr__(self, "rx", _frozen(rx))
        object.__setattr__(self, "ry", _frozen(ry))

    @property
    def shape(self):
        return self.rx.shape

    def sigma(self, grid: Grid2D):
        """Non-dimensional length scales ``(rx/dx, ry/dy)`` on ``grid``."""
        if self.shape != grid.shape:
            raise ValueError(f"scale field shape {self.shape} does not match grid {grid.shape}")
        return self.rx / grid.dx, self.ry / grid.dy

    def __eq__(self, other):
        if not isinstance(other, ScaleField):
            return NotImplemented
        return np.array_equal(self.rx, other.rx) and np.array_equal(self.ry, other.ry)

    __hash__ = object.__hash__


@dataclass(frozen=True, eq=False)
class StateField:
    """Scalar model-space field on ``grid``; shape ``(ny, nx)`` or ``(nz, ny, nx)``."""

    values: np.ndarray
    grid: Grid2D

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape[-2:] != self.grid.shape or v.ndim not in (2, 3):
            raise ValueError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", v)


def uniform_scale(grid: Grid2D, r: float) -> ScaleField:
    """Constant correlation radius ``r`` (meters) in both directions."""
    r = float(r)
    if not r > 0.0 or not math.isfinite(r):
        raise ValueError(f"correlation radius must be positive, got {r}")
    full = np.full(grid.shape, r)
    return ScaleField(full, full)


# ---------------------------------------------------------------------------
# container I/O

_DTYPES = {"mask": np.dtype("u1")}
_FLOAT = np.dtype("<f8")


def _fmt(path, format):
    if format is not None:
        if format not in ("binary", "csv"):
            raise ValueError(f"unknown file format {format!r}")
        return format
    return "csv" if Path(path).suffix.lower() == ".csv" else "binary"


def _write(path, header, sections, format=None):
    fmt = _fmt(path, format)
    header = dict(header)
    names = list(sections)
    if fmt == "binary":
        header.update(endianness="little", sections=names)
        with open(path, "wb") as f:
            f.write(json.dumps(header).encode() + b"\n")
            for name in names:
                dt = _DTYPES.get(name, _FLOAT)
                f.write(np.ascontiguousarray(sections[name], dtype=dt).tobytes())
    else:
        cols = []
        for name in names:
            a = np.asarray(sections[name]).ravel()
            cols.append(a.astype(np.uint8) if name in _DTYPES else a.astype(np.float64))
        with open(path, "w") as f:
            f.write("# " + json.dumps(header) + "\n")
            f.write(",".join(names) + "\n")
            for row in zip(*cols):
                f.write(",".join(str(int(v)) if isinstance(v, np.integer) else repr(float(v)) for v in row) + "\n")


def _read(path, format=None):
    """Return ``(header, {name: flat array}, count)``."""
    fmt = _fmt(path, format)
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        if fmt == "binary":
            raw = path.read_bytes()
            nl = raw.find(b"\n")
            if nl < 0:
                raise GridFormatError(f"{path}: missing header line")
            header = json.loads(raw[:nl].decode())
        else:
            with open(path) as f:
                first = f.readline()
                names_line = f.readline()
            if not first.startswith("#"):
                raise GridFormatError(f"{path}: CSV files must start with a '# {{json header}}' line")
            header = json.loads(first[1:].strip())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise GridFormatError(f"{path}: malformed header ({exc})") from None
    if not isinstance(header, dict):
        raise GridFormatError(f"{path}: header must be a JSON object")
    for key in ("nx", "ny"):
        if not isinstance(header.get(key), int) or header[key] <= 0:
            raise GridFormatError(f"{path}: header field {key!r} missing or not a positive integer")
    nz = header.get("nz", None)
    if nz is not None and (not isinstance(nz, int) or nz <= 0):
        raise GridFormatError(f"{path}: header field 'nz' must be a positive integer")
    count = header["nx"] * header["ny"] * (nz or 1)

    if fmt == "binary":
        names = header.get("sections")
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise GridFormatError(f"{path}: header must list payload 'sections'")
        if header.get("endianness", "little") != "little":
            raise GridFormatError(f"{path}: only little-endian payloads are supported")
        payload = memoryview(raw)[nl + 1:]
        expected = sum(count * _DTYPES.get(n, _FLOAT).itemsize for n in names)
        if len(payload) != expected:
            raise GridFormatError(
                f"{path}: dimension mismatch, header implies {expected} payload bytes, found {len(payload)}"
            )
        out, pos = {}, 0
        for n in names:
            dt = _DTYPES.get(n, _FLOAT)
            out[n] = np.frombuffer(payload, dtype=dt, count=count, offset=pos).copy()
            pos += count * dt.itemsize
    else:
        names = [n.strip() for n in names_line.strip().split(",") if n.strip()]
        if not names:
            raise GridFormatError(f"{path}: missing CSV column header")
        data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2, dtype=np.float64)
        if data.size == 0:
            data = np.empty((0, len(names)))
        if data.shape[1] != len(names):
            raise GridFormatError(f"{path}: expected {len(names)} columns, found {data.shape[1]}")
        if data.shape[0] != count:
            raise GridFormatError(f"{path}: dimension mismatch, header implies {count} rows, found {data.shape[0]}")
        out = {}
        for k, n in enumerate(names):
            col = data[:, k]
            out[n] = col.astype(np.uint8) if n in _DTYPES else col
    return header, out, count


def save_grid(grid: Grid2D, path, format=None):
    header = {"nx": grid.nx, "ny": grid.ny}
    if grid.ghost_width is not None:
        header["ghost_width"] = grid.ghost_width
    _write(path, header, {"dx": grid.dx, "dy": grid.dy, "mask": grid.mask}, format)


def load_grid(path, format=None) -> Grid2D:
    header, sec, _ = _read(path, format)
    nx, ny = header["nx"], header["ny"]
    for name in ("dx", "dy"):
        if name not in sec:
            raise GridFormatError(f"{path}: missing {name!r} section")
    gw = header.get("ghost_width")
    if gw is not None and (not isinstance(gw, int) or gw < 0):
        raise GridFormatError(f"{path}: ghost_width must be a non-negative integer")
    mask = sec["mask"].reshape(ny, nx) != 0 if "mask" in sec else np.ones((ny, nx), dtype=bool)
    return Grid2D(nx, ny, sec["dx"].reshape(ny, nx), sec["dy"].reshape(ny, nx), mask, gw)


def save_scale_field(scales: ScaleField, path, format=None):
    ny, nx = scales.shape
    _write(path, {"nx": nx, "ny": ny}, {"rx": scales.rx, "ry": scales.ry}, format)


def load_scale_field(path, grid: Grid2D, format=None) -> ScaleField:
    """Load zonal/meridional radii. Non-positive radii are only tolerated on land,
    where they are replaced by the largest sea radius (land radii are never used)."""
    header, sec, _ = _read(path, format)
    if (header["ny"], header["nx"]) != grid.shape:
        raise GridFormatError(f"{path}: dimension mismatch, file is {header['ny']}x{header['nx']}, grid is {grid.shape}")
    out = []
    for name in ("rx", "ry"):
        if name not in sec:
            raise GridFormatError(f"{path}: missing {name!r} section")
        r = sec[name].reshape(grid.shape)
        bad = ~(np.isfinite(r) & (r > 0.0))
        if np.any(bad & grid.mask):
            j, i = np.argwhere(bad & grid.mask)[0]
            raise GridFormatError(f"{path}: non-positive radius in {name!r} at sea point (j={j}, i={i})")
        if np.any(bad):
            r = r.copy()
            r[bad] = np.max(r[~bad]) if np.any(~bad) else 1.0
        out.append(r)
    return ScaleField(*out)


def save_field(values, path, grid: Grid2D | None = None, format=None):
    v = np.asarray(values.values if isinstance(values, StateField) else values, dtype=np.float64)
    header = {"nx": v.shape[-1], "ny": v.shape[-2]}
    if v.ndim == 3:
        header["nz"] = v.shape[0]
    _write(path, header, {"values": v}, format)


def load_field(path, grid: Grid2D | None = None, format=None) -> np.ndarray:
    header, sec, _ = _read(path, format)
    if "values" not in sec:
        raise GridFormatError(f"{path}: missing 'values' section")
    shape = (header["ny"], header["nx"])
    if grid is not None and shape != grid.shape:
        raise GridFormatError(f"{path}: dimension mismatch, file is {shape[0]}x{shape[1]}, grid is {grid.shape}")
    if "nz" in header:
        shape = (header["nz"],) + shape
    return sec["values"].reshape(shape)
