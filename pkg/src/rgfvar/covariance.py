"""Separable horizontal covariance operator ``V = D G_y G_x`` on masked grids.

Each row (``G_x``) or column (``G_y``) is cut into maximal runs of sea points.
A run that ends at a coastline is padded there with ``ghost_width`` zero-valued
imaginary sea points carrying the coefficients of the adjacent sea point; runs
that end at the domain edge are not padded. The padded run is filtered and the
ghost values dropped, so land points always come out as zero and no signal
crosses land along a single sweep.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels
from .grid import Grid2D, ScaleField, StateField
from .rf import rf1_coefficients, rf3_coefficients, rf3_gain

__all__ = [
    "HorizontalCovarianceOp",
    "resolve_threads",
    "default_ghost_width",
    "apply_gx",
    "apply_gy",
    "apply_v",
    "apply_v_transpose",
    "apply_b",
]

GHOST_FACTOR = 9.0


def resolve_threads(threads=None) -> int:
    if threads is None:
        env = os.environ.get("RGFVAR_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return threads


def default_ghost_width(grid: Grid2D, scales: ScaleField) -> int:
    sx, sy = scales.sigma(grid)
    if not grid.mask.any():
        return 0
    return int(math.ceil(GHOST_FACTOR * max(sx[grid.mask].max(), sy[grid.mask].max())))


def _segments(mask_lines, ghost):
    """Sea runs of every line as ``(line, start, stop, gl, gr, offset)`` rows."""
    nl, m = mask_lines.shape
    padded = np.zeros((nl, m + 2), dtype=np.int8)
    padded[:, 1:-1] = mask_lines
    edges = np.diff(padded, axis=1)
    lines, starts = np.nonzero(edges == 1)
    _, stops = np.nonzero(edges == -1)
    gl = np.where(starts > 0, ghost, 0)
    gr = np.where(stops < m, ghost, 0)
    lengths = gl + (stops - starts) + gr
    offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]]) if lengths.size else np.zeros(0, dtype=np.int64)
    segs = np.column_stack([lines, starts, stops, gl, gr, offsets]).astype(np.int64).reshape(-1, 6)
    return segs, int(lengths.sum())


def _extended(values_lines, segs, total):
    """Gather per-point values onto the padded layout, ghosts copying the run ends."""
    if total == 0:
        return np.zeros(0)
    lines, starts, stops, gl, gr, offsets = segs.T
    lengths = gl + (stops - starts) + gr
    seg_of = np.repeat(np.arange(len(segs)), lengths)
    local = np.arange(total) - offsets[seg_of]
    col = np.clip(starts[seg_of] - gl[seg_of] + local, starts[seg_of], stops[seg_of] - 1)
    return np.ascontiguousarray(values_lines[lines[seg_of], col])


class _Sweep:
    """One direction of the operator, laid out along lines."""

    def __init__(self, mask_lines, sigma_lines, order, k, ghost, calibration):
        self.order, self.k = order, k
        self.segs, self.total = _segments(mask_lines, ghost)
        sig = _extended(sigma_lines, self.segs, self.total)
        if order == 1:
            c = rf1_coefficients(sig, k) if sig.size else None
            self.alpha = c.alpha if c else np.zeros(0)
        else:
            c = rf3_coefficients(sig, calibration) if sig.size else None
            self.alpha = c.alpha if c else np.zeros((0, 3))
        self.beta = c.beta if c else np.zeros(0)
        for a in (self.alpha, self.beta):
            a.setflags(write=False)

    @property
    def coefficient_nbytes(self):
        return self.alpha.nbytes + self.beta.nbytes

    def run(self, src, dst, transpose, threads):
        nseg = len(self.segs)
        if nseg == 0:
            return
        work = np.empty(self.total)
        if self.order == 1:
            call = lambda s0, s1: _kernels.sweep_rf1(src, dst, self.segs, self.alpha, self.beta, self.k,
                                                     transpose, work, s0, s1)
        else:
            call = lambda s0, s1: _kernels.sweep_rf3(src, dst, self.segs, self.alpha, self.beta,
                                                     transpose, work, s0, s1)
        if threads == 1 or nseg < 2 * threads:
            call(0, nseg)
            return
        bounds = np.linspace(0, nseg, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(call, bounds[:-1], bounds[1:]))


class HorizontalCovarianceOp:
    """Horizontal covariance square root ``V = D G_y G_x`` and ``B = V V^T``.

    Parameters
    ----------
    grid, scales
        Domain and correlation radii (meters).
    order : {1, 3}
        Recursive filter order. The third-order filter is single-pass, so
        ``k`` must be 1 with ``order=3``.
    k : int
        Iterations of the first-order filter.
    unit_dc : bool
        Divide third-order output by ``sqrt(2 pi) sigma`` per sweep so both
        orders have unit response to a constant.
    variance : array_like, optional
        Pointwise background-error standard deviation multiplier ``D``.
    ghost_width : int, optional
        Imaginary sea points at coastlines. Defaults to ``grid.ghost_width`` or
        ``ceil(9 * max sigma)``.
    calibration : {"young", "none"}
        Width mapping of the third-order coefficients, see :mod:`rgfvar.rf`.
    threads : int, optional
        Worker threads for the line sweeps (``RGFVAR_THREADS`` or all cores).
    """

    def __init__(self, grid: Grid2D, scales: ScaleField, order=3, k=1, unit_dc=False, variance=None,
                 ghost_width=None, calibration="young", threads=None):
        if order not in (1, 3):
            raise ValueError(f"filter order must be 1 or 3, got {order}")
        if int(k) != k or k < 1:
            raise ValueError(f"iteration count must be a positive integer, got {k}")
        if order == 3 and k != 1:
            raise ValueError("the third-order filter is applied once; k must be 1")
        self.grid, self.scales = grid, scales
        self.order, self.k = order, int(k)
        self.unit_dc = bool(unit_dc)
        self.calibration = calibration
        self.threads = resolve_threads(threads)
        if ghost_width is None:
            ghost_width = grid.ghost_width if grid.ghost_width is not None else default_ghost_width(grid, scales)
        if ghost_width < 0:
            raise ValueError("ghost_width must be >= 0")
        self.ghost_width = int(ghost_width)

        sx, sy = scales.sigma(grid)
        self.sigma_x, self.sigma_y = sx, sy
        self._x = _Sweep(grid.mask, sx, order, self.k, self.ghost_width, calibration)
        self._y = _Sweep(grid.mask.T, sy.T, order, self.k, self.ghost_width, calibration)
        if self.unit_dc and order == 3:
            self._inv_gain_x = 1.0 / rf3_gain(sx)
            self._inv_gain_y = 1.0 / rf3_gain(sy)
        else:
            self._inv_gain_x = self._inv_gain_y = None
        if variance is None:
            self.variance = None
        else:
            v = np.broadcast_to(np.asarray(variance, dtype=np.float64), grid.shape).copy()
            v.setflags(write=False)
            self.variance = v

    def __repr__(self):
        return (f"HorizontalCovarianceOp(order={self.order}, k={self.k}, unit_dc={self.unit_dc}, "
                f"ghost_width={self.ghost_width}, grid={self.grid.ny}x{self.grid.nx})")

    @property
    def coefficient_nbytes(self) -> int:
        """Bytes held by the filter coefficient tables of both directions."""
        return self._x.coefficient_nbytes + self._y.coefficient_nbytes

    # -- plumbing ---------------------------------------------------------
    def _check(self, field):
        if isinstance(field, StateField):
            if field.grid is not self.grid and field.grid != self.grid:
                raise ValueError("field is defined on a different grid")
            return field.values, lambda v: StateField(v, self.grid)
        a = np.asarray(field, dtype=np.float64)
        if a.ndim not in (2, 3) or a.shape[-2:] != self.grid.shape:
            raise ValueError(f"field shape {a.shape} does not match grid {self.grid.shape}")
        return a, lambda v: v

    def _levels(self, a, fn):
        if a.ndim == 3:
            return np.stack([fn(level) for level in a])
        return fn(a)

    def _sweep(self, sweep, a, transpose, inv_gain, along_y):
        if inv_gain is not None and transpose:
            a = a * inv_gain
        out = np.zeros(self.grid.shape)
        if along_y:
            sweep.run(a.T, out.T, transpose, self.threads)
        else:
            sweep.run(a, out, transpose, self.threads)
        if inv_gain is not None and not transpose:
            out *= inv_gain
        return out

    def _gx(self, a, transpose=False):
        return self._sweep(self._x, a, transpose, self._inv_gain_x, False)

    def _gy(self, a, transpose=False):
        return self._sweep(self._y, a, transpose, self._inv_gain_y, True)

    def _v(self, a):
        out = self._gy(self._gx(a))
        if self.variance is not None:
            out *= self.variance
        return out

    def _vt(self, a):
        if self.variance is not None:
            a = a * self.variance
        return self._gx(self._gy(a, True), True)

    def _apply(self, field, fn):
        a, wrap = self._check(field)
        return wrap(self._levels(a, fn))

    # -- public operators -------------------------------------------------
    def apply_gx(self, field):
        return self._apply(field, self._gx)

    def apply_gy(self, field):
        return self._apply(field, self._gy)

    def apply_gx_transpose(self, field):
        return self._apply(field, lambda a: self._gx(a, True))

    def apply_gy_transpose(self, field):
        return self._apply(field, lambda a: self._gy(a, True))

    def apply_v(self, field):
        return self._apply(field, self._v)

    def apply_v_transpose(self, field):
        return self._apply(field, self._vt)

    def apply_b(self, field):
        return self._apply(field, lambda a: self._v(self._vt(a)))


def apply_gx(field, op: HorizontalCovarianceOp):
    return op.apply_gx(field)


def apply_gy(field, op: HorizontalCovarianceOp):
    return op.apply_gy(field)


def apply_v(field, op: HorizontalCovarianceOp):
    return op.apply_v(field)


def apply_v_transpose(field, op: HorizontalCovarianceOp):
    return op.apply_v_transpose(field)


def apply_b(field, op: HorizontalCovarianceOp):
    return op.apply_b(field)
