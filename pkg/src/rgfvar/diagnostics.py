"""Accuracy and performance instrumentation for the recursive filters."""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels
from .covariance import HorizontalCovarianceOp
from .grid import Grid2D, uniform_scale
from .rf import (
    SMALL_SIGMA,
    rational_gauss,
    rf1_apply_1d,
    rf1_coefficients,
    rf3_apply_1d,
    rf3_coefficients,
)

__all__ = [
    "QualityWarning",
    "ImpulseReport",
    "ErrorBoundReport",
    "ComplexityModel",
    "impulse_errors",
    "impulse_response",
    "filter_1d",
    "gaussian_kernel",
    "convolve_direct",
    "remark1_bound_check",
    "rational_gauss_check",
    "predict_time",
    "calibrate_t_calc",
    "measure_filter_time",
    "run_benchmark",
]

RATIONAL_BOUND = 2.7e-3
TRUNCATION = 8.0


class QualityWarning(UserWarning):
    """Length scale too small for a meaningful recursive Gaussian."""


def _check_quality(sigma):
    if np.min(sigma) < SMALL_SIGMA:
        msg = f"sigma {np.min(sigma):.3g} is below {SMALL_SIGMA}: kernel narrower than half a grid cell"
        warnings.warn(msg, QualityWarning, stacklevel=3)
        return msg
    return None


def filter_1d(x, sigma, order, k=1, unit_dc=False, calibration="young"):
    """Apply a 1-D recursive filter with constant or per-point ``sigma``."""
    if order == 1:
        return rf1_apply_1d(x, rf1_coefficients(sigma, k))
    if order == 3:
        if k != 1:
            raise ValueError("the third-order filter is applied once; k must be 1")
        return rf3_apply_1d(x, rf3_coefficients(sigma, calibration), unit_dc=unit_dc)
    raise ValueError(f"filter order must be 1 or 3, got {order}")


def impulse_errors(h, g):
    """L2 and max errors between unit-sum normalized ``h`` and ``g``."""
    d = h / h.sum() - g / g.sum()
    return float(np.linalg.norm(d)), float(np.max(np.abs(d)))


@dataclass
class ImpulseReport:
    sigma: float
    order: int
    k: int
    offsets: np.ndarray
    h: np.ndarray
    g: np.ndarray
    err_h_l2: float
    err_h_max: float
    sum_h: float
    calibration: str = "young"
    quality: str | None = None

    def summary(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("offsets", "h", "g")}
        d["length"] = int(self.h.size)
        return d

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["offset", "h", "g"])
            for o, h, g in zip(self.offsets, self.h, self.g):
                w.writerow([int(o), repr(float(h)), repr(float(g))])

    def to_json(self, path):
        with open(path, "w") as f:
            json.dump(self.summary(), f, indent=2)


def impulse_response(sigma, order, k=1, length=300, calibration="young") -> ImpulseReport:
    """Filter a centred Dirac and compare with ``exp(-x^2 / 2 sigma^2)``.

    ``h`` is the raw filter output (third order keeps its ``sqrt(2 pi) sigma``
    gain); the errors are taken after both curves are scaled to unit sum.
    """
    if length < 4:
        raise ValueError(f"length must be >= 4, got {length}")
    quality = _check_quality(np.asarray(sigma))
    c = length // 2
    x = np.zeros(length)
    x[c] = 1.0
    h = filter_1d(x, sigma, order, k, calibration=calibration)
    offsets = np.arange(length) - c
    g = np.exp(-(offsets.astype(float) ** 2) / (2.0 * sigma * sigma))
    l2, mx = impulse_errors(h, g)
    return ImpulseReport(float(sigma), order, k, offsets, h, g, l2, mx, float(h.sum()), calibration, quality)


def gaussian_kernel(sigma, truncate=TRUNCATION):
    """Unit-sum sampled Gaussian on offsets ``-T..T`` with ``T = ceil(truncate*sigma)``."""
    t = int(math.ceil(truncate * sigma))
    x = np.arange(-t, t + 1, dtype=float)
    g = np.exp(-x * x / (2.0 * sigma * sigma))
    return g / g.sum()


def convolve_direct(s0, kernel):
    """Dense O(m^2) discrete convolution on the segment (zero outside)."""
    s0 = np.asarray(s0, dtype=np.float64)
    m = s0.size
    t = kernel.size // 2
    lag = np.arange(m)[:, None] - np.arange(m)[None, :]
    inside = np.abs(lag) <= t
    G = np.where(inside, kernel[np.clip(lag + t, 0, kernel.size - 1)], 0.0)
    return G @ s0


@dataclass
class ErrorBoundReport:
    lhs: float
    rhs: float
    err_h_l2: float
    norm_s0: float
    holds: bool


def remark1_bound_check(s0, sigma, order, k=1, calibration="young") -> ErrorBoundReport:
    """Compare ``||g * s0 - RF(s0)||`` with ``||g - h|| ||s0||``.

    The filter is used with unit response to a constant and ``g`` is the
    unit-sum Gaussian truncated at 8 sigma, so both sides share one
    normalization. ``h`` is the response to a Dirac at the segment centre.
    """
    s0 = np.asarray(s0, dtype=np.float64)
    if not np.all(np.isfinite(s0)):
        raise ValueError("input must be finite")
    m = s0.size
    kern = gaussian_kernel(sigma)
    dirac = np.zeros(m)
    dirac[m // 2] = 1.0
    h = filter_1d(dirac, sigma, order, k, unit_dc=True, calibration=calibration)
    err_h = float(np.linalg.norm(convolve_direct(dirac, kern) - h))
    lhs = float(np.linalg.norm(convolve_direct(s0, kern) - filter_1d(s0, sigma, order, k, True, calibration)))
    norm_s0 = float(np.linalg.norm(s0))
    rhs = err_h * norm_s0
    return ErrorBoundReport(lhs, rhs, err_h, norm_s0, lhs <= rhs * (1.0 + 1e-9))


def rational_gauss_check(t_max=6.0, step=1e-3):
    """Largest ``|1/(b0 + b2 t^2 + b4 t^4 + b6 t^6) - exp(-t^2/2)/sqrt(2 pi)|``
    over ``[-t_max, t_max]`` sampled every ``step``. Returns ``(error, t)``."""
    n = int(round(t_max / step))
    t = np.arange(-n, n + 1) * step
    err = np.abs(rational_gauss(t) - np.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi))
    i = int(np.argmax(err))
    return float(err[i]), float(t[i])


# ---------------------------------------------------------------------------
# cost model and timing

@dataclass(frozen=True)
class ComplexityModel:
    n: int
    k: int
    m: int
    t_calc: float

    @property
    def flops(self):
        return 2 * (2 * self.n + 1) * self.m * self.k

    @property
    def seconds(self):
        return predict_time(self.n, self.k, self.m, self.t_calc)


def predict_time(n, k, m, t_calc):
    """``T(n, K, m) = 2 (2n + 1) m K t_calc``."""
    if n < 1 or k < 0 or m < 0 or t_calc < 0:
        raise ValueError("n must be >= 1 and k, m, t_calc non-negative")
    return 2 * (2 * n + 1) * m * k * t_calc


def calibrate_t_calc(iterations=100_000_000):
    """Seconds per floating point operation from a dependent multiply-add chain
    (two flops per iteration)."""
    _kernels.fma_chain(10, 0.5, 1.0)
    t0 = time.perf_counter()
    _kernels.fma_chain(int(iterations), 0.999999, 1e-9)
    return (time.perf_counter() - t0) / (2.0 * iterations)


def measure_filter_time(op: HorizontalCovarianceOp, field, repeats):
    """Median wall time of ``op.apply_v(field)`` over ``repeats`` runs.

    One untimed warm-up call precedes the measurements. Memory is the
    coefficient storage of the operator.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    op.apply_v(field)
    times = []
    for _ in range(int(repeats)):
        t0 = time.perf_counter()
        op.apply_v(field)
        times.append(time.perf_counter() - t0)
    return {
        "median_s": float(np.median(times)),
        "times_s": times,
        "memory_bytes": int(op.coefficient_nbytes),
        "threads": op.threads,
    }


def run_benchmark(grid_size=1024, configs=((1, 1), (1, 5), (1, 10), (3, 1)), repeats=5, threads=1,
                  seed=0, sigma=2.0, t_calc=None, t_calc_iterations=100_000_000):
    """Time each ``(order, k)`` on an all-sea square grid; compare with the cost model."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    dx = 6000.0
    grid = Grid2D.uniform(grid_size, grid_size, dx)
    scales = uniform_scale(grid, sigma * dx)
    field = np.random.default_rng(seed).standard_normal(grid.shape)
    if t_calc is None:
        t_calc = calibrate_t_calc(t_calc_iterations)
    m = 2 * grid_size * grid_size
    rows = []
    for order, k in configs:
        op = HorizontalCovarianceOp(grid, scales, order=order, k=k, threads=threads)
        res = measure_filter_time(op, field, repeats)
        pred = predict_time(order, k, m, t_calc)
        res.update(order=order, k=k, predicted_s=pred, measured_over_predicted=res["median_s"] / pred)
        rows.append(res)
    ref = next((r for r in rows if r["order"] == 3), None)
    if ref is not None:
        for r in rows:
            r["speedup_of_third_order"] = r["median_s"] / ref["median_s"]
            r["predicted_speedup_of_third_order"] = r["predicted_s"] / ref["predicted_s"]
    return {
        "grid_size": grid_size,
        "sigma": sigma,
        "repeats": repeats,
        "threads": threads,
        "seed": seed,
        "t_calc_s": t_calc,
        "low_confidence": repeats < 3,
        "results": rows,
    }
