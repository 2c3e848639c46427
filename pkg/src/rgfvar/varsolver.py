"""Matrix-free 3D-VAR analysis in increment space.

The increment is written ``dx = V chi`` with ``B = V V^T``. The cost

    J(chi) = 1/2 chi^T chi + 1/2 (d - H V chi)^T R^-1 (d - H V chi)

has the symmetric positive definite Hessian ``I + V^T H^T R^-1 H V``, which
conjugate gradients minimize. Applying ``V`` to the normal equations recovers
``(I + B H^T R^-1 H) dx = B H^T R^-1 d``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .covariance import HorizontalCovarianceOp
from .grid import Grid2D, StateField

__all__ = [
    "ObsError",
    "ObsSet",
    "Analysis",
    "load_obs",
    "obs_operator",
    "obs_operator_transpose",
    "interpolation_matrix",
    "misfit",
    "cost",
    "solve",
]

DEFAULT_MAX_ITER = 30


class ObsError(ValueError):
    """Invalid observation set for a given grid."""


@dataclass(frozen=True)
class ObsSet:
    """Point observations at fractional grid coordinates.

    ``positions[:, 0]`` is the column coordinate ``i`` (x) and
    ``positions[:, 1]`` the row coordinate ``j`` (y). ``r_var`` is the
    observation-error variance (diagonal ``R``).
    """

    positions: np.ndarray
    values: np.ndarray
    r_var: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        rv = np.asarray(self.r_var, dtype=np.float64).reshape(-1)
        if not (len(pos) == len(vals) == len(rv)):
            raise ObsError("positions, values and r_var must have the same length")
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(vals)):
            raise ObsError("observation positions and values must be finite")
        if np.any(~(rv > 0.0)) or not np.all(np.isfinite(rv)):
            raise ObsError("observation-error variances must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "r_var", rv)
        labels = tuple(self.labels) or tuple(f"obs {n}" for n in range(len(vals)))
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.values)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2)), np.zeros(0), np.zeros(0))


def load_obs(path) -> ObsSet:
    """Read ``i,j,value,error_std`` CSV rows (a header row is optional)."""
    pos, vals, rvar, labels = [], [], [], []
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            try:
                i, j, v, e = (float(c) for c in row[:4])
                if len(row) != 4:
                    raise ValueError
            except ValueError:
                if lineno == 1:
                    continue
                raise ObsError(f"{path}: row {lineno}: expected 4 numeric columns i,j,value,error_std") from None
            if not e > 0.0:
                raise ObsError(f"{path}: row {lineno}: error_std must be positive")
            pos.append((i, j))
            vals.append(v)
            rvar.append(e * e)
            labels.append(f"{path}: row {lineno}")
    if not pos:
        return ObsSet.empty()
    return ObsSet(np.array(pos), np.array(vals), np.array(rvar), tuple(labels))


def interpolation_matrix(obs: ObsSet, grid: Grid2D) -> sp.csr_matrix:
    """Sparse bilinear interpolation ``H`` of shape ``(nobs, ny*nx)``."""
    nx, ny = grid.nx, grid.ny
    n = len(obs)
    if n == 0:
        return sp.csr_matrix((0, nx * ny))
    i, j = obs.positions[:, 0], obs.positions[:, 1]
    outside = (i < 0) | (i > nx - 1) | (j < 0) | (j > ny - 1)
    if outside.any():
        k = int(np.argmax(outside))
        raise ObsError(f"{obs.labels[k]}: position (i={i[k]}, j={j[k]}) outside the {nx}x{ny} grid")
    i0 = np.minimum(np.floor(i).astype(int), nx - 2)
    j0 = np.minimum(np.floor(j).astype(int), ny - 2)
    fi, fj = i - i0, j - j0
    cols = np.stack([j0 * nx + i0, j0 * nx + i0 + 1, (j0 + 1) * nx + i0, (j0 + 1) * nx + i0 + 1], axis=1)
    w = np.stack([(1 - fi) * (1 - fj), fi * (1 - fj), (1 - fi) * fj, fi * fj], axis=1)
    sea_weight = (w * grid.mask.ravel()[cols]).sum(axis=1)
    if np.any(sea_weight <= 0.0):
        k = int(np.argmax(sea_weight <= 0.0))
        raise ObsError(f"{obs.labels[k]}: position (i={i[k]}, j={j[k]}) has no sea point in its stencil")
    rows = np.repeat(np.arange(n), 4)
    return sp.csr_matrix((w.ravel(), (rows, cols.ravel())), shape=(n, nx * ny))


def _grid_of(field, grid):
    if isinstance(field, StateField):
        return field.values, field.grid
    if grid is None:
        raise ValueError("a grid is required for plain array fields")
    return np.asarray(field, dtype=np.float64), grid


def obs_operator(field, obs: ObsSet, grid: Grid2D | None = None) -> np.ndarray:
    """Bilinear interpolation of a 2-D ``field`` to the observation positions."""
    values, grid = _grid_of(field, grid)
    if values.shape != grid.shape:
        raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
    return interpolation_matrix(obs, grid) @ values.ravel()


def obs_operator_transpose(vec, obs: ObsSet, grid: Grid2D) -> np.ndarray:
    """Scatter observation-space values back with the bilinear weights."""
    vec = np.asarray(vec, dtype=np.float64)
    return (interpolation_matrix(obs, grid).T @ vec).reshape(grid.shape)


def misfit(background_at_obs, obs: ObsSet) -> np.ndarray:
    """``d = y - H(x_b)``."""
    hb = np.asarray(background_at_obs, dtype=np.float64)
    if hb.shape != obs.values.shape:
        raise ValueError(f"expected {obs.values.shape[0]} background values, got {hb.shape}")
    return obs.values - hb


class _Problem:
    def __init__(self, obs, op, d):
        self.op = op
        self.H = interpolation_matrix(obs, op.grid)
        self.rinv = 1.0 / obs.r_var
        self.d = obs.values.copy() if d is None else np.asarray(d, dtype=np.float64)
        if self.d.shape != obs.values.shape:
            raise ValueError("misfit length does not match the observation count")

    def hv(self, chi):
        return self.H @ self.op.apply_v(chi.reshape(self.op.grid.shape)).ravel()

    def vt_ht(self, y):
        return self.op.apply_v_transpose((self.H.T @ y).reshape(self.op.grid.shape)).ravel()

    def hessian(self, chi):
        return chi + self.vt_ht(self.rinv * self.hv(chi))

    def rhs(self):
        return self.vt_ht(self.rinv * self.d)

    def terms(self, chi):
        r = self.d - self.hv(chi)
        return 0.5 * float(chi @ chi), 0.5 * float(r @ (self.rinv * r))


def cost(chi, obs: ObsSet, op: HorizontalCovarianceOp, d=None):
    """Cost and gradient in the control variable ``chi`` (increment ``V chi``).

    ``d`` defaults to the observed values (zero background).
    """
    prob = _Problem(obs, op, d)
    chi = np.asarray(chi, dtype=np.float64).ravel()
    jb, jo = prob.terms(chi)
    grad = chi - prob.vt_ht(prob.rinv * (prob.d - prob.hv(chi)))
    return jb + jo, grad.reshape(op.grid.shape)


@dataclass
class Analysis:
    increment: np.ndarray
    control: np.ndarray
    misfit: np.ndarray
    cg_iterations: int
    gradient_norms: list = field(default_factory=list)
    converged: bool = True
    cost_initial: float = 0.0
    cost_final: float = 0.0
    jb: float = 0.0
    jo: float = 0.0

    @property
    def relative_residual(self):
        if not self.gradient_norms or self.gradient_norms[0] == 0.0:
            return 0.0
        return self.gradient_norms[-1] / self.gradient_norms[0]

    def diagnostics(self) -> dict:
        return {
            "cg_iterations": self.cg_iterations,
            "converged": self.converged,
            "relative_residual": self.relative_residual,
            "gradient_norms": list(self.gradient_norms),
            "cost": {"initial": self.cost_initial, "final": self.cost_final, "jb": self.jb, "jo": self.jo},
            "nobs": int(self.misfit.size),
        }


def solve(obs: ObsSet, op: HorizontalCovarianceOp, d=None, tol=1e-6, max_iter=DEFAULT_MAX_ITER) -> Analysis:
    """Conjugate-gradient analysis increment.

    Stops when ``||r_k|| <= tol * ||r_0||`` or after ``max_iter`` iterations;
    in the latter case the result carries ``converged=False``.
    ``gradient_norms`` records ``||r_k||`` (the cost gradient norm at ``chi_k``).
    """
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    if max_iter < 0:
        raise ValueError("max_iter must be >= 0")
    prob = _Problem(obs, op, d)
    n = op.grid.nx * op.grid.ny
    chi = np.zeros(n)
    j0 = 0.5 * float(prob.d @ (prob.rinv * prob.d))
    r = prob.rhs()
    rr = float(r @ r)
    norms = [math.sqrt(rr)]
    target = tol * norms[0]
    it = 0
    if norms[0] > 0.0:
        p = r.copy()
        while it < max_iter and norms[-1] > target:
            ap = prob.hessian(p)
            step = rr / float(p @ ap)
            chi += step * p
            r -= step * ap
            rr_new = float(r @ r)
            p = r + (rr_new / rr) * p
            rr = rr_new
            it += 1
            norms.append(math.sqrt(rr))
    converged = norms[-1] <= target or norms[0] == 0.0
    jb, jo = prob.terms(chi)
    increment = op.apply_v(chi.reshape(op.grid.shape))
    return Analysis(increment, chi.reshape(op.grid.shape), prob.d, it, norms, converged, j0, jb + jo, jb, jo)
