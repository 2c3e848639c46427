"""Compiled recursions over line segments.

A sweep handles a batch of segments described by rows of ``segs``::

    (line, start, stop, ghost_left, ghost_right, offset)

Each segment is copied into ``work[offset:offset + n]`` with ``ghost_left`` and
``ghost_right`` zero cells around it, filtered in place with the coefficients
stored at the same offsets, and copied back. Starting every recursion from a
zero history reproduces the startup rows ``p_1 = beta_1 s_1`` etc.

Forward pass ``P = L^-1 D`` and backward pass ``Q = U^-1 D`` have transposes
``D L^-T`` (a backward sweep) and ``D U^-T`` (a forward sweep); in the
transposed sweeps the feedback coefficient is read at the source point.
"""

import numpy as np
from numba import njit

_JIT = dict(nogil=True, cache=True)


@njit(**_JIT)
def _rf1_fwd(w, al, be):
    n = w.shape[0]
    w[0] = be[0] * w[0]
    for i in range(1, n):
        w[i] = be[i] * w[i] + al[i] * w[i - 1]


@njit(**_JIT)
def _rf1_bwd(w, al, be):
    n = w.shape[0]
    w[n - 1] = be[n - 1] * w[n - 1]
    for i in range(n - 2, -1, -1):
        w[i] = be[i] * w[i] + al[i] * w[i + 1]


@njit(**_JIT)
def _rf1_fwd_t(w, al, be):
    # transpose of _rf1_bwd
    n = w.shape[0]
    c = w[0]
    w[0] = be[0] * c
    for i in range(1, n):
        c = w[i] + al[i - 1] * c
        w[i] = be[i] * c


@njit(**_JIT)
def _rf1_bwd_t(w, al, be):
    # transpose of _rf1_fwd
    n = w.shape[0]
    c = w[n - 1]
    w[n - 1] = be[n - 1] * c
    for i in range(n - 2, -1, -1):
        c = w[i] + al[i + 1] * c
        w[i] = be[i] * c


@njit(**_JIT)
def _rf3_fwd(w, al, be):
    n = w.shape[0]
    for i in range(min(3, n)):
        acc = be[i] * w[i]
        for j in range(1, i + 1):
            acc += al[i, j - 1] * w[i - j]
        w[i] = acc
    for i in range(3, n):
        w[i] = be[i] * w[i] + al[i, 0] * w[i - 1] + al[i, 1] * w[i - 2] + al[i, 2] * w[i - 3]


@njit(**_JIT)
def _rf3_bwd(w, al, be):
    n = w.shape[0]
    for i in range(n - 1, max(n - 4, -1), -1):
        acc = be[i] * w[i]
        for j in range(1, n - i):
            acc += al[i, j - 1] * w[i + j]
        w[i] = acc
    for i in range(n - 4, -1, -1):
        w[i] = be[i] * w[i] + al[i, 0] * w[i + 1] + al[i, 1] * w[i + 2] + al[i, 2] * w[i + 3]


@njit(**_JIT)
def _rf3_fwd_t(w, al, be):
    # transpose of _rf3_bwd: y_i = x_i + sum_j al[i-j, j-1] y_{i-j}; out_i = be_i y_i
    n = w.shape[0]
    y1 = 0.0
    y2 = 0.0
    y3 = 0.0
    for i in range(n):
        y = w[i]
        if i >= 1:
            y += al[i - 1, 0] * y1
        if i >= 2:
            y += al[i - 2, 1] * y2
        if i >= 3:
            y += al[i - 3, 2] * y3
        y3 = y2
        y2 = y1
        y1 = y
        w[i] = be[i] * y


@njit(**_JIT)
def _rf3_bwd_t(w, al, be):
    # transpose of _rf3_fwd: y_i = x_i + sum_j al[i+j, j-1] y_{i+j}; out_i = be_i y_i
    n = w.shape[0]
    y1 = 0.0
    y2 = 0.0
    y3 = 0.0
    for i in range(n - 1, -1, -1):
        y = w[i]
        if i + 1 < n:
            y += al[i + 1, 0] * y1
        if i + 2 < n:
            y += al[i + 2, 1] * y2
        if i + 3 < n:
            y += al[i + 3, 2] * y3
        y3 = y2
        y2 = y1
        y1 = y
        w[i] = be[i] * y


@njit(**_JIT)
def _load(src, dst_work, line, a, b, gl, gr):
    m = b - a
    for i in range(gl):
        dst_work[i] = 0.0
    for i in range(m):
        dst_work[gl + i] = src[line, a + i]
    for i in range(gl + m, gl + m + gr):
        dst_work[i] = 0.0


@njit(**_JIT)
def _store(w, dst, line, a, b, gl):
    for i in range(b - a):
        dst[line, a + i] = w[gl + i]


@njit(**_JIT)
def sweep_rf1(src, dst, segs, alpha, beta, k, transpose, work, s0, s1):
    for s in range(s0, s1):
        line, a, b, gl, gr, off = segs[s, 0], segs[s, 1], segs[s, 2], segs[s, 3], segs[s, 4], segs[s, 5]
        n = gl + (b - a) + gr
        w = work[off:off + n]
        al = alpha[off:off + n]
        be = beta[off:off + n]
        _load(src, w, line, a, b, gl, gr)
        for _ in range(k):
            if transpose:
                _rf1_fwd_t(w, al, be)
                _rf1_bwd_t(w, al, be)
            else:
                _rf1_fwd(w, al, be)
                _rf1_bwd(w, al, be)
        _store(w, dst, line, a, b, gl)


@njit(**_JIT)
def sweep_rf3(src, dst, segs, alpha, beta, transpose, work, s0, s1):
    for s in range(s0, s1):
        line, a, b, gl, gr, off = segs[s, 0], segs[s, 1], segs[s, 2], segs[s, 3], segs[s, 4], segs[s, 5]
        n = gl + (b - a) + gr
        w = work[off:off + n]
        al = alpha[off:off + n]
        be = beta[off:off + n]
        _load(src, w, line, a, b, gl, gr)
        if transpose:
            _rf3_fwd_t(w, al, be)
            _rf3_bwd_t(w, al, be)
        else:
            _rf3_fwd(w, al, be)
            _rf3_bwd(w, al, be)
        _store(w, dst, line, a, b, gl)


@njit(**_JIT)
def fma_chain(n, a, b):
    """Dependent multiply-add chain used to calibrate the per-flop time."""
    acc = 0.0
    for _ in range(n):
        acc = acc * a + b
    return acc


def warmup():
    """Trigger compilation for the common array layouts."""
    segs = np.array([[0, 0, 6, 1, 1, 0]], dtype=np.int64)
    src = np.zeros((1, 6))
    work = np.zeros(8)
    a1, a3, be = np.zeros(8), np.zeros((8, 3)), np.zeros(8)
    for t in (False, True):
        for s, d in ((src, np.zeros((1, 6))), (src.T.copy().T, np.zeros((6, 1)).T)):
            sweep_rf1(s, d, segs, a1, be, 1, t, work, 0, 1)
            sweep_rf3(s, d, segs, a3, be, t, work, 0, 1)
