"""Independent reference implementations used as test oracles.

Nothing here imports the package: recursions are plain Python loops written
from the recurrences, dense operators are assembled column by column.
"""

import math

import numpy as np

# Third-order polynomials at q = sigma, evaluated in exact rational
# arithmetic; beta from a 40-digit evaluation of (2 pi sigma^2)^(1/4).
# sigma: ((a0, a1, a2, a3), (alpha1, alpha2, alpha3), beta)
GOLDEN_RF3 = {
    0.5: ((7.60323725, 4.9607275, -1.22061825, 0.125),
          (0.6524493892387746, -0.16053928213275206, 0.01644036558243661), 0.55040908690165566),
    1.0: ((13.909583, 15.553928, -6.382473, 1.0),
          (1.1182166999542689, -0.45885437399525203, 0.07189288133224411), 0.42548575529650396),
    2.0: ((36.845984, 62.637748, -37.529892, 8.0),
          (1.6999884709280664, -1.0185612630130871, 0.2171199987493888), 0.22715587523835192),
    5.0: ((242.244863, 573.06856, -459.561825, 125.0),
          (2.3656582554652563, -1.897096265773033, 0.5160068141465605), 0.054629793803385267),
    10.0: ((1399.875248, 3734.38442, -3338.2473, 1000.0),
           (2.6676551537969617, -2.3846748521122505, 0.7143493689374812), 0.013369334849203964),
}

# sigma = 1, K = 1: alpha = 2 - sqrt(3), beta = sqrt(3) - 1 (20 digits)
RF1_SIGMA1 = (0.26794919243112270647, 0.73205080756887729353)


def rf1_reference(x, alpha, beta, k):
    """K forward/backward first-order sweeps with per-point coefficients."""
    s = [float(v) for v in x]
    m = len(s)
    al = np.broadcast_to(alpha, (m,)).tolist()
    be = np.broadcast_to(beta, (m,)).tolist()
    for _ in range(k):
        p = [0.0] * m
        p[0] = be[0] * s[0]
        for i in range(1, m):
            p[i] = be[i] * s[i] + al[i] * p[i - 1]
        s = [0.0] * m
        s[m - 1] = be[m - 1] * p[m - 1]
        for i in range(m - 2, -1, -1):
            s[i] = be[i] * p[i] + al[i] * s[i + 1]
    return np.array(s)


def rf3_reference(x, alpha, beta):
    """One forward and one backward third-order sweep; the first three rows of
    each sweep use only the predecessors that exist."""
    s0 = [float(v) for v in x]
    m = len(s0)
    al = np.broadcast_to(alpha, (m, 3)).tolist()
    be = np.broadcast_to(beta, (m,)).tolist()
    p = [0.0] * m
    p[0] = be[0] * s0[0]
    p[1] = be[1] * s0[1] + al[1][0] * p[0]
    p[2] = be[2] * s0[2] + al[2][0] * p[1] + al[2][1] * p[0]
    for i in range(3, m):
        p[i] = be[i] * s0[i] + al[i][0] * p[i - 1] + al[i][1] * p[i - 2] + al[i][2] * p[i - 3]
    s = [0.0] * m
    s[m - 1] = be[m - 1] * p[m - 1]
    s[m - 2] = be[m - 2] * p[m - 2] + al[m - 2][0] * s[m - 1]
    s[m - 3] = be[m - 3] * p[m - 3] + al[m - 3][0] * s[m - 2] + al[m - 3][1] * s[m - 1]
    for i in range(m - 4, -1, -1):
        s[i] = be[i] * p[i] + al[i][0] * s[i + 1] + al[i][1] * s[i + 2] + al[i][2] * s[i + 3]
    return np.array(s)


def dense(apply, shape):
    """Assemble the matrix of a linear map on arrays of ``shape``."""
    n = int(np.prod(shape))
    cols = []
    for c in range(n):
        e = np.zeros(n)
        e[c] = 1.0
        cols.append(np.asarray(apply(e.reshape(shape)), dtype=np.float64).ravel())
    return np.column_stack(cols)


def sampled_gaussian(offsets, sigma):
    x = np.asarray(offsets, dtype=np.float64)
    return np.exp(-x * x / (2.0 * sigma * sigma))


def convolve_truncated(x, sigma, truncate=8.0):
    """Direct convolution with the unit-sum sampled Gaussian, zero outside."""
    t = int(math.ceil(truncate * sigma))
    g = sampled_gaussian(np.arange(-t, t + 1), sigma)
    g /= g.sum()
    m = len(x)
    out = np.zeros(m)
    for i in range(m):
        for j in range(max(0, i - t), min(m, i + t + 1)):
            out[i] += g[j - i + t] * x[j]
    return out


def half_max_width(profile):
    """Full width at half maximum by linear interpolation of the two crossings."""
    p = np.asarray(profile, dtype=np.float64)
    c = int(np.argmax(p))
    half = p[c] / 2.0
    r = c
    while p[r + 1] > half:
        r += 1
    left = c
    while p[left - 1] > half:
        left -= 1
    xr = r + (p[r] - half) / (p[r] - p[r + 1])
    xl = left - (p[left] - half) / (p[left] - p[left - 1])
    return xr - xl
