"""Independent reference implementations used to check the projections.

None of these share code with the package: the KL oracle brackets the scale
with scipy's root finder or a plain bisection, and the PAVA oracle is a dynamic
program over a discrete grid.
"""

import numpy as np
from scipy.optimize import brentq


def kl_bisection(w_tilde, mu, iters=400):
    """Solve ``sum max(mu, c w_i) = 1`` for ``c`` by bisection, return ``(w, c)``."""
    w_tilde = np.asarray(w_tilde, dtype=float)
    lo, hi = 0.0, 1.0 / w_tilde.sum()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.maximum(mu, mid * w_tilde).sum() < 1.0:
            lo = mid
        else:
            hi = mid
    c = 0.5 * (lo + hi)
    return np.maximum(mu, c * w_tilde), c


def kl_brentq(w_tilde, mu):
    w_tilde = np.asarray(w_tilde, dtype=float)
    f = lambda c: np.maximum(mu, c * w_tilde).sum() - 1.0  # noqa: E731
    c = brentq(f, 0.0, 1.0 / w_tilde.sum(), xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return np.maximum(mu, c * w_tilde), c


def kl_divergence(w, w_tilde):
    w = np.asarray(w, dtype=float)
    w_tilde = np.asarray(w_tilde, dtype=float)
    return float(np.sum(w * np.log(w / w_tilde) - w + w_tilde))


def grid_projection(v, bound, pitch=1e-3):
    """Exact minimizer of ``||q - v||^2`` over non-increasing q on the grid ``pitch * Z`` in ``[0, bound]``.

    Dynamic program: ``cost_i(x) = (x - v_i)^2 + min_{y >= x} cost_{i-1}(y)``.
    """
    v = np.asarray(v, dtype=float)
    n_pts = int(round(bound / pitch)) + 1
    xs = np.arange(n_pts) * pitch
    costs = []
    prev = np.zeros(n_pts)
    for vi in v:
        best_above = np.minimum.accumulate(prev[::-1])[::-1]
        prev = (xs - vi) ** 2 + best_above
        costs.append(prev)
    out = np.empty(v.size)
    j = int(np.argmin(costs[-1]))
    for i in range(v.size - 1, -1, -1):
        out[i] = xs[j]
        if i > 0:
            j += int(np.argmin(costs[i - 1][j:]))
    return out


def cone_vertices(K, bound):
    """Vertices of ``{bound >= q_1 >= ... >= q_K >= 0}``: ``bound`` on a prefix, zero after."""
    return bound * np.tril(np.ones((K + 1, K)), -1)
