"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``POLYVEM_DISABLE_NUMBA=1`` before import to force the numpy path.
Both paths are always importable under their explicit names
(``*_numba`` / ``*_numpy``) so they can be cross-checked and benchmarked.
"""
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("POLYVEM_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def exponents(degree):
    """Graded exponent table: row k holds (a1, a2) of linear index k+1."""
    out = np.empty(((degree + 1) * (degree + 2) // 2, 2), dtype=np.int64)
    k = 0
    for d in range(degree + 1):
        for a2 in range(d + 1):
            out[k, 0] = d - a2
            out[k, 1] = a2
            k += 1
    return out


def monomial_table_numpy(sx, sy, degree):
    """Values and scaled-coordinate derivatives of x^a y^b at points.

    ``sx``, ``sy`` are already shifted and scaled coordinates. Returns arrays
    of shape (n_monomials, n_points): value, d/dsx, d/dsy.
    """
    sx = np.asarray(sx, dtype=np.float64)
    sy = np.asarray(sy, dtype=np.float64)
    exps = exponents(degree)
    px = np.ones((degree + 1, sx.size))
    py = np.ones((degree + 1, sy.size))
    for k in range(1, degree + 1):
        px[k] = px[k - 1] * sx
        py[k] = py[k - 1] * sy
    a = exps[:, 0]
    b = exps[:, 1]
    val = px[a] * py[b]
    am1 = np.maximum(a - 1, 0)
    bm1 = np.maximum(b - 1, 0)
    dx = a[:, None] * px[am1] * py[b]
    dy = b[:, None] * px[a] * py[bm1]
    return val, dx, dy


def scatter_add_numpy(target, local, idx):
    """target[idx[i], idx[j]] += local[i, j]."""
    target[np.ix_(idx, idx)] += local


if HAVE_NUMBA:

    @njit(cache=True)
    def monomial_table_numba(sx, sy, degree):
        n = (degree + 1) * (degree + 2) // 2
        npts = sx.shape[0]
        val = np.empty((n, npts))
        dx = np.empty((n, npts))
        dy = np.empty((n, npts))
        px = np.empty(degree + 1)
        py = np.empty(degree + 1)
        for q in range(npts):
            px[0] = 1.0
            py[0] = 1.0
            for k in range(1, degree + 1):
                px[k] = px[k - 1] * sx[q]
                py[k] = py[k - 1] * sy[q]
            k = 0
            for d in range(degree + 1):
                for b in range(d + 1):
                    a = d - b
                    val[k, q] = px[a] * py[b]
                    dx[k, q] = a * px[a - 1] * py[b] if a > 0 else 0.0
                    dy[k, q] = b * px[a] * py[b - 1] if b > 0 else 0.0
                    k += 1
        return val, dx, dy

    @njit(cache=True)
    def scatter_add_numba(target, local, idx):
        n = idx.shape[0]
        for i in range(n):
            gi = idx[i]
            for j in range(n):
                target[gi, idx[j]] += local[i, j]

else:  # pragma: no cover
    monomial_table_numba = monomial_table_numpy
    scatter_add_numba = scatter_add_numpy


def monomial_table(sx, sy, degree):
    sx = np.ascontiguousarray(sx, dtype=np.float64).ravel()
    sy = np.ascontiguousarray(sy, dtype=np.float64).ravel()
    if USE_NUMBA:
        return monomial_table_numba(sx, sy, int(degree))
    return monomial_table_numpy(sx, sy, degree)


def scatter_add(target, local, idx):
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if USE_NUMBA:
        scatter_add_numba(target, np.ascontiguousarray(local, dtype=np.float64), idx)
    else:
        scatter_add_numpy(target, local, idx)
