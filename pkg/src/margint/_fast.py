"""Inner loops for pairwise compact-support kernel sums.

Samples arrive column-major and pre-sorted on the first coordinate, so a
query only visits the contiguous block of samples whose first coordinate
lies inside the kernel window.  Per-axis profiles arrive as ascending
coefficients of F in K(u) = F(z) * max(1 - z, 0), z = u**2, padded to
four entries; the max() term doubles as the support indicator, keeping
the inner loops free of data-dependent branches so they vectorize.

Every query accumulates independently over samples in index order, so
results are reproducible bit for bit, and the parallel variant (one query
per thread) returns exactly what a serial run returns.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - only hit when numba is absent
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range

NC = 4  # padded factor-coefficient count; covers kernel orders up to 8


@njit(cache=True, fastmath=True)
def _acc1(q0, lo, hi, s0, w, c, inv_h):
    a0, a1, a2, a3 = c[0, 0], c[0, 1], c[0, 2], c[0, 3]
    acc = 0.0
    for t in range(lo, hi):
        u0 = (q0 - s0[t]) * inv_h
        z0 = u0 * u0
        f0 = 1.0 - z0
        f0 = f0 if f0 > 0.0 else 0.0
        p0 = ((a3 * z0 + a2) * z0 + a1) * z0 + a0
        acc += w[t] * (p0 * f0)
    return acc


@njit(cache=True, fastmath=True)
def _acc2(q0, q1, lo, hi, s0, s1, w, c, inv_h):
    a0, a1, a2, a3 = c[0, 0], c[0, 1], c[0, 2], c[0, 3]
    b0, b1, b2, b3 = c[1, 0], c[1, 1], c[1, 2], c[1, 3]
    acc = 0.0
    for t in range(lo, hi):
        u0 = (q0 - s0[t]) * inv_h
        u1 = (q1 - s1[t]) * inv_h
        z0 = u0 * u0
        z1 = u1 * u1
        f0 = 1.0 - z0
        f1 = 1.0 - z1
        f0 = f0 if f0 > 0.0 else 0.0
        f1 = f1 if f1 > 0.0 else 0.0
        p0 = ((a3 * z0 + a2) * z0 + a1) * z0 + a0
        p1 = ((b3 * z1 + b2) * z1 + b1) * z1 + b0
        acc += w[t] * (p0 * f0) * (p1 * f1)
    return acc


@njit(cache=True, fastmath=True)
def _acc3(q0, q1, q2, lo, hi, s0, s1, s2, w, c, inv_h):
    a0, a1, a2, a3 = c[0, 0], c[0, 1], c[0, 2], c[0, 3]
    b0, b1, b2, b3 = c[1, 0], c[1, 1], c[1, 2], c[1, 3]
    d0, d1, d2, d3 = c[2, 0], c[2, 1], c[2, 2], c[2, 3]
    acc = 0.0
    for t in range(lo, hi):
        u0 = (q0 - s0[t]) * inv_h
        u1 = (q1 - s1[t]) * inv_h
        u2 = (q2 - s2[t]) * inv_h
        z0 = u0 * u0
        z1 = u1 * u1
        z2 = u2 * u2
        f0 = 1.0 - z0
        f1 = 1.0 - z1
        f2 = 1.0 - z2
        f0 = f0 if f0 > 0.0 else 0.0
        f1 = f1 if f1 > 0.0 else 0.0
        f2 = f2 if f2 > 0.0 else 0.0
        p0 = ((a3 * z0 + a2) * z0 + a1) * z0 + a0
        p1 = ((b3 * z1 + b2) * z1 + b1) * z1 + b0
        p2 = ((d3 * z2 + d2) * z2 + d1) * z2 + d0
        acc += w[t] * (p0 * f0) * (p1 * f1) * (p2 * f2)
    return acc


@njit(cache=True, fastmath=True)
def _accd(qrow, lo, hi, cols, w, c, inv_h):
    d = cols.shape[0]
    acc = 0.0
    for t in range(lo, hi):
        prod = w[t]
        for a in range(d):
            u = (qrow[a] - cols[a, t]) * inv_h
            z = u * u
            f = 1.0 - z
            if f <= 0.0:
                prod = 0.0
                break
            p = ((c[a, 3] * z + c[a, 2]) * z + c[a, 1]) * z + c[a, 0]
            prod *= p * f
        acc += prod
    return acc


@njit(cache=True, fastmath=True)
def _one_query(i, queries, cols, w, c, inv_h, h):
    s0 = cols[0]
    q0 = queries[0, i]
    lo = np.searchsorted(s0, q0 - h)
    hi = np.searchsorted(s0, q0 + h)
    d = cols.shape[0]
    if d == 1:
        return _acc1(q0, lo, hi, s0, w, c, inv_h)
    if d == 2:
        return _acc2(q0, queries[1, i], lo, hi, s0, cols[1], w, c, inv_h)
    if d == 3:
        return _acc3(
            q0, queries[1, i], queries[2, i], lo, hi, s0, cols[1], cols[2], w, c, inv_h
        )
    return _accd(queries[:, i], lo, hi, cols, w, c, inv_h)


@njit(cache=True, fastmath=True)
def query_sums(queries, cols, w, c, inv_h, h):
    """queries, cols: column-major (d, m) and (d, n); cols sorted on row 0."""
    nq = queries.shape[1]
    out = np.empty(nq)
    for i in range(nq):
        out[i] = _one_query(i, queries, cols, w, c, inv_h, h)
    return out


@njit(cache=True, fastmath=True, parallel=True)
def query_sums_parallel(queries, cols, w, c, inv_h, h):
    nq = queries.shape[1]
    out = np.empty(nq)
    for i in prange(nq):
        out[i] = _one_query(i, queries, cols, w, c, inv_h, h)
    return out


if not HAVE_NUMBA:  # pragma: no cover - plain numpy stand-ins

    def query_sums(queries, cols, w, c, inv_h, h):  # noqa: F811
        d, nq = queries.shape
        n = cols.shape[1]
        out = np.empty(nq)
        block = max(1, int(2**22) // max(1, n))
        for start in range(0, nq, block):
            q = queries[:, start : start + block]
            z = ((q[:, :, None] - cols[:, None, :]) * inv_h) ** 2
            vals = np.ones((q.shape[1], n))
            for a in range(d):
                za = z[a]
                p = ((c[a, 3] * za + c[a, 2]) * za + c[a, 1]) * za + c[a, 0]
                vals *= p * np.maximum(1.0 - za, 0.0)
            out[start : start + block] = vals @ w
        return out

    def query_sums_parallel(queries, cols, w, c, inv_h, h):  # noqa: F811
        return query_sums(queries, cols, w, c, inv_h, h)
