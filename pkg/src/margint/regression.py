"""Internalized kernel regression estimators over sampled paths.

The estimators smooth psi(Y_t) against the covariate path and divide each
sample's contribution by the estimated (or known) covariate density at
that sample.  This internal division is what later lets marginal
integration recover additive components with one-dimensional accuracy.

Two smoothing layouts share the machinery: the full estimator smooths all
d axes at one bandwidth, while the directional estimator smooths one axis
at the accurate bandwidth h1 and the remaining axes at h2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import DensityEstimate
from .kernels import Kernel1D, ProductKernel, make_kernel

_BLOCK_CELLS = 2**23  # soft cap on rows*cols of one kernel-matrix chunk


@dataclass(frozen=True)
class BandwidthPlan:
    """Bandwidth schedule for the regression kernels.

    mode "mse" targets pointwise mean-squared error: h = c * T**(-1/(2k+1)).
    mode "uniform" targets sup-norm error: h = c * (log T / T)**(1/(2k+1)).
    """

    k: int
    c1: float
    c2: float
    mode: str = "mse"

    def __post_init__(self):
        if self.k not in (2, 4, 6):
            raise ValueError(f"kernel order k must be one of (2, 4, 6), got {self.k}")
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("bandwidth constants c1 and c2 must be positive")
        if self.mode not in ("mse", "uniform"):
            raise ValueError(f"mode must be 'mse' or 'uniform', got {self.mode!r}")


def regression_bandwidths(plan: BandwidthPlan, T: float) -> tuple[float, float]:
    """Evaluate the plan at horizon T, returning (h1, h2)."""
    if plan.mode == "uniform":
        if T <= 1:
            raise ValueError(f"uniform-mode bandwidths need T > 1, got {T}")
        rate = (np.log(T) / T) ** (1.0 / (2 * plan.k + 1))
    else:
        if T <= 0:
            raise ValueError(f"horizon must be positive, got {T}")
        rate = T ** (-1.0 / (2 * plan.k + 1))
    return float(plan.c1 * rate), float(plan.c2 * rate)


def default_regression_kernels(k: int, d: int) -> tuple[Kernel1D, ProductKernel, ProductKernel]:
    """Order-k kernels for the two smoothing layouts in dimension d.

    Returns (axis kernel, product over the d-1 remaining axes, product over
    all d axes).  For d = 1 the middle kernel is the empty product.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    base = make_kernel(k)
    return base, ProductKernel((base,) * (d - 1)), ProductKernel((base,) * d)


class RegressionEstimator:
    """Shared state for the full and directional regression estimators.

    Construction evaluates psi on the responses and the density at every
    sample point once; both smoothing layouts then reduce to weighted
    kernel sums with weights trapezoid_w * psi(Y) / density(X).

    `density` is either a DensityEstimate fitted to the same path or a
    known density given as a callable (n, d) -> (n,); known values must be
    strictly positive.
    """

    def __init__(self, path, psi, k1: Kernel1D, k2: ProductKernel,
                 k3: ProductKernel, h1: float, h2: float, density):
        d = path.d
        if k2.dim != d - 1:
            raise ValueError(f"k2 must have d-1={d - 1} factors, got {k2.dim}")
        if k3.dim != d:
            raise ValueError(f"k3 must have d={d} factors, got {k3.dim}")
        if h1 <= 0 or h2 <= 0:
            raise ValueError("bandwidths h1 and h2 must be positive")
        self.path = path
        self.psi = psi
        self.k1 = k1
        self.k2 = k2
        self.k3 = k3
        self.h1 = float(h1)
        self.h2 = float(h2)
        self.density = density
        psi_vals = np.asarray(psi(path.responses), dtype=float)
        if psi_vals.shape != (path.n_samples,):
            raise ValueError("psi must map the response vector to a same-length vector")
        if isinstance(density, DensityEstimate):
            if density.path is not path:
                raise ValueError("the density estimate must be fitted to the same path")
            fvals = density.at_samples()
        else:
            fvals = np.asarray(density(path.covariates), dtype=float)
            if fvals.shape != (path.n_samples,):
                raise ValueError("known density must map (n, d) points to (n,) values")
            if np.any(fvals <= 0):
                raise ValueError("known density values must be strictly positive")
        self.density_at_samples = fvals
        self.sample_weights = path.trapezoid_weights * psi_vals / fvals

    @property
    def clamp_count(self) -> int:
        if isinstance(self.density, DensityEstimate):
            return self.density.clamp_count
        return 0

    @property
    def clamp_rate(self) -> float:
        return self.clamp_count / self.path.n_samples


def _weighted_axis_sums(est: RegressionEstimator, pts: np.ndarray,
                        axis_kernels, bandwidths) -> np.ndarray:
    """Sum over samples of sample_weights * prod_a K_a((x_a - X_ta) / h_a) / h_a."""
    cov = est.path.covariates
    n = cov.shape[0]
    out = np.empty(pts.shape[0])
    block = max(1, _BLOCK_CELLS // n)
    for start in range(0, pts.shape[0], block):
        chunk = pts[start : start + block]
        acc = np.repeat(est.sample_weights[None, :], chunk.shape[0], axis=0)
        for a, (kern, h) in enumerate(zip(axis_kernels, bandwidths)):
            acc *= kern.evaluate((chunk[:, a, None] - cov[None, :, a]) / h) / h
        out[start : start + block] = acc.sum(axis=1)
    return out


def _as_points(x, d: int):
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if pts.shape[1] != d:
        raise ValueError(f"query points must have {d} coordinates, got shape {pts.shape}")
    return pts, single


def estimate_full(est: RegressionEstimator):
    """Regression estimate smoothing all axes at h1.

    Returns a callable accepting a point (d,) or a batch (m, d).
    """
    d = est.path.d

    def evaluate(x):
        pts, single = _as_points(x, d)
        vals = _weighted_axis_sums(est, pts, est.k3.factors, [est.h1] * d)
        if single:
            return float(vals[0])
        return vals

    return evaluate


def estimate_directional(est: RegressionEstimator, l: int):
    """Regression estimate smoothing axis l at h1 and the others at h2.

    `l` is 1-based.  For d = 1 this coincides with the full estimator.
    Returns a callable accepting a point (d,) or a batch (m, d).
    """
    d = est.path.d
    if not (isinstance(l, (int, np.integer)) and 1 <= l <= d):
        raise ValueError(f"axis index l must satisfy 1 <= l <= {d}, got {l!r}")
    l0 = int(l) - 1
    kernels = []
    bandwidths = []
    other = 0
    for a in range(d):
        if a == l0:
            kernels.append(est.k1)
            bandwidths.append(est.h1)
        else:
            kernels.append(est.k2.factors[other])
            bandwidths.append(est.h2)
            other += 1

    def evaluate(x):
        pts, single = _as_points(x, d)
        vals = _weighted_axis_sums(est, pts, kernels, bandwidths)
        if single:
            return float(vals[0])
        return vals

    return evaluate


def kernel_matrix(kern: Kernel1D, values, samples, h: float) -> np.ndarray:
    """Matrix K((v_i - s_t) / h) / h of shape (len(values), len(samples))."""
    v = np.asarray(values, dtype=float)
    s = np.asarray(samples, dtype=float)
    return kern.evaluate((v[:, None] - s[None, :]) / h) / h
