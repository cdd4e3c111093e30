"""Kernel density estimation along a sampled path, with a positivity floor.

The estimate at x is the time average of K((x - X_t) / h) / h**d over the
path, where K is a product kernel.  Downstream estimators divide by this
value at every sample point, so evaluations are clamped from below by a
configurable floor; every clamped evaluation is tallied, and the tally is
part of the experiment diagnostics.
"""

from __future__ import annotations

import numpy as np

from . import _fast
from .kernels import ProductKernel
from .process import SampledPath


def density_bandwidth(T: float, k_prime: int, d: int, c_prime: float) -> float:
    """Bandwidth schedule c' * (log T / T) ** (1 / (2 k' + d)).

    Requires T > 1 so the logarithm is positive.
    """
    if T <= 1:
        raise ValueError(f"horizon must exceed 1, got {T}")
    if c_prime <= 0:
        raise ValueError(f"c_prime must be positive, got {c_prime}")
    if k_prime < 1 or d < 1:
        raise ValueError("k_prime and d must be positive integers")
    return float(c_prime * (np.log(T) / T) ** (1.0 / (2 * k_prime + d)))


def _coeff_matrix(kernel: ProductKernel) -> np.ndarray:
    out = np.zeros((kernel.dim, _fast.NC))
    for a, f in enumerate(kernel.factors):
        if len(f.factor_z) > _fast.NC:
            raise ValueError("kernel profile degree exceeds the compiled loop width")
        out[a, : len(f.factor_z)] = f.factor_z
    return out


class DensityEstimate:
    """Callable density estimate fitted to one path.

    Calling the estimate (with a point of shape (d,) or a batch (m, d))
    returns floored values and increments `clamp_count` once per clamped
    evaluation.  `raw` returns unfloored values without touching the tally.
    `at_samples` caches the floored values at the path's own sample points,
    which is the hot loop of the regression estimators.

    With parallel=True the pairwise sums run one query per thread; results
    are identical to a serial rerun because each query accumulates
    independently in a fixed order.
    """

    def __init__(
        self,
        path: SampledPath,
        kernel: ProductKernel,
        bandwidth: float,
        floor: float,
        parallel: bool = False,
    ):
        if kernel.dim != path.d:
            raise ValueError(
                f"kernel has {kernel.dim} factors but the path has d={path.d}"
            )
        if bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth}")
        if floor <= 0:
            raise ValueError(f"floor must be positive, got {floor}")
        self.path = path
        self.kernel = kernel
        self.bandwidth = float(bandwidth)
        self.floor = float(floor)
        self.parallel = bool(parallel)
        self.clamp_count = 0
        order = np.argsort(path.covariates[:, 0], kind="stable")
        self._order = order
        self._cols = np.ascontiguousarray(path.covariates[order].T)
        self._weights = np.ascontiguousarray(path.trapezoid_weights[order])
        self._coeffs = _coeff_matrix(kernel)
        self._sample_values = None

    def _sums(self, cols_q: np.ndarray) -> np.ndarray:
        h = self.bandwidth
        runner = _fast.query_sums_parallel if self.parallel else _fast.query_sums
        sums = runner(cols_q, self._cols, self._weights, self._coeffs, 1.0 / h, h)
        return sums / h**self.path.d

    def raw(self, x) -> np.ndarray | float:
        """Unfloored estimate; does not count clamps."""
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        pts = np.atleast_2d(arr)
        if pts.shape[1] != self.path.d:
            raise ValueError(
                f"points must have {self.path.d} coordinates, got {pts.shape}"
            )
        vals = self._sums(np.ascontiguousarray(pts.T))
        if single:
            return float(vals[0])
        return vals

    def __call__(self, x):
        vals = self.raw(x)
        scalar = np.isscalar(vals)
        arr = np.atleast_1d(np.asarray(vals, dtype=float))
        clamped = arr < self.floor
        self.clamp_count += int(np.count_nonzero(clamped))
        out = np.maximum(arr, self.floor)
        if scalar:
            return float(out[0])
        return out

    def at_samples(self) -> np.ndarray:
        """Floored estimate at the path's own sample points (cached)."""
        if self._sample_values is None:
            vals = self._sums(self._cols)
            # Undo the axis-0 sort so values line up with path.covariates rows.
            unsorted = np.empty_like(vals)
            unsorted[self._order] = vals
            clamped = unsorted < self.floor
            self.clamp_count += int(np.count_nonzero(clamped))
            self._sample_values = np.maximum(unsorted, self.floor)
        return self._sample_values


def estimate_density(
    path: SampledPath,
    kernel: ProductKernel,
    bandwidth: float,
    floor: float,
    parallel: bool = False,
) -> DensityEstimate:
    """Fit the floored kernel density estimate to a path."""
    return DensityEstimate(path, kernel, bandwidth, floor, parallel=parallel)


DEFAULT_DELTA = 0.25


def density_check_grid(
    d: int, points_per_axis: int = 21, delta: float = DEFAULT_DELTA
) -> np.ndarray:
    """Tensor grid over the enlarged box [-(1 + delta), 1 + delta]^d.

    Positivity of the covariate density is needed on a margin around the
    core box [-1, 1]^d, not just inside it.  The margin width delta has no
    effect on any estimator; it only sizes the grid used by diagnostics
    that probe the density estimate (positivity, sup-error trends).
    Returns an array of shape (points_per_axis**d, d).
    """
    if d < 1:
        raise ValueError("d must be a positive integer")
    if points_per_axis < 2:
        raise ValueError("points_per_axis must be at least 2")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    axis = np.linspace(-(1.0 + delta), 1.0 + delta, points_per_axis)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)
