"""Sampled diffusion paths and additive response models.

A path is a matrix of covariate values observed on a regular time grid,
plus a response column.  Covariates follow independent Ornstein-Uhlenbeck
components simulated with the exact Gaussian transition, so there is no
discretization bias in the dynamics; the only discretization in the whole
pipeline is the trapezoid rule replacing time integrals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.signal import lfilter


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SampledPath:
    """Covariate/response sample on a regular time grid.

    `horizon` must equal ``step * (n_samples - 1)`` exactly; the factory
    functions in this module construct it that way.  Arrays are stored
    read-only and treated as immutable everywhere downstream.
    """

    step: float
    horizon: float
    covariates: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        cov = _readonly(np.atleast_2d(self.covariates))
        resp = _readonly(np.atleast_1d(self.responses))
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "responses", resp)
        if self.step <= 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if cov.ndim != 2:
            raise ValueError("covariates must be a 2-d array (n_samples, d)")
        n = cov.shape[0]
        if n < 2:
            raise ValueError("a path needs at least 2 samples")
        if resp.shape != (n,):
            raise ValueError(
                f"responses must have shape ({n},), got {resp.shape}"
            )
        if self.horizon != self.step * (n - 1):
            raise ValueError(
                "horizon must equal step * (n_samples - 1) exactly; "
                f"got horizon={self.horizon}, step*(n-1)={self.step * (n - 1)}"
            )
        if not (np.isfinite(cov).all() and np.isfinite(resp).all()):
            raise ValueError("covariates and responses must be finite")

    @property
    def n_samples(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        """Weights turning a sample vector into a normalized time average.

        Trapezoid rule divided by the horizon: (step/T) * [1/2, 1, ..., 1, 1/2].
        The weights sum to 1 exactly up to rounding.
        """
        n = self.n_samples
        w = np.full(n, self.step / self.horizon)
        w[0] *= 0.5
        w[-1] *= 0.5
        w.flags.writeable = False
        return w


@dataclass(frozen=True)
class AdditiveModelSpec:
    """Additive regression target: constant plus one ridge function per axis."""

    mu: float
    components: tuple
    d: int

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) != self.d:
            raise ValueError(
                f"need exactly d={self.d} component functions, got {len(self.components)}"
            )
        if self.d < 1:
            raise ValueError("additive model needs d >= 1")


@dataclass(frozen=True)
class OUParams:
    """Ornstein-Uhlenbeck parameters: dX = -theta X dt + sigma dW."""

    theta: float
    sigma: float
    x0_law: str = "stationary"

    def __post_init__(self):
        if self.theta <= 0 or self.sigma <= 0:
            raise ValueError("theta and sigma must be positive")
        if self.x0_law not in ("stationary", "fixed"):
            raise ValueError(
                f"x0_law must be 'stationary' or 'fixed', got {self.x0_law!r}"
            )

    @property
    def stationary_sd(self) -> float:
        return self.sigma / np.sqrt(2.0 * self.theta)


def _grid_size(horizon: float, step: float) -> int:
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    n = int(np.floor(horizon / step + 1e-9)) + 1
    if n < 2:
        raise ValueError(
            f"horizon {horizon} with step {step} yields fewer than 2 grid points"
        )
    return n


def _exact_ou(n: int, rho: float, innov_sd: float, x0: np.ndarray, rng) -> np.ndarray:
    """Exact AR(1) recursion x[t] = rho x[t-1] + innovations, x[0] given."""
    d = x0.shape[0]
    innov = rng.normal(0.0, innov_sd, size=(n - 1, d))
    zi = (rho * x0)[None, :]
    body, _ = lfilter([1.0], [1.0, -rho], innov, axis=0, zi=zi)
    return np.vstack([x0[None, :], body])


def simulate_ou_covariates(
    d: int, horizon: float, step: float, params: OUParams, seed: int
) -> np.ndarray:
    """Simulate d independent OU components on a regular grid.

    Uses the exact Gaussian transition, so the law of the returned sample
    matches the continuous-time process at the grid times.  Deterministic
    given the seed: the start value is drawn first, then the innovations
    row by row.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    n = _grid_size(horizon, step)
    rho = float(np.exp(-params.theta * step))
    innov_sd = params.sigma * np.sqrt((1.0 - rho**2) / (2.0 * params.theta))
    rng = np.random.default_rng(seed)
    if params.x0_law == "stationary":
        x0 = rng.normal(0.0, params.stationary_sd, size=d)
    else:
        x0 = np.zeros(d)
    return _exact_ou(n, rho, innov_sd, x0, rng)


def attach_response(
    covariates: np.ndarray,
    spec: AdditiveModelSpec,
    noise_sigma: float,
    noise_theta: float,
    seed: int,
    step: float,
) -> SampledPath:
    """Build a path whose responses are the additive signal plus OU noise.

    `noise_sigma` is the stationary standard deviation of the noise, and
    `noise_theta` its mean-reversion speed; noise_sigma = 0 gives exact
    noise-free responses.
    """
    cov = np.asarray(covariates, dtype=float)
    if cov.ndim != 2 or cov.shape[1] != spec.d:
        raise ValueError(
            f"covariates must have shape (n, {spec.d}), got {cov.shape}"
        )
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    if noise_theta <= 0:
        raise ValueError("noise_theta must be positive")
    n = cov.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples")
    signal = true_regression(spec, cov)
    if noise_sigma == 0.0:
        noise = np.zeros(n)
    else:
        rho = float(np.exp(-noise_theta * step))
        innov_sd = noise_sigma * np.sqrt(1.0 - rho**2)
        rng = np.random.default_rng(seed)
        x0 = rng.normal(0.0, noise_sigma, size=1)
        noise = _exact_ou(n, rho, innov_sd, x0, rng)[:, 0]
    return SampledPath(
        step=step,
        horizon=step * (n - 1),
        covariates=cov,
        responses=signal + noise,
    )


def time_average(path: SampledPath, integrand) -> float:
    """Trapezoid approximation of (1/T) * integral of g(X_t, Y_t) dt.

    `integrand` is either a callable (x_row, y) -> real applied sample by
    sample, or a precomputed vector of length n_samples.
    """
    if callable(integrand):
        values = np.array(
            [integrand(x, y) for x, y in zip(path.covariates, path.responses)],
            dtype=float,
        )
    else:
        values = np.asarray(integrand, dtype=float)
        if values.shape != (path.n_samples,):
            raise ValueError(
                f"integrand vector must have length {path.n_samples}, got {values.shape}"
            )
    return float(np.dot(path.trapezoid_weights, values))


def true_regression(spec: AdditiveModelSpec, x):
    """Evaluate mu + sum_l m_l(x_l) at one point (d,) or a batch (m, d)."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    if pts.shape[1] != spec.d:
        raise ValueError(f"points must have {spec.d} coordinates, got {pts.shape}")
    acc = np.full(pts.shape[0], float(spec.mu))
    for axis, comp in enumerate(spec.components):
        acc = acc + np.asarray(comp(pts[:, axis]), dtype=float)
    if single:
        return float(acc[0])
    return acc


def clip_psi(limit: float = 50.0) -> Callable:
    """Bounded response transform: clip to [-limit, limit].

    The theory wants a bounded transform of the response; on well-behaved
    data the clip never fires and the target coincides with the regression
    function itself.
    """
    if limit <= 0:
        raise ValueError("clip limit must be positive")

    def psi(y):
        return np.clip(y, -limit, limit)

    return psi


def stationary_gaussian_density(sd: float, d: int) -> Callable:
    """Product of centered normal densities, as a map (m, d) -> (m,).

    Matches the stationary law of `simulate_ou_covariates` when
    sd = sigma / sqrt(2 theta).  Handy as a known-density reference.
    """
    if sd <= 0 or d < 1:
        raise ValueError("need sd > 0 and d >= 1")

    def density(x):
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        z = pts / sd
        vals = np.exp(-0.5 * np.sum(z * z, axis=1))
        vals /= (sd * np.sqrt(2.0 * np.pi)) ** d
        if np.asarray(x).ndim == 1:
            return float(vals[0])
        return vals

    return density


def _sq(x):
    return np.asarray(x) ** 2


def _sin_pi(x):
    return np.sin(np.pi * np.asarray(x))


def _cube(x):
    return np.asarray(x) ** 3


MODEL_PRESETS: dict[str, AdditiveModelSpec] = {
    # Desk-scale defaults used throughout the experiment harness.
    "paper-desk": AdditiveModelSpec(mu=1.0, components=(_sq, _sin_pi), d=2),
    "paper-desk-3d": AdditiveModelSpec(mu=1.0, components=(_sq, _sin_pi, _cube), d=3),
    "paper-desk-1d": AdditiveModelSpec(mu=1.0, components=(_sin_pi,), d=1),
}
