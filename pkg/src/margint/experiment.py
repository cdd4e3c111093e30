"""Monte-Carlo rate studies for the additive estimators.

A rate study simulates replicate paths on a ladder of horizons, fits the
additive reconstruction to each, and aggregates pointwise mean-squared
errors (mode "mse") or sup-norm errors over a grid (mode "uniform").
Errors are always measured directly at the evaluation abscissas via the
exact component integrals, never through table interpolation, so the
recorded decay reflects the estimator alone.

The seed schedule is fixed: replicate r on rung g uses
base_seed + g * 10**6 + r for the covariates and that value + 10**9 for
the response noise, so studies are reproducible bit for bit and ladder
prefixes share replicate draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .integration import (
    FitConfig,
    constant_term,
    marginal_component,
    prepare_estimator,
    weight_system_for,
)
from .process import (
    MODEL_PRESETS,
    OUParams,
    attach_response,
    simulate_ou_covariates,
    true_regression,
)
from .regression import estimate_full


class NumericalError(RuntimeError):
    """A computation failed or produced values the pipeline cannot use."""


def theoretical_slope(k: int, mode: str) -> float:
    """Expected log-log decay: -2k/(2k+1) for MSE, -k/(2k+1) for sup norms."""
    if mode == "mse":
        return -2.0 * k / (2 * k + 1)
    if mode == "uniform":
        return -1.0 * k / (2 * k + 1)
    raise ValueError(f"mode must be 'mse' or 'uniform', got {mode!r}")


def default_eval_points(d: int) -> np.ndarray:
    """Interior evaluation points with coordinates 0 and +-0.5."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if d == 1:
        return np.array([[0.0], [0.5], [-0.5]])
    alt = 0.5 * (-1.0) ** np.arange(d)
    pts = np.stack(
        [np.zeros(d), np.full(d, 0.5), np.full(d, -0.5), alt, -alt]
    )
    return pts


@dataclass(frozen=True)
class RateStudyConfig:
    """Full description of one Monte-Carlo rate study.

    `sigma` is the driving noise scale of the covariate process and
    `scale` multiplies it (scaling an OU process is the same as scaling
    sigma).  `weight_smoothness` None means k + 1.
    """

    d: int = 2
    model: str = "paper-desk"
    mode: str = "mse"
    k: int = 2
    k_prime: int = 6
    T_ladder: tuple = (250.0, 500.0, 1000.0, 2000.0, 4000.0)
    replicates: int = 50
    step: float = 0.05
    base_seed: int = 20260818
    c1: float = 0.45
    c2: float = 1.0
    c_prime: float = 1.0
    floor: float = 1e-3
    theta: float = 1.0
    sigma: float = float(np.sqrt(2.0))
    scale: float = 0.5
    x0_law: str = "stationary"
    noise_sigma: float = 0.3
    noise_theta: float = 1.0
    psi_clip: float = 50.0
    weight_support: tuple = (-0.9, 0.9)
    weight_smoothness: int | None = None
    nodes_per_axis: int = 16
    eval_points: tuple | None = None
    sup_grid_points: int = 21
    sup_grid_halfwidth: float = 0.9
    parallel: bool = False

    def __post_init__(self):
        if self.model not in MODEL_PRESETS:
            raise ValueError(
                f"unknown model preset {self.model!r}; choices: {sorted(MODEL_PRESETS)}"
            )
        if MODEL_PRESETS[self.model].d != self.d:
            raise ValueError(
                f"model {self.model!r} has d={MODEL_PRESETS[self.model].d}, config says d={self.d}"
            )
        if self.mode not in ("mse", "uniform"):
            raise ValueError(f"mode must be 'mse' or 'uniform', got {self.mode!r}")
        ladder = tuple(float(t) for t in self.T_ladder)
        object.__setattr__(self, "T_ladder", ladder)
        if len(ladder) < 3:
            raise ValueError("T_ladder needs at least 3 rungs for a slope")
        if any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ValueError("T_ladder must be strictly increasing")
        if ladder[0] <= 1:
            raise ValueError("every horizon must exceed 1")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.sup_grid_points < 2:
            raise ValueError("sup_grid_points must be >= 2")
        if self.sup_grid_halfwidth <= 0:
            raise ValueError("sup_grid_halfwidth must be positive")
        if self.eval_points is not None:
            pts = np.atleast_2d(np.asarray(self.eval_points, dtype=float))
            if pts.shape[1] != self.d:
                raise ValueError(
                    f"eval_points must have {self.d} columns, got shape {pts.shape}"
                )
            object.__setattr__(
                self, "eval_points", tuple(tuple(row) for row in pts)
            )

    def fit_config(self) -> FitConfig:
        return FitConfig(
            k=self.k,
            k_prime=self.k_prime,
            c1=self.c1,
            c2=self.c2,
            c_prime=self.c_prime,
            mode=self.mode,
            floor=self.floor,
            psi_clip=self.psi_clip,
            weight_support=tuple(self.weight_support),
            weight_smoothness=self.weight_smoothness,
            nodes_per_axis=self.nodes_per_axis,
            parallel=self.parallel,
        )

    def resolved_eval_points(self) -> np.ndarray:
        if self.eval_points is None:
            return default_eval_points(self.d)
        return np.asarray(self.eval_points, dtype=float)


@dataclass(frozen=True)
class RateTable:
    """Per-rung error summary of one study."""

    mode: str
    horizons: np.ndarray
    errors: np.ndarray
    spreads: np.ndarray | None = None
    clamp_rates: np.ndarray | None = None
    replicate_errors: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        h = np.asarray(self.horizons, dtype=float)
        e = np.asarray(self.errors, dtype=float)
        if h.ndim != 1 or e.shape != h.shape or len(h) < 2:
            raise ValueError("need matching 1-d horizons/errors with >= 2 rungs")
        object.__setattr__(self, "horizons", h)
        object.__setattr__(self, "errors", e)
        for name in ("spreads", "clamp_rates"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != h.shape:
                    raise ValueError(f"{name} must match horizons in shape")
                object.__setattr__(self, name, v)
        if self.replicate_errors is not None:
            m = np.asarray(self.replicate_errors, dtype=float)
            if m.ndim != 2 or m.shape[0] != len(h):
                raise ValueError("replicate_errors must be (rungs, replicates)")
            object.__setattr__(self, "replicate_errors", m)


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares log-log slope with a standard error.

    The standard error is the larger of the OLS residual standard error
    and the error propagated from the replicate spread of each rung, so it
    stays honest both when rung noise dominates and when curvature does.
    """

    slope: float
    se: float
    intercept: float
    mode: str
    theoretical: float | None = None

    def window(self, width: float = 2.0) -> tuple[float, float]:
        return (self.slope - width * self.se, self.slope + width * self.se)


def _path_for(config: RateStudyConfig, T: float, seed: int):
    spec = MODEL_PRESETS[config.model]
    params = OUParams(
        theta=config.theta, sigma=config.sigma * config.scale, x0_law=config.x0_law
    )
    cov = simulate_ou_covariates(config.d, T, config.step, params, seed)
    return attach_response(
        cov, spec, config.noise_sigma, config.noise_theta, seed + 10**9, config.step
    )


def _tensor_sum(values: Sequence[np.ndarray], constant: float) -> np.ndarray:
    out = np.full(tuple(len(v) for v in values), float(constant))
    d = len(values)
    for a, v in enumerate(values):
        shape = [1] * d
        shape[a] = len(v)
        out = out + v.reshape(shape)
    return out


def _replicate_stats(config, spec, fitcfg, w, eval_pts, sup_grids, T, seed,
                     want_full: bool):
    """Fit one replicate path; return (additive error, full error, clamp rate)."""
    path = _path_for(config, T, seed)
    est = prepare_estimator(path, fitcfg)
    const = constant_term(est, w)
    if config.mode == "uniform":
        comps = [
            marginal_component(est, w, l0 + 1, sup_grids[l0])
            for l0 in range(config.d)
        ]
        fitted = _tensor_sum(comps, const)
        truth = _tensor_sum(
            [np.asarray(c(g), dtype=float) for c, g in zip(spec.components, sup_grids)],
            spec.mu,
        )
        err_add = float(np.max(np.abs(fitted - truth)))
    else:
        pred = np.full(eval_pts.shape[0], const)
        for l0 in range(config.d):
            pred = pred + marginal_component(est, w, l0 + 1, eval_pts[:, l0])
        truth = true_regression(spec, eval_pts)
        err_add = float(np.mean((pred - truth) ** 2))
    err_full = None
    if want_full:
        full_vals = estimate_full(est)(eval_pts)
        truth_pts = true_regression(spec, eval_pts)
        err_full = float(np.mean((full_vals - truth_pts) ** 2))
    return err_add, err_full, est.clamp_rate


def _run_ladder(config: RateStudyConfig, want_full: bool):
    spec = MODEL_PRESETS[config.model]
    fitcfg = config.fit_config()
    w = weight_system_for(fitcfg, config.d)
    eval_pts = config.resolved_eval_points()
    hw = config.sup_grid_halfwidth
    sup_grids = [
        np.linspace(-hw, hw, config.sup_grid_points) for _ in range(config.d)
    ]
    G, R = len(config.T_ladder), config.replicates
    err_add = np.empty((G, R))
    err_full = np.empty((G, R)) if want_full else None
    clamp = np.empty((G, R))
    for g, T in enumerate(config.T_ladder):
        for r in range(R):
            seed = config.base_seed + g * 10**6 + r
            try:
                ea, ef, cr = _replicate_stats(
                    config, spec, fitcfg, w, eval_pts, sup_grids, T, seed, want_full
                )
            except NumericalError:
                raise
            except Exception as exc:
                raise NumericalError(
                    f"rung T={T} replicate {r} (seed {seed}) failed: {exc}"
                ) from exc
            err_add[g, r] = ea
            clamp[g, r] = cr
            if want_full:
                err_full[g, r] = ef
    meta = {
        "k": config.k,
        "mode": config.mode,
        "model": config.model,
        "d": config.d,
        "replicates": R,
        "base_seed": config.base_seed,
        "step": config.step,
    }

    def table(matrix) -> RateTable:
        spreads = (
            matrix.std(axis=1, ddof=1) if R > 1 else np.zeros(G)
        )
        return RateTable(
            mode=config.mode,
            horizons=np.asarray(config.T_ladder, dtype=float),
            errors=matrix.mean(axis=1),
            spreads=spreads,
            clamp_rates=clamp.mean(axis=1),
            replicate_errors=matrix.copy(),
            meta=dict(meta),
        )

    return table(err_add), (table(err_full) if want_full else None)


def run_rate_study(config: RateStudyConfig) -> RateTable:
    """Run the ladder of Monte-Carlo fits described by `config`."""
    add_table, _ = _run_ladder(config, want_full=False)
    return add_table


def rate_slope(table: RateTable, mode: str | None = None) -> SlopeFit:
    """Least-squares slope of log error against the mode's abscissa.

    mode "mse" regresses on log T; mode "uniform" on log(T / log T),
    matching the bandwidth schedules.  Errors must be strictly positive.
    """
    mode = mode if mode is not None else table.mode
    if mode not in ("mse", "uniform"):
        raise ValueError(f"mode must be 'mse' or 'uniform', got {mode!r}")
    T = table.horizons
    if len(T) < 3:
        raise ValueError("need at least 3 rungs to fit a slope with a standard error")
    if np.any(table.errors <= 0):
        raise NumericalError("error statistics must be positive to fit a log slope")
    x = np.log(T) if mode == "mse" else np.log(T / np.log(T))
    y = np.log(table.errors)
    m = len(x)
    xbar = x.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    if sxx <= 0:
        raise NumericalError("degenerate ladder: no spread in the abscissa")
    coef = (x - xbar) / sxx
    slope = float(coef @ y)
    intercept = float(y.mean() - slope * xbar)
    resid = y - (intercept + slope * x)
    se_ols = 0.0
    if m > 2:
        se_ols = float(np.sqrt(np.sum(resid**2) / (m - 2) / sxx))
    se_prop = 0.0
    if table.spreads is not None and table.replicate_errors is not None:
        reps = table.replicate_errors.shape[1]
        if reps > 1:
            se_log = table.spreads / (table.errors * np.sqrt(reps))
            se_prop = float(np.sqrt(np.sum(coef**2 * se_log**2)))
    k = table.meta.get("k")
    theo = theoretical_slope(k, mode) if k is not None else None
    return SlopeFit(
        slope=slope,
        se=max(se_ols, se_prop),
        intercept=intercept,
        mode=mode,
        theoretical=theo,
    )


@dataclass(frozen=True)
class ComparisonResult:
    """Side-by-side decay of the full estimator and the additive reconstruction."""

    table_full: RateTable
    table_additive: RateTable
    slope_full: SlopeFit
    slope_additive: SlopeFit

    @property
    def gap(self) -> float:
        """slope_additive - slope_full; negative favors the additive route."""
        return self.slope_additive.slope - self.slope_full.slope


def compare_full_vs_additive(config: RateStudyConfig) -> ComparisonResult:
    """Run one ladder, fitting both estimators to the same replicate paths.

    Pointwise mean-squared errors at the config's evaluation points are
    used for both, so the comparison is mse-mode regardless of config.mode.
    Each replicate's density estimate, bandwidths and responses are shared
    by the two estimators.
    """
    if config.mode != "mse":
        config = replace(config, mode="mse")
    add_table, full_table = _run_ladder(config, want_full=True)
    return ComparisonResult(
        table_full=full_table,
        table_additive=add_table,
        slope_full=rate_slope(full_table),
        slope_additive=rate_slope(add_table),
    )
