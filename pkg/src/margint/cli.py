"""Command-line front end: JSON configs in, CSV/JSON artifacts out.

Exit codes: 0 success, 2 configuration problems, 3 numerical failures.
All floats in CSV output use a canonical minimal scientific form
(0.25 -> "2.5e-1") that round-trips through float() exactly, so reruns of
a deterministic command produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .density import DEFAULT_DELTA, density_bandwidth, estimate_density
from .experiment import (
    ComparisonResult,
    NumericalError,
    RateStudyConfig,
    RateTable,
    compare_full_vs_additive,
    rate_slope,
    run_rate_study,
)
from .integration import (
    DEFAULT_C1,
    DEFAULT_C2,
    DEFAULT_C_PRIME,
    DEFAULT_FLOOR,
    FitConfig,
    evaluate_additive,
    fit_additive,
    prepare_estimator,
    true_eta,
    weight_system_for,
)
from .kernels import SUPPORTED_ORDERS, kernel_moment, make_kernel
from .process import (
    MODEL_PRESETS,
    OUParams,
    SampledPath,
    attach_response,
    simulate_ou_covariates,
    true_regression,
)
from .regression import estimate_full


class ConfigError(Exception):
    """A configuration file or value the pipeline refuses to run with."""


# ---------------------------------------------------------------------------
# Config sections


@dataclass(frozen=True)
class SimulateSection:
    d: int = 2
    model: str = "paper-desk"
    horizon: float = 200.0
    step: float = 0.05
    theta: float = 1.0
    sigma: float = float(np.sqrt(2.0))
    scale: float = 0.5
    x0_law: str = "stationary"
    noise_sigma: float = 0.3
    noise_theta: float = 1.0
    seed: int = 12345


@dataclass(frozen=True)
class KernelsSection:
    k: int = 2
    k_prime: int = 6


@dataclass(frozen=True)
class BandwidthsSection:
    c1: float = DEFAULT_C1
    c2: float = DEFAULT_C2
    c_prime: float = DEFAULT_C_PRIME
    mode: str = "mse"


@dataclass(frozen=True)
class WeightsSection:
    support: tuple = (-0.9, 0.9)
    smoothness: int | None = None
    nodes_per_axis: int = 16


@dataclass(frozen=True)
class DensitySection:
    floor: float = DEFAULT_FLOOR
    delta: float = DEFAULT_DELTA


@dataclass(frozen=True)
class ExperimentSection:
    T_ladder: tuple = (250.0, 500.0, 1000.0, 2000.0, 4000.0)
    replicates: int = 50
    base_seed: int = 20260818
    mode: str = "mse"
    eval_points: tuple | None = None
    sup_grid_points: int = 21
    sup_grid_halfwidth: float = 0.9
    component_grid: int = 41
    psi_clip: float = 50.0
    parallel: bool = False


@dataclass(frozen=True)
class RunConfig:
    simulate: SimulateSection = field(default_factory=SimulateSection)
    kernels: KernelsSection = field(default_factory=KernelsSection)
    bandwidths: BandwidthsSection = field(default_factory=BandwidthsSection)
    weights: WeightsSection = field(default_factory=WeightsSection)
    density: DensitySection = field(default_factory=DensitySection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)

    def fit_config(self, mode: str | None = None) -> FitConfig:
        try:
            return FitConfig(
                k=self.kernels.k,
                k_prime=self.kernels.k_prime,
                c1=self.bandwidths.c1,
                c2=self.bandwidths.c2,
                c_prime=self.bandwidths.c_prime,
                mode=mode if mode is not None else self.bandwidths.mode,
                floor=self.density.floor,
                psi_clip=self.experiment.psi_clip,
                weight_support=self.weights.support,
                weight_smoothness=self.weights.smoothness,
                nodes_per_axis=self.weights.nodes_per_axis,
                component_grid=self.experiment.component_grid,
                parallel=self.experiment.parallel,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def rate_config(self, mode: str | None = None) -> RateStudyConfig:
        exp = self.experiment
        try:
            return RateStudyConfig(
                d=self.simulate.d,
                model=self.simulate.model,
                mode=mode if mode is not None else exp.mode,
                k=self.kernels.k,
                k_prime=self.kernels.k_prime,
                T_ladder=exp.T_ladder,
                replicates=exp.replicates,
                step=self.simulate.step,
                base_seed=exp.base_seed,
                c1=self.bandwidths.c1,
                c2=self.bandwidths.c2,
                c_prime=self.bandwidths.c_prime,
                floor=self.density.floor,
                theta=self.simulate.theta,
                sigma=self.simulate.sigma,
                scale=self.simulate.scale,
                x0_law=self.simulate.x0_law,
                noise_sigma=self.simulate.noise_sigma,
                noise_theta=self.simulate.noise_theta,
                psi_clip=exp.psi_clip,
                weight_support=self.weights.support,
                weight_smoothness=self.weights.smoothness,
                nodes_per_axis=self.weights.nodes_per_axis,
                eval_points=exp.eval_points,
                sup_grid_points=exp.sup_grid_points,
                sup_grid_halfwidth=exp.sup_grid_halfwidth,
                parallel=exp.parallel,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Config parsing


def _fail(key: str, why: str):
    raise ConfigError(f"invalid value for '{key}': {why}")


def _as_int(v, key, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(key, f"must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        _fail(key, f"must be >= {minimum}, got {v}")
    return int(v)


def _as_float(v, key, positive=False, nonnegative=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(key, f"must be a number, got {v!r}")
    f = float(v)
    if not np.isfinite(f):
        _fail(key, f"must be finite, got {v!r}")
    if positive and f <= 0:
        _fail(key, f"must be positive, got {v}")
    if nonnegative and f < 0:
        _fail(key, f"must be nonnegative, got {v}")
    return f


def _as_str(v, key, choices=None):
    if not isinstance(v, str):
        _fail(key, f"must be a string, got {v!r}")
    if choices is not None and v not in choices:
        _fail(key, f"must be one of {sorted(choices)}, got {v!r}")
    return v


def _as_bool(v, key):
    if not isinstance(v, bool):
        _fail(key, f"must be a boolean, got {v!r}")
    return v


def _as_pair(v, key):
    if (
        not isinstance(v, (list, tuple))
        or len(v) != 2
        or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v)
    ):
        _fail(key, f"must be a pair of numbers, got {v!r}")
    a, b = float(v[0]), float(v[1])
    if not a < b:
        _fail(key, f"must be an increasing pair, got {v!r}")
    return (a, b)


def _as_ladder(v, key):
    if not isinstance(v, (list, tuple)) or len(v) < 2:
        _fail(key, f"must be a list of at least 2 horizons, got {v!r}")
    out = []
    for x in v:
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            _fail(key, f"entries must be numbers, got {x!r}")
        out.append(float(x))
    if any(b <= a for a, b in zip(out, out[1:])):
        _fail(key, "must be strictly increasing")
    if out[0] <= 1:
        _fail(key, "every horizon must exceed 1")
    return tuple(out)


def _as_eval_points(v, key):
    if v is None:
        return None
    if not isinstance(v, (list, tuple)) or not v:
        _fail(key, f"must be null or a list of points, got {v!r}")
    rows = []
    width = None
    for row in v:
        if not isinstance(row, (list, tuple)) or not row:
            _fail(key, f"each point must be a list of coordinates, got {row!r}")
        if any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in row):
            _fail(key, f"coordinates must be numbers in {row!r}")
        if width is None:
            width = len(row)
        elif len(row) != width:
            _fail(key, "all points must have the same dimension")
        rows.append(tuple(float(x) for x in row))
    return tuple(rows)


def _section(raw: dict, name: str) -> dict:
    v = raw.pop(name, {})
    if not isinstance(v, dict):
        raise ConfigError(f"section '{name}' must be an object, got {v!r}")
    return dict(v)


def _reject_unknown(leftover: dict, where: str):
    if leftover:
        key = sorted(leftover)[0]
        raise ConfigError(f"unknown key '{key}' in {where}")


def load_config(source) -> RunConfig:
    """Parse a run configuration from a path, file object, or dict.

    Unknown keys anywhere are rejected; every reported problem names the
    offending key.  Missing keys fall back to the documented defaults.
    """
    if isinstance(source, (str, Path)):
        try:
            with open(source, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {source}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    elif isinstance(source, dict):
        raw = json.loads(json.dumps(source))
    else:
        try:
            raw = json.load(source)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    raw = dict(raw)

    s = _section(raw, "simulate")
    sim = SimulateSection(
        d=_as_int(s.pop("d", 2), "simulate.d", minimum=1),
        model=_as_str(s.pop("model", "paper-desk"), "simulate.model"),
        horizon=_as_float(s.pop("horizon", 200.0), "simulate.horizon", positive=True),
        step=_as_float(s.pop("step", 0.05), "simulate.step", positive=True),
        theta=_as_float(s.pop("theta", 1.0), "simulate.theta", positive=True),
        sigma=_as_float(s.pop("sigma", float(np.sqrt(2.0))), "simulate.sigma", positive=True),
        scale=_as_float(s.pop("scale", 0.5), "simulate.scale", positive=True),
        x0_law=_as_str(s.pop("x0_law", "stationary"), "simulate.x0_law",
                       choices=("stationary", "fixed")),
        noise_sigma=_as_float(s.pop("noise_sigma", 0.3), "simulate.noise_sigma",
                              nonnegative=True),
        noise_theta=_as_float(s.pop("noise_theta", 1.0), "simulate.noise_theta",
                              positive=True),
        seed=_as_int(s.pop("seed", 12345), "simulate.seed"),
    )
    _reject_unknown(s, "section 'simulate'")
    if sim.model not in MODEL_PRESETS:
        _fail("simulate.model", f"unknown preset {sim.model!r}; choices: {sorted(MODEL_PRESETS)}")
    if MODEL_PRESETS[sim.model].d != sim.d:
        _fail("simulate.d", f"model {sim.model!r} has d={MODEL_PRESETS[sim.model].d}")

    s = _section(raw, "kernels")
    kern = KernelsSection(
        k=_as_int(s.pop("k", 2), "kernels.k"),
        k_prime=_as_int(s.pop("k_prime", 6), "kernels.k_prime"),
    )
    _reject_unknown(s, "section 'kernels'")
    if kern.k not in SUPPORTED_ORDERS:
        _fail("kernels.k", f"must be one of {SUPPORTED_ORDERS}, got {kern.k}")
    if kern.k_prime not in SUPPORTED_ORDERS:
        _fail("kernels.k_prime", f"must be one of {SUPPORTED_ORDERS}, got {kern.k_prime}")

    s = _section(raw, "bandwidths")
    bw = BandwidthsSection(
        c1=_as_float(s.pop("c1", DEFAULT_C1), "bandwidths.c1", positive=True),
        c2=_as_float(s.pop("c2", DEFAULT_C2), "bandwidths.c2", positive=True),
        c_prime=_as_float(s.pop("c_prime", DEFAULT_C_PRIME), "bandwidths.c_prime",
                          positive=True),
        mode=_as_str(s.pop("mode", "mse"), "bandwidths.mode", choices=("mse", "uniform")),
    )
    _reject_unknown(s, "section 'bandwidths'")

    s = _section(raw, "weights")
    smooth_raw = s.pop("smoothness", None)
    wt = WeightsSection(
        support=_as_pair(s.pop("support", [-0.9, 0.9]), "weights.support"),
        smoothness=None if smooth_raw is None else _as_int(smooth_raw, "weights.smoothness", minimum=1),
        nodes_per_axis=_as_int(s.pop("nodes_per_axis", 16), "weights.nodes_per_axis", minimum=1),
    )
    _reject_unknown(s, "section 'weights'")
    if wt.nodes_per_axis > 64:
        _fail("weights.nodes_per_axis", f"must be <= 64, got {wt.nodes_per_axis}")

    s = _section(raw, "density")
    dens = DensitySection(
        floor=_as_float(s.pop("floor", DEFAULT_FLOOR), "density.floor", positive=True),
        delta=_as_float(s.pop("delta", DEFAULT_DELTA), "density.delta"),
    )
    if dens.delta < 0:
        _fail("density.delta", f"must be nonnegative, got {dens.delta}")
    _reject_unknown(s, "section 'density'")

    s = _section(raw, "experiment")
    exp = ExperimentSection(
        T_ladder=_as_ladder(s.pop("T_ladder", [250.0, 500.0, 1000.0, 2000.0, 4000.0]),
                            "experiment.T_ladder"),
        replicates=_as_int(s.pop("replicates", 50), "experiment.replicates", minimum=1),
        base_seed=_as_int(s.pop("base_seed", 20260818), "experiment.base_seed"),
        mode=_as_str(s.pop("mode", "mse"), "experiment.mode", choices=("mse", "uniform")),
        eval_points=_as_eval_points(s.pop("eval_points", None), "experiment.eval_points"),
        sup_grid_points=_as_int(s.pop("sup_grid_points", 21), "experiment.sup_grid_points",
                                minimum=2),
        sup_grid_halfwidth=_as_float(s.pop("sup_grid_halfwidth", 0.9),
                                     "experiment.sup_grid_halfwidth", positive=True),
        component_grid=_as_int(s.pop("component_grid", 41), "experiment.component_grid",
                               minimum=2),
        psi_clip=_as_float(s.pop("psi_clip", 50.0), "experiment.psi_clip", positive=True),
        parallel=_as_bool(s.pop("parallel", False), "experiment.parallel"),
    )
    _reject_unknown(s, "section 'experiment'")
    if exp.eval_points is not None and len(exp.eval_points[0]) != sim.d:
        _fail("experiment.eval_points", f"points must have {sim.d} coordinates")

    _reject_unknown(raw, "config root")
    cfg = RunConfig(simulate=sim, kernels=kern, bandwidths=bw, weights=wt,
                    density=dens, experiment=exp)
    cfg.rate_config()  # surface cross-field problems at load time
    return cfg


def dump_config(cfg: RunConfig) -> dict:
    """Plain-JSON dict representation; load_config(dump_config(c)) == c."""
    out = asdict(cfg)
    for name, section in out.items():
        for key, val in section.items():
            if isinstance(val, tuple):
                section[key] = [list(v) if isinstance(v, tuple) else v for v in val]
    return out


# ---------------------------------------------------------------------------
# Canonical CSV / JSON output


def format_float(v) -> str:
    """Minimal scientific form that round-trips exactly: 0.25 -> '2.5e-1'."""
    f = float(v)
    if not np.isfinite(f):
        raise NumericalError(f"refusing to write non-finite value {v!r}")
    if f == 0.0:
        return "0e0"
    s = np.format_float_scientific(f, unique=True, trim="-")
    mant, exp = s.split("e")
    return f"{mant}e{int(exp)}"


def _format_cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format_float(v)


def write_csv(dest, header, rows) -> None:
    """Write rows with '\\n' line endings, UTF-8, canonical float cells."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _write_json(dest, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# Commands


def _build_path(cfg: RunConfig) -> SampledPath:
    sim = cfg.simulate
    spec = MODEL_PRESETS[sim.model]
    params = OUParams(theta=sim.theta, sigma=sim.sigma * sim.scale, x0_law=sim.x0_law)
    cov = simulate_ou_covariates(sim.d, sim.horizon, sim.step, params, sim.seed)
    return attach_response(cov, spec, sim.noise_sigma, sim.noise_theta,
                           sim.seed + 10**9, sim.step)


def _cmd_kernels_verify(args) -> int:
    kern = make_kernel(args.order)
    rows = [(j, kernel_moment(kern, j, nodes=args.nodes)) for j in range(args.order + 1)]
    write_csv(sys.stdout, ["j", "value"], rows)
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    path = _build_path(cfg)
    d = path.d
    header = ["t"] + [f"x{j}" for j in range(1, d + 1)] + ["y"]
    rows = (
        (i * path.step, *path.covariates[i], path.responses[i])
        for i in range(path.n_samples)
    )
    write_csv(args.out, header, rows)
    return 0


def _cmd_fit(args) -> int:
    if args.grid < 2:
        raise ConfigError(f"--grid must be >= 2, got {args.grid}")
    cfg = load_config(args.config)
    path = _build_path(cfg)
    est = prepare_estimator(path, cfg.fit_config())
    axis = np.linspace(-1.0, 1.0, args.grid)
    mesh = np.meshgrid(*([axis] * path.d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = estimate_full(est)(pts)
    header = [f"x{j}" for j in range(1, path.d + 1)] + ["m_hat"]
    rows = ((*pts[i], vals[i]) for i in range(pts.shape[0]))
    write_csv(args.out, header, rows)
    return 0


def _cmd_fit_additive(args) -> int:
    cfg = load_config(args.config)
    path = _build_path(cfg)
    fitcfg = cfg.fit_config()
    fit = fit_additive(path, fitcfg)
    spec = MODEL_PRESETS[cfg.simulate.model]
    w = weight_system_for(fitcfg, path.d)
    comp_rows = []
    for l0 in range(path.d):
        truth = true_eta(spec, w, l0 + 1, fit.grids[l0])
        for x, eta_hat, eta_true in zip(fit.grids[l0], fit.components[l0], truth):
            comp_rows.append((l0 + 1, x, eta_hat, eta_true))
    write_csv(args.out_components, ["l", "x", "eta_hat", "eta_true"], comp_rows)

    mesh = np.meshgrid(*fit.grids, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    m_hat = evaluate_additive(fit, pts)
    m_true = true_regression(spec, pts)
    header = [f"x{j}" for j in range(1, path.d + 1)] + ["m_hat", "m_true"]
    rows = ((*pts[i], m_hat[i], m_true[i]) for i in range(pts.shape[0]))
    write_csv(args.out_eval, header, rows)
    return 0


def _table_rows(table: RateTable):
    return [
        (table.horizons[g], table.errors[g], table.spreads[g], table.clamp_rates[g])
        for g in range(len(table.horizons))
    ]


def _cmd_rates(args) -> int:
    cfg = load_config(args.config)
    rate_cfg = cfg.rate_config(mode=args.mode)
    table = run_rate_study(rate_cfg)
    slope = rate_slope(table)
    write_csv(args.out, ["T", "error_statistic", "replicate_spread", "clamp_rate"],
              _table_rows(table))
    summary = {
        "mode": table.mode,
        "k": rate_cfg.k,
        "slope": slope.slope,
        "slope_se": slope.se,
        "intercept": slope.intercept,
        "theoretical_slope": slope.theoretical,
        "T_ladder": list(table.horizons),
        "errors": list(table.errors),
        "clamp_rates": list(table.clamp_rates),
        "replicates": rate_cfg.replicates,
        "base_seed": rate_cfg.base_seed,
    }
    _write_json(args.summary if args.summary else sys.stdout, summary)
    return 0


def _cmd_compare(args) -> int:
    cfg = load_config(args.config)
    rate_cfg = cfg.rate_config(mode="mse")
    result = compare_full_vs_additive(rate_cfg)
    rows = [("full", *row) for row in _table_rows(result.table_full)]
    rows += [("additive", *row) for row in _table_rows(result.table_additive)]
    write_csv(args.out,
              ["estimator", "T", "error_statistic", "replicate_spread", "clamp_rate"],
              rows)
    summary = {
        "mode": "mse",
        "k": rate_cfg.k,
        "slope_full": result.slope_full.slope,
        "slope_full_se": result.slope_full.se,
        "slope_additive": result.slope_additive.slope,
        "slope_additive_se": result.slope_additive.se,
        "gap": result.gap,
        "T_ladder": list(result.table_full.horizons),
        "replicates": rate_cfg.replicates,
        "base_seed": rate_cfg.base_seed,
    }
    _write_json(args.summary if args.summary else sys.stdout, summary)
    return 0


def _make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="margint",
        description="Additive regression estimation along sampled paths",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pk = sub.add_parser("kernels", help="kernel utilities")
    ksub = pk.add_subparsers(dest="kernels_command", required=True)
    pkv = ksub.add_parser("verify", help="print a kernel moment table as CSV")
    pkv.add_argument("--order", type=int, choices=SUPPORTED_ORDERS, required=True)
    pkv.add_argument("--nodes", type=int, default=32)
    pkv.set_defaults(func=_cmd_kernels_verify)

    ps = sub.add_parser("simulate", help="simulate one path and write it as CSV")
    ps.add_argument("--config", required=True)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=_cmd_simulate)

    pf = sub.add_parser("fit", help="full-bandwidth regression surface on a tensor grid")
    pf.add_argument("--config", required=True)
    pf.add_argument("--grid", type=int, default=21)
    pf.add_argument("--out", required=True)
    pf.set_defaults(func=_cmd_fit)

    pa = sub.add_parser("fit-additive", help="additive reconstruction of one path")
    pa.add_argument("--config", required=True)
    pa.add_argument("--out-components", required=True)
    pa.add_argument("--out-eval", required=True)
    pa.set_defaults(func=_cmd_fit_additive)

    pr = sub.add_parser("rates", help="Monte-Carlo error decay over a horizon ladder")
    pr.add_argument("--config", required=True)
    pr.add_argument("--mode", choices=("mse", "uniform"), default=None)
    pr.add_argument("--out", required=True)
    pr.add_argument("--summary", default=None)
    pr.set_defaults(func=_cmd_rates)

    pc = sub.add_parser("compare", help="full vs additive error decay, shared paths")
    pc.add_argument("--config", required=True)
    pc.add_argument("--out", required=True)
    pc.add_argument("--summary", default=None)
    pc.set_defaults(func=_cmd_compare)

    return p


def main(argv=None) -> int:
    parser = _make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
