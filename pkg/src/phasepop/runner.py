"""Run a validated scenario, attach the ensemble oracle, and collect checks."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .closed_form import (ExponentialModel, LogisticModel, RandomMigrationModel, compute_nbar, exp_u,
                          random_migration_support, random_migration_u, snapshot)
from .config import ScenarioConfig
from .coupled import (BiasedParams, CompetitionParams, biased_run, competition_run, growth_condition)
from .grid import (Field, first_moment_n, first_moment_param, integrate, interpolate, marginal_over_params,
                   sup_norm_diff, warn_if_truncated)
from .initial import sample
from .oracle import default_edges, density_table, histogram, integrate_ensemble, l1_distance, sample_ensemble
from .self_interaction import SelfInteractionConfig, time_sweep, trace_characteristic, trace_member

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    config: ScenarioConfig
    times: list[float]
    fields: list[Field]
    series: np.ndarray | None = None
    series_columns: tuple[str, ...] | None = None
    reports: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def failure(self):
        """Report of a fixed-point breakdown, if any."""
        if self.reports and not self.reports[-1].converged:
            return self.reports[-1]
        return None

    @property
    def masses(self) -> list[float]:
        return [integrate(f) for f in self.fields]

    @property
    def mass_drift(self) -> float:
        m = np.array(self.masses)
        return float(np.max(np.abs(m - m[0])) / m[0])

    def marginal(self, f: Field) -> Field:
        return f if f.grid.ndim == 1 else marginal_over_params(f)


def closed_form_model(cfg: ScenarioConfig):
    if cfg.model == "exponential":
        return ExponentialModel()
    if cfg.model == "logistic":
        return LogisticModel(cfg.params.get("k"))
    if cfg.model == "random_migration":
        nbar = cfg.params.get("nbar") or compute_nbar(cfg.u0, cfg.grid)
        return RandomMigrationModel(cfg.params["beta"], nbar)
    raise ValueError(f"{cfg.model} has no closed-form kernel")


def competition_params(cfg: ScenarioConfig, **over) -> CompetitionParams:
    kw = dict(c0=cfg.params["c0"], gamma=cfg.params["gamma"], dt=cfg.solver.get("dt", 1e-4),
              predictor_corrector=cfg.solver.get("predictor_corrector", False))
    kw.update(over)
    return CompetitionParams(**kw)


def biased_params(cfg: ScenarioConfig, **over) -> BiasedParams:
    kw = dict(beta=cfg.params["beta"], dt=cfg.solver.get("dt", 1e-4),
              predictor_corrector=cfg.solver.get("predictor_corrector", False))
    kw.update(over)
    return BiasedParams(**kw)


def self_interaction_config(cfg: ScenarioConfig) -> SelfInteractionConfig:
    return SelfInteractionConfig(cfg.params["delta"], cfg.params["epsilon"],
                                 **{k: cfg.solver[k] for k in ("max_iters", "divergence_window", "relaxation")
                                    if k in cfg.solver})


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    u0, grid, times = cfg.u0, cfg.grid, cfg.times
    if cfg.model in ("exponential", "logistic", "random_migration"):
        model = closed_form_model(cfg)
        fields = [snapshot(model, u0, grid, t) for t in times]
        for t, f in zip(times, fields):
            warn_if_truncated(f, f"{cfg.name} t={t:g}")
        extras = {"nbar": model.nbar} if cfg.model == "random_migration" else {}
        return RunResult(cfg, list(times), fields, extras=extras)

    if cfg.model == "competition":
        tr = competition_run(u0, grid, competition_params(cfg), times, every=cfg.solver.get("series_every", 1))
        s = tr.final_state
        extras = {"exhausted": s.exhausted, "exhaustion_time": s.t if s.exhausted else None,
                  "c_history": np.array(s.history)}
        return RunResult(cfg, list(times), tr.snapshots, tr.series, tr.columns, extras=extras)

    if cfg.model == "biased_migration":
        drift = []

        def track(state, f):
            drift.append(abs(first_moment_param(f, "alpha") / state.A - 1.0))

        tr = biased_run(u0, grid, biased_params(cfg), times, every=cfg.solver.get("series_every", 1),
                        on_step=track)
        extras = {"A": tr.final_state.A, "A_drift": max(drift, default=0.0)}
        return RunResult(cfg, list(times), tr.snapshots, tr.series, tr.columns, extras=extras)

    if cfg.model == "self_interaction":
        out = time_sweep(u0, grid, times, self_interaction_config(cfg))
        reports = [r for _, r in out]
        fields = [f for f, r in out if r.converged]
        return RunResult(cfg, [r.t for r in reports if r.converged], fields, reports=reports)

    raise ValueError(f"unknown model {cfg.model}")


# --------------------------------------------------------------------------
# oracle


@dataclass
class OracleResult:
    l1: list[float]
    ensembles: list = field(default_factory=list, repr=False)
    histograms: list = field(default_factory=list, repr=False)
    extras: dict = field(default_factory=dict)


def run_oracle(result: RunResult) -> OracleResult:
    cfg = result.config
    oc = cfg.oracle
    sgrid = cfg.grid.refined(oc.refine) if oc.refine > 1 else cfg.grid
    ens = sample_ensemble(cfg.u0, sgrid, oc.P)
    edges = default_edges(cfg.grid, oc.bins)
    params = {}
    extras = {}
    if cfg.model == "logistic" and "k" in cfg.params:
        params["k"] = cfg.params["k"]
    elif cfg.model == "competition":
        params.update(gamma=cfg.params["gamma"], c0=cfg.params["c0"])
    elif cfg.model == "random_migration":
        params["beta"] = cfg.params["beta"]
        extras["sum_n0"] = float(ens.n.sum())
    elif cfg.model == "biased_migration":
        params["beta"] = cfg.params["beta"]
    elif cfg.model == "self_interaction":
        params.update(delta=cfg.params["delta"], density=_density_for(result))

    out = OracleResult([], extras=extras)
    for t, f in zip(result.times, result.fields):
        if t > ens.t:
            ens = integrate_ensemble(cfg.model, ens, t, oc.dt, **params)
        hist = histogram(ens, edges)
        out.l1.append(l1_distance(result.marginal(f), hist))
        out.ensembles.append(ens)
        out.histograms.append(hist)
        logger.info("%s t=%g oracle L1 %.4f", cfg.name, t, out.l1[-1])
    if cfg.model == "random_migration":
        extras["sum_n_drift"] = max(abs(e.n.sum() / extras["sum_n0"] - 1.0) for e in out.ensembles)
    if cfg.model == "biased_migration":
        _biased_oracle_checks(out, cfg.params["beta"])
    if cfg.model == "competition":
        _competition_oracle_checks(out, result)
    return out


def _density_for(result: RunResult):
    """Solver snapshots on a uniform time table covering the converged span."""
    cfg = result.config
    t_end = result.times[-1] if result.times else 0.0
    step = cfg.oracle.table_dt
    table = np.unique(np.round(np.concatenate([np.arange(0.0, t_end + 0.5 * step, step), result.times]), 12))
    table = table[table <= t_end + 1e-12]
    if len(table) < 2:
        table = np.array([0.0, max(t_end, step)])
    solved = time_sweep(cfg.u0, cfg.grid, table, self_interaction_config(cfg))
    if not solved[-1][1].converged:
        raise RuntimeError(f"oracle density table failed to converge at t={solved[-1][1].t}")
    return density_table(table, [f for f, _ in solved])


def _biased_oracle_checks(out: OracleResult, beta: float):
    mismatches = 0
    balance = 0.0
    for ens in out.ensembles:
        n, alpha = ens.n, ens.param("alpha")
        rhs = (alpha - beta) * n + alpha * beta * n.sum() / alpha.sum()
        migration = -beta * n + alpha * beta * n.sum() / alpha.sum()
        balance = max(balance, abs(migration.sum()) / (beta * n.sum()) if beta > 0 else 0.0)
        if beta > 0:
            grows = growth_condition(alpha, n, alpha.sum(), n.sum(), beta)
            decided = np.abs(rhs) > 1e-12 * np.abs(alpha * beta * n.sum() / alpha.sum()).max()
            mismatches += int(np.count_nonzero(grows[decided] != (rhs[decided] > 0)))
    out.extras.update(growth_condition_mismatches=mismatches, balance_defect=balance)


def _competition_oracle_checks(out: OracleResult, result: RunResult):
    hist = result.extras["c_history"]
    cfg = result.config
    worst = 0.0
    for t, ens in zip(result.times, out.ensembles):
        if result.extras["exhausted"] and t >= result.extras["exhaustion_time"]:
            continue
        c_alg = np.interp(t, hist[:, 0], hist[:, 1])
        c_ode = ens.resource if ens.resource is not None else cfg.params["c0"]
        worst = max(worst, abs(c_alg - c_ode))
    # ten steps' worth of peak consumption
    bound = 10 * cfg.params["gamma"] * hist[:, 2].max() * cfg.solver.get("dt", 1e-4)
    out.extras.update(c_mismatch=worst, c_bound=bound)


# --------------------------------------------------------------------------
# checks


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    relation: str = "<="


def _le(name, value, threshold):
    return Check(name, float(value), float(threshold), bool(value <= threshold))


def _ge(name, value, threshold):
    return Check(name, float(value), float(threshold), bool(value >= threshold), ">=")


def scenario_checks(result: RunResult, oracle: OracleResult | None = None, refined: RunResult | None = None):
    cfg = result.config
    u0, grid = cfg.u0, cfg.grid
    checks = []
    if result.fields:
        checks.append(_le("conservation_drift", result.mass_drift, 0.01))
    if refined is not None and refined.fields:
        checks.append(_le("conservation_drift_refined", refined.mass_drift, 0.0025))
    u0_field = sample(u0, grid)

    if cfg.model in ("exponential", "logistic", "random_migration"):
        model = closed_form_model(cfg)
        checks.append(_le("t0_identity", sup_norm_diff(snapshot(model, u0, grid, 0.0), u0_field), 0.0))
        if cfg.model == "logistic" and model.k is not None and grid.n_axis.hi == model.k:
            gam = grid.axis("gamma").nodes
            worst = max(float(np.max(np.abs(f.values[-1] - u0(model.k, gam)))) for f in result.fields)
            checks.append(_le("logistic_boundary_identity", worst, 0.0))
        if cfg.model == "random_migration":
            checks.append(_le("support_contraction", _support_contraction_defect(cfg, model), 1e-9))
    elif cfg.model == "competition":
        checks += _competition_checks(result)
    elif cfg.model == "biased_migration":
        checks += _biased_checks(result)
    elif cfg.model == "self_interaction":
        checks += _self_interaction_checks(result)

    if oracle is not None:
        thr = cfg.oracle.l1_threshold
        for t, l1 in zip(result.times, oracle.l1):
            checks.append(_le(f"oracle_l1[t={t:g}]", l1, thr))
        ex = oracle.extras
        if "sum_n_drift" in ex:
            checks.append(_le("oracle_sum_n_conserved", ex["sum_n_drift"], 1e-8))
        if "growth_condition_mismatches" in ex:
            checks.append(_le("growth_condition_agreement", ex["growth_condition_mismatches"], 0))
            checks.append(_le("migration_balance", ex["balance_defect"], 1e-8))
        if "c_mismatch" in ex:
            checks.append(_le("oracle_resource_agreement", ex["c_mismatch"], ex["c_bound"]))
    return checks


def _support_contraction_defect(cfg, model) -> float:
    """Compare the analytic support image with edges located by bisection on the kernel."""
    lo, hi = cfg.u0.support[0]
    if not np.isfinite(hi):
        hi = 2 * model.nbar - lo
    u0 = replace(cfg.u0, support=((lo, hi),))
    worst = 0.0
    for t in cfg.times:
        a, b = random_migration_support(lo, hi, t, model)
        edges = []
        for inner, outer in ((model.nbar, lo - 1.0), (model.nbar, hi + 1.0)):
            x_in, x_out = inner, outer
            for _ in range(200):
                mid = 0.5 * (x_in + x_out)
                if random_migration_u(u0, mid, t, model) > 0:
                    x_in = mid
                else:
                    x_out = mid
            edges.append(0.5 * (x_in + x_out))
        worst = max(worst, abs(edges[0] - a), abs(edges[1] - b))
    return worst


def _competition_checks(result: RunResult):
    cfg = result.config
    u0, grid = cfg.u0, cfg.grid
    checks = []
    hist = result.extras["c_history"]
    if cfg.params["gamma"] > 0:
        growing = hist[:-1, 2] > 0
        dc = np.diff(hist[:, 1])
        worst = float(np.max(dc[growing], initial=-np.inf))
        checks.append(Check("resource_strictly_decreasing", worst, 0.0, bool(worst < 0), "<"))
    if result.extras["exhausted"]:
        t_ex = result.extras["exhaustion_time"]
        post = [f for t, f in zip(result.times, result.fields) if t >= t_ex]
        if len(post) >= 2:
            worst = max(sup_norm_diff(a, b) / a.max for a, b in zip(post, post[1:]))
            checks.append(_le("freeze_out", worst, 1e-3))
    # the same stepper with no consumption must reproduce exponential growth at time c0 t
    p0 = competition_params(cfg, gamma=0.0)
    steps = 20
    tr = competition_run(u0, grid, p0, [steps * p0.dt])
    n, beta = grid.mesh()
    ref = exp_u(u0, n, beta, p0.c0 * steps * p0.dt)
    checks.append(_le("zero_consumption_reduction", float(np.max(np.abs(tr.snapshots[-1].values - ref))), 1e-12))
    return checks


def _biased_checks(result: RunResult):
    cfg = result.config
    u0, grid = cfg.u0, cfg.grid
    checks = [_le("alpha_moment_frozen", result.extras["A_drift"], 0.02)]
    p0 = biased_params(cfg, beta=0.0)
    steps = 20
    tr = biased_run(u0, grid, p0, [steps * p0.dt])
    n, alpha = grid.mesh()
    ref = exp_u(u0, n, alpha, steps * p0.dt)
    checks.append(_le("zero_emigration_reduction", float(np.max(np.abs(tr.snapshots[-1].values - ref))), 1e-12))
    return checks


def _self_interaction_checks(result: RunResult):
    cfg = result.config
    sic = self_interaction_config(cfg)
    checks = [Check("all_times_converged", float(result.failure is None), 1.0, result.failure is None, "==")]
    conv = [r for r in result.reports if r.converged]
    if conv:
        checks.append(_le("implicit_residual", max(r.residual for r in conv), 10 * sic.epsilon))
    its = [r.iterations for r in conv if r.t > 0]
    if len(its) >= 2:
        ok = all(b > a for a, b in zip(its, its[1:]))
        checks.append(Check("iterations_increase_with_t", float(ok), 1.0, ok, "=="))
    mid = [t for t in result.times if t > 0]
    if mid:
        member, chars = characteristic_slope_defect(cfg, mid[0])
        checks.append(_le("member_path_slope", member, 0.05))
        checks.append(_le("characteristic_speed", chars, 0.05))
    return checks


def characteristic_slope_defect(cfg: ScenarioConfig, t: float, h: float | None = None,
                                starts=None) -> tuple[float, float]:
    """Relative slope errors of traced paths at time ``t`` in the self-interaction model.

    Returns ``(member, characteristic)``: the gap between ``alpha n u delta``
    and the slope of a member path (followed by its per-alpha quantile), and
    the gap between ``2 alpha n u delta`` and the slope of the field
    characteristic through the same start.
    """
    sic = self_interaction_config(cfg)
    h = h if h is not None else 0.05 * t
    sweep = time_sweep(cfg.u0, cfg.grid, [0.0, t - h, t, t + h], sic)
    if not all(r.converged for _, r in sweep):
        raise RuntimeError("characteristic check needs converged snapshots around t")
    (u_start, _), (um, _), (u, _), (up, _) = sweep
    comp = cfg.u0.components[0]
    n_c, a_c = comp.center
    s_n, s_a = comp.sigma
    if starts is None:
        starts = [(n_c + dn * s_n, a_c + da * s_a) for dn in (-1, 0, 1) for da in (-1, 0, 1)]
    member = chars = 0.0
    for n0, a in starts:
        path = [trace_member(f, u_start, n0, a) for f in (um, u, up)]
        slope = (path[2] - path[0]) / (2 * h)
        rate = a * path[1] * float(interpolate(u, path[1], a)) * sic.delta
        member = max(member, abs(slope - rate) / rate)
        path = [trace_characteristic(f, n0, a, s, sic.delta) for f, s in ((um, t - h), (u, t), (up, t + h))]
        slope = (path[2] - path[0]) / (2 * h)
        rate = 2 * a * path[1] * float(interpolate(u, path[1], a)) * sic.delta
        chars = max(chars, abs(slope - rate) / rate)
    return member, chars


# --------------------------------------------------------------------------
# artifacts


def write_artifacts(result: RunResult, outdir, oracle: OracleResult | None = None):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for i, (t, f) in enumerate(zip(result.times, result.fields)):
        io.write_field(outdir / f"field_{i:03d}.csv", f)
        io.write_field(outdir / f"marginal_{i:03d}.csv", result.marginal(f))
    if result.series is not None:
        io.write_series(outdir / "timeseries.csv", result.series_columns, result.series)
    if result.reports:
        io.write_rows(outdir / "fixed_point.csv", ("t", "converged", "iterations", "mismatch", "residual"),
                      [(r.t, r.converged, r.iterations, r.final_mismatch, r.residual) for r in result.reports])
    masses = result.masses
    rows = []
    for i, (t, f) in enumerate(zip(result.times, result.fields)):
        l1 = oracle.l1[i] if oracle is not None else None
        rows.append((t, masses[i], abs(masses[i] - masses[0]) / masses[0], first_moment_n(f), l1))
    io.write_rows(outdir / "summary.csv", ("t", "mass", "mass_drift", "N", "oracle_l1"), rows)
    if oracle is not None:
        for i, h in enumerate(oracle.histograms):
            io.write_histogram(outdir / f"histogram_{i:03d}.csv", h)
