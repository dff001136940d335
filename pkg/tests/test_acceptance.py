"""End-to-end acceptance checks on the shipped scenarios.

Each test records its outcome in ``conftest.ACCEPTANCE``; the terminal summary
prints one pass/fail line per criterion.
"""
import time

import numpy as np
import pytest

import conftest
from conftest import scenario_path
from phasepop.cli import EXIT_OK, OUTPUT_ENV, main
from phasepop.closed_form import exp_u, snapshot
from phasepop.config import load_config
from phasepop.coupled import (CompetitionParams, biased_initial, biased_run, competition_initial, competition_run)
from phasepop.grid import sup_norm_diff, weighted_correlation
from phasepop.initial import sample
from phasepop.runner import (_support_contraction_defect, biased_params, closed_form_model, competition_params,
                             run_oracle, run_scenario, self_interaction_config, write_artifacts)
from phasepop.self_interaction import NonConvergence, solve_at_time, time_sweep

SHIPPED = ["fig1", "fig2", "fig3", "fig4", "fig6", "fig7"]


def record(num, label, passed):
    conftest.ACCEPTANCE.setdefault(num, []).append((label, bool(passed)))
    return bool(passed)


def timed(fn, *args, **kw):
    start = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - start


# -- 1. conservation -------------------------------------------------------

@pytest.mark.parametrize("name", SHIPPED)
def test_conservation(scenario, name):
    cfg = scenario(name)
    (coarse, fine), secs = timed(lambda: (run_scenario(cfg), run_scenario(cfg.with_grid(cfg.grid.refined(2)))))
    ok = coarse.mass_drift <= 0.01 and fine.mass_drift <= 0.0025 and secs <= 30
    record(1, f"{name} drift {coarse.mass_drift:.2e}/{fine.mass_drift:.2e} in {secs:.1f}s", ok)
    assert coarse.mass_drift <= 0.01
    assert fine.mass_drift <= 0.0025
    assert secs <= 30


# -- 2. reduction identities -----------------------------------------------

def test_reduction_identities(scenario):
    start = time.perf_counter()
    worst = {}

    comp = scenario("fig3")
    p = competition_params(comp, gamma=0.0)
    tr = competition_run(comp.u0, comp.grid, p, [20 * p.dt])
    n, beta = comp.grid.mesh()
    worst["competition_gamma0"] = np.max(np.abs(tr.snapshots[-1].values - exp_u(comp.u0, n, beta, p.c0 * 20 * p.dt)))

    bias = scenario("fig6")
    p = biased_params(bias, beta=0.0)
    tr = biased_run(bias.u0, bias.grid, p, [20 * p.dt])
    n, alpha = bias.grid.mesh()
    worst["biased_beta0"] = np.max(np.abs(tr.snapshots[-1].values - exp_u(bias.u0, n, alpha, 20 * p.dt)))

    logi = scenario("fig2")
    model = closed_form_model(logi)
    gam = logi.grid.axis("gamma").nodes
    worst["logistic_boundary"] = max(
        np.max(np.abs(snapshot(model, logi.u0, logi.grid, t).values[-1] - logi.u0(model.k, gam))) for t in logi.times)

    t0 = 0.0
    for name in ("fig1", "fig2", "fig4"):
        cfg = scenario(name)
        t0 = max(t0, sup_norm_diff(snapshot(closed_form_model(cfg), cfg.u0, cfg.grid, 0.0), sample(cfg.u0, cfg.grid)))
    t0 = max(t0, sup_norm_diff(competition_initial(comp.u0, comp.grid, competition_params(comp))[1],
                               sample(comp.u0, comp.grid)))
    t0 = max(t0, sup_norm_diff(biased_initial(bias.u0, bias.grid, biased_params(bias))[1],
                               sample(bias.u0, bias.grid)))
    si = scenario("fig7")
    t0 = max(t0, sup_norm_diff(solve_at_time(si.u0, si.grid, 0.0, self_interaction_config(si))[0],
                               sample(si.u0, si.grid)))
    worst["t0_identity"] = t0
    secs = time.perf_counter() - start

    limits = {"competition_gamma0": 1e-12, "biased_beta0": 1e-12, "logistic_boundary": 0.0, "t0_identity": 0.0}
    for key, lim in limits.items():
        record(2, f"{key} {worst[key]:.1e}", worst[key] <= lim)
    record(2, f"runtime {secs:.1f}s", secs <= 5)
    assert all(worst[k] <= lim for k, lim in limits.items())
    assert secs <= 5


# -- 3 and 8. oracle equivalence, determinism ------------------------------

@pytest.fixture(scope="module")
def oracle_runs(tmp_path_factory):
    """Run each shipped scenario once with its oracle and write the artifacts."""
    cache = {}

    def get(name):
        if name not in cache:
            cfg = load_config(scenario_path(name))
            start = time.perf_counter()
            result = run_scenario(cfg)
            oracle = run_oracle(result)
            secs = time.perf_counter() - start
            out = tmp_path_factory.mktemp(f"{name}_a")
            write_artifacts(result, out, oracle)
            cache[name] = (cfg, result, oracle, secs, out)
        return cache[name]
    return get


@pytest.mark.parametrize("name", SHIPPED)
def test_oracle_equivalence(oracle_runs, name):
    cfg, result, oracle, secs, _ = oracle_runs(name)
    limit = 0.07 if cfg.model == "biased_migration" else 0.05
    worst = max(oracle.l1)
    record(3, f"{name} L1 {worst:.4f} <= {limit:g} in {secs:.0f}s", worst <= limit and secs <= 120)
    assert len(oracle.l1) == len(cfg.times)
    assert worst <= limit
    assert secs <= 120


@pytest.mark.parametrize("name", SHIPPED)
def test_repeated_run_is_byte_identical(oracle_runs, name, tmp_path, monkeypatch):
    _, _, _, _, first = oracle_runs(name)
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    code = main(["run", str(scenario_path(name))])
    a = sorted(p.name for p in first.iterdir())
    b = sorted(p.name for p in tmp_path.iterdir())
    same = code == EXIT_OK and a == b and all((first / f).read_bytes() == (tmp_path / f).read_bytes() for f in a)
    record(8, f"{name} {len(a)} files", same)
    assert code == EXIT_OK
    assert a == b
    for f in a:
        assert (first / f).read_bytes() == (tmp_path / f).read_bytes(), f


# -- 4. competition stepper ------------------------------------------------

def test_competition_behaviour(scenario):
    cfg = scenario("fig3")
    result = run_scenario(cfg)
    hist = result.extras["c_history"]
    dc = np.diff(hist[:, 1])[hist[:-1, 2] > 0]
    decreasing = bool(np.all(dc < 0))
    record(4, "c strictly decreasing while N > 0", decreasing)

    assert result.extras["exhausted"]
    t_ex = result.extras["exhaustion_time"]
    post = [f for t, f in zip(result.times, result.fields) if t >= t_ex]
    freeze = max(sup_norm_diff(a, b) / a.max for a, b in zip(post, post[1:]))
    record(4, f"freeze-out {freeze:.1e} over {len(post)} snapshots", len(post) >= 2 and freeze <= 1e-3)

    ratios = {}
    for pc in (False, True):
        vals = []
        for dt in (4e-4, 2e-4, 1e-4):
            s = competition_run(cfg.u0, cfg.grid, CompetitionParams(cfg.params["c0"], cfg.params["gamma"], dt, pc),
                                [0.04]).final_state
            vals.append((s.xi, s.c))
        d = np.diff(np.array(vals), axis=0)
        ratios[pc] = d[0] / d[1]
    first = bool(np.allclose(ratios[False], 2.0, rtol=0.1))
    second = bool(np.allclose(ratios[True], 4.0, rtol=0.1))
    record(4, f"Richardson ratio {ratios[False][0]:.2f} (plain), {ratios[True][0]:.2f} (predictor-corrector)",
           first and second)
    assert decreasing
    assert len(post) >= 2 and freeze <= 1e-3
    assert first and second


# -- 5. biased-migration stepper -------------------------------------------

def test_biased_behaviour(oracle_runs):
    cfg, result, oracle, _, _ = oracle_runs("fig6")
    drift = result.extras["A_drift"]
    record(5, f"alpha-moment drift {drift:.2e}", drift <= 0.02)
    mism = oracle.extras["growth_condition_mismatches"]
    record(5, f"growth-condition mismatches {mism}", mism == 0)
    i = result.times.index(0.034)
    corr = weighted_correlation(result.fields[i])
    record(5, f"n-alpha correlation {corr:.3f} at t=0.034", corr >= 0.9)
    assert drift <= 0.02
    assert mism == 0
    assert corr >= 0.9


# -- 6. self-interaction fixed point ---------------------------------------

def test_self_interaction_behaviour(scenario):
    cfg = scenario("fig7")
    sic = self_interaction_config(cfg)
    assert sic.epsilon == 1e-4 and sic.delta == 0.1
    start = time.perf_counter()
    out = time_sweep(cfg.u0, cfg.grid, [0.0, 0.054, 0.09, 0.12], sic)
    secs = time.perf_counter() - start
    reports = {r.t: r for _, r in out}
    conv = [reports[t] for t in (0.054, 0.09) if t in reports]
    converged = len(conv) == 2 and all(r.converged and r.residual <= 1e-3 for r in conv)
    record(6, "converged at 0.054, 0.09 with residual "
           + ", ".join(f"{r.residual:.1e}" for r in conv), converged)
    slower = converged and conv[0].iterations < conv[1].iterations
    record(6, "iterations " + " < ".join(str(r.iterations) for r in conv), slower)
    broke = 0.12 in reports and not reports[0.12].converged
    record(6, "no convergence at t=0.12", broke)
    record(6, f"runtime {secs:.1f}s", secs <= 60)
    assert converged and slower and broke
    assert secs <= 60
    with pytest.raises(NonConvergence):
        solve_at_time(cfg.u0, cfg.grid, 0.12, sic, warm_start=out[2][0])


# -- 7. random migration ---------------------------------------------------

def _local_maxima(values):
    v = np.asarray(values)
    inner = (v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])
    return int(np.count_nonzero(inner))


def test_random_migration_behaviour(oracle_runs):
    cfg, result, oracle, _, _ = oracle_runs("fig4")
    support = _support_contraction_defect(cfg, closed_form_model(cfg))
    record(7, f"support edges off by {support:.1e}", support <= 1e-9)
    sum_n = oracle.extras["sum_n_drift"]
    record(7, f"oracle sum of sizes drift {sum_n:.1e}", sum_n <= 1e-8)
    beta = cfg.params["beta"]
    peaks = [_local_maxima(f.values) for t, f in zip(result.times, result.fields) if beta * t <= 2]
    record(7, f"local maxima {peaks}", all(p == 2 for p in peaks))
    assert support <= 1e-9
    assert sum_n <= 1e-8
    assert len(peaks) == len(cfg.times) and all(p == 2 for p in peaks)
