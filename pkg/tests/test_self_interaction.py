import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phasepop.grid import Field, interpolate, marginal_over_params, sup_norm_diff
from phasepop.initial import InitialDistribution, sample
from phasepop.runner import characteristic_slope_defect, self_interaction_config
from phasepop.self_interaction import (NonConvergence, SelfInteractionConfig, fixed_point_iterate,
                                       implicit_residual, mass_drift, solve_at_time, time_sweep,
                                       trace_characteristic, trace_member)


@pytest.fixture(scope="module")
def fig7(scenario):
    return scenario("fig7")


@pytest.fixture(scope="module")
def sweep(fig7):
    return time_sweep(fig7.u0, fig7.grid, [0.0, 0.054, 0.09], self_interaction_config(fig7))


def test_config_validation():
    for bad in (dict(delta=0), dict(epsilon=0), dict(max_iters=0), dict(divergence_window=0),
                dict(relaxation=0), dict(relaxation=1.5)):
        with pytest.raises(ValueError):
            SelfInteractionConfig(**bad)


def test_map_at_t0_returns_u0(fig7):
    start = Field(fig7.grid, np.full(fig7.grid.shape, 3.0))
    out = fixed_point_iterate(start, fig7.u0, 0.0, SelfInteractionConfig())
    assert np.array_equal(out.values, sample(fig7.u0, fig7.grid).values)


def test_map_of_zero_density_is_zero(fig7):
    zero = InitialDistribution((), ndim=2)
    out = fixed_point_iterate(sample(fig7.u0, fig7.grid), zero, 0.05, SelfInteractionConfig())
    assert not out.values.any()


def test_one_sweep_reduces_mismatch(fig7):
    cfg = SelfInteractionConfig()
    u0 = sample(fig7.u0, fig7.grid)
    u1 = fixed_point_iterate(u0, fig7.u0, 0.054, cfg)
    u2 = fixed_point_iterate(u1, fig7.u0, 0.054, cfg)
    assert sup_norm_diff(u2, u1) < sup_norm_diff(u1, u0)


def test_t0_solve_is_one_sweep(fig7):
    u, report = solve_at_time(fig7.u0, fig7.grid, 0.0, SelfInteractionConfig())
    assert report.converged and report.iterations == 1
    assert report.final_mismatch == 0.0
    assert np.array_equal(u.values, sample(fig7.u0, fig7.grid).values)


def test_fig7_sweep_converges_and_slows_down(sweep):
    reports = [r for _, r in sweep]
    assert all(r.converged for r in reports)
    assert all(r.final_mismatch <= 1e-4 for r in reports)
    assert reports[1].iterations < reports[2].iterations
    assert max(r.residual for r in reports) <= 1e-3


def test_converged_fields_satisfy_both_implicit_forms(fig7, sweep):
    for u, r in sweep:
        assert implicit_residual(u, fig7.u0, r.t, 0.1) <= 10 * 1e-4
        # the update-map form: the field is (nearly) a fixed point
        again = fixed_point_iterate(u, fig7.u0, r.t, SelfInteractionConfig())
        assert sup_norm_diff(again, u) <= 10 * 1e-4


def test_mass_is_conserved_across_converged_times(sweep):
    assert mass_drift([u for u, _ in sweep]) <= 0.01


def test_front_steepens(fig7, sweep):
    h = fig7.grid.axis("n").spacing

    def steepest(u):
        return np.max(np.abs(np.diff(marginal_over_params(u).values))) / h

    assert steepest(sweep[2][0]) >= 3 * steepest(sweep[0][0])


def test_breakdown_past_t_one_tenth(fig7, sweep):
    warm = sweep[-1][0]
    with pytest.raises(NonConvergence) as info:
        solve_at_time(fig7.u0, fig7.grid, 0.12, self_interaction_config(fig7), warm_start=warm)
    report = info.value.report
    assert not report.converged
    assert report.final_mismatch > 1e-4
    assert min(report.mismatches) > 1e-4
    assert info.value.field.grid == fig7.grid


def test_time_sweep_stops_at_first_failure(fig7):
    out = time_sweep(fig7.u0, fig7.grid, [0.0, 0.09, 0.12, 0.2], self_interaction_config(fig7))
    assert [r.converged for _, r in out] == [True, True, False]


def test_time_sweep_single_zero_time(fig7):
    out = time_sweep(fig7.u0, fig7.grid, [0.0], SelfInteractionConfig())
    assert len(out) == 1 and out[0][1].iterations == 1


def test_divergence_cap_by_iteration_budget(fig7):
    cfg = SelfInteractionConfig(epsilon=1e-14, max_iters=3)
    with pytest.raises(NonConvergence) as info:
        solve_at_time(fig7.u0, fig7.grid, 0.054, cfg)
    assert info.value.report.iterations == 3


def test_time_sweep_validates_times(fig7):
    with pytest.raises(ValueError):
        time_sweep(fig7.u0, fig7.grid, [0.05, 0.01], SelfInteractionConfig())
    with pytest.raises(ValueError):
        solve_at_time(fig7.u0, fig7.grid, -1.0, SelfInteractionConfig())


def test_member_paths_move_at_alpha_n_u_delta(fig7):
    member, chars = characteristic_slope_defect(fig7, 0.054)
    assert member <= 0.05
    # characteristics of the density equation travel twice as fast as members
    assert chars <= 0.05


@settings(max_examples=20)
@given(st.floats(17, 23), st.floats(27, 33))
def test_characteristic_invariant_holds_on_converged_field(fig7, sweep, n0, alpha):
    u, r = sweep[1]
    n = trace_characteristic(u, n0, alpha, r.t, 0.1)
    q = 1 - alpha * 0.1 * r.t * float(interpolate(u, n, alpha))
    assert np.sqrt(n) * q == pytest.approx(np.sqrt(n0), abs=1e-9)


@settings(max_examples=20)
@given(st.floats(17, 23), st.floats(27, 33))
def test_members_only_move_forward(fig7, sweep, n0, alpha):
    start, later = sweep[0][0], sweep[1][0]
    assert trace_member(later, start, n0, alpha) > n0
