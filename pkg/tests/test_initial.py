import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasepop.grid import Axis, Field, PhaseGrid, integrate
from phasepop.initial import (GaussianComponent, InitialDistribution, TabulatedDistribution, eval_u0,
                              normalize_to_count, sample)

FIG1_PEAK = 0.0397887357729738  # 1 / (2 pi * 2 * 2)


def fig1():
    return InitialDistribution((GaussianComponent((15, 20), (2, 2)),))


def fig1_grid():
    return PhaseGrid((Axis("n", 0, 60, 601), Axis("alpha", 0, 60, 601)))


def double_peak():
    return InitialDistribution((GaussianComponent((4.2,), (0.5,), 0.5), GaussianComponent((7.2,), (0.5,), 0.5)))


def test_component_validation():
    with pytest.raises(ValueError):
        GaussianComponent((1, 2), (1,))
    with pytest.raises(ValueError):
        GaussianComponent((1,), (0,))
    with pytest.raises(ValueError):
        GaussianComponent((1,), (1,), weight=0)


def test_zero_outside_support():
    d = fig1()
    assert eval_u0(d, (-0.1, 20)) == 0.0
    assert eval_u0(d, (15, -1e-9)) == 0.0
    boxed = InitialDistribution(fig1().components, support=((10, 20), (0, np.inf)))
    assert eval_u0(boxed, (9.99, 20)) == 0.0
    assert eval_u0(boxed, (20.01, 20)) == 0.0
    assert eval_u0(boxed, (15, 20)) > 0


def test_value_at_center_is_peak():
    comp = GaussianComponent((3, 4), (0.5, 2.0), weight=3.0)
    d = InitialDistribution((comp,))
    assert eval_u0(d, (3, 4)) == pytest.approx(3.0 / (2 * np.pi * 0.5 * 2.0), rel=1e-15)
    assert eval_u0(fig1(), (15, 20)) == pytest.approx(FIG1_PEAK, rel=1e-14)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        eval_u0(fig1(), (1.0,))
    with pytest.raises(ValueError):
        sample(fig1(), PhaseGrid((Axis("n", 0, 1, 3),)))


def test_empty_distribution_needs_ndim_and_is_zero():
    with pytest.raises(ValueError):
        InitialDistribution(())
    zero = InitialDistribution((), ndim=2)
    assert not sample(zero, fig1_grid()).values.any()


def test_sample_agrees_with_pointwise_evaluation():
    g = fig1_grid()
    f = sample(fig1(), g)
    n, a = g.axis("n").nodes, g.axis("alpha").nodes
    for i, j in [(150, 200), (140, 190), (0, 0), (600, 600), (173, 211)]:
        assert f.values[i, j] == eval_u0(fig1(), (n[i], a[j]))


def test_double_peak_has_two_local_maxima():
    g = PhaseGrid((Axis("n", 0, 11.4, 1141),))
    v = sample(double_peak(), g).values
    interior = (v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])
    assert np.count_nonzero(interior) == 2
    assert g.axis("n").nodes[1:-1][interior] == pytest.approx([4.2, 7.2])


def test_normalize_examples():
    g = fig1_grid()
    d = normalize_to_count(fig1(), 1000.0, g)
    assert integrate(sample(d, g)) == pytest.approx(1000.0, rel=1e-6)
    d2 = normalize_to_count(fig1(), 2000.0, g)
    assert d2.components[0].weight == pytest.approx(2 * d.components[0].weight, rel=1e-12)
    # already at the target: unchanged
    d0 = fig1()
    assert normalize_to_count(d0, integrate(sample(d0, g)), g) is d0


def test_normalize_errors():
    g = fig1_grid()
    with pytest.raises(ValueError):
        normalize_to_count(fig1(), 0.0, g)
    with pytest.raises(ValueError):
        normalize_to_count(InitialDistribution((), ndim=2), 1.0, g)


def test_tabulated_distribution_interpolates_and_is_zero_outside():
    g = PhaseGrid((Axis("n", 0, 2, 3),))
    t = TabulatedDistribution(Field(g, np.array([0.0, 2.0, 4.0])))
    assert t(0.5) == pytest.approx(1.0)
    assert t(3.0) == 0.0
    assert t.scaled(2)(1.0) == pytest.approx(4.0)


# -- properties ------------------------------------------------------------

components = st.builds(
    GaussianComponent,
    st.tuples(st.floats(0, 50), st.floats(0, 50)),
    st.tuples(st.floats(0.3, 5), st.floats(0.3, 5)),
    st.floats(0.01, 100),
)
points = st.tuples(st.floats(-10, 80), st.floats(-10, 80))


@given(st.lists(components, min_size=1, max_size=4), points)
def test_density_is_finite_and_nonnegative(comps, point):
    v = eval_u0(InitialDistribution(tuple(comps)), point)
    assert np.isfinite(v) and v >= 0
    if min(point) < 0:
        assert v == 0.0


@given(st.lists(components, min_size=1, max_size=3), st.floats(1e-3, 1e6))
def test_normalization_is_idempotent(comps, P):
    g = PhaseGrid((Axis("n", 0, 60, 121), Axis("alpha", 0, 60, 121)))
    d = InitialDistribution(tuple(comps))
    once = normalize_to_count(d, P, g)
    twice_scale = P / integrate(sample(once, g))
    assert twice_scale == pytest.approx(1.0, abs=1e-12)
