import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from oracle_values import NORMAL_L1
from ppd_lab.errors import NumericalError
from ppd_lab.losses import LossKind, l1_distance, loss, tv_distance, tv_events
from ppd_lab.models import Bernoulli, Density, Normal, Poisson, RefMeasure


def _normal(m, v):
    sd = math.sqrt(v)
    return Density(lambda x: np.exp(-(np.asarray(x) - m) ** 2 / (2 * v)) / math.sqrt(2 * math.pi * v),
                   RefMeasure.lebesgue(), (m - 12 * sd, m + 12 * sd))


def _finite(mass):
    mass = np.asarray(mass, dtype=float)
    k = len(mass)
    return Density(lambda x, m=mass: m[np.asarray(x, dtype=np.int64)], RefMeasure.counting(range(k)), (0, k - 1))


def test_bernoulli_losses():
    f, g = Bernoulli().truth(0.3), Bernoulli().truth(0.7)
    assert l1_distance(f, g) == pytest.approx(0.8, abs=1e-15)
    assert tv_distance(f, g) == pytest.approx(0.4, abs=1e-15)
    assert tv_distance(f, g, method="events") == pytest.approx(0.4, abs=1e-15)
    assert loss("squared-l1", f, g) == pytest.approx(0.64, abs=1e-15)
    assert loss("squared-tv", f, g) == pytest.approx(0.16, abs=1e-15)


@pytest.mark.parametrize("kind", list(LossKind))
def test_identical_densities_have_zero_loss(kind):
    for f in (Bernoulli().truth(0.2), Normal(1.3).truth(0.4), Poisson().truth(3.0)):
        assert loss(kind, f, f) == 0.0


def test_disjoint_supports_are_maximally_far():
    f, g = _finite([0.5, 0.5, 0, 0]), _finite([0, 0, 0.25, 0.75])
    assert l1_distance(f, g) == 2.0
    assert tv_events(f, g) == 1.0


def test_normal_l1_matches_mpmath():
    for (m1, v1, m2, v2), want in NORMAL_L1.items():
        assert l1_distance(_normal(m1, v1), _normal(m2, v2)) == pytest.approx(want, abs=1e-8)


def test_crossing_on_a_scan_node():
    # N(0,1) and N(1,1) cross at 0.5, which lands exactly on a scan node
    f = Density(Normal().truth(0.0).pdf, RefMeasure.lebesgue(), (-9.5, 10.5))
    g = Density(Normal().truth(1.0).pdf, RefMeasure.lebesgue(), (-9.5, 10.5))
    assert l1_distance(f, g) == pytest.approx(NORMAL_L1[(0, 1, 1, 1)], abs=1e-8)


def test_poisson_l1_on_naturals():
    from scipy import stats
    ks = np.arange(200)
    want = np.abs(stats.poisson.pmf(ks, 3.0) - stats.poisson.pmf(ks, 5.5)).sum()
    assert l1_distance(Poisson().truth(3.0), Poisson().truth(5.5)) == pytest.approx(want, abs=1e-14)


def test_event_oracle_is_capped():
    f = _finite(np.full(13, 1 / 13))
    with pytest.raises(ValueError, match="12"):
        tv_events(f, f)
    with pytest.raises(ValueError, match="finite"):
        tv_events(Poisson().truth(1.0), Poisson().truth(2.0))


def test_mismatched_measures():
    with pytest.raises(ValueError, match="reference measures"):
        l1_distance(Bernoulli().truth(0.5), Poisson().truth(1.0))


def test_quadrature_failure_reports_achieved_error():
    # 0.5 / sqrt(x) is integrable, but the quadrature error on [0, h] shrinks only like sqrt(h)
    rough = Density(lambda x: 0.5 / np.sqrt(np.maximum(np.asarray(x, dtype=float), 1e-300)),
                    RefMeasure.lebesgue(0, 1), (0.0, 1.0))
    flat = Density(lambda x: np.ones_like(np.asarray(x, dtype=float)), RefMeasure.lebesgue(0, 1), (0.0, 1.0))
    with pytest.raises(NumericalError) as info:
        l1_distance(rough, flat, tol=1e-14)
    assert info.value.achieved is not None and info.value.achieved > 1e-14


def test_unbounded_range_is_refused():
    f = Density(lambda x: np.zeros_like(np.asarray(x, dtype=float)), RefMeasure.lebesgue(), (-math.inf, 0.0))
    with pytest.raises(NumericalError, match="unbounded"):
        l1_distance(f, f)


def test_loss_kind_helpers():
    assert LossKind("squared-tv").base is LossKind.TV
    assert [k.bound for k in LossKind] == [2.0, 4.0, 1.0, 1.0]
    assert_allclose(LossKind.SQUARED_TV.from_l1(np.array([0.0, 1.0, 2.0])), [0.0, 0.25, 1.0])


masses = st.integers(1, 12).flatmap(
    lambda k: st.tuples(*[st.lists(st.floats(0, 1), min_size=k, max_size=k).filter(lambda v: sum(v) > 1e-6)
                          for _ in range(3)]))


def _normalise(v):
    v = np.asarray(v, dtype=float)
    return v / v.sum()


@given(masses)
def test_event_sup_equals_half_l1(triple):
    f, g, _ = (_finite(_normalise(v)) for v in triple)
    assert abs(tv_events(f, g) - 0.5 * l1_distance(f, g)) <= 1e-12


@given(masses)
def test_bounds_symmetry_and_triangle(triple):
    f, g, h = (_finite(_normalise(v)) for v in triple)
    d = l1_distance
    assert 0.0 <= d(f, g) <= 2.0
    assert 0.0 <= tv_distance(f, g) <= 1.0
    assert abs(d(f, g) - d(g, f)) <= 1e-10
    assert d(f, h) <= d(f, g) + d(g, h) + 1e-10
    assert abs(tv_distance(f, g, method="events") - tv_distance(g, f, method="events")) <= 1e-10


@given(st.floats(-3, 3), st.floats(0.2, 3), st.floats(-3, 3), st.floats(0.2, 3), st.floats(-3, 3), st.floats(0.2, 3))
def test_continuous_symmetry_and_triangle(m1, v1, m2, v2, m3, v3):
    f, g, h = _normal(m1, v1), _normal(m2, v2), _normal(m3, v3)
    fg, gf = l1_distance(f, g), l1_distance(g, f)
    assert abs(fg - gf) <= 1e-10 + 2e-8
    assert l1_distance(f, h) <= fg + l1_distance(g, h) + 1e-10 + 6e-8
    assert 0.0 <= fg <= 2.0


@given(st.floats(0, 1), st.floats(0, 1), st.sampled_from(["l1", "tv"]))
def test_squared_loss_at_most_twice_the_loss(a, b, base):
    f, g = Bernoulli().truth(a), Bernoulli().truth(b)
    assert loss(f"squared-{base}", f, g) <= 2.0 * loss(base, f, g) + 1e-15
    assert loss(f"squared-{base}", f, g) == pytest.approx(loss(base, f, g) ** 2, abs=1e-15)
