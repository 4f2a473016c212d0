import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from ppd_lab.errors import HyperparameterError
from ppd_lab.priors import (BetaPrior, CustomPrior, DirichletPrior, GammaPrior, NormalPrior,
                            PointMassPrior, make_prior)


@pytest.mark.parametrize("build,field", [
    (lambda: BetaPrior(-1.0, 1.0), "alpha"),
    (lambda: BetaPrior(1.0, 0.0), "beta"),
    (lambda: NormalPrior(0.0, 0.0), "variance"),
    (lambda: GammaPrior(0.0, 1.0), "shape"),
    (lambda: GammaPrior(1.0, -2.0), "rate"),
    (lambda: DirichletPrior([1.0, -0.5, 2.0]), "alpha"),
    (lambda: PointMassPrior(float("nan")), "theta0"),
])
def test_bad_hyperparameters_name_their_field(build, field):
    with pytest.raises(HyperparameterError) as info:
        build()
    assert info.value.field.startswith(field)


def test_logpdf_matches_scipy():
    t = np.linspace(0.01, 0.99, 7)
    assert_allclose(BetaPrior(2.5, 0.7).logpdf(t), stats.beta(2.5, 0.7).logpdf(t), rtol=1e-13)
    x = np.linspace(-3, 3, 7)
    assert_allclose(NormalPrior(0.5, 2.0).logpdf(x), stats.norm(0.5, np.sqrt(2.0)).logpdf(x), rtol=1e-13)
    g = np.linspace(0.1, 9, 7)
    assert_allclose(GammaPrior(3.0, 2.0).logpdf(g), stats.gamma(3.0, scale=0.5).logpdf(g), rtol=1e-13)
    p = np.array([[0.2, 0.3, 0.5], [0.6, 0.3, 0.1]])
    want = [stats.dirichlet([1.5, 2.0, 0.7]).logpdf(row) for row in p]
    assert_allclose(DirichletPrior([1.5, 2.0, 0.7]).logpdf(p), want, rtol=1e-13)


def test_sampling_moments(rng):
    for prior in (BetaPrior(2.0, 5.0), NormalPrior(-1.0, 4.0), GammaPrior(3.0, 0.5)):
        draws = prior.sample(rng, 40_000)
        se = prior.sd / np.sqrt(len(draws))
        assert abs(draws.mean() - prior.mean) < 5 * se
    d = DirichletPrior([1.0, 2.0, 3.0]).sample(rng, 20_000)
    assert_allclose(d.sum(axis=1), 1.0, atol=1e-12)
    assert_allclose(d.mean(axis=0), [1 / 6, 2 / 6, 3 / 6], atol=0.01)


def test_point_mass_sampling_is_constant(rng):
    p = PointMassPrior(0.25)
    assert np.all(p.sample(rng, 10) == 0.25)
    assert p.sample(rng) == 0.25


def test_custom_prior_checks_normalisation():
    tri = CustomPrior(lambda t: 2.0 * np.asarray(t), 0.0, 1.0, name="triangle")
    assert tri.mean == pytest.approx(2 / 3, abs=1e-10)
    with pytest.raises(HyperparameterError, match="integrates to"):
        CustomPrior(lambda t: np.ones_like(np.asarray(t, dtype=float)), 0.0, 2.0)


def test_custom_prior_sampling_follows_its_cdf():
    tri = CustomPrior(lambda t: 2.0 * np.asarray(t), 0.0, 1.0)
    draws = tri.sample(np.random.default_rng(4), 20_000)
    # CDF is t^2
    assert stats.kstest(draws, lambda t: np.clip(t, 0, 1) ** 2).pvalue > 1e-3


def test_make_prior_registry():
    assert make_prior("beta", alpha=2.0, beta=3.0) == BetaPrior(2.0, 3.0)
    with pytest.raises(HyperparameterError, match="unknown prior"):
        make_prior("cauchy")


def test_default_gamma_truncation_keeps_nearly_all_mass():
    prior = GammaPrior(0.7, 2.0)
    (axis,) = prior.axes()
    assert axis.lo == 0.0 and axis.natural_lo
    assert stats.gamma(0.7, scale=0.5).sf(axis.hi) <= 1.1e-16
