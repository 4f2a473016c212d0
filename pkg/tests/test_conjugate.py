import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from oracle_values import BETA_BERNOULLI_PPD, DIRICHLET_PPD, GAMMA_POISSON_PPD, NORMAL_PPD
from ppd_lab.conjugate import (ConjugatePair, conjugate_posterior, conjugate_ppd, conjugate_predictive,
                               is_conjugate, registered_pairs)
from ppd_lab.errors import ConfigError
from ppd_lab.models import Bernoulli, Categorical, Normal, Poisson, density
from ppd_lab.priors import BetaPrior, DirichletPrior, GammaPrior, NormalPrior, PointMassPrior


def test_beta_bernoulli_update():
    pair = ConjugatePair(Bernoulli(), BetaPrior(1, 1))
    assert conjugate_posterior(pair, [1, 0, 1]) == BetaPrior(3, 2)
    pair = ConjugatePair(Bernoulli(), BetaPrior(2, 5))
    assert conjugate_posterior(pair, []) == BetaPrior(2, 5)


def test_normal_normal_update():
    pair = ConjugatePair(Normal(1.0), NormalPrior(0.0, 1.0))
    post = conjugate_posterior(pair, [2.0])
    assert post.mean == pytest.approx(1.0, abs=1e-15)
    assert post.variance == pytest.approx(0.5, abs=1e-15)


def test_laplace_rule():
    pair = ConjugatePair(Bernoulli(), BetaPrior(1, 1))
    assert conjugate_ppd(pair, conjugate_posterior(pair, [1, 1, 1]), 1) == pytest.approx(4 / 5, abs=1e-15)


def test_dirichlet_predictive():
    pair = ConjugatePair(Categorical(3), DirichletPrior([1, 1, 1]))
    post = conjugate_posterior(pair, [1, 1, 3])
    assert conjugate_ppd(pair, post, 1) == pytest.approx(3 / 6, abs=1e-15)


def test_unregistered_pair_is_a_config_error():
    with pytest.raises(ConfigError, match="no conjugate rule"):
        ConjugatePair(Poisson(), BetaPrior(1, 1))
    assert not is_conjugate(Normal(), GammaPrior(1, 1))
    with pytest.raises(ConfigError, match="categories"):
        ConjugatePair(Categorical(4), DirichletPrior([1, 1, 1]))
    assert ("bernoulli", "beta") in registered_pairs()


@pytest.mark.parametrize("model,theta0,xs", [
    (Bernoulli(), 0.3, [0, 1]),
    (Normal(1.5), -0.4, [-2.0, 0.1, 3.3]),
    (Poisson(), 2.2, [0, 1, 7]),
    (Categorical(3), [0.2, 0.5, 0.3], [1, 2, 3]),
])
def test_point_mass_collapse(model, theta0, xs):
    pair = ConjugatePair(model, PointMassPrior(theta0))
    post = conjugate_posterior(pair, model.sample(np.asarray(theta0), np.random.default_rng(0), 7))
    for x in xs:
        assert conjugate_ppd(pair, post, x) == density(model, theta0, x)


def test_closed_forms_match_quadrature_oracles():
    pair = ConjugatePair(Normal(1.5), NormalPrior(0.4, 2.0))
    for (x, *_), want in NORMAL_PPD.items():
        assert conjugate_ppd(pair, pair.prior, x) == pytest.approx(want, rel=1e-13)
    pair = ConjugatePair(Poisson(), GammaPrior(2.5, 1.5))
    for (x, *_), want in GAMMA_POISSON_PPD.items():
        assert conjugate_ppd(pair, pair.prior, x) == pytest.approx(want, rel=1e-13)
    ((a, b, k, n), want), = BETA_BERNOULLI_PPD.items()
    pair = ConjugatePair(Bernoulli(), BetaPrior(a, b))
    post = conjugate_posterior(pair, [1] * k + [0] * (n - k))
    assert conjugate_ppd(pair, post, 1) == pytest.approx(want, rel=1e-14)
    for (alpha, counts, j), want in DIRICHLET_PPD.items():
        pair = ConjugatePair(Categorical(3), DirichletPrior(alpha))
        obs = np.repeat([1, 2, 3], counts)
        assert conjugate_ppd(pair, conjugate_posterior(pair, obs), j + 1) == pytest.approx(want, rel=1e-14)


def _pairs():
    return st.sampled_from([
        (ConjugatePair(Bernoulli(), BetaPrior(0.7, 2.0)), lambda d: d.integers(0, 2, 30)),
        (ConjugatePair(Normal(0.8), NormalPrior(1.0, 3.0)), lambda d: d.normal(0.3, 1.0, 30)),
        (ConjugatePair(Poisson(), GammaPrior(1.5, 0.5)), lambda d: d.poisson(3.0, 30)),
        (ConjugatePair(Categorical(3), DirichletPrior([0.5, 1.0, 2.0])), lambda d: d.integers(1, 4, 30)),
    ])


@given(_pairs(), st.integers(0, 2**32 - 1), st.permutations(range(30)))
def test_update_is_exchangeable(pair_and_data, seed, perm):
    pair, draw = pair_and_data
    obs = draw(np.random.default_rng(seed)).astype(float)
    a = conjugate_posterior(pair, obs)
    b = conjugate_posterior(pair, obs[list(perm)])
    assert a.hyper() == b.hyper()


@given(_pairs(), st.integers(0, 2**32 - 1), st.integers(0, 30))
def test_predictive_normalised(pair_and_data, seed, n):
    pair, draw = pair_and_data
    obs = draw(np.random.default_rng(seed))[:n]
    pred = conjugate_predictive(pair, conjugate_posterior(pair, obs))
    assert abs(pred.total_mass() - 1.0) <= 1e-8


def test_predictive_density_provenance():
    pair = ConjugatePair(Normal(), NormalPrior(0.0, 1.0))
    pred = conjugate_predictive(pair, pair.prior)
    assert pred.provenance == "conjugate-closed"
    assert_allclose(pred(np.array([0.0])), [1 / np.sqrt(4 * np.pi)])
