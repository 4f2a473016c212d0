"""Closed-form conjugate posteriors and posterior predictive densities.

A conjugate posterior is represented by a prior object of the same kind with
updated hyperparameters (``Beta(1, 1)`` + data -> ``Beta(a', b')``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special, stats

from .errors import ConfigError
from .models import Bernoulli, Categorical, Density, ModelFamily, Normal, Poisson, upper_tail_point
from .priors import BetaPrior, DirichletPrior, GammaPrior, NormalPrior, PointMassPrior, PriorSpec


def _beta_bernoulli_update(model, prior, obs):
    k = int(np.sum(obs))
    return BetaPrior(prior.alpha + k, prior.beta + (len(obs) - k))


def _beta_bernoulli_ppd(model, post, x):
    x = np.asarray(x, dtype=float)
    total = post.alpha + post.beta
    return np.where(x == 1.0, post.alpha / total, post.beta / total)


def _normal_update(model: Normal, prior, obs):
    n = len(obs)
    s2 = model.sigma**2
    precision = 1.0 / prior.variance + n / s2
    # fsum is order independent, which keeps the update exactly exchangeable
    total = math.fsum(float(v) for v in obs)
    mean = (prior.mean / prior.variance + total / s2) / precision
    return NormalPrior(mean, 1.0 / precision)


def _normal_ppd(model: Normal, post, x):
    var = model.sigma**2 + post.variance
    z = np.asarray(x, dtype=float) - post.mean
    return np.exp(-0.5 * z * z / var) / math.sqrt(2 * math.pi * var)


def _normal_bounds(model: Normal, post):
    s = math.sqrt(model.sigma**2 + post.variance)
    return post.mean - 10 * s, post.mean + 10 * s


def _gamma_poisson_update(model, prior, obs):
    return GammaPrior(prior.shape + float(np.sum(obs)), prior.rate + len(obs))


def _gamma_poisson_ppd(model, post, x):
    # negative binomial with r = shape, success probability rate / (rate + 1)
    x = np.asarray(x, dtype=float)
    a, b = post.shape, post.rate
    logp = (special.gammaln(a + x) - special.gammaln(a) - special.gammaln(x + 1.0)
            + a * math.log(b / (b + 1.0)) - x * math.log1p(b))
    return np.exp(logp)


def _gamma_poisson_bounds(model, post):
    p = post.rate / (post.rate + 1.0)
    return 0.0, upper_tail_point(stats.nbinom(post.shape, p))


def _dirichlet_update(model: Categorical, prior, obs):
    return DirichletPrior(prior.alpha + model.counts(obs))


def _dirichlet_ppd(model, post, x):
    idx = np.asarray(x, dtype=np.int64) - 1
    return post.alpha[idx] / post.alpha.sum()


@dataclass(frozen=True)
class _Rule:
    update: Callable
    ppd: Callable
    bounds: Callable | None = None


_RULES: dict[tuple[type, type], _Rule] = {
    (Bernoulli, BetaPrior): _Rule(_beta_bernoulli_update, _beta_bernoulli_ppd),
    (Normal, NormalPrior): _Rule(_normal_update, _normal_ppd, _normal_bounds),
    (Poisson, GammaPrior): _Rule(_gamma_poisson_update, _gamma_poisson_ppd, _gamma_poisson_bounds),
    (Categorical, DirichletPrior): _Rule(_dirichlet_update, _dirichlet_ppd),
}


@dataclass(frozen=True)
class ConjugatePair:
    """A registered (model, prior) combination with closed-form updates.

    Any model paired with a :class:`PointMassPrior` counts as conjugate: the
    posterior is the prior itself and the predictive is ``p_theta0``.
    """

    model: ModelFamily
    prior: PriorSpec

    def __post_init__(self):
        if isinstance(self.prior, PointMassPrior):
            self.model.check_param(self.prior.theta0)
        elif (type(self.model), type(self.prior)) not in _RULES:
            raise ConfigError(
                f"no conjugate rule for model {self.model.name!r} with prior {self.prior.kind!r}"
            )
        elif isinstance(self.prior, DirichletPrior) and self.prior.dim != self.model.categories:
            raise ConfigError(
                f"Dirichlet prior has {self.prior.dim} coordinates but the model has "
                f"{self.model.categories} categories"
            )

    @property
    def _rule(self) -> _Rule:
        return _RULES[(type(self.model), type(self.prior))]

    def update(self, prior: PriorSpec, obs) -> PriorSpec:
        if isinstance(prior, PointMassPrior):
            return prior
        return self._rule.update(self.model, prior, np.asarray(obs))

    def ppd(self, posterior: PriorSpec, x) -> np.ndarray:
        if isinstance(posterior, PointMassPrior):
            return self.model.pdf(posterior.theta0, x)
        return self._rule.ppd(self.model, posterior, x)

    def predictive_bounds(self, posterior: PriorSpec) -> tuple[float, float]:
        if isinstance(posterior, PointMassPrior):
            return self.model.obs_bounds(self.model.as_nodes(posterior.theta0))
        rule = self._rule
        if rule.bounds is None:
            return self.model.obs_bounds(self.model.as_nodes(posterior.mean))
        return rule.bounds(self.model, posterior)


def is_conjugate(model: ModelFamily, prior: PriorSpec) -> bool:
    try:
        ConjugatePair(model, prior)
    except ConfigError:
        return False
    return True


def conjugate_posterior(pair: ConjugatePair, obs) -> PriorSpec:
    """Exact posterior given the sample ``obs``, as updated hyperparameters."""
    obs = pair.model.check_obs(obs) if len(obs) else np.asarray(obs, dtype=float)
    return pair.update(pair.prior, obs)


def conjugate_ppd(pair: ConjugatePair, posterior: PriorSpec, x):
    """Closed-form posterior predictive density at ``x`` (scalar in, float out)."""
    xs = pair.model.check_obs(x)
    vals = np.asarray(pair.ppd(posterior, xs), dtype=float)
    return float(vals[0]) if np.ndim(x) == 0 else vals


def conjugate_predictive(pair: ConjugatePair, posterior: PriorSpec) -> Density:
    """The posterior predictive as a :class:`Density` (for losses and plots)."""
    return Density(
        pdf=lambda x: pair.ppd(posterior, x),
        ref=pair.model.obs_measure,
        bounds=pair.predictive_bounds(posterior),
        provenance="conjugate-closed",
    )


def registered_pairs() -> list[tuple[str, str]]:
    pairs = [(m.name, p.kind) for m, p in _RULES]
    return pairs + [("*", PointMassPrior.kind)]
