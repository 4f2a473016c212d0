"""Dominated parametric families and their reference measures.

Every family is vectorised over parameter nodes: ``logpdf_matrix(thetas, xs)``
returns an ``(N, M)`` array for ``N`` parameter nodes and ``M`` observations,
which is what the numerical posterior engine and the mixture predictive need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special, stats

from .errors import DomainError, HyperparameterError

# Mass allowed outside ``Density.bounds`` / ``obs_bounds``.
TAIL_MASS = 1e-17


@dataclass(frozen=True)
class RefMeasure:
    """Reference (dominating) measure on the observation space.

    ``kind`` is one of ``"counting"`` (finite support), ``"counting-naturals"``
    (counting measure on 0, 1, 2, ...) or ``"lebesgue"`` (on ``[lo, hi]``).
    """

    kind: str
    support: tuple = ()
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if self.kind == "counting":
            if not self.support:
                raise ValueError("counting support must be non-empty")
            if len(set(self.support)) != len(self.support):
                raise ValueError("counting support must be duplicate-free")
            if not all(math.isfinite(v) for v in self.support):
                raise ValueError("counting support must be finite values")
        elif self.kind == "lebesgue":
            if not self.lo < self.hi:
                raise ValueError(f"lebesgue interval needs lo < hi, got [{self.lo}, {self.hi}]")
        elif self.kind != "counting-naturals":
            raise ValueError(f"unknown reference measure kind {self.kind!r}")

    @classmethod
    def counting(cls, values) -> "RefMeasure":
        return cls("counting", support=tuple(values))

    @classmethod
    def naturals(cls) -> "RefMeasure":
        return cls("counting-naturals", lo=0.0)

    @classmethod
    def lebesgue(cls, lo: float = -math.inf, hi: float = math.inf) -> "RefMeasure":
        return cls("lebesgue", lo=float(lo), hi=float(hi))

    @property
    def is_discrete(self) -> bool:
        return self.kind != "lebesgue"

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "counting":
            return np.isin(x, np.asarray(self.support, dtype=float))
        if self.kind == "counting-naturals":
            return (x >= 0) & (x == np.floor(x)) & np.isfinite(x)
        return (x >= self.lo) & (x <= self.hi) & ~np.isnan(x)

    def points(self, hi: float | None = None) -> np.ndarray:
        """Atoms of a discrete measure; ``hi`` truncates the naturals."""
        if self.kind == "counting":
            return np.asarray(self.support, dtype=float)
        if self.kind == "counting-naturals":
            if hi is None:
                raise ValueError("the naturals need an upper truncation point")
            return np.arange(0, int(hi) + 1, dtype=float)
        raise ValueError("lebesgue measure has no atoms")


@dataclass(frozen=True)
class Density:
    """An evaluatable density with respect to ``ref``.

    ``bounds`` is an interval outside of which the density carries less than
    ``TAIL_MASS``; integrals and sums are taken over it.
    """

    pdf: Callable[[np.ndarray], np.ndarray]
    ref: RefMeasure
    bounds: tuple[float, float]
    provenance: str = "model"

    def __call__(self, x):
        return self.pdf(x)

    def total_mass(self) -> float:
        """Integral of the density over its reference measure."""
        lo, hi = self.bounds
        if self.ref.is_discrete:
            pts = self.ref.points(hi)
            pts = pts[(pts >= lo) & (pts <= hi)]
            return math.fsum(np.asarray(self.pdf(pts), dtype=float))
        from scipy import integrate

        val, _ = integrate.quad(lambda t: float(self.pdf(t)), lo, hi, limit=200,
                                epsabs=1e-12, epsrel=1e-12)
        return val


@dataclass(frozen=True)
class ParamAxis:
    """One coordinate of a (possibly truncated) parameter support."""

    lo: float
    hi: float
    natural_lo: bool = True
    natural_hi: bool = True


class ModelFamily:
    """Base class for a parametric family ``{p_theta}`` dominated by ``obs_measure``.

    Subclasses implement the vectorised kernels; the public module-level
    functions :func:`density` and :func:`sample_obs` add support checks.
    """

    name: str = "model"
    obs_measure: RefMeasure
    param_dim: int = 1
    param_lo: float = -math.inf
    param_hi: float = math.inf
    integer_obs: bool = False

    # --- parameter handling -------------------------------------------------
    def check_param(self, theta) -> np.ndarray:
        t = np.asarray(theta, dtype=float)
        if t.ndim != 0:
            raise DomainError(f"{self.name} expects a scalar parameter, got shape {t.shape}")
        if not (self.param_lo <= t <= self.param_hi):
            raise DomainError(
                f"theta[0]={float(t)!r} outside parameter support [{self.param_lo}, {self.param_hi}]"
            )
        return t

    def check_obs(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        bad = ~self.obs_measure.contains(x)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DomainError(f"observation[{i}]={x[i]!r} not in support of {self.name}")
        return x

    def as_nodes(self, thetas) -> np.ndarray:
        """Coerce parameter nodes to shape ``(N,)`` or ``(N, d)``."""
        t = np.asarray(thetas, dtype=float)
        return t.reshape(-1) if self.param_dim == 1 else t.reshape(-1, self.param_dim)

    # --- kernels to implement -----------------------------------------------
    def logpdf_matrix(self, thetas, xs) -> np.ndarray:
        raise NotImplementedError

    def pdf_matrix(self, thetas, xs) -> np.ndarray:
        return np.exp(self.logpdf_matrix(thetas, xs))

    def loglik(self, thetas, obs) -> np.ndarray:
        """Log-likelihood of the whole sample at each node, shape ``(N,)``."""
        thetas = self.as_nodes(thetas)
        obs = np.asarray(obs, dtype=float)
        out = np.zeros(len(thetas))
        for chunk in np.array_split(obs, max(1, len(obs) // 2048)):
            if len(chunk):
                out += self.logpdf_matrix(thetas, chunk).sum(axis=1)
        return out

    def sample(self, theta, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def obs_bounds(self, thetas) -> tuple[float, float]:
        """Interval carrying all but ``TAIL_MASS`` of every ``p_theta`` at the nodes."""
        if self.obs_measure.kind == "counting":
            pts = self.obs_measure.support
            return float(min(pts)), float(max(pts))
        return float(self.obs_measure.lo), float(self.obs_measure.hi)

    def event_prob(self, thetas, event) -> np.ndarray:
        """``P_theta(event)`` per node, for discrete events given as a predicate or set."""
        thetas = self.as_nodes(thetas)
        pts = self.obs_measure.points(self.obs_bounds(thetas)[1])
        mask = _event_mask(event, pts)
        if not mask.any():
            return np.zeros(len(thetas))
        return self.pdf_matrix(thetas, pts[mask]).sum(axis=1)

    def mle(self, obs) -> np.ndarray:
        raise NotImplementedError

    # --- conveniences --------------------------------------------------------
    def pdf(self, theta, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        vals = np.exp(self.logpdf_matrix(self.as_nodes(theta)[:1], x.reshape(-1)))[0]
        return vals.reshape(x.shape)

    def truth(self, theta) -> Density:
        """The sampling density ``p_theta`` as a :class:`Density`."""
        theta = np.asarray(theta, dtype=float)
        return Density(
            pdf=lambda x, _t=theta: self.pdf(_t, x),
            ref=self.obs_measure,
            bounds=self.obs_bounds(self.as_nodes(theta)),
            provenance="model",
        )

    def describe(self) -> dict:
        return {"name": self.name}


def upper_tail_point(dist) -> float:
    """Smallest integer ``k`` with ``P(X > k) < TAIL_MASS`` for a frozen discrete scipy law."""
    with np.errstate(over="ignore", divide="ignore"):
        # scipy also computes skewness here, which overflows for tiny rates
        mean, sd = dist.mean(), dist.std()
    ks = np.arange(0.0, math.ceil(mean + 40.0 * sd + 60.0) + 1.0)
    below = np.flatnonzero(dist.logsf(ks) < math.log(TAIL_MASS))
    if not len(below):
        raise DomainError(f"could not bound the upper tail of {dist.dist.name}")
    return float(ks[below[0]])


def _scalar(theta) -> float:
    return float(np.asarray(theta, dtype=float).reshape(-1)[0])


def _event_mask(event, pts: np.ndarray) -> np.ndarray:
    if isinstance(event, Interval):
        return (pts >= event.lo) & (pts <= event.hi)
    if callable(event):
        return np.array([bool(event(p)) for p in pts], dtype=bool)
    members = np.asarray(sorted(event), dtype=float)
    return np.isin(pts, members)


@dataclass(frozen=True)
class Interval:
    """Closed interval event ``{lo <= x <= hi}``."""

    lo: float = -math.inf
    hi: float = math.inf


class Bernoulli(ModelFamily):
    name = "bernoulli"
    param_lo, param_hi = 0.0, 1.0
    integer_obs = True

    def __init__(self):
        self.obs_measure = RefMeasure.counting((0, 1))

    def logpdf_matrix(self, thetas, xs):
        t = self.as_nodes(thetas)[:, None]
        x = np.asarray(xs, dtype=float)[None, :]
        return special.xlogy(x, t) + special.xlog1py(1.0 - x, -t)

    def pdf_matrix(self, thetas, xs):
        t = self.as_nodes(thetas)[:, None]
        x = np.asarray(xs, dtype=float)[None, :]
        return np.where(x == 1.0, t, 1.0 - t)

    def pdf(self, theta, x):
        # direct form keeps p(1) + p(0) free of exp/log round-off
        t = _scalar(theta)
        x = np.asarray(x, dtype=float)
        return np.where(x == 1.0, t, 1.0 - t)

    def loglik(self, thetas, obs):
        t = self.as_nodes(thetas)
        obs = np.asarray(obs, dtype=float)
        k = obs.sum()
        return special.xlogy(k, t) + special.xlog1py(len(obs) - k, -t)

    def sample(self, theta, rng, n):
        t = float(self.check_param(theta))
        return (rng.random(n) < t).astype(np.int64)

    def mle(self, obs):
        obs = np.asarray(obs, dtype=float)
        if len(obs) == 0:
            raise ValueError("MLE undefined for an empty sample")
        return np.asarray(obs.mean())


class Normal(ModelFamily):
    """Normal location family with known standard deviation ``sigma``."""

    name = "normal"

    def __init__(self, sigma: float = 1.0):
        if not (sigma > 0 and math.isfinite(sigma)):
            raise HyperparameterError("sigma", f"must be a positive finite number, got {sigma!r}")
        self.sigma = float(sigma)
        self.obs_measure = RefMeasure.lebesgue()

    def logpdf_matrix(self, thetas, xs):
        t = self.as_nodes(thetas)[:, None]
        x = np.asarray(xs, dtype=float)[None, :]
        z = (x - t) / self.sigma
        return -0.5 * z * z - math.log(self.sigma * math.sqrt(2 * math.pi))

    def pdf_matrix(self, thetas, xs):
        # same arithmetic as pdf(), so a one-node mixture reproduces p_theta bit for bit
        t = self.as_nodes(thetas)[:, None]
        z = (np.asarray(xs, dtype=float)[None, :] - t) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))

    def pdf(self, theta, x):
        z = (np.asarray(x, dtype=float) - _scalar(theta)) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))

    def loglik(self, thetas, obs):
        t = self.as_nodes(thetas)
        obs = np.asarray(obs, dtype=float)
        n = len(obs)
        if n == 0:
            return np.zeros(len(t))
        xbar = obs.mean()
        ss = float(np.sum((obs - xbar) ** 2))
        return (-0.5 * n * math.log(2 * math.pi * self.sigma**2)
                - (ss + n * (xbar - t) ** 2) / (2 * self.sigma**2))

    def sample(self, theta, rng, n):
        t = float(self.check_param(theta))
        return t + self.sigma * rng.standard_normal(n)

    def obs_bounds(self, thetas):
        t = self.as_nodes(thetas)
        return float(t.min() - 10 * self.sigma), float(t.max() + 10 * self.sigma)

    def cdf(self, thetas, x) -> np.ndarray:
        return special.ndtr((x - self.as_nodes(thetas)) / self.sigma)

    def event_prob(self, thetas, event):
        if not isinstance(event, Interval):
            raise TypeError("continuous events must be given as an Interval")
        return self.cdf(thetas, event.hi) - self.cdf(thetas, event.lo)

    def mle(self, obs):
        obs = np.asarray(obs, dtype=float)
        if len(obs) == 0:
            raise ValueError("MLE undefined for an empty sample")
        return np.asarray(obs.mean())

    def describe(self):
        return {"name": self.name, "sigma": self.sigma}


class Poisson(ModelFamily):
    name = "poisson"
    param_lo = 0.0
    integer_obs = True

    def __init__(self):
        self.obs_measure = RefMeasure.naturals()

    def logpdf_matrix(self, thetas, xs):
        t = self.as_nodes(thetas)[:, None]
        x = np.asarray(xs, dtype=float)[None, :]
        return special.xlogy(x, t) - t - special.gammaln(x + 1.0)

    def loglik(self, thetas, obs):
        t = self.as_nodes(thetas)
        obs = np.asarray(obs, dtype=float)
        return special.xlogy(obs.sum(), t) - len(obs) * t - special.gammaln(obs + 1.0).sum()

    def sample(self, theta, rng, n):
        t = float(self.check_param(theta))
        return rng.poisson(t, n).astype(np.int64)

    def obs_bounds(self, thetas):
        top = float(self.as_nodes(thetas).max())
        return 0.0, upper_tail_point(stats.poisson(top)) if top > 0 else 0.0

    def mle(self, obs):
        obs = np.asarray(obs, dtype=float)
        if len(obs) == 0:
            raise ValueError("MLE undefined for an empty sample")
        return np.asarray(obs.mean())


class Categorical(ModelFamily):
    """Categorical distribution on labels ``1..categories``; theta lives on the simplex."""

    name = "categorical"
    integer_obs = True

    def __init__(self, categories: int = 3):
        if int(categories) != categories or categories < 2:
            raise HyperparameterError("categories", f"must be an integer >= 2, got {categories!r}")
        self.categories = int(categories)
        self.param_dim = self.categories
        self.obs_measure = RefMeasure.counting(range(1, self.categories + 1))

    def check_param(self, theta):
        t = np.asarray(theta, dtype=float)
        if t.shape != (self.categories,):
            raise DomainError(f"categorical theta must have {self.categories} coordinates, got shape {t.shape}")
        for i, v in enumerate(t):
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"theta[{i}]={v!r} outside [0, 1]")
        if abs(t.sum() - 1.0) > 1e-9:
            raise DomainError(f"theta coordinates sum to {t.sum()!r}, not 1")
        return t

    def counts(self, obs) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.int64)
        return np.bincount(obs - 1, minlength=self.categories)[: self.categories]

    def logpdf_matrix(self, thetas, xs):
        t = self.as_nodes(thetas)
        idx = np.asarray(xs, dtype=np.int64) - 1
        with np.errstate(divide="ignore"):
            return np.log(t[:, idx])

    def pdf_matrix(self, thetas, xs):
        idx = np.asarray(xs, dtype=np.int64) - 1
        return self.as_nodes(thetas)[:, idx]

    def pdf(self, theta, x):
        t = np.asarray(theta, dtype=float)
        idx = np.asarray(x, dtype=np.int64) - 1
        return t[idx]

    def loglik(self, thetas, obs):
        t = self.as_nodes(thetas)
        return special.xlogy(self.counts(obs)[None, :], t).sum(axis=1)

    def sample(self, theta, rng, n):
        t = self.check_param(theta)
        return rng.choice(self.categories, size=n, p=t / t.sum()).astype(np.int64) + 1

    def mle(self, obs):
        if len(obs) == 0:
            raise ValueError("MLE undefined for an empty sample")
        return self.counts(obs) / len(obs)

    def describe(self):
        return {"name": self.name, "categories": self.categories}


MODELS: dict[str, type[ModelFamily]] = {
    "bernoulli": Bernoulli,
    "normal": Normal,
    "poisson": Poisson,
    "categorical": Categorical,
}


def make_model(name: str, **params) -> ModelFamily:
    """Instantiate a registered family by name, e.g. ``make_model("normal", sigma=2.0)``."""
    try:
        cls = MODELS[name]
    except KeyError:
        raise HyperparameterError("name", f"unknown model {name!r}; known: {sorted(MODELS)}") from None
    try:
        return cls(**params)
    except TypeError as exc:
        raise HyperparameterError("name", f"bad parameters for {name}: {exc}") from None


def density(model: ModelFamily, theta, x):
    """``p_theta(x)`` with support checks on both arguments."""
    theta = model.check_param(theta)
    xs = model.check_obs(x)
    vals = model.pdf(theta, xs)
    return float(vals[0]) if np.ndim(x) == 0 else vals


def sample_obs(model: ModelFamily, theta, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` i.i.d. draws from ``P_theta``. Draws are prefix-stable in ``n`` for a fixed rng state."""
    if n < 0:
        raise ValueError(f"sample size must be >= 0, got {n}")
    model.check_param(theta)
    return model.sample(theta, rng, n)
