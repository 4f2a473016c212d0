"""Priors on the parameter space.

Besides density and sampler, each prior exposes a *grid chart*: coordinates
``u`` (one per axis) in which its density factorises, with a per-axis log
density and a map back to parameter points. The grid engine
only ever talks to priors through that chart, which is how the Dirichlet prior
gets a product grid over the simplex (stick-breaking coordinates).
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from .errors import ConfigError, HyperparameterError
from .models import ParamAxis

# Upper-tail mass left out by the default Gamma grid truncation.
GAMMA_TAIL = 1e-16


def _positive(field: str, value) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise HyperparameterError(field, f"must be a number, got {value!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise HyperparameterError(field, f"must be strictly positive and finite, got {value!r}")
    return v


def _beta_logpdf(u, a, b):
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = special.xlogy(a - 1.0, u) + special.xlog1py(b - 1.0, -u) - special.betaln(a, b)
    return np.where((u < 0) | (u > 1), -np.inf, out)


class PriorSpec:
    """Base class for priors ``Q`` on ``Theta``."""

    kind: str = "prior"
    dim: int = 1

    def logpdf(self, thetas) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int | None = None):
        raise NotImplementedError

    def hyper(self) -> dict:
        return {}

    @property
    def mean(self):
        raise NotImplementedError

    @property
    def sd(self) -> float:
        raise NotImplementedError

    # --- grid chart -----------------------------------------------------------
    def axes(self, truncation=None) -> list[ParamAxis]:
        raise NotImplementedError

    def axis_logpdf(self, axis: int, u: np.ndarray) -> np.ndarray:
        return self.logpdf(u)

    def from_axes(self, coords: list[np.ndarray]) -> np.ndarray:
        return coords[0]

    def describe(self) -> dict:
        return {"kind": self.kind, **self.hyper()}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.hyper().items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other):
        return type(self) is type(other) and self.hyper() == other.hyper()

    def __hash__(self):
        return hash((type(self).__name__, repr(self.hyper())))


def _truncated_axis(prior: PriorSpec, lo_nat: float, hi_nat: float, truncation) -> ParamAxis:
    """Natural support intersected with ``truncation`` (default mean +- 10 sd)."""
    if truncation is None:
        m, s = float(prior.mean), float(prior.sd)
        truncation = (m - 10 * s, m + 10 * s)
    lo_t, hi_t = map(float, truncation)
    lo, hi = max(lo_nat, lo_t), min(hi_nat, hi_t)
    if not lo < hi:
        raise ConfigError(f"truncation {truncation} does not meet the parameter support [{lo_nat}, {hi_nat}]")
    return ParamAxis(lo, hi, natural_lo=lo == lo_nat, natural_hi=hi == hi_nat)


class BetaPrior(PriorSpec):
    kind = "beta"

    def __init__(self, alpha: float = 1.0, beta: float = 1.0):
        self.alpha = _positive("alpha", alpha)
        self.beta = _positive("beta", beta)

    def hyper(self):
        return {"alpha": self.alpha, "beta": self.beta}

    def logpdf(self, thetas):
        return _beta_logpdf(thetas, self.alpha, self.beta)

    def sample(self, rng, size=None):
        return rng.beta(self.alpha, self.beta, size)

    @property
    def mean(self):
        return self.alpha / (self.alpha + self.beta)

    @property
    def sd(self):
        a, b = self.alpha, self.beta
        return math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))

    def axes(self, truncation=None):
        if truncation is None:
            return [ParamAxis(0.0, 1.0)]
        return [_truncated_axis(self, 0.0, 1.0, truncation)]


class NormalPrior(PriorSpec):
    """Normal prior with mean ``mean`` and variance ``variance``."""

    kind = "normal"

    def __init__(self, mean: float = 0.0, variance: float = 1.0):
        try:
            self._mean = float(mean)
        except (TypeError, ValueError):
            raise HyperparameterError("mean", f"must be a number, got {mean!r}") from None
        if not math.isfinite(self._mean):
            raise HyperparameterError("mean", f"must be finite, got {mean!r}")
        self.variance = _positive("variance", variance)

    def hyper(self):
        return {"mean": self._mean, "variance": self.variance}

    def logpdf(self, thetas):
        t = np.asarray(thetas, dtype=float)
        return -0.5 * (t - self._mean) ** 2 / self.variance - 0.5 * math.log(2 * math.pi * self.variance)

    def sample(self, rng, size=None):
        return rng.normal(self._mean, math.sqrt(self.variance), size)

    @property
    def mean(self):
        return self._mean

    @property
    def sd(self):
        return math.sqrt(self.variance)

    def axes(self, truncation=None):
        return [_truncated_axis(self, -math.inf, math.inf, truncation)]


class GammaPrior(PriorSpec):
    """Gamma prior in shape/rate parametrisation."""

    kind = "gamma"

    def __init__(self, shape: float = 1.0, rate: float = 1.0):
        self.shape = _positive("shape", shape)
        self.rate = _positive("rate", rate)

    def hyper(self):
        return {"shape": self.shape, "rate": self.rate}

    def logpdf(self, thetas):
        t = np.asarray(thetas, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.shape * math.log(self.rate) - special.gammaln(self.shape)
                   + special.xlogy(self.shape - 1.0, t) - self.rate * t)
        return np.where(t < 0, -np.inf, out)

    def sample(self, rng, size=None):
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    @property
    def mean(self):
        return self.shape / self.rate

    @property
    def sd(self):
        return math.sqrt(self.shape) / self.rate

    def axes(self, truncation=None):
        if truncation is None:
            # exponential tails: mean + 10 sd can leave ~1e-7 of mass behind
            truncation = (0.0, float(stats.gamma.isf(GAMMA_TAIL, self.shape, scale=1.0 / self.rate)))
        return [_truncated_axis(self, 0.0, math.inf, truncation)]


class DirichletPrior(PriorSpec):
    """Dirichlet prior on the probability simplex.

    Grid chart: stick-breaking ``u_j ~ Beta(alpha_j, sum_{l>j} alpha_l)``,
    independent, with ``theta_j = u_j * prod_{l<j} (1 - u_l)``.
    """

    kind = "dirichlet"

    def __init__(self, alpha=(1.0, 1.0, 1.0)):
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        if alpha.ndim != 1 or len(alpha) < 2:
            raise HyperparameterError("alpha", "needs at least two concentration values")
        for i, a in enumerate(alpha):
            _positive(f"alpha[{i}]", a)
        self.alpha = alpha
        self.dim = len(alpha)

    def hyper(self):
        return {"alpha": [float(a) for a in self.alpha]}

    def logpdf(self, thetas):
        t = np.asarray(thetas, dtype=float).reshape(-1, self.dim)
        norm = special.gammaln(self.alpha.sum()) - special.gammaln(self.alpha).sum()
        with np.errstate(divide="ignore", invalid="ignore"):
            return norm + special.xlogy(self.alpha - 1.0, t).sum(axis=1)

    def sample(self, rng, size=None):
        return rng.dirichlet(self.alpha, size)

    @property
    def mean(self):
        return self.alpha / self.alpha.sum()

    def axes(self, truncation=None):
        if truncation is not None:
            raise ConfigError("the Dirichlet prior lives on a compact simplex; truncation does not apply")
        return [ParamAxis(0.0, 1.0) for _ in range(self.dim - 1)]

    def _stick(self, j):
        return self.alpha[j], self.alpha[j + 1:].sum()

    def axis_logpdf(self, axis, u):
        return _beta_logpdf(u, *self._stick(axis))

    def from_axes(self, coords):
        coords = [np.asarray(c, dtype=float) for c in coords]
        out = np.empty(coords[0].shape + (self.dim,))
        rest = np.ones_like(coords[0])
        for j, u in enumerate(coords):
            out[..., j] = rest * u
            rest = rest * (1.0 - u)
        out[..., -1] = rest
        return out.reshape(-1, self.dim)


class PointMassPrior(PriorSpec):
    """Degenerate prior concentrated at ``theta0`` (scalar or simplex vector)."""

    kind = "point-mass"

    def __init__(self, theta0):
        t = np.asarray(theta0, dtype=float)
        if not np.all(np.isfinite(t)):
            raise HyperparameterError("theta0", f"must be finite, got {theta0!r}")
        self.theta0 = t
        self.dim = 1 if t.ndim == 0 else len(t)

    def hyper(self):
        t = self.theta0
        return {"theta0": float(t) if t.ndim == 0 else [float(v) for v in t]}

    def sample(self, rng, size=None):
        if size is None:
            return self.theta0.copy()
        return np.broadcast_to(self.theta0, (size,) + self.theta0.shape).copy()

    @property
    def mean(self):
        return self.theta0

    @property
    def sd(self):
        return 0.0

    def logpdf(self, thetas):
        raise TypeError("a point-mass prior has no Lebesgue density")

    def axes(self, truncation=None):
        raise TypeError("a point-mass prior has no grid chart")


class CustomPrior(PriorSpec):
    """User-supplied 1-D prior density on a bounded interval ``[lo, hi]``.

    The density must integrate to one within ``tol``. Sampling uses a tabulated
    inverse CDF on ``table_size`` points.
    """

    kind = "custom-density"

    def __init__(self, pdf: Callable, lo: float, hi: float, *, name: str = "custom",
                 tol: float = 1e-8, table_size: int = 16385):
        lo, hi = float(lo), float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise HyperparameterError("support", f"needs finite lo < hi, got [{lo}, {hi}]")
        self.pdf, self.lo, self.hi, self.name = pdf, lo, hi, name
        mass, _ = integrate.quad(lambda t: float(pdf(t)), lo, hi, limit=200, epsabs=1e-12, epsrel=1e-12)
        if abs(mass - 1.0) > tol:
            raise HyperparameterError("density", f"integrates to {mass!r} over [{lo}, {hi}], not 1")
        grid = np.linspace(lo, hi, table_size)
        cdf = integrate.cumulative_trapezoid(np.asarray(pdf(grid), dtype=float), grid, initial=0.0)
        self._grid, self._cdf = grid, cdf / cdf[-1]
        self._mean = integrate.quad(lambda t: t * float(pdf(t)), lo, hi, limit=200)[0]
        second = integrate.quad(lambda t: t * t * float(pdf(t)), lo, hi, limit=200)[0]
        self._sd = math.sqrt(max(second - self._mean**2, 0.0))

    def hyper(self):
        return {"name": self.name, "lo": self.lo, "hi": self.hi}

    def logpdf(self, thetas):
        t = np.asarray(thetas, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.log(np.asarray(self.pdf(t), dtype=float))
        return np.where((t < self.lo) | (t > self.hi), -np.inf, out)

    def sample(self, rng, size=None):
        u = rng.random(size)
        return np.interp(u, self._cdf, self._grid)

    @property
    def mean(self):
        return self._mean

    @property
    def sd(self):
        return self._sd

    def axes(self, truncation=None):
        if truncation is None:
            return [ParamAxis(self.lo, self.hi)]
        return [_truncated_axis(self, self.lo, self.hi, truncation)]


PRIORS: dict[str, type[PriorSpec]] = {
    "beta": BetaPrior,
    "normal": NormalPrior,
    "gamma": GammaPrior,
    "dirichlet": DirichletPrior,
    "point-mass": PointMassPrior,
}


def make_prior(kind: str, **hyper) -> PriorSpec:
    """Build a registered prior from its kind and hyperparameters."""
    try:
        cls = PRIORS[kind]
    except KeyError:
        raise HyperparameterError("kind", f"unknown prior {kind!r}; known: {sorted(PRIORS)}") from None
    try:
        return cls(**hyper)
    except TypeError as exc:
        raise HyperparameterError("kind", f"bad hyperparameters for {kind}: {exc}") from None
