"""Numerical posteriors and the posterior predictive density.

Two representations of the posterior, both a finite set of weighted nodes:

* ``grid-quadrature``: a tensor grid in the prior's chart. Bounded axes use a
  trapezoid rule after a double-exponential (tanh-sinh) change of variable,
  which stays accurate when the prior density is singular at a support edge;
  truncated unbounded axes use the plain trapezoid rule on a uniform grid.
* ``importance-sampling``: prior draws reweighted by the likelihood.

Weights are formed in log space and normalised with log-sum-exp, so samples of
size 10^4 or more do not underflow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ConfigError, DegeneratePosteriorError, NumericalError
from .models import Density, ModelFamily, ParamAxis
from .priors import PointMassPrior, PriorSpec

# Half-width of the double-exponential parameter interval. At t = 3 the end
# nodes sit about 2e-14 from the support edge and remain distinct doubles.
DE_HALF_WIDTH = 3.0
ESS_WARN = 10.0
PRUNE_MASS = 1e-16

PredictiveDensity = Density


@dataclass(frozen=True)
class WeightedPosterior:
    """Weighted node representation of a posterior distribution."""

    nodes: np.ndarray
    weights: np.ndarray
    method: str
    ess: float
    warning: str | None = None
    grid_axes: tuple = field(default=(), repr=False)

    def __post_init__(self):
        w = self.weights
        if w.ndim != 1 or len(w) != len(self.nodes):
            raise ValueError("weights must be a vector matching the nodes")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and non-negative")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {math.fsum(w)!r}, not 1")

    @property
    def unreliable(self) -> bool:
        return self.warning is not None

    def _collapsed(self):
        """Nodes that matter for evaluation; identical nodes fold into one of weight 1.

        Nodes whose weights sum to at most ``PRUNE_MASS`` are dropped, which moves
        any predictive probability by at most that amount.
        """
        nodes = self.nodes
        if len(nodes) > 1 and np.all(nodes == nodes[0]):
            return nodes[:1], np.ones(1)
        w = self.weights
        # drop the lightest nodes while their combined weight stays <= PRUNE_MASS
        order = np.argsort(w)
        light = order[np.cumsum(w[order]) <= PRUNE_MASS]
        keep = w > 0
        keep[light] = False
        return nodes[keep], w[keep]

    def mean(self) -> np.ndarray:
        nodes, w = self._collapsed()
        if len(w) == 1:
            return np.array(nodes[0], dtype=float)
        return np.tensordot(w, nodes, axes=1)


def _axis_rule(axis: ParamAxis, m: int):
    """Nodes and log quadrature weights (including the Jacobian) on one axis."""
    lo, hi = axis.lo, axis.hi
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigError(f"grid axis [{lo}, {hi}] is unbounded; give a truncation")
    width = hi - lo
    if axis.natural_lo or axis.natural_hi:
        t = np.linspace(-DE_HALF_WIDTH, DE_HALF_WIDTH, m)
        h = t[1] - t[0]
        s = np.pi * np.sinh(t)
        nodes = lo + width * special.expit(s)
        log_w = (np.log(h * width) + np.log(np.pi * np.cosh(t))
                 + special.log_expit(s) + special.log_expit(-s))
    else:
        nodes = np.linspace(lo, hi, m)
        log_w = np.full(m, math.log(width / (m - 1)))
    log_w[[0, -1]] += math.log(0.5)
    if not np.all(np.diff(nodes) > 0):
        raise NumericalError(f"grid nodes on [{lo}, {hi}] are not strictly increasing at resolution {m}")
    return nodes, log_w


def _normalise(log_w: np.ndarray, what: str) -> np.ndarray:
    if np.any(np.isnan(log_w)) or np.any(np.isposinf(log_w)):
        raise NumericalError(f"{what}: log weights contain nan or +inf")
    lse = special.logsumexp(log_w)
    if not np.isfinite(lse):
        raise DegeneratePosteriorError(f"{what}: every node has zero posterior weight")
    w = np.exp(log_w - lse)
    return w / w.sum()


def _point_mass_posterior(model, prior: PointMassPrior, obs, method, copies=1):
    ll = model.loglik(model.as_nodes(prior.theta0), obs)
    if not np.isfinite(ll[0]):
        raise DegeneratePosteriorError("the sample has zero likelihood at the point-mass location")
    nodes = model.as_nodes(np.broadcast_to(prior.theta0, (copies,) + prior.theta0.shape))
    return WeightedPosterior(nodes, np.full(copies, 1.0 / copies), method, float(copies))


def grid_posterior(model: ModelFamily, prior: PriorSpec, obs, resolution: int = 4096,
                   truncation=None) -> WeightedPosterior:
    """Posterior on a quadrature grid over the prior's support.

    Parameters
    ----------
    resolution
        Total number of grid nodes. A ``d``-dimensional chart gets
        ``ceil(resolution ** (1/d))`` nodes per axis; at most two axes.
    truncation
        ``(lo, hi)`` for 1-D priors with unbounded support. Defaults to the
        prior mean +- 10 prior standard deviations.
    """
    if resolution < 16:
        raise ValueError(f"resolution must be >= 16, got {resolution}")
    obs = np.asarray(obs)
    if isinstance(prior, PointMassPrior):
        return _point_mass_posterior(model, prior, obs, "grid-quadrature")

    axes = prior.axes(truncation)
    d = len(axes)
    if d > 2:
        raise ConfigError(f"grid quadrature supports at most 2 chart axes, this prior needs {d}")
    per_axis = resolution if d == 1 else math.ceil(resolution ** (1.0 / d) - 1e-9)
    rules = [_axis_rule(ax, per_axis) for ax in axes]

    log_w = np.zeros([per_axis] * d)
    for j, (u, lw) in enumerate(rules):
        with np.errstate(divide="ignore", invalid="ignore"):
            term = lw + prior.axis_logpdf(j, u)
        shape = [1] * d
        shape[j] = per_axis
        log_w = log_w + term.reshape(shape)
    coords = np.meshgrid(*[u for u, _ in rules], indexing="ij")
    nodes = prior.from_axes([c.reshape(-1) for c in coords])
    log_w = log_w.reshape(-1)
    if len(obs):
        with np.errstate(divide="ignore", invalid="ignore"):
            log_w = log_w + model.loglik(nodes, obs)
    w = _normalise(log_w, "grid posterior")
    return WeightedPosterior(nodes, w, "grid-quadrature", float(1.0 / np.sum(w * w)),
                             grid_axes=tuple(u for u, _ in rules))


def importance_posterior(model: ModelFamily, prior: PriorSpec, obs, draws: int = 4096,
                         rng: np.random.Generator | None = None) -> WeightedPosterior:
    """Self-normalised importance sampling with the prior as proposal.

    ``ess`` is ``1 / sum(w_i^2)``. When it falls below 10 the posterior is
    returned with ``warning`` set rather than raising.
    """
    if draws < 100:
        raise ValueError(f"draws must be >= 100, got {draws}")
    if rng is None:
        rng = np.random.default_rng()
    obs = np.asarray(obs)
    if isinstance(prior, PointMassPrior):
        return _point_mass_posterior(model, prior, obs, "importance-sampling", copies=draws)
    nodes = model.as_nodes(prior.sample(rng, draws))
    if len(obs):
        with np.errstate(divide="ignore", invalid="ignore"):
            log_w = model.loglik(nodes, obs)
    else:
        log_w = np.zeros(draws)
    w = _normalise(log_w, "importance posterior")
    ess = float(1.0 / np.sum(w * w))
    warning = None
    if ess < ESS_WARN:
        warning = f"effective sample size {ess:.2f} below {ESS_WARN:g}"
        warnings.warn(warning, RuntimeWarning, stacklevel=2)
    return WeightedPosterior(nodes, w, "importance-sampling", ess, warning)


def ppd_eval(posterior: WeightedPosterior, model: ModelFamily, x):
    """Posterior predictive density ``sum_i w_i p_{theta_i}(x)``."""
    nodes, w = posterior._collapsed()
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(len(xs))
    step = max(1, 2**22 // max(len(w), 1))
    for start in range(0, len(xs), step):
        chunk = xs[start:start + step]
        out[start:start + step] = w @ model.pdf_matrix(nodes, chunk)
    return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))


def ppd_event_prob(posterior: WeightedPosterior, model: ModelFamily, event) -> float:
    """Posterior predictive probability of ``event``.

    ``event`` is an :class:`~ppd_lab.models.Interval`. Discrete models also
    accept a predicate or a set of observation values.
    """
    nodes, w = posterior._collapsed()
    p = float(w @ model.event_prob(nodes, event))
    return min(max(p, 0.0), 1.0)


def predictive_density(posterior: WeightedPosterior, model: ModelFamily) -> Density:
    nodes, _ = posterior._collapsed()
    return Density(
        pdf=lambda x: ppd_eval(posterior, model, x),
        ref=model.obs_measure,
        bounds=model.obs_bounds(nodes),
        provenance="weighted-posterior",
    )
