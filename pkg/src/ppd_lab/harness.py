"""Monte Carlo experiments on the posterior predictive density.

* Bayes risk of the predictive under the joint law of (theta, sample), and
  risk curves over increasing sample sizes with common random numbers.
* Consistency traces: one data stream from a fixed theta, predictive
  evaluated at probe points as the stream grows.
* The one-step tower identity satisfied by the predictive sequence.
* The bounded-loss squaring inequality ``E[X^2] <= 2 E|X|`` for ``|X| <= 2``.

Replication ``r`` of a :class:`JointSampler` always draws from the Philox
stream keyed by ``(base_seed, r)``, so results do not depend on evaluation order.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .conjugate import ConjugatePair, conjugate_posterior, conjugate_predictive
from .errors import (ConfigError, NumericalError, PPDLabError, UnreliablePosteriorError,
                     UnsupportedCheckError)
from .losses import LossKind, l1_distance, tv_events
from .models import (Bernoulli, Categorical, Density, ModelFamily, Normal, Poisson, RefMeasure)
from .posterior import grid_posterior, importance_posterior, predictive_density
from .priors import BetaPrior, DirichletPrior, GammaPrior, NormalPrior, PointMassPrior, PriorSpec

log = logging.getLogger(__name__)

ENGINES = ("conjugate", "grid", "importance", "numerical")
ABORT_FRACTION = 0.01


# --------------------------------------------------------------------------- engines

def build_predictive(model: ModelFamily, prior: PriorSpec, obs, engine: str = "conjugate", *,
                     rng: np.random.Generator | None = None, resolution: int = 4096,
                     draws: int = 4096, truncation=None) -> Density:
    """Posterior predictive density given ``obs`` from the chosen engine.

    ``engine="numerical"`` picks :func:`numerical_engine` for the prior.

    The importance engine raises :class:`UnreliablePosteriorError` when its
    effective sample size collapses, so that callers can count the failure.
    """
    if engine == "numerical":
        engine = numerical_engine(prior)
    if engine == "conjugate":
        pair = ConjugatePair(model, prior)
        return conjugate_predictive(pair, conjugate_posterior(pair, obs))
    if engine == "grid":
        return predictive_density(grid_posterior(model, prior, obs, resolution, truncation), model)
    if engine == "importance":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            post = importance_posterior(model, prior, obs, draws, rng)
        if post.unreliable:
            raise UnreliablePosteriorError(post.warning)
        return predictive_density(post, model)
    raise ConfigError(f"unknown engine {engine!r}; expected one of {ENGINES}")


def numerical_engine(prior: PriorSpec) -> str:
    """Default numerical representation: a grid for scalar parameters,
    importance sampling on the simplex."""
    return "importance" if isinstance(prior, DirichletPrior) else "grid"


# --------------------------------------------------------------------------- sampling

@dataclass(frozen=True)
class JointSampler:
    """Draws ``(theta, sample)`` pairs from the joint law of parameter and data."""

    model: ModelFamily
    prior: PriorSpec
    base_seed: int = 0

    def rng(self, replication: int, stream: int = 0) -> np.random.Generator:
        seq = np.random.SeedSequence(self.base_seed, spawn_key=(replication, stream))
        return np.random.Generator(np.random.Philox(seq))

    def draw(self, replication: int, n: int):
        """``theta ~ Q`` then ``n`` observations; the sample is a prefix of any longer draw."""
        rng = self.rng(replication)
        theta = self.prior.sample(rng)
        return theta, self.model.sample(theta, rng, n)


@dataclass(frozen=True)
class RiskEstimate:
    n: int
    loss_kind: LossKind
    mean: float
    std_err: float
    replications: int


@dataclass(frozen=True)
class RiskCurve:
    """Risk estimates over increasing ``n`` for one loss and engine.

    ``losses`` keeps the per-replication values (rows: completed replications,
    columns: sample sizes) for paired comparisons between curves.
    """

    points: tuple[RiskEstimate, ...]
    model: str
    prior: str
    engine: str
    loss_kind: LossKind
    base_seed: int
    losses: np.ndarray = field(repr=False)
    aborted: int = 0

    @property
    def ns(self) -> tuple[int, ...]:
        return tuple(p.n for p in self.points)

    @property
    def means(self) -> np.ndarray:
        return np.array([p.mean for p in self.points])

    @property
    def std_errs(self) -> np.ndarray:
        return np.array([p.std_err for p in self.points])


def _check_ns(ns) -> tuple[int, ...]:
    ns = tuple(int(n) for n in ns)
    if not ns:
        raise ConfigError("ns must be non-empty")
    if ns[0] < 0:
        raise ConfigError("sample sizes must be >= 0")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError("ns must be strictly increasing")
    return ns


def _estimates(losses: np.ndarray, ns, kind: LossKind) -> tuple[RiskEstimate, ...]:
    reps = losses.shape[0]
    mean = losses.mean(axis=0)
    se = losses.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.zeros(len(ns))
    return tuple(RiskEstimate(n, kind, float(m), float(s), reps) for n, m, s in zip(ns, mean, se))


def _replicate(sampler: JointSampler, ns, replications: int, evaluate) -> tuple[np.ndarray, int]:
    """Run ``evaluate(r, theta, stream)`` -> row of L1 values, one row per replication."""
    if replications < 30:
        raise ConfigError(f"replications must be >= 30, got {replications}")
    rows = np.full((replications, len(ns)), np.nan)
    failures = []
    for r in range(replications):
        theta, stream = sampler.draw(r, ns[-1])
        try:
            rows[r] = evaluate(r, theta, stream)
        except PPDLabError as exc:
            failures.append((r, exc))
            log.debug("replication %d (seed %d) aborted: %s", r, sampler.base_seed, exc)
    if len(failures) > ABORT_FRACTION * replications:
        r, exc = failures[0]
        raise NumericalError(
            f"{len(failures)} of {replications} replications aborted (base_seed={sampler.base_seed}); "
            f"first failure at replication {r}: {exc}"
        )
    return rows[~np.isnan(rows).any(axis=1)], len(failures)


def _curves_from_l1(sampler, ns, l1, aborted, kinds, engine) -> dict[LossKind, RiskCurve]:
    out = {}
    for kind in kinds:
        kind = LossKind(kind)
        losses = np.asarray(kind.from_l1(l1), dtype=float)
        out[kind] = RiskCurve(
            points=_estimates(losses, ns, kind),
            model=sampler.model.name,
            prior=sampler.prior.kind,
            engine=engine,
            loss_kind=kind,
            base_seed=sampler.base_seed,
            losses=losses,
            aborted=aborted,
        )
    return out


def risk_curves(sampler: JointSampler, ns, loss_kinds=tuple(LossKind), engine: str = "conjugate",
                replications: int = 1000, **engine_opts) -> dict[LossKind, RiskCurve]:
    """Risk curves for several losses from one set of simulated L1 distances.

    Replication ``r`` keeps its theta and grows a single sample stream, so
    every point of every curve is computed on shared random numbers.
    """
    ns = _check_ns(ns)
    if engine not in ENGINES:
        raise ConfigError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    model, prior = sampler.model, sampler.prior

    def evaluate(r, theta, stream):
        truth = model.truth(theta)
        row = []
        for n in ns:
            ppd = build_predictive(model, prior, stream[:n], engine, rng=sampler.rng(r, 1), **engine_opts)
            row.append(l1_distance(ppd, truth))
        return row

    l1, aborted = _replicate(sampler, ns, replications, evaluate)
    return _curves_from_l1(sampler, ns, l1, aborted, loss_kinds, engine)


def risk_curve(sampler: JointSampler, ns, loss_kind=LossKind.L1, engine: str = "conjugate",
               replications: int = 1000, **engine_opts) -> RiskCurve:
    kind = LossKind(loss_kind)
    return risk_curves(sampler, ns, (kind,), engine, replications, **engine_opts)[kind]


def bayes_risk(sampler: JointSampler, n: int, loss_kind=LossKind.L1, engine: str = "conjugate",
               replications: int = 1000, **engine_opts) -> RiskEstimate:
    """Monte Carlo Bayes risk ``E loss(ppd_n, p_theta)`` with its standard error."""
    return risk_curve(sampler, [n], loss_kind, engine, replications, **engine_opts).points[0]


def plugin_risk_curve(sampler: JointSampler, ns, loss_kind=LossKind.L1,
                      replications: int = 1000) -> RiskCurve:
    """Risk of the plug-in estimator ``p_{theta_hat}`` (maximum likelihood), on the
    same replications as :func:`risk_curve`."""
    ns = _check_ns(ns)
    if ns[0] < 1:
        raise ConfigError("the plug-in MLE needs n >= 1")
    model = sampler.model

    def evaluate(r, theta, stream):
        truth = model.truth(theta)
        return [l1_distance(model.truth(model.mle(stream[:n])), truth) for n in ns]

    l1, aborted = _replicate(sampler, ns, replications, evaluate)
    return _curves_from_l1(sampler, ns, l1, aborted, (loss_kind,), "plugin-mle")[LossKind(loss_kind)]


# --------------------------------------------------------------------------- exact oracle

def _mean_abs_dev_beta(c: float, a: float, b: float) -> float:
    """``E|c - theta|`` for ``theta ~ Beta(a, b)``."""
    below = special.betainc(a, b, c)
    below_first = special.betainc(a + 1.0, b, c)
    m = a / (a + b)
    return c * (2.0 * below - 1.0) + m * (1.0 - 2.0 * below_first)


def bernoulli_risk_exact(n: int, loss_kind=LossKind.L1, alpha: float = 1.0, beta: float = 1.0) -> float:
    """Exact Bayes risk of the Beta-Bernoulli predictive as a finite sum over successes.

    With ``k`` successes the predictive puts ``(alpha + k) / (alpha + beta + n)`` on 1
    and the L1 distance to ``p_theta`` is twice its gap to ``theta``; ``theta``
    given ``k`` is ``Beta(alpha + k, beta + n - k)`` and ``k`` is beta-binomial.
    """
    kind = LossKind(loss_kind)
    ks = np.arange(n + 1)
    weights = stats.betabinom.pmf(ks, n, alpha, beta)
    a_post, b_post = alpha + ks, beta + n - ks
    if kind.squared:
        per_k = 4.0 * a_post * b_post / ((a_post + b_post) ** 2 * (a_post + b_post + 1.0))
    else:
        p_hat = a_post / (a_post + b_post)
        per_k = np.array([2.0 * _mean_abs_dev_beta(c, a, b) for c, a, b in zip(p_hat, a_post, b_post)])
    risk = math.fsum(weights * per_k)
    if kind.base is LossKind.TV:
        risk *= 0.25 if kind.squared else 0.5
    return risk


# --------------------------------------------------------------------------- consistency

@dataclass(frozen=True)
class ConsistencyTrace:
    """Predictive values ``values[i, j]`` at sample size ``ns[i]`` and probe ``probes[j]``."""

    theta_true: np.ndarray
    probes: np.ndarray
    ns: tuple[int, ...]
    values: np.ndarray
    truth: np.ndarray

    @property
    def abs_errors(self) -> np.ndarray:
        return np.abs(self.values - self.truth[None, :])

    @property
    def max_errors(self) -> np.ndarray:
        """Worst probe error at each sample size."""
        return self.abs_errors.max(axis=1)


def consistency_stream(model: ModelFamily, prior: PriorSpec, theta_true, probes, ns,
                       engine: str = "conjugate", rng: np.random.Generator | None = None,
                       **engine_opts) -> ConsistencyTrace:
    """Follow one stream ``x_1, x_2, ... ~ p_theta_true`` and evaluate the
    predictive at each probe whenever the stream reaches a size in ``ns``."""
    ns = _check_ns(ns)
    theta_true = model.check_param(theta_true)
    probes = model.check_obs(probes)
    rng = np.random.default_rng() if rng is None else rng
    truth = np.asarray(model.pdf(theta_true, probes), dtype=float)
    values = np.empty((len(ns), len(probes)))
    chunks, have = [], 0
    for i, n in enumerate(ns):
        chunks.append(model.sample(theta_true, rng, n - have))
        have = n
        stream = np.concatenate(chunks)
        try:
            ppd = build_predictive(model, prior, stream, engine, rng=rng, **engine_opts)
            values[i] = ppd(probes)
        except PPDLabError as exc:
            raise type(exc)(f"engine {engine!r} failed at n={n}: {exc}") from exc
    return ConsistencyTrace(np.asarray(theta_true), probes, ns, values, truth)


# --------------------------------------------------------------------------- martingale

def _next_outcomes(pair: ConjugatePair, posterior) -> np.ndarray:
    measure = pair.model.obs_measure
    if measure.kind == "counting":
        return measure.points()
    return measure.points(pair.predictive_bounds(posterior)[1])


def martingale_check(pair: ConjugatePair, obs, probe) -> float:
    """Residual of the one-step tower identity for the predictive sequence:

    ``| sum_x ppd(x | obs) * ppd(probe | obs + [x]) - ppd(probe | obs) |``,

    evaluated as ``| sum_x ppd(x | obs) * (ppd(probe | obs + [x]) - ppd(probe | obs)) |``.

    Needs a discrete observation space; on the naturals the sum runs to the
    predictive's ``TAIL_MASS`` bound.
    """
    model = pair.model
    if not model.obs_measure.is_discrete:
        raise UnsupportedCheckError(f"tower check needs a discrete observation space, {model.name} is continuous")
    obs = np.asarray(obs, dtype=float)
    probe = model.check_obs(probe)
    post = conjugate_posterior(pair, obs)
    outcomes = _next_outcomes(pair, post)
    now = float(pair.ppd(post, probe)[0])
    p_next = np.asarray(pair.ppd(post, outcomes), dtype=float)
    after = np.array([pair.ppd(conjugate_posterior(pair, np.append(obs, x)), probe)[0] for x in outcomes])
    # martingale-difference form; equal to sum(p_next * after) - now since p_next sums to one
    return abs(math.fsum(p_next * (after - now)))


# --------------------------------------------------------------------------- bounded squares

@dataclass(frozen=True)
class BoundedSquareReport:
    ns: tuple[int, ...]
    max_loss: np.ndarray
    mean_loss: np.ndarray
    mean_squared: np.ndarray
    max_violation: float
    bound: float = 2.0

    @property
    def passed(self) -> bool:
        return self.max_violation <= 1e-12


def bounded_square_check(curve: RiskCurve, curve_sq: RiskCurve, bound: float = 2.0) -> BoundedSquareReport:
    """Check ``|X| <= bound`` per replication and ``mean(X^2) <= bound * mean(|X|)``.

    The two curves must come from the same replications (same seed, engine,
    sample sizes), with ``curve_sq`` the squared version of ``curve``.
    """
    problems = []
    if curve.ns != curve_sq.ns:
        problems.append(f"sample sizes differ: {curve.ns} vs {curve_sq.ns}")
    if curve.base_seed != curve_sq.base_seed:
        problems.append("curves were simulated from different base seeds")
    if curve.engine != curve_sq.engine:
        problems.append(f"engines differ: {curve.engine} vs {curve_sq.engine}")
    if curve.loss_kind.squared or curve_sq.loss_kind is not LossKind(f"squared-{curve.loss_kind.value}"):
        problems.append(f"expected a loss and its square, got {curve.loss_kind.value} and {curve_sq.loss_kind.value}")
    if curve.losses.shape != curve_sq.losses.shape:
        problems.append("curves hold different numbers of replications")
    if problems:
        raise ConfigError(problems)

    x, x_sq = curve.losses, curve_sq.losses
    mean_loss, mean_sq = x.mean(axis=0), x_sq.mean(axis=0)
    violation = max(
        float(np.max(np.abs(x) - bound, initial=0.0)),
        float(np.max(mean_sq - bound * mean_loss, initial=0.0)),
        float(np.max(np.abs(x_sq - x * x), initial=0.0)),
    )
    return BoundedSquareReport(curve.ns, np.abs(x).max(axis=0), mean_loss, mean_sq, max(violation, 0.0), bound)


# --------------------------------------------------------------------------- audits

@dataclass(frozen=True)
class Fixture:
    model: ModelFamily
    prior: PriorSpec
    obs: np.ndarray

    @property
    def label(self) -> str:
        return f"{self.model.name}/{self.prior.kind}"


def conjugate_fixtures(count: int, rng: np.random.Generator, n_max: int = 50,
                       families=("bernoulli", "normal", "poisson", "categorical"),
                       min_concentration: float = 0.5) -> list[Fixture]:
    """Random conjugate (model, prior, sample) triples, cycling through ``families``.

    Hyperparameters are drawn uniformly from modest ranges and the sample is
    drawn from the prior predictive, so data and prior are never in conflict.
    """
    lo = min_concentration
    out = []
    for i in range(count):
        family = families[i % len(families)]
        if family == "bernoulli":
            model, prior = Bernoulli(), BetaPrior(*rng.uniform(lo, 5.0, 2))
        elif family == "normal":
            model = Normal(rng.uniform(0.5, 2.0))
            prior = NormalPrior(rng.uniform(-3, 3), rng.uniform(0.25, 4.0))
        elif family == "poisson":
            model, prior = Poisson(), GammaPrior(rng.uniform(max(lo, 1.0), 5.0), rng.uniform(0.5, 3.0))
        elif family == "categorical":
            model, prior = Categorical(3), DirichletPrior(rng.uniform(lo, 4.0, 3))
        else:
            raise ConfigError(f"unknown fixture family {family!r}")
        n = int(rng.integers(0, n_max + 1))
        obs = model.sample(prior.sample(rng), rng, n)
        out.append(Fixture(model, prior, obs))
    return out


def engine_gap(fixture: Fixture, resolution: int = 4096, truncation=None) -> float:
    """L1 distance between grid and closed-form predictives for one fixture."""
    grid = build_predictive(fixture.model, fixture.prior, fixture.obs, "grid",
                            resolution=resolution, truncation=truncation)
    exact = build_predictive(fixture.model, fixture.prior, fixture.obs, "conjugate")
    return l1_distance(grid, exact)


@dataclass(frozen=True)
class IdentityRow:
    fixture: int
    support_size: int
    tv_events: float
    half_l1: float

    @property
    def abs_diff(self) -> float:
        return abs(self.tv_events - self.half_l1)


def identity_audit(fixtures: int = 200, seed: int = 0, max_support: int = 12) -> list[IdentityRow]:
    """Event-supremum TV against half the L1 distance for random discrete pairs."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(fixtures):
        k = int(rng.integers(1, max_support + 1))
        ref = RefMeasure.counting(range(k))
        f_mass, g_mass = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
        f = Density(lambda x, m=f_mass: m[np.asarray(x, dtype=np.int64)], ref, (0.0, k - 1.0))
        g = Density(lambda x, m=g_mass: m[np.asarray(x, dtype=np.int64)], ref, (0.0, k - 1.0))
        rows.append(IdentityRow(i, k, tv_events(f, g), 0.5 * l1_distance(f, g)))
    return rows


@dataclass(frozen=True)
class MartingaleRow:
    fixture: int
    pair: str
    n: int
    probe: float
    residual: float


def martingale_audit(fixtures: int = 100, seed: int = 0, n_max: int = 50) -> list[MartingaleRow]:
    """Tower-identity residuals on random discrete conjugate fixtures."""
    rng = np.random.default_rng(seed)
    rows = []
    cases = conjugate_fixtures(fixtures, rng, n_max, families=("bernoulli", "categorical", "poisson"))
    for i, fx in enumerate(cases):
        pair = ConjugatePair(fx.model, fx.prior)
        if fx.model.obs_measure.kind == "counting":
            probe = float(rng.choice(fx.model.obs_measure.points()))
        else:
            probe = float(rng.integers(0, 11))
        rows.append(MartingaleRow(i, fx.label, len(fx.obs), probe, martingale_check(pair, fx.obs, probe)))
    return rows
