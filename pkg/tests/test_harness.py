import numpy as np
import pytest
from numpy.testing import assert_array_equal

from oracle_values import BB_L1_RISK, BB_L1_RISK_A2_B3, BB_SQ_L1_RISK, MLE_L1_RISK
from ppd_lab import harness
from ppd_lab.conjugate import ConjugatePair
from ppd_lab.errors import ConfigError, NumericalError, UnsupportedCheckError
from ppd_lab.harness import (JointSampler, bayes_risk, bernoulli_risk_exact, bounded_square_check,
                             build_predictive, conjugate_fixtures, consistency_stream, engine_gap,
                             identity_audit, martingale_audit, martingale_check, numerical_engine,
                             plugin_risk_curve, risk_curve, risk_curves)
from ppd_lab.losses import LossKind
from ppd_lab.models import Bernoulli, Categorical, Normal, Poisson
from ppd_lab.priors import BetaPrior, DirichletPrior, GammaPrior, NormalPrior, PointMassPrior

UNIFORM = JointSampler(Bernoulli(), BetaPrior(1, 1), base_seed=99)


def test_exact_risk_matches_mpmath():
    for n, want in BB_L1_RISK.items():
        assert bernoulli_risk_exact(n) == pytest.approx(want, abs=1e-14)
    for n, want in BB_SQ_L1_RISK.items():
        assert bernoulli_risk_exact(n, "squared-l1") == pytest.approx(want, abs=1e-14)
    for n, want in BB_L1_RISK_A2_B3.items():
        assert bernoulli_risk_exact(n, "l1", 2.0, 3.0) == pytest.approx(want, abs=1e-14)
    assert bernoulli_risk_exact(4, "tv") == pytest.approx(BB_L1_RISK[4] / 2, abs=1e-15)
    assert bernoulli_risk_exact(4, "squared-tv") == pytest.approx(BB_SQ_L1_RISK[4] / 4, abs=1e-15)


def test_sampler_is_deterministic_and_prefix_stable():
    t1, x1 = UNIFORM.draw(7, 40)
    t2, x2 = UNIFORM.draw(7, 10)
    assert t1 == t2
    assert_array_equal(x1[:10], x2)
    t3, _ = JointSampler(Bernoulli(), BetaPrior(1, 1), base_seed=100).draw(7, 10)
    assert t3 != t1


def test_point_mass_prior_has_zero_risk():
    sampler = JointSampler(Normal(1.0), PointMassPrior(0.4), 1)
    for kind in LossKind:
        assert bayes_risk(sampler, 5, kind, replications=30).mean == 0.0
    curve = risk_curve(sampler, [1, 2, 4], replications=30, engine="grid")
    assert np.all(curve.means == 0.0)


def test_risk_at_n0_is_one_half():
    est = bayes_risk(UNIFORM, 0, "l1", replications=4000)
    assert abs(est.mean - 0.5) <= 3 * est.std_err


def test_monte_carlo_risk_matches_oracle():
    curve = risk_curve(UNIFORM, [1, 4, 16], "l1", replications=3000)
    for p in curve.points:
        assert abs(p.mean - BB_L1_RISK[p.n]) <= 3 * p.std_err


def test_risk_estimate_fields():
    curve = risk_curve(UNIFORM, [2, 8], "squared-tv", replications=50)
    for j, p in enumerate(curve.points):
        col = curve.losses[:, j]
        assert p.std_err == pytest.approx(col.std(ddof=1) / np.sqrt(50))
        assert 0.0 <= p.mean <= 1.0 and p.replications == 50
        assert p.loss_kind is LossKind.SQUARED_TV


def test_argument_checks():
    with pytest.raises(ConfigError, match="30"):
        bayes_risk(UNIFORM, 3, replications=29)
    with pytest.raises(ConfigError, match="strictly increasing"):
        risk_curve(UNIFORM, [4, 2], replications=30)
    with pytest.raises(ConfigError, match="non-empty"):
        risk_curve(UNIFORM, [], replications=30)
    with pytest.raises(ConfigError, match="engine"):
        risk_curve(UNIFORM, [1], engine="mcmc", replications=30)


def test_curves_are_bit_reproducible():
    a = risk_curves(UNIFORM, [1, 3, 9], replications=40)
    b = risk_curves(UNIFORM, [1, 3, 9], replications=40)
    for kind in LossKind:
        assert_array_equal(a[kind].losses, b[kind].losses)
        assert a[kind].points == b[kind].points


def test_replications_do_not_depend_on_each_other():
    full = risk_curve(UNIFORM, [5], replications=60).losses[:, 0]
    part = risk_curve(UNIFORM, [5], replications=30).losses[:, 0]
    assert_array_equal(full[:30], part)


def test_common_random_numbers_across_n():
    # extending the ns list leaves the shared columns untouched
    short = risk_curve(UNIFORM, [2, 4], replications=30).losses
    long = risk_curve(UNIFORM, [2, 4, 8], replications=30).losses
    assert_array_equal(short, long[:, :2])


def test_conjugate_and_grid_engines_agree_on_shared_seeds():
    sampler = JointSampler(Poisson(), GammaPrior(2.0, 1.0), 5)
    exact = risk_curve(sampler, [1, 8], replications=60)
    grid = risk_curve(sampler, [1, 8], engine="grid", replications=60, resolution=512)
    pooled = np.sqrt(exact.std_errs**2 + grid.std_errs**2)
    assert np.all(np.abs(exact.means - grid.means) <= 3 * pooled)


def test_importance_engine_runs():
    sampler = JointSampler(Categorical(3), DirichletPrior([1.0, 1.0, 1.0]), 2)
    curve = risk_curve(sampler, [1, 4], engine="numerical", replications=30, draws=2000)
    exact = risk_curve(sampler, [1, 4], replications=30)
    pooled = np.sqrt(exact.std_errs**2 + curve.std_errs**2)
    assert np.all(np.abs(exact.means - curve.means) <= 3 * pooled + 1e-3)
    assert numerical_engine(DirichletPrior([1, 1])) == "importance"
    assert numerical_engine(BetaPrior(1, 1)) == "grid"


def _flaky(monkeypatch, failures):
    calls = {"n": 0}
    real = harness.build_predictive

    def build(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] <= failures:
            raise NumericalError("synthetic failure")
        return real(*args, **kwargs)

    monkeypatch.setattr(harness, "build_predictive", build)


def test_one_percent_of_aborts_is_tolerated(monkeypatch):
    _flaky(monkeypatch, 1)
    curve = risk_curve(UNIFORM, [3], replications=100)
    assert curve.aborted == 1 and curve.points[0].replications == 99


def test_more_than_one_percent_of_aborts_fails(monkeypatch):
    _flaky(monkeypatch, 2)
    with pytest.raises(NumericalError, match="2 of 100 replications aborted"):
        risk_curve(UNIFORM, [3], replications=100)


def test_collapsed_importance_weights_abort_the_run():
    sampler = JointSampler(Bernoulli(), BetaPrior(1, 1), 3)
    with pytest.raises(NumericalError, match="aborted"):
        risk_curve(sampler, [3000], engine="importance", replications=30, draws=100)


def test_plugin_estimator_matches_its_oracle_and_loses_to_the_ppd():
    plug = plugin_risk_curve(UNIFORM, [4, 16], replications=3000)
    ppd = risk_curve(UNIFORM, [4, 16], replications=3000)
    for p in plug.points:
        assert abs(p.mean - MLE_L1_RISK[p.n]) <= 3 * p.std_err
    assert np.all(ppd.means <= plug.means)
    with pytest.raises(ConfigError, match="n >= 1"):
        plugin_risk_curve(UNIFORM, [0, 4], replications=30)


# --------------------------------------------------------------------------- consistency

def test_point_mass_trace_is_exact():
    trace = consistency_stream(Normal(1.0), PointMassPrior(0.5), 0.5, [-1.0, 0.5, 2.0], [1, 10, 100],
                               rng=np.random.default_rng(0))
    assert np.all(trace.values == trace.truth[None, :])


def test_bernoulli_trace_converges():
    trace = consistency_stream(Bernoulli(), BetaPrior(1, 1), 0.3, [1], [10, 100, 10_000],
                               rng=np.random.default_rng(1))
    assert trace.ns == (10, 100, 10_000)
    assert trace.abs_errors[-1, 0] <= 0.02


def test_normal_trace_is_the_closed_form_along_one_stream():
    rng = np.random.default_rng(8)
    trace = consistency_stream(Normal(1.0), NormalPrior(0.0, 1.0), 0.5, [0.0, 1.0], [3, 7],
                               rng=np.random.default_rng(8))
    stream = np.concatenate([Normal(1.0).sample(0.5, rng, 3), Normal(1.0).sample(0.5, rng, 4)])
    post_var = 1 / (1 + 7)
    post_mean = stream.sum() / 8
    var = 1 + post_var
    want = np.exp(-0.5 * (np.array([0.0, 1.0]) - post_mean) ** 2 / var) / np.sqrt(2 * np.pi * var)
    np.testing.assert_allclose(trace.values[-1], want, rtol=1e-13)


def test_trace_errors_name_the_sample_size():
    with pytest.raises(NumericalError, match="n=5000"):
        consistency_stream(Bernoulli(), BetaPrior(1, 1), 0.5, [1], [10, 5000], engine="importance",
                           rng=np.random.default_rng(0), draws=100)


def test_trace_checks_its_inputs():
    with pytest.raises(ConfigError):
        consistency_stream(Bernoulli(), BetaPrior(1, 1), 0.3, [1], [5, 5])
    with pytest.raises(ValueError, match="theta"):
        consistency_stream(Bernoulli(), BetaPrior(1, 1), 1.3, [1], [5])


# --------------------------------------------------------------------------- martingale

def test_laplace_tower_identity():
    pair = ConjugatePair(Bernoulli(), BetaPrior(1, 1))
    assert martingale_check(pair, [1, 1, 1], 1) <= 1e-15


def test_point_mass_tower_identity_is_exact():
    pair = ConjugatePair(Poisson(), PointMassPrior(2.5))
    assert martingale_check(pair, [1, 4], 3) == 0.0


def test_tower_check_needs_discrete_observations():
    with pytest.raises(UnsupportedCheckError):
        martingale_check(ConjugatePair(Normal(), NormalPrior(0, 1)), [0.1], 0.0)


def test_dirichlet_tower_identity_on_random_fixtures():
    rng = np.random.default_rng(17)
    pair_worst = 0.0
    for _ in range(100):
        alpha = rng.uniform(0.2, 5.0, 3)
        pair = ConjugatePair(Categorical(3), DirichletPrior(alpha))
        obs = rng.integers(1, 4, rng.integers(0, 40))
        pair_worst = max(pair_worst, martingale_check(pair, obs, int(rng.integers(1, 4))))
    assert pair_worst <= 1e-12


def test_martingale_audit_is_tight():
    rows = martingale_audit(40, seed=3)
    assert {r.pair for r in rows} == {"bernoulli/beta", "categorical/dirichlet", "poisson/gamma"}
    assert max(r.residual for r in rows) <= 1e-12


# --------------------------------------------------------------------------- bounded squares

def test_bounded_square_check():
    curves = risk_curves(UNIFORM, [1, 4], replications=200)
    report = bounded_square_check(curves[LossKind.L1], curves[LossKind.SQUARED_L1])
    assert report.passed and np.all(report.max_loss <= 2.0)
    assert np.all(report.mean_squared <= 2 * report.mean_loss + 1e-12)


def test_bounded_square_check_point_mass():
    sampler = JointSampler(Bernoulli(), PointMassPrior(0.3), 0)
    curves = risk_curves(sampler, [1, 4], replications=30)
    report = bounded_square_check(curves[LossKind.TV], curves[LossKind.SQUARED_TV])
    assert report.max_violation == 0.0 and np.all(report.mean_loss == 0.0)


def test_bounded_square_check_rejects_mismatched_curves():
    a = risk_curves(UNIFORM, [1, 4], replications=30)
    b = risk_curves(JointSampler(Bernoulli(), BetaPrior(1, 1), 5), [1, 2], replications=30)
    with pytest.raises(ConfigError) as info:
        bounded_square_check(a[LossKind.L1], b[LossKind.SQUARED_L1])
    assert len(info.value.errors) == 2
    with pytest.raises(ConfigError, match="a loss and its square"):
        bounded_square_check(a[LossKind.L1], a[LossKind.SQUARED_TV])


# --------------------------------------------------------------------------- audits

def test_fixtures_are_reproducible_and_cycle_families():
    a = conjugate_fixtures(8, np.random.default_rng(4))
    b = conjugate_fixtures(8, np.random.default_rng(4))
    assert [f.label for f in a[:4]] == ["bernoulli/beta", "normal/normal", "poisson/gamma",
                                        "categorical/dirichlet"]
    assert all(np.array_equal(x.obs, y.obs) for x, y in zip(a, b))


def test_engine_gap_is_small():
    for fx in conjugate_fixtures(8, np.random.default_rng(21)):
        assert engine_gap(fx) <= 1e-5


def test_identity_audit():
    rows = identity_audit(50, seed=1)
    assert max(r.abs_diff for r in rows) <= 1e-12
    assert all(1 <= r.support_size <= 12 for r in rows)


def test_build_predictive_rejects_unknown_engine():
    with pytest.raises(ConfigError):
        build_predictive(Bernoulli(), BetaPrior(1, 1), [], "mcmc")
