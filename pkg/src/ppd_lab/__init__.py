"""Posterior predictive densities as Bayes density estimators.

Closed-form and numerical posteriors feed an L1 / total-variation loss layer.
On top of that sits a Monte Carlo harness for Bayes risk and consistency
experiments.
"""

__version__ = "0.1.0"

from .conjugate import (ConjugatePair, conjugate_posterior, conjugate_ppd, conjugate_predictive,
                        is_conjugate, registered_pairs)
from .errors import (ConfigError, DegeneratePosteriorError, DomainError, HyperparameterError,
                     NumericalError, PPDLabError, UnreliablePosteriorError, UnsupportedCheckError)
from .harness import (JointSampler, RiskCurve, RiskEstimate, bayes_risk, bernoulli_risk_exact,
                      bounded_square_check, build_predictive, consistency_stream, martingale_check,
                      plugin_risk_curve, risk_curve, risk_curves)
from .losses import LossKind, l1_distance, loss, tv_distance
from .models import (Bernoulli, Categorical, Density, Interval, Normal, Poisson, RefMeasure,
                     density, make_model, sample_obs)
from .posterior import (WeightedPosterior, grid_posterior, importance_posterior, ppd_eval,
                        ppd_event_prob, predictive_density)
from .priors import (BetaPrior, CustomPrior, DirichletPrior, GammaPrior, NormalPrior,
                     PointMassPrior, make_prior)

__all__ = [name for name in dir() if not name.startswith("_")]
