"""Experiment configuration: a TOML file with nested tables.

A minimal risk-curve config::

    experiment = "risk-curve"
    ns = [1, 2, 4, 8]

    [model]
    name = "bernoulli"

    [prior]
    kind = "beta"
    alpha = 1.0
    beta = 1.0

Everything else has a default (see :data:`DEFAULTS`). Without an ``engine``
key the closed form is used when the model/prior pair has one, otherwise the
``numerical`` engine (grid for scalar parameters, importance sampling on the
simplex). :func:`parse_config` reports every problem it finds at once, each
prefixed by its field path.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .conjugate import is_conjugate
from .errors import ConfigError, DomainError, HyperparameterError
from .harness import ENGINES, numerical_engine
from .losses import LossKind
from .models import MODELS, ModelFamily, make_model
from .priors import PRIORS, PointMassPrior, PriorSpec, make_prior

EXPERIMENTS = ("risk-curve", "consistency", "martingale-audit", "identity-audit")
NEEDS_MODEL = ("risk-curve", "consistency")
ENGINE_OPTION_KEYS = ("resolution", "draws", "truncation")

DEFAULTS = {
    "engine": "conjugate",
    "loss_kinds": ["l1"],
    "ns": [1, 2, 4, 8, 16, 32, 64, 128, 256],
    "replications": 1000,
    "base_seed": 0,
    "output_dir": "ppd-lab-out",
    "fixtures": 200,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment description.

    ``model`` and ``prior`` are the raw tables from the file (``name`` /
    ``kind`` plus parameters); :meth:`build_model` and :meth:`build_prior`
    turn them into objects. ``theta`` and ``probes`` are used by the
    consistency experiment, ``fixtures`` by the audits.
    """

    experiment: str
    model: dict = field(default_factory=dict)
    prior: dict = field(default_factory=dict)
    engine: str = DEFAULTS["engine"]
    engine_options: dict = field(default_factory=dict)
    loss_kinds: tuple[str, ...] = tuple(DEFAULTS["loss_kinds"])
    ns: tuple[int, ...] = tuple(DEFAULTS["ns"])
    replications: int = DEFAULTS["replications"]
    base_seed: int = DEFAULTS["base_seed"]
    output_dir: str = DEFAULTS["output_dir"]
    theta: float | tuple[float, ...] | None = None
    probes: tuple[float, ...] = ()
    fixtures: int = DEFAULTS["fixtures"]

    def build_model(self) -> ModelFamily:
        params = {k: v for k, v in self.model.items() if k != "name"}
        return make_model(self.model["name"], **params)

    def build_prior(self) -> PriorSpec:
        hyper = {k: v for k, v in self.prior.items() if k != "kind"}
        return make_prior(self.prior["kind"], **hyper)

    def engine_kwargs(self) -> dict:
        opts = dict(self.engine_options)
        if "truncation" in opts:
            opts["truncation"] = tuple(opts["truncation"])
        return opts

    def to_dict(self) -> dict:
        """Plain nested dict with every field, ready for serialisation."""
        out = {
            "experiment": self.experiment,
            "engine": self.engine,
            "loss_kinds": list(self.loss_kinds),
            "ns": list(self.ns),
            "replications": self.replications,
            "base_seed": self.base_seed,
            "output_dir": self.output_dir,
            "fixtures": self.fixtures,
            "probes": list(self.probes),
        }
        if self.theta is not None:
            out["theta"] = list(self.theta) if isinstance(self.theta, tuple) else self.theta
        for name in ("model", "prior", "engine_options"):
            table = getattr(self, name)
            if table:
                out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in table.items()}
        return out

    def canonical(self) -> str:
        """Deterministic TOML text (sorted keys, every default spelled out)."""
        return tomli_w.dumps(_sorted(self.to_dict()))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """Copy with some fields replaced, re-validated."""
        changes = {k: v for k, v in changes.items() if v is not None}
        return validate(dataclasses.replace(self, **changes).to_dict())


def _sorted(table):
    if isinstance(table, dict):
        return {k: _sorted(table[k]) for k in sorted(table)}
    return table


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def _check_model(raw, errors) -> ModelFamily | None:
    if not isinstance(raw, dict):
        errors.append("model: must be a table with a 'name' key")
        return None
    name = raw.get("name")
    if name not in MODELS:
        errors.append(f"model.name: unknown model {name!r}; known: {', '.join(sorted(MODELS))}")
        return None
    params = {k: v for k, v in raw.items() if k != "name"}
    try:
        return make_model(name, **params)
    except HyperparameterError as exc:
        errors.append(f"model.{exc.field}: {exc.message}")
    except (TypeError, ValueError) as exc:
        errors.append(f"model: {exc}")
    return None


def _check_prior(raw, errors) -> PriorSpec | None:
    if not isinstance(raw, dict):
        errors.append("prior: must be a table with a 'kind' key")
        return None
    kind = raw.get("kind")
    if kind not in PRIORS:
        errors.append(f"prior.kind: unknown prior {kind!r}; known: {', '.join(sorted(PRIORS))}")
        return None
    hyper = {k: v for k, v in raw.items() if k != "kind"}
    try:
        return make_prior(kind, **hyper)
    except HyperparameterError as exc:
        errors.append(f"prior.{exc.field}: {exc.message}")
    except (TypeError, ValueError) as exc:
        errors.append(f"prior: {exc}")
    return None


def _check_pair(model, prior, engine, errors):
    if isinstance(prior, PointMassPrior):
        try:
            model.check_param(prior.theta0)
        except DomainError as exc:
            errors.append(f"prior.theta0: {exc}")
        return
    if engine == "conjugate" and not is_conjugate(model, prior):
        errors.append(f"engine: no closed form for model {model.name!r} with prior {prior.kind!r}; "
                      "use engine = \"grid\" or \"importance\"")
    if engine == "numerical":
        engine = numerical_engine(prior)
    if engine == "grid":
        try:
            axes = prior.axes(None)
        except (TypeError, ValueError) as exc:
            errors.append(f"engine: {exc}")
            return
        if len(axes) > 2:
            errors.append(f"engine: grid quadrature handles at most 2 chart axes, prior {prior.kind!r} needs {len(axes)}")
    try:
        model.check_param(prior.mean)
    except (DomainError, ValueError) as exc:
        errors.append(f"prior: does not match model {model.name!r}: {exc}")


def _check_engine_options(raw, errors) -> dict:
    if not isinstance(raw, dict):
        errors.append("engine_options: must be a table")
        return {}
    out = {}
    for key, value in raw.items():
        path = f"engine_options.{key}"
        if key not in ENGINE_OPTION_KEYS:
            errors.append(f"{path}: unknown option; known: {', '.join(ENGINE_OPTION_KEYS)}")
        elif key == "resolution" and not (_is_int(value) and value >= 16):
            errors.append(f"{path}: must be an integer >= 16, got {value!r}")
        elif key == "draws" and not (_is_int(value) and value >= 100):
            errors.append(f"{path}: must be an integer >= 100, got {value!r}")
        elif key == "truncation" and not (
                isinstance(value, list) and len(value) == 2 and all(_is_number(v) for v in value)
                and value[0] < value[1]):
            errors.append(f"{path}: must be [lo, hi] with lo < hi, got {value!r}")
        else:
            out[key] = tuple(value) if isinstance(value, list) else value
    return out


def validate(raw: dict) -> ExperimentConfig:
    """Turn a parsed TOML document into an :class:`ExperimentConfig`.

    Raises :class:`ConfigError` listing every problem found.
    """
    errors: list[str] = []
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in sorted(set(raw) - known):
        errors.append(f"{key}: unknown field")

    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        errors.append(f"experiment: must be one of {', '.join(EXPERIMENTS)}, got {experiment!r}")

    engine = raw.get("engine")
    if engine is not None and engine not in ENGINES:
        errors.append(f"engine: must be one of {', '.join(ENGINES)}, got {engine!r}")

    loss_kinds = raw.get("loss_kinds", DEFAULTS["loss_kinds"])
    if not isinstance(loss_kinds, list) or not loss_kinds:
        errors.append("loss_kinds: must be a non-empty list")
        loss_kinds = []
    for i, kind in enumerate(loss_kinds):
        if kind not in {k.value for k in LossKind}:
            errors.append(f"loss_kinds[{i}]: unknown loss {kind!r}; known: {', '.join(k.value for k in LossKind)}")
    if len(set(map(str, loss_kinds))) != len(loss_kinds):
        errors.append("loss_kinds: entries must be distinct")

    ns = raw.get("ns", DEFAULTS["ns"])
    if not isinstance(ns, list) or not ns or not all(_is_int(n) for n in ns):
        errors.append(f"ns: must be a non-empty list of integers, got {ns!r}")
        ns = []
    else:
        if ns[0] < 0:
            errors.append("ns: sample sizes must be >= 0")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            errors.append("ns: ns must be strictly increasing")

    replications = raw.get("replications", DEFAULTS["replications"])
    if not _is_int(replications):
        errors.append(f"replications: must be an integer, got {replications!r}")
    elif experiment == "risk-curve" and replications < 30:
        errors.append(f"replications: must be >= 30 for risk experiments, got {replications}")

    base_seed = raw.get("base_seed", DEFAULTS["base_seed"])
    if not (_is_int(base_seed) and 0 <= base_seed < 2**64):
        errors.append(f"base_seed: must be an integer in [0, 2^64), got {base_seed!r}")

    output_dir = raw.get("output_dir", DEFAULTS["output_dir"])
    if not isinstance(output_dir, str) or not output_dir:
        errors.append("output_dir: must be a non-empty string")

    fixtures = raw.get("fixtures", DEFAULTS["fixtures"])
    if not (_is_int(fixtures) and fixtures >= 1):
        errors.append(f"fixtures: must be a positive integer, got {fixtures!r}")

    engine_options = _check_engine_options(raw.get("engine_options", {}), errors)

    model_raw, prior_raw = raw.get("model", {}), raw.get("prior", {})
    model = prior = None
    if experiment in NEEDS_MODEL or model_raw or prior_raw:
        model = _check_model(model_raw, errors)
        prior = _check_prior(prior_raw, errors)
    if engine is None:
        # closed form when one exists, otherwise the default numerical engine
        engine = "conjugate" if model is None or prior is None or is_conjugate(model, prior) else "numerical"
    if model is not None and prior is not None and engine in ENGINES:
        _check_pair(model, prior, engine, errors)

    theta = raw.get("theta")
    probes = raw.get("probes", [])
    if not isinstance(probes, list) or not all(_is_number(p) for p in probes):
        errors.append(f"probes: must be a list of numbers, got {probes!r}")
        probes = []
    if experiment == "consistency":
        if theta is None:
            errors.append("theta: the consistency experiment needs the true parameter")
        elif not (_is_number(theta) or (isinstance(theta, list) and all(_is_number(t) for t in theta))):
            errors.append(f"theta: must be a number or a list of numbers, got {theta!r}")
        elif model is not None:
            try:
                model.check_param(theta)
            except (DomainError, ValueError) as exc:
                errors.append(f"theta: {exc}")
        if not probes:
            errors.append("probes: the consistency experiment needs at least one probe")
        elif model is not None:
            try:
                model.check_obs(probes)
            except (DomainError, ValueError) as exc:
                errors.append(f"probes: {exc}")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        experiment=experiment,
        model=dict(model_raw),
        prior={k: tuple(v) if isinstance(v, list) else v for k, v in prior_raw.items()},
        engine=engine,
        engine_options=engine_options,
        loss_kinds=tuple(loss_kinds),
        ns=tuple(ns),
        replications=replications,
        base_seed=base_seed,
        output_dir=output_dir,
        theta=tuple(theta) if isinstance(theta, list) else theta,
        probes=tuple(probes),
        fixtures=fixtures,
    )


def loads_config(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from None
    return validate(raw)


def parse_config(path) -> ExperimentConfig:
    """Read and validate a config file. I/O problems raise :class:`OSError`."""
    text = Path(path).read_text(encoding="utf-8")
    return loads_config(text)


def dump_config(config: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(config.canonical(), encoding="utf-8")
    return path
