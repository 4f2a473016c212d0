"""Run configured experiments and persist their results.

Every run writes ``<experiment>.csv`` and ``<experiment>.svg`` into the
output directory. Next to them go ``record.json`` and the canonical
``config.toml`` that produced the run. CSV numbers use 17 significant
digits so that doubles survive a round trip. The CSV depends only on the
config (no timestamps), so reruns with an equal config hash are
byte-identical.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from html import escape
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, dump_config
from .harness import (JointSampler, bounded_square_check, consistency_stream, identity_audit,
                      martingale_audit, risk_curves)
from .losses import LossKind

SCHEMAS = {
    "risk-curve": ("n", "loss_kind", "mean", "std_err", "replications"),
    "consistency": ("n", "probe", "estimate", "truth", "abs_error"),
    "martingale-audit": ("fixture", "pair", "n", "probe", "residual"),
    "identity-audit": ("fixture", "support_size", "tv_events", "half_l1", "abs_diff"),
}


@dataclass
class ResultRecord:
    """Rows produced by one experiment run, with provenance."""

    config_hash: str
    experiment: str
    rows: list[tuple]
    wall_clock: float
    artifact_version: str = __version__
    summary: dict = field(default_factory=dict)
    config: ExperimentConfig | None = None
    # in-memory only: the simulated RiskCurve objects of a risk-curve run
    curves: dict = field(default_factory=dict, repr=False)

    @property
    def columns(self) -> tuple[str, ...]:
        return SCHEMAS[self.experiment]

    def to_json(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "experiment": self.experiment,
            "artifact_version": self.artifact_version,
            "wall_clock_seconds": self.wall_clock,
            "columns": list(self.columns),
            "rows": [list(r) for r in self.rows],
            "summary": self.summary,
        }


# --------------------------------------------------------------------------- experiments

def _risk_rows(config: ExperimentConfig):
    model, prior = config.build_model(), config.build_prior()
    sampler = JointSampler(model, prior, config.base_seed)
    kinds = [LossKind(k) for k in config.loss_kinds]
    # the square check needs both members of a pair; simulate them together
    extra = [LossKind(f"squared-{k.value}") for k in kinds if not k.squared]
    curves = risk_curves(sampler, config.ns, list(dict.fromkeys(kinds + extra)), config.engine,
                         config.replications, **config.engine_kwargs())
    rows = [(p.n, p.loss_kind.value, p.mean, p.std_err, p.replications)
            for kind in kinds for p in curves[kind].points]
    summary = {"aborted_replications": curves[kinds[0]].aborted}
    for kind in kinds:
        if not kind.squared:
            report = bounded_square_check(curves[kind], curves[LossKind(f"squared-{kind.value}")])
            summary[f"bounded_square_violation_{kind.value}"] = report.max_violation
    return rows, summary, curves


def _consistency_rows(config: ExperimentConfig):
    model, prior = config.build_model(), config.build_prior()
    rng = JointSampler(model, prior, config.base_seed).rng(0, 2)
    theta = np.asarray(config.theta, dtype=float)
    trace = consistency_stream(model, prior, theta, list(config.probes), config.ns, config.engine,
                               rng, **config.engine_kwargs())
    errs = trace.abs_errors
    rows = [(n, float(p), float(trace.values[i, j]), float(trace.truth[j]), float(errs[i, j]))
            for i, n in enumerate(trace.ns) for j, p in enumerate(trace.probes)]
    summary = {"initial_max_error": float(trace.max_errors[0]),
               "final_max_error": float(trace.max_errors[-1])}
    return rows, summary, {}


def _martingale_rows(config: ExperimentConfig):
    audit = martingale_audit(config.fixtures, config.base_seed)
    rows = [(r.fixture, r.pair, r.n, r.probe, r.residual) for r in audit]
    return rows, {"max_residual": max(r.residual for r in audit)}, {}


def _identity_rows(config: ExperimentConfig):
    audit = identity_audit(config.fixtures, config.base_seed)
    rows = [(r.fixture, r.support_size, r.tv_events, r.half_l1, r.abs_diff) for r in audit]
    return rows, {"max_abs_diff": max(r.abs_diff for r in audit)}, {}


_RUNNERS = {
    "risk-curve": _risk_rows,
    "consistency": _consistency_rows,
    "martingale-audit": _martingale_rows,
    "identity-audit": _identity_rows,
}


def run_experiment(config: ExperimentConfig, out_dir=None, echo=print) -> ResultRecord:
    """Run the experiment, write its artifacts and echo a summary table.

    ``out_dir`` overrides ``config.output_dir``. Pass ``echo=None`` to stay quiet.
    """
    start = time.perf_counter()
    rows, summary, curves = _RUNNERS[config.experiment](config)
    record = ResultRecord(config.config_hash(), config.experiment, rows,
                          time.perf_counter() - start, summary=summary, config=config, curves=curves)
    out = Path(out_dir if out_dir is not None else config.output_dir)
    write_artifacts(record, out)
    if echo is not None:
        echo(summary_table(record))
    return record


def write_artifacts(record: ResultRecord, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": emit_csv(record, out / f"{record.experiment}.csv"),
        "svg": emit_plot(record, out / f"{record.experiment}.svg"),
    }
    if record.config is not None:
        paths["config"] = dump_config(record.config, out / "config.toml")
    paths["json"] = out / "record.json"
    paths["json"].write_text(json.dumps(record.to_json(), indent=2) + "\n", encoding="utf-8")
    return paths


# --------------------------------------------------------------------------- tables

def format_value(v) -> str:
    """CSV text for one cell: integers as-is, floats with 17 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def emit_csv(record: ResultRecord, path) -> Path:
    if not record.rows:
        raise ValueError("refusing to write a CSV without data rows")
    lines = [",".join(record.columns)]
    lines += [",".join(format_value(v) for v in row) for row in record.rows]
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def summary_table(record: ResultRecord) -> str:
    """Short human-readable table for the terminal."""
    lines = [f"{record.experiment}  config {record.config_hash[:12]}  "
             f"({record.wall_clock:.2f} s, ppd-lab {record.artifact_version})"]
    if record.experiment == "risk-curve":
        kinds = list(dict.fromkeys(r[1] for r in record.rows))
        ns = list(dict.fromkeys(r[0] for r in record.rows))
        cell = {(r[0], r[1]): r for r in record.rows}
        lines.append(f"{'n':>7}" + "".join(f"{k:>26}" for k in kinds))
        for n in ns:
            parts = [f"{cell[n, k][2]:.6f} +- {cell[n, k][3]:.6f}" for k in kinds]
            lines.append(f"{n:>7}" + "".join(f"{p:>26}" for p in parts))
    elif record.experiment == "consistency":
        lines.append(f"{'n':>7}{'probe':>10}{'estimate':>14}{'truth':>14}{'abs_error':>12}")
        for n, probe, est, truth, err in record.rows:
            lines.append(f"{n:>7}{probe:>10.4g}{est:>14.6f}{truth:>14.6f}{err:>12.2e}")
    else:
        lines.append(f"{len(record.rows)} fixtures")
    for key, value in record.summary.items():
        lines.append(f"{key}: {value:.3g}" if isinstance(value, float) else f"{key}: {value}")
    return "\n".join(lines)


# --------------------------------------------------------------------------- plots

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 640, 420
_MARGIN = dict(left=70, right=150, top=40, bottom=55)


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    err: np.ndarray | None = None


def _log_ticks(lo: float, hi: float) -> list[float]:
    return [10.0**k for k in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)]


def _lin_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    step = 10 ** math.floor(math.log10(raw))
    step *= next(m for m in (1, 2, 5, 10) if m * step >= raw)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def render_svg(series: list[Series], title: str, xlabel: str, ylabel: str, logx: bool = True) -> str:
    """A small line chart with optional error bars, as SVG text.

    On a log x axis, ``x = 0`` is drawn at half the smallest positive x.
    """
    xs = np.concatenate([s.x for s in series]).astype(float)
    if logx:
        positive = xs[xs > 0]
        floor = positive.min() / 2 if len(positive) else 0.5
        tx = lambda v: math.log10(max(v, floor))  # noqa: E731
    else:
        tx = float
    lows = [s.y - (s.err if s.err is not None else 0) for s in series]
    highs = [s.y + (s.err if s.err is not None else 0) for s in series]
    y_lo = min(0.0, float(min(np.min(v) for v in lows)))
    y_hi = float(max(np.max(v) for v in highs))
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    x_lo, x_hi = tx(xs.min()), tx(xs.max())
    if x_hi <= x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5

    left, top = _MARGIN["left"], _MARGIN["top"]
    pw = _W - left - _MARGIN["right"]
    ph = _H - top - _MARGIN["bottom"]
    px = lambda v: left + (tx(v) - x_lo) / (x_hi - x_lo) * pw  # noqa: E731
    py = lambda v: top + (y_hi - v) / (y_hi - y_lo) * ph  # noqa: E731

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']

    if logx:
        xticks = [t for t in _log_ticks(10**x_lo, 10**x_hi) if x_lo - 1e-9 <= math.log10(t) <= x_hi + 1e-9]
    else:
        xticks = _lin_ticks(x_lo, x_hi)
    for t in xticks:
        x = px(t)
        out.append(f'<line x1="{x:.1f}" y1="{top + ph}" x2="{x:.1f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _lin_ticks(y_lo, y_hi):
        y = py(t)
        out.append(f'<line x1="{left - 5}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{_H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>')

    for i, s in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(s.x, s.y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for j, (x, y) in enumerate(zip(s.x, s.y)):
            cx = px(x)
            if s.err is not None and s.err[j] > 0:
                lo, hi = py(y - s.err[j]), py(y + s.err[j])
                out.append(f'<line x1="{cx:.1f}" y1="{lo:.1f}" x2="{cx:.1f}" y2="{hi:.1f}" stroke="{color}"/>')
                out.append(f'<line x1="{cx - 3:.1f}" y1="{lo:.1f}" x2="{cx + 3:.1f}" y2="{lo:.1f}" stroke="{color}"/>')
                out.append(f'<line x1="{cx - 3:.1f}" y1="{hi:.1f}" x2="{cx + 3:.1f}" y2="{hi:.1f}" stroke="{color}"/>')
            out.append(f'<circle cx="{cx:.1f}" cy="{py(y):.1f}" r="2.5" fill="{color}"/>')
        ly = top + 14 + 18 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly - 4}" x2="{left + pw + 32}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _plot_series(record: ResultRecord):
    rows = record.rows
    if record.experiment == "risk-curve":
        series = []
        for kind in dict.fromkeys(r[1] for r in rows):
            sel = [r for r in rows if r[1] == kind]
            series.append(Series(kind, np.array([r[0] for r in sel]), np.array([r[2] for r in sel]),
                                 2.0 * np.array([r[3] for r in sel])))
        return series, "Bayes risk of the predictive (error bars: 2 std err)", "n", "risk", True
    if record.experiment == "consistency":
        series = []
        for probe in dict.fromkeys(r[1] for r in rows):
            sel = [r for r in rows if r[1] == probe]
            series.append(Series(f"x = {probe:g}", np.array([r[0] for r in sel]), np.array([r[4] for r in sel])))
        return series, "Pointwise predictive error along one stream", "n", "|estimate - truth|", True
    column = 4
    label = "residual" if record.experiment == "martingale-audit" else "|tv - l1/2|"
    x = np.array([r[0] for r in rows], dtype=float)
    y = np.array([r[column] for r in rows], dtype=float)
    return [Series(label, x, y)], f"{record.experiment} per fixture", "fixture", label, False


def emit_plot(record: ResultRecord, path) -> Path:
    if not record.rows:
        raise ValueError("refusing to plot a record without data rows")
    series, title, xlabel, ylabel, logx = _plot_series(record)
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_svg(series, title, xlabel, ylabel, logx))
    return path
