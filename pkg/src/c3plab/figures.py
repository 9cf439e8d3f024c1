"""Plot rendering over the runner's CSV outputs.

Figures carry no analysis logic: every plotted number is read verbatim from
a CSV cell, so the tables stay the single source of truth.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

FIGURE_KINDS = ("delay_vs_r", "improvement_vs_n", "efficiency", "tu_overlay")

SCHEDULER_ORDER = ("c3p", "static", "nonergodic", "uncoded", "rr", "hcmm_like")


class FigureInputError(ValueError):
    """Raised for unusable inputs: empty tables or unknown figure kinds."""


class FigureSchemaError(ValueError):
    """Raised when a required CSV column is absent."""


@dataclass(frozen=True)
class FigureSpec:
    input: str
    kind: str
    output: str
    series: tuple[str, ...] = ()
    title: str = ""

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise FigureInputError(f"unknown figure kind {self.kind!r}")


def load_spec(path) -> FigureSpec:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise FigureInputError("figure spec must be a JSON object")
    known = {"input", "kind", "output", "series", "title"}
    extra = set(raw) - known
    if extra:
        raise FigureInputError(f"unknown spec fields: {sorted(extra)}")
    try:
        return FigureSpec(
            input=str(raw["input"]),
            kind=str(raw["kind"]),
            output=str(raw["output"]),
            series=tuple(raw.get("series", ())),
            title=str(raw.get("title", "")),
        )
    except KeyError as missing:
        raise FigureInputError(f"figure spec missing field {missing}") from None


def read_table(path, required_columns) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required_columns:
            if col not in header:
                raise FigureSchemaError(f"column {col!r} missing from {path}")
        rows = list(reader)
    if not rows:
        raise FigureInputError(f"no data rows in {path}")
    return rows


def _series_order(names, wanted):
    if wanted:
        missing = [w for w in wanted if w not in names]
        if missing:
            raise FigureInputError(f"series not in table: {missing}")
        return list(wanted)
    ranked = [s for s in SCHEDULER_ORDER if s in names]
    return ranked + sorted(n for n in names if n not in ranked)


def _finish(fig, ax, spec) -> str:
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return str(out)


def _render_delay_vs_r(spec) -> str:
    rows = read_table(spec.input, ("R", "scheduler", "t_total_mean",
                                   "t_total_ci95"))
    names = {r["scheduler"] for r in rows}
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name in _series_order(names, spec.series):
        pts = sorted(((int(r["R"]), float(r["t_total_mean"]),
                       float(r["t_total_ci95"]))
                      for r in rows if r["scheduler"] == name))
        xs, ys, es = zip(*pts)
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=name)
    ax.set_xlabel("task rows R")
    ax.set_ylabel("completion time (s)")
    ax.legend()
    return _finish(fig, ax, spec)


def _render_improvement_vs_n(spec) -> str:
    rows = read_table(spec.input, ("N", "baseline", "improvement_pct_mean",
                                   "improvement_pct_ci95"))
    names = {r["baseline"] for r in rows}
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name in _series_order(names, spec.series):
        pts = sorted(((int(r["N"]), float(r["improvement_pct_mean"]),
                       float(r["improvement_pct_ci95"]))
                      for r in rows if r["baseline"] == name))
        xs, ys, es = zip(*pts)
        lo = [y - e for y, e in zip(ys, es)]
        hi = [y + e for y, e in zip(ys, es)]
        ax.plot(xs, ys, marker="o", label=f"vs {name}")
        ax.fill_between(xs, lo, hi, alpha=0.2)
    ax.set_xlabel("helpers N")
    ax.set_ylabel("completion time improvement (%)")
    ax.legend()
    return _finish(fig, ax, spec)


def _render_efficiency(spec) -> str:
    rows = read_table(spec.input, ("R", "scheduler", "mean_efficiency_mean",
                                   "mean_efficiency_ci95"))
    names = {r["scheduler"] for r in rows}
    ordered = _series_order(names, spec.series)
    r_values = sorted({int(r["R"]) for r in rows})
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if len(r_values) > 1:
        for name in ordered:
            pts = sorted(((int(r["R"]), float(r["mean_efficiency_mean"]),
                           float(r["mean_efficiency_ci95"]))
                          for r in rows if r["scheduler"] == name))
            xs, ys, es = zip(*pts)
            ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=name)
        ax.set_xlabel("task rows R")
        ax.legend()
    else:
        ys = []
        es = []
        for name in ordered:
            sub = [r for r in rows if r["scheduler"] == name]
            ys.append(float(sub[0]["mean_efficiency_mean"]))
            es.append(float(sub[0]["mean_efficiency_ci95"]))
        ax.bar(range(len(ordered)), ys, yerr=es, capsize=4)
        ax.set_xticks(range(len(ordered)), ordered)
    ax.set_ylabel("mean helper efficiency")
    return _finish(fig, ax, spec)


def _render_tu_overlay(spec) -> str:
    rows = read_table(spec.input, ("rtt", "mu", "a", "tu_closed_form",
                                   "tu_mc"))
    groups = sorted({(float(r["mu"]), float(r["a"])) for r in rows})
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for mu, a in groups:
        pts = sorted(((float(r["rtt"]), float(r["tu_closed_form"]),
                       float(r["tu_mc"])) for r in rows
                      if float(r["mu"]) == mu and float(r["a"]) == a))
        xs, closed, mc = zip(*pts)
        line, = ax.plot(xs, closed, label=f"closed form, mu={mu:g}")
        ax.plot(xs, mc, linestyle="none", marker="x",
                color=line.get_color(), label=f"monte carlo, mu={mu:g}")
    ax.set_xlabel("data round trip (s)")
    ax.set_ylabel("mean idle per packet (s)")
    ax.legend()
    return _finish(fig, ax, spec)


_RENDERERS = {
    "delay_vs_r": _render_delay_vs_r,
    "improvement_vs_n": _render_improvement_vs_n,
    "efficiency": _render_efficiency,
    "tu_overlay": _render_tu_overlay,
}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the written image path."""
    return _RENDERERS[spec.kind](spec)


def render_spec_file(path) -> str:
    return render(load_spec(path))
