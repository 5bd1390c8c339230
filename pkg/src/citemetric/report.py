"""Tabular writers and SVG bar charts for pipeline results.

All writers are deterministic: fixed column order, stable row order and
fixed float formatting, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .indicators import IndicatorMatrix, Reason
from .matchset import LinkageReport
from .model import CorrelationRecord, Formula

CORRELATION_HEADER = ["indicator", "group", "year", "n", "rho", "ci_low", "ci_high", "status"]
LINKAGE_HEADER = ["year", "source_a", "source_b", "both", "a_only", "b_only", "total"]


def fmt6(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".6g")


def _open(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_correlation_report(records: Sequence[CorrelationRecord], path) -> Path:
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(CORRELATION_HEADER)
        for r in sorted(records, key=CorrelationRecord.sort_key):
            w.writerow([str(r.indicator), r.group, r.year, r.n, fmt6(r.rho), fmt6(r.ci_low), fmt6(r.ci_high),
                        r.status.value])
    return Path(path)


def write_linkage_report(report: LinkageReport, path) -> Path:
    def row(label, c):
        return [label, c.source_a, c.source_b, c.both, c.a_only, c.b_only, c.total]

    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(LINKAGE_HEADER)
        for year in sorted(report.per_year):
            w.writerow(row(year, report.per_year[year]))
        w.writerow(row("total", report.overall))
    return Path(path)


def _column_strings(values: np.ndarray, reasons: np.ndarray, integral: bool) -> list[str]:
    defined = reasons == Reason.DEFINED
    if integral:
        return [str(int(v)) if d else "" for v, d in zip(values.tolist(), defined.tolist())]
    return [repr(v) if d else "" for v, d in zip(values.tolist(), defined.tolist())]


def write_indicator_matrix(matrix: IndicatorMatrix, path, reasons_path=None, chunk: int = 4096) -> Path:
    """Matrix as CSV; undefined cells are empty and explained in ``reasons_path``."""
    labels = [str(ind) for ind in matrix.indicators]
    integral = [ind.formula is Formula.COUNT for ind in matrix.indicators]
    reasons_fh = _open(reasons_path) if reasons_path is not None else None
    try:
        with _open(path) as fh:
            w = _writer(fh)
            w.writerow(["work_id", "doi", "year"] + labels)
            rw = _writer(reasons_fh) if reasons_fh else None
            if rw:
                rw.writerow(["work_id", "indicator", "reason"])
            for lo in range(0, len(matrix), chunk):
                hi = min(lo + chunk, len(matrix))
                vals = matrix.values[lo:hi]
                reas = matrix.reasons[lo:hi]
                cols = [_column_strings(vals[:, j], reas[:, j], integral[j]) for j in range(len(labels))]
                ids = matrix.work_ids[lo:hi]
                dois = matrix.dois[lo:hi]
                years = matrix.years[lo:hi].tolist()
                w.writerows([ids[k], dois[k] or "", years[k], *row] for k, row in enumerate(zip(*cols)))
                if rw:
                    ri, rj = np.nonzero(reas)
                    rw.writerows(
                        [ids[i], labels[j], Reason(int(reas[i, j])).label] for i, j in zip(ri.tolist(), rj.tolist())
                    )
    finally:
        if reasons_fh:
            reasons_fh.close()
    return Path(path)


def write_denominators(tables, path) -> Path:
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(["source", "formula", "refset", "scheme", "code", "year", "n", "mean"])
        for ctx in sorted(tables, key=lambda c: (c.source.value, c.formula.value, c.refset.value, c.scheme.value)):
            for (code, year), (mean, n) in sorted(tables[ctx].cells.items()):
                w.writerow([ctx.source.label, ctx.formula.label, ctx.refset.label, ctx.scheme.label, code, year, n,
                            repr(mean)])
    return Path(path)


def write_weighted_means(overall, by_year, path) -> Path:
    """Side-by-side weighted mean correlations (all years / by year)."""
    with _open(path) as fh:
        w = _writer(fh)
        w.writerow(["indicator", "overall_rho", "overall_weight", "overall_cells",
                    "by_year_rho", "by_year_weight", "by_year_cells"])
        for ind in sorted(set(overall) | set(by_year), key=lambda i: i.sort_key()):
            a, b = overall.get(ind), by_year.get(ind)
            w.writerow([str(ind),
                        fmt6(a.rho if a else None), int(a.total_weight) if a else 0, a.n_cells if a else 0,
                        fmt6(b.rho if b else None), int(b.total_weight) if b else 0, b.n_cells if b else 0])
    return Path(path)


# --- charts ----------------------------------------------------------------

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"]


@dataclass(frozen=True)
class Series:
    name: str
    values: Sequence  # float or None (no bar)
    ci_low: Sequence | None = None
    ci_high: Sequence | None = None


@dataclass(frozen=True)
class ChartSpec:
    title: str
    labels: Sequence[str]
    series: Sequence[Series]
    axis_range: tuple | None = None
    x_label: str = "Spearman correlation"

    def __post_init__(self):
        if not self.series:
            raise ValueError("chart needs at least one series")
        n = len(self.labels)
        for s in self.series:
            if len(s.values) != n:
                raise ValueError(f"series {s.name!r} has {len(s.values)} values for {n} labels")
            if (s.ci_low is None) != (s.ci_high is None):
                raise ValueError(f"series {s.name!r} needs both CI bounds or neither")
            if s.ci_low is not None:
                if len(s.ci_low) != n or len(s.ci_high) != n:
                    raise ValueError(f"series {s.name!r} CI bounds have the wrong length")
                for v, lo, hi in zip(s.values, s.ci_low, s.ci_high):
                    if None not in (v, lo, hi) and not lo <= v <= hi:
                        raise ValueError(f"CI ({lo}, {hi}) does not bracket {v}")


@dataclass(frozen=True)
class ChartLayout:
    label_width: float = 230.0
    plot_width: float = 420.0
    row_height: float = 16.0
    top: float = 40.0
    bottom: float = 50.0
    right: float = 20.0


@dataclass(frozen=True)
class AxisMap:
    """Linear value -> x pixel mapping."""

    x0: float
    width: float
    vmin: float
    vmax: float

    def px(self, v: float) -> float:
        return self.x0 + (v - self.vmin) / (self.vmax - self.vmin) * self.width


def _nice_range(spec: ChartSpec) -> tuple[float, float]:
    if spec.axis_range is not None:
        return tuple(spec.axis_range)
    vals = [0.0]
    for s in spec.series:
        for seq in (s.values, s.ci_low, s.ci_high):
            if seq is not None:
                vals += [v for v in seq if v is not None]
    lo, hi = min(vals), max(vals)
    step = 0.1 if hi - lo <= 1 else 0.5
    lo = math.floor(lo / step - 1e-9) * step
    hi = math.ceil(hi / step + 1e-9) * step
    if hi == lo:
        hi = lo + step
    return round(lo, 10), round(hi, 10)


def axis_for(spec: ChartSpec, layout: ChartLayout = ChartLayout()) -> AxisMap:
    vmin, vmax = _nice_range(spec)
    return AxisMap(layout.label_width, layout.plot_width, vmin, vmax)


def _f(x: float) -> str:
    return f"{x:.2f}"


def render_bar_chart(spec: ChartSpec, layout: ChartLayout = ChartLayout()) -> str:
    axis = axis_for(spec, layout)
    n = len(spec.labels)
    k = len(spec.series)
    height = layout.top + n * layout.row_height + layout.bottom
    width = layout.label_width + layout.plot_width + layout.right
    bar_h = (layout.row_height - 4) / k
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_f(width)}" height="{_f(height)}" '
        f'viewBox="0 0 {_f(width)} {_f(height)}" font-family="sans-serif" font-size="10">',
        f'<text x="{_f(width / 2)}" y="20" text-anchor="middle" font-size="12">{escape(spec.title)}</text>',
    ]
    plot_bottom = layout.top + n * layout.row_height
    # gridlines and ticks
    span = axis.vmax - axis.vmin
    step = 0.1 if span <= 1 else 0.5 if span <= 5 else 1.0
    t = math.ceil(axis.vmin / step - 1e-9)
    while t * step <= axis.vmax + 1e-9:
        v = round(t * step, 10)
        x = axis.px(v)
        out.append(f'<line class="grid" x1="{_f(x)}" y1="{_f(layout.top)}" x2="{_f(x)}" y2="{_f(plot_bottom)}" '
                   f'stroke="#dddddd"/>')
        out.append(f'<text x="{_f(x)}" y="{_f(plot_bottom + 14)}" text-anchor="middle">{v:g}</text>')
        t += 1
    zero = axis.px(0.0) if axis.vmin <= 0 <= axis.vmax else axis.px(axis.vmin)
    for i, label in enumerate(spec.labels):
        y_row = layout.top + i * layout.row_height
        out.append(f'<text class="label" x="{_f(layout.label_width - 6)}" y="{_f(y_row + layout.row_height / 2 + 3)}" '
                   f'text-anchor="end">{escape(str(label))}</text>')
        for si, s in enumerate(spec.series):
            v = s.values[i]
            if v is None:
                continue
            y = y_row + 2 + si * bar_h
            x = axis.px(v)
            out.append(f'<rect class="bar" data-series="{escape(s.name)}" x="{_f(min(x, zero))}" y="{_f(y)}" '
                       f'width="{_f(abs(x - zero))}" height="{_f(bar_h)}" fill="{PALETTE[si % len(PALETTE)]}"/>')
            if s.ci_low is not None and s.ci_low[i] is not None and s.ci_high[i] is not None:
                xl, xh = axis.px(s.ci_low[i]), axis.px(s.ci_high[i])
                ym = y + bar_h / 2
                out.append(f'<line class="whisker" x1="{_f(xl)}" y1="{_f(ym)}" x2="{_f(xh)}" y2="{_f(ym)}" '
                           f'stroke="black"/>')
                for xc in (xl, xh):
                    out.append(f'<line class="cap" x1="{_f(xc)}" y1="{_f(y)}" x2="{_f(xc)}" y2="{_f(y + bar_h)}" '
                               f'stroke="black"/>')
    out.append(f'<line class="axis" x1="{_f(zero)}" y1="{_f(layout.top)}" x2="{_f(zero)}" y2="{_f(plot_bottom)}" '
               f'stroke="black"/>')
    out.append(f'<text x="{_f(axis.x0 + axis.width / 2)}" y="{_f(plot_bottom + 32)}" '
               f'text-anchor="middle">{escape(spec.x_label)}</text>')
    if k > 1:
        for si, s in enumerate(spec.series):
            x = layout.label_width + si * 110
            out.append(f'<rect x="{_f(x)}" y="26" width="10" height="8" fill="{PALETTE[si % len(PALETTE)]}"/>')
            out.append(f'<text x="{_f(x + 14)}" y="34">{escape(s.name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_chart(spec: ChartSpec, path) -> Path:
    with _open(path) as fh:
        fh.write(render_bar_chart(spec))
    return Path(path)
