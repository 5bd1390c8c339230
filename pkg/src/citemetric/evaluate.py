"""Rank correlations of indicator values against gold-standard scores."""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .indicators import IndicatorMatrix, Reason
from .model import ALL, CorrelationRecord, GoldStandard, IndicatorId, Status

POOLED_YEARS = "pooled_years"
PER_YEAR = "per_year"
POOLED_GROUP = "ALL"


class DegenerateCIError(ValueError):
    pass


@dataclass(frozen=True)
class EvaluationConfig:
    min_n_corr: int = 2
    min_n_ci: int = 4
    ci_level: float = 0.95
    weighting: str = "group_size"
    pooled_dedup: bool = True

    def __post_init__(self):
        if self.min_n_corr < 2:
            raise ValueError("min_n_corr must be at least 2")
        if self.min_n_ci < max(4, self.min_n_corr):
            raise ValueError("min_n_ci must be at least 4 and at least min_n_corr")
        if not 0 < self.ci_level < 1:
            raise ValueError("ci_level must be in (0, 1)")
        if self.weighting != "group_size":
            raise ValueError(f"unsupported weighting {self.weighting!r}")


def midranks(values) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    a = np.asarray(values, dtype=np.float64)
    n = len(a)
    order = np.argsort(a, kind="mergesort")
    s = a[order]
    bounds = np.flatnonzero(np.r_[True, s[1:] != s[:-1], True])
    avg = (bounds[:-1] + bounds[1:] + 1) / 2.0
    ranks = np.empty(n)
    ranks[order] = np.repeat(avg, np.diff(bounds))
    return ranks


def spearman(xs, ys) -> float | None:
    """Mid-rank Spearman correlation, or None when either side is constant."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"need two equal-length sequences, got {x.shape} and {y.shape}")
    if len(x) < 2:
        raise ValueError("need at least two pairs")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("non-finite input")
    rx = midranks(x)
    ry = midranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    sxx = float(rx @ rx)
    syy = float(ry @ ry)
    if sxx == 0 or syy == 0:
        return None
    rho = float(rx @ ry) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, rho))


def z_critical(level: float) -> float:
    return NormalDist().inv_cdf(0.5 + level / 2)


def fisher_ci(rho: float, n: int, level: float = 0.95) -> tuple[float, float]:
    if n < 4:
        raise DegenerateCIError(f"n={n} too small for a Fisher interval")
    if abs(rho) >= 1:
        raise DegenerateCIError("rho at +-1 has no Fisher interval")
    z = math.atanh(rho)
    half = z_critical(level) / math.sqrt(n - 3)
    return math.tanh(z - half), math.tanh(z + half)


def correlation_record(indicator, group, year, x, y, config: EvaluationConfig) -> CorrelationRecord:
    n = len(x)
    if n < config.min_n_corr:
        return CorrelationRecord(indicator, group, year, n, None, None, None, Status.INSUFFICIENT_N)
    rho = spearman(x, y)
    if rho is None:
        return CorrelationRecord(indicator, group, year, n, None, None, None, Status.ZERO_VARIANCE)
    if n < config.min_n_ci or abs(rho) >= 1:
        return CorrelationRecord(indicator, group, year, n, rho, None, None, Status.DEGENERATE_CI)
    lo, hi = fisher_ci(rho, n, config.ci_level)
    return CorrelationRecord(indicator, group, year, n, rho, lo, hi, Status.OK)


def _gold_rows(matrix: IndicatorMatrix, gold: GoldStandard):
    """(matrix row, group, score) for every gold article present in the matrix."""
    out = []
    for i, wid in enumerate(matrix.work_ids):
        by_group = gold.entries.get(wid)
        if by_group:
            for g, score in by_group.items():
                out.append((i, g, score))
    return out


def _cells(matrix: IndicatorMatrix, gold: GoldStandard, year_mode: str):
    """Map cell key -> (matrix rows, gold scores); key is (group, year)."""
    if year_mode not in (POOLED_YEARS, PER_YEAR):
        raise ValueError(f"unknown year_mode {year_mode!r}")
    rows, scores = defaultdict(list), defaultdict(list)
    for i, g, score in _gold_rows(matrix, gold):
        key = (g, ALL if year_mode == POOLED_YEARS else int(matrix.years[i]))
        rows[key].append(i)
        scores[key].append(score)
    return {k: (np.asarray(rows[k], dtype=np.int64), np.asarray(scores[k])) for k in rows}


def cell_sizes(matrix: IndicatorMatrix, gold: GoldStandard, year_mode: str) -> dict:
    """Number of gold articles per group (or per (group, year) cell)."""
    sizes = {k: len(r) for k, (r, _) in _cells(matrix, gold, year_mode).items()}
    if year_mode == POOLED_YEARS:
        return {g: n for (g, _), n in sizes.items()}
    return sizes


def _correlate_cells(matrix, cells, config, threads):
    def per_indicator(j):
        ind = matrix.indicators[j]
        out = []
        for (group, year), (rows, scores) in cells:
            ok = matrix.reasons[rows, j] == Reason.DEFINED
            out.append(correlation_record(ind, group, year, matrix.values[rows[ok], j], scores[ok], config))
        return out

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        records = [r for chunk in pool.map(per_indicator, range(len(matrix.indicators))) for r in chunk]
    return sorted(records, key=CorrelationRecord.sort_key)


def correlate_by_group(
    matrix: IndicatorMatrix,
    gold: GoldStandard,
    config: EvaluationConfig | None = None,
    year_mode: str = POOLED_YEARS,
    threads: int = 1,
) -> list[CorrelationRecord]:
    """One record per (indicator, group), or per (indicator, group, year).

    Articles in several groups count towards each. Undefined indicator
    values are dropped per indicator, so ``n`` can differ across indicators.
    """
    config = config or EvaluationConfig()
    cells = sorted(_cells(matrix, gold, year_mode).items(), key=lambda kv: str(kv[0]))
    return _correlate_cells(matrix, cells, config, threads)


def pooled_correlation(
    matrix: IndicatorMatrix, gold: GoldStandard, config: EvaluationConfig | None = None, threads: int = 1
) -> list[CorrelationRecord]:
    config = config or EvaluationConfig()
    if config.pooled_dedup:
        rows, scores = [], []
        for i, wid in enumerate(matrix.work_ids):
            if wid in gold.entries:
                rows.append(i)
                scores.append(gold.score(wid))
    else:
        pairs = _gold_rows(matrix, gold)
        rows = [i for i, _, _ in pairs]
        scores = [s for _, _, s in pairs]
    cell = ((POOLED_GROUP, ALL), (np.asarray(rows, dtype=np.int64), np.asarray(scores, dtype=np.float64)))
    return _correlate_cells(matrix, [cell], config, threads)


@dataclass(frozen=True)
class WeightedMean:
    indicator: IndicatorId
    rho: float | None
    total_weight: float
    n_cells: int


def weighted_mean_correlations(records, group_sizes, year_mode: str = POOLED_YEARS) -> dict[IndicatorId, WeightedMean]:
    """Per-indicator mean of ``ok`` correlations weighted by cell size.

    ``group_sizes`` is keyed by group for pooled years and by (group, year)
    for per-year records.
    """
    acc: dict = {}
    for rec in records:
        entry = acc.setdefault(rec.indicator, [0.0, 0.0, 0])
        if rec.status is not Status.OK:
            continue
        key = rec.group if year_mode == POOLED_YEARS else (rec.group, rec.year)
        w = group_sizes[key]
        if w <= 0:
            raise ValueError(f"non-positive weight for {key}")
        entry[0] += w * rec.rho
        entry[1] += w
        entry[2] += 1
    return {
        ind: WeightedMean(ind, s / w if w > 0 else None, w, k)
        for ind, (s, w, k) in sorted(acc.items(), key=lambda kv: kv[0].sort_key())
    }
