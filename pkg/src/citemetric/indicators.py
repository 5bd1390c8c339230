"""Count, NCS and NLCS indicator values for every article.

Denominators are means over (class code, publication year) cells of the
reference set, with whole counting for multi-class schemes: an article
carrying k codes contributes its full (transformed) count to each of the k
cells.  For such an article the score is the mean of its per-code ratios.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .matchset import Corpus
from .model import (
    CitemetricError,
    DenominatorContext,
    DenominatorTable,
    Formula,
    IndicatorId,
    RefSet,
    ReferenceSet,
    Scheme,
    Source,
    WorkRecord,
    enumerate_valid_indicators,
)


class InconsistencyError(CitemetricError):
    """A denominator cell the article needs is missing."""


class Reason(enum.IntEnum):
    DEFINED = 0
    NOT_IN_REFSET = 1
    NO_CLASS_FOR_SCHEME = 2
    ZERO_DENOMINATOR = 3

    @property
    def label(self) -> str:
        return self.name.lower()


def transform_count(c, formula: Formula):
    if c < 0:
        raise ValueError(f"negative citation count {c}")
    if formula is Formula.NLCS:
        return math.log1p(c)
    return c


def _in_refset(present_in, refset: RefSet) -> bool:
    if refset is RefSet.BOTH:
        return Source.OALEX in present_in and Source.SCOPUS in present_in
    return Source(refset.value) in present_in


# --- column-wise machinery ---------------------------------------------------


def _transformed(corpus: Corpus, source: Source, formula: Formula) -> np.ndarray:
    c = np.maximum(corpus.citations[source], 0).astype(np.float64)
    return np.log1p(c) if formula is Formula.NLCS else c


def _mask(corpus: Corpus, refset) -> np.ndarray:
    if isinstance(refset, ReferenceSet):
        members = refset.members
        return np.fromiter((w in members for w in corpus.work_ids), dtype=bool, count=len(corpus))
    return corpus.refset_mask(RefSet(refset))


class _Grid:
    """Dense (code, year) cell layout for one scheme of one corpus."""

    def __init__(self, corpus: Corpus, scheme: Scheme):
        self.scheme = scheme
        self.names = corpus.code_names[scheme]
        self.index = {name: i for i, name in enumerate(self.names)}
        years = corpus.year
        self.y0 = int(years.min()) if len(years) else 0
        self.n_years = int(years.max()) - self.y0 + 1 if len(years) else 1
        self.size = len(self.names) * self.n_years
        yi = corpus.year.astype(np.int64) - self.y0
        if scheme.multi_class:
            lengths = np.diff(corpus.multi_offsets)
            self.rows = np.repeat(np.arange(len(corpus)), lengths)  # one entry per assignment
            self.keys = corpus.multi_codes.astype(np.int64) * self.n_years + yi[self.rows]
            self.has_code = lengths > 0
        else:
            code = corpus.codes[scheme].astype(np.int64)
            self.has_code = code >= 0
            self.rows = np.flatnonzero(self.has_code)
            self.keys = code[self.rows] * self.n_years + yi[self.rows]

    def cell(self, key: int) -> tuple[str, int]:
        return self.names[key // self.n_years], self.y0 + key % self.n_years

    def key(self, code: str, year: int) -> int | None:
        i = self.index.get(code)
        if i is None or not 0 <= year - self.y0 < self.n_years:
            return None
        return i * self.n_years + (year - self.y0)


def _accumulate(grid: _Grid, t: np.ndarray, mask: np.ndarray):
    # bincount adds in assignment order, which follows ascending work id
    keep = mask[grid.rows]
    rows, keys = grid.rows[keep], grid.keys[keep]
    sums = np.bincount(keys, weights=t[rows], minlength=grid.size)
    counts = np.bincount(keys, minlength=grid.size)
    return sums, counts


def compute_denominators(
    corpus: Corpus | Iterable[WorkRecord],
    refset: RefSet | ReferenceSet,
    scheme: Scheme,
    source: Source,
    formula: Formula,
    *,
    _grid: _Grid | None = None,
) -> DenominatorTable:
    if not isinstance(corpus, Corpus):
        corpus = Corpus.from_records(corpus)
    refset_id = refset.refset_id if isinstance(refset, ReferenceSet) else RefSet(refset)
    context = DenominatorContext(Source(source), Formula(formula), refset_id, Scheme(scheme))
    grid = _grid or _Grid(corpus, context.scheme)
    mask = _mask(corpus, refset) & corpus.present(context.source)
    sums, counts = _accumulate(grid, _transformed(corpus, context.source, context.formula), mask)
    cells = {}
    for key in np.flatnonzero(counts):
        n = int(counts[key])
        cells[grid.cell(int(key))] = (float(sums[key] / n), n)
    return DenominatorTable(context, cells)


def compute_all_denominators(corpus: Corpus, refsets=None, threads: int = 1) -> dict[DenominatorContext, DenominatorTable]:
    refsets = refsets or {}
    contexts = sorted(
        {DenominatorContext.of(ind) for ind in enumerate_valid_indicators() if ind.normalized},
        key=lambda c: (c.source.value, c.formula.value, c.refset.value, c.scheme.value),
    )
    grids = {s: _Grid(corpus, s) for s in {c.scheme for c in contexts}}

    def one(ctx):
        return compute_denominators(corpus, refsets.get(ctx.refset, ctx.refset), ctx.scheme, ctx.source, ctx.formula,
                                    _grid=grids[ctx.scheme])

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        tables = list(pool.map(one, contexts))
    return dict(zip(contexts, tables))


def score_article(record: WorkRecord, indicator: IndicatorId, denominators: DenominatorTable | None = None):
    """Value of one indicator for one article, or the ``Reason`` it is undefined."""
    if indicator.formula is Formula.COUNT:
        c = record.citations.get(indicator.source)
        return Reason.NOT_IN_REFSET if c is None else c
    if not _in_refset(record.present_in, indicator.refset) or indicator.source not in record.citations:
        return Reason.NOT_IN_REFSET
    codes = record.codes(indicator.scheme)
    if not codes:
        return Reason.NO_CLASS_FOR_SCHEME
    if denominators is None or denominators.context != DenominatorContext.of(indicator):
        raise InconsistencyError(f"no denominators for {indicator}")
    t = transform_count(record.citations[indicator.source], indicator.formula)
    ratios = []
    for code in codes:
        cell = denominators.cells.get((code, record.year))
        if cell is None:
            raise InconsistencyError(f"{record.work_id}: no {indicator} denominator for ({code}, {record.year})")
        if cell[0] == 0:
            return Reason.ZERO_DENOMINATOR
        ratios.append(t / cell[0])
    return sum(ratios) / len(ratios)


@dataclass(frozen=True)
class IndicatorMatrix:
    """Per-article values for all indicators; NaN where undefined."""

    work_ids: list
    dois: list
    years: np.ndarray
    indicators: list
    values: np.ndarray  # (n_articles, n_indicators) float64
    reasons: np.ndarray  # same shape, Reason codes as int8

    def __len__(self) -> int:
        return len(self.work_ids)

    def column_index(self, indicator: IndicatorId) -> int:
        return self.indicators.index(indicator)

    def get(self, work_id: str, indicator: IndicatorId):
        i = self.work_ids.index(work_id)
        j = self.column_index(indicator)
        reason = Reason(int(self.reasons[i, j]))
        return float(self.values[i, j]) if reason is Reason.DEFINED else reason

    def subset(self, rows) -> "IndicatorMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        return IndicatorMatrix(
            [self.work_ids[i] for i in rows],
            [self.dois[i] for i in rows],
            self.years[rows],
            self.indicators,
            self.values[rows],
            self.reasons[rows],
        )


def _dense_means(table: DenominatorTable, grid: _Grid) -> np.ndarray:
    dense = np.full(grid.size, np.nan)
    for (code, year), (mean, _n) in table.cells.items():
        key = grid.key(code, year)
        if key is not None:
            dense[key] = mean
    return dense


def _score_column(corpus, grid, indicator, mask, table, values, reasons):
    n = len(corpus)
    t = _transformed(corpus, indicator.source, indicator.formula)
    in_ref = mask & corpus.present(indicator.source)
    reasons[:] = np.where(in_ref, np.where(grid.has_code, Reason.DEFINED, Reason.NO_CLASS_FOR_SCHEME),
                          Reason.NOT_IN_REFSET)
    values[:] = np.nan

    dense = _dense_means(table, grid)
    keep = in_ref[grid.rows]
    rows, keys = grid.rows[keep], grid.keys[keep]
    means = dense[keys]
    if np.isnan(means).any():
        bad = int(np.flatnonzero(np.isnan(means))[0])
        code, year = grid.cell(int(keys[bad]))
        raise InconsistencyError(f"{corpus.work_ids[rows[bad]]}: no {indicator} denominator for ({code}, {year})")
    zero = means == 0
    ratio = np.divide(t[rows], means, out=np.zeros_like(means), where=~zero)
    if grid.scheme.multi_class:
        n_zero = np.bincount(rows, weights=zero, minlength=n)
        total = np.bincount(rows, weights=ratio, minlength=n)
        k = np.diff(corpus.multi_offsets)
        scored = np.flatnonzero(in_ref & grid.has_code)
        bad = scored[n_zero[scored] > 0]
        good = scored[n_zero[scored] == 0]
        values[good] = total[good] / k[good]
    else:
        bad, good = rows[zero], rows[~zero]
        values[good] = ratio[~zero]
    reasons[bad] = Reason.ZERO_DENOMINATOR


def score_all(
    corpus: Corpus,
    refsets: Mapping[RefSet, ReferenceSet] | None = None,
    denominators: Mapping[DenominatorContext, DenominatorTable] | None = None,
    threads: int = 1,
) -> IndicatorMatrix:
    refsets = refsets or {}
    if denominators is None:
        denominators = compute_all_denominators(corpus, refsets, threads)
    indicators = enumerate_valid_indicators()
    n = len(corpus)
    # column-major so each worker fills its own contiguous column in place
    values = np.full((n, len(indicators)), np.nan, order="F")
    reasons = np.zeros((n, len(indicators)), dtype=np.int8, order="F")
    masks = {r: _mask(corpus, refsets.get(r, r)) for r in RefSet}
    grids = {s: _Grid(corpus, s) for s in Scheme}

    def one(j):
        ind = indicators[j]
        col_v = values[:, j]
        col_r = reasons[:, j]
        if ind.formula is Formula.COUNT:
            c = corpus.citations[ind.source]
            present = c >= 0
            col_v[:] = np.where(present, c, np.nan)
            col_r[:] = np.where(present, Reason.DEFINED, Reason.NOT_IN_REFSET)
        else:
            ctx = DenominatorContext.of(ind)
            if ctx not in denominators:
                raise InconsistencyError(f"no denominators supplied for {ind}")
            _score_column(corpus, grids[ind.scheme], ind, masks[ind.refset], denominators[ctx], col_v, col_r)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for _ in pool.map(one, range(len(indicators))):
            pass
    return IndicatorMatrix(list(corpus.work_ids), list(corpus.dois), corpus.year.copy(), indicators, values, reasons)
