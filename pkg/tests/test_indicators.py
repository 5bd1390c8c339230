import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from citemetric.indicators import (
    InconsistencyError,
    Reason,
    compute_all_denominators,
    compute_denominators,
    score_all,
    score_article,
    transform_count,
)
from citemetric.matchset import Corpus, build_reference_sets
from citemetric.model import (
    DenominatorContext,
    DenominatorTable,
    Formula,
    IndicatorId,
    RefSet,
    Scheme,
    Source,
    WorkRecord,
)

A, B = Source.OALEX, Source.SCOPUS
BOTH = frozenset({A, B})


def both_rec(wid, c, year=2016, field="F", asjc=("X",), cb=None):
    return WorkRecord(wid, wid, year, {A: c, B: c if cb is None else cb}, BOTH,
                      classes={Scheme.OA_FIELDS: (field,), Scheme.OA_DOMAINS: ("D",), Scheme.OA_SUBFIELDS: ("S",),
                               Scheme.OA_TOPICS: ("T",), Scheme.SCOPUS_ASJC: tuple(asjc)})


def test_transform_count():
    assert transform_count(0, Formula.NLCS) == 0.0
    assert transform_count(0, Formula.NCS) == 0
    assert transform_count(9, Formula.NLCS) == pytest.approx(2.302585092994046, abs=1e-15)
    with pytest.raises(ValueError):
        transform_count(-1, Formula.NCS)


class TestDenominators:
    recs = [both_rec("10.1/a", 0), both_rec("10.1/b", 3), both_rec("10.1/c", 9)]

    def test_ncs_cell(self):
        t = compute_denominators(self.recs, RefSet.BOTH, Scheme.OA_FIELDS, A, Formula.NCS)
        assert t.cells == {("F", 2016): (4.0, 3)}

    def test_nlcs_cell(self):
        t = compute_denominators(self.recs, RefSet.BOTH, Scheme.OA_FIELDS, A, Formula.NLCS)
        mean, n = t.cells[("F", 2016)]
        assert n == 3
        assert mean == pytest.approx(1.2296264847046456, abs=1e-12)

    def test_whole_counting(self):
        recs = [both_rec("10.1/m", 4, asjc=("A", "B"))]
        t = compute_denominators(recs, RefSet.BOTH, Scheme.SCOPUS_ASJC, B, Formula.NCS)
        assert t.cells == {("A", 2016): (4.0, 1), ("B", 2016): (4.0, 1)}

    def test_removing_one_code_changes_one_cell(self):
        recs = oracles.random_records(random.Random(5), 200)
        idx = next(i for i, r in enumerate(recs) if len(r.codes(Scheme.SCOPUS_ASJC)) >= 2)
        before = compute_denominators(recs, RefSet.SCOPUS, Scheme.SCOPUS_ASJC, B, Formula.NCS)
        r = recs[idx]
        dropped = r.codes(Scheme.SCOPUS_ASJC)[0]
        recs[idx] = WorkRecord(r.work_id, r.doi, r.year, r.citations, r.present_in,
                               classes={**r.classes, Scheme.SCOPUS_ASJC: r.codes(Scheme.SCOPUS_ASJC)[1:]})
        after = compute_denominators(recs, RefSet.SCOPUS, Scheme.SCOPUS_ASJC, B, Formula.NCS)
        key = (dropped, r.year)
        for k in set(before.cells) | set(after.cells):
            n0 = before.cells.get(k, (0, 0))[1]
            n1 = after.cells.get(k, (0, 0))[1]
            assert n0 - n1 == (1 if k == key else 0)

    def test_permutation_invariant_bitwise(self):
        recs = oracles.random_records(random.Random(8), 300)
        shuffled = recs[:]
        random.Random(1).shuffle(shuffled)
        for scheme in Scheme:
            for formula in (Formula.NCS, Formula.NLCS):
                t1 = compute_denominators(recs, RefSet.BOTH, scheme, A, formula)
                t2 = compute_denominators(shuffled, RefSet.BOTH, scheme, A, formula)
                assert t1.cells == t2.cells


class TestScoreArticle:
    def table(self, cells, scheme=Scheme.OA_FIELDS, source=A):
        return DenominatorTable(DenominatorContext(source, Formula.NCS, RefSet.BOTH, scheme), cells)

    def ind(self, scheme=Scheme.OA_FIELDS, source=A):
        return IndicatorId(source, Formula.NCS, RefSet.BOTH, scheme)

    def test_average_article_scores_one(self):
        assert score_article(both_rec("10.1/a", 4), self.ind(), self.table({("F", 2016): (4.0, 3)})) == 1.0

    def test_ratio(self):
        assert score_article(both_rec("10.1/a", 3), self.ind(), self.table({("F", 2016): (4.0, 3)})) == 0.75

    def test_mean_of_ratios_for_multi_class(self):
        r = both_rec("10.1/a", 4, asjc=("A", "B"))
        t = self.table({("A", 2016): (2.0, 1), ("B", 2016): (8.0, 1)}, Scheme.SCOPUS_ASJC, B)
        assert score_article(r, self.ind(Scheme.SCOPUS_ASJC, B), t) == 1.25

    def test_zero_denominator(self):
        assert score_article(both_rec("10.1/a", 0), self.ind(), self.table({("F", 2016): (0.0, 2)})) \
            is Reason.ZERO_DENOMINATOR

    def test_missing_cell_is_inconsistency(self):
        with pytest.raises(InconsistencyError):
            score_article(both_rec("10.1/a", 3), self.ind(), self.table({("G", 2016): (4.0, 3)}))

    def test_not_in_refset_and_no_class(self):
        a_only = WorkRecord("10.1/z", "10.1/z", 2016, {A: 2}, frozenset({A}), classes={Scheme.OA_FIELDS: ()})
        assert score_article(a_only, self.ind(), None) is Reason.NOT_IN_REFSET
        assert score_article(a_only, IndicatorId(B, Formula.COUNT), None) is Reason.NOT_IN_REFSET
        assert score_article(a_only, IndicatorId(A, Formula.COUNT), None) == 2
        ind = IndicatorId(A, Formula.NCS, RefSet.OALEX, Scheme.OA_FIELDS)
        assert score_article(a_only, ind, None) is Reason.NO_CLASS_FOR_SCHEME


def matrix_vs_oracle(records, threads=1):
    corpus = Corpus.from_records(records)
    matrix = score_all(corpus, build_reference_sets(corpus), threads=threads)
    expected = oracles.naive_scores(records)
    for i, wid in enumerate(matrix.work_ids):
        for j, ind in enumerate(matrix.indicators):
            want = expected[(wid, ind)]
            reason = Reason(int(matrix.reasons[i, j]))
            if isinstance(want, str):
                assert reason.label == want, (wid, str(ind))
                assert math.isnan(matrix.values[i, j])
            else:
                assert reason is Reason.DEFINED, (wid, str(ind), reason)
                assert abs(matrix.values[i, j] - want) <= 1e-9, (wid, str(ind))
    return matrix


def test_score_all_matches_oracle():
    matrix = matrix_vs_oracle(oracles.random_records(random.Random(21), 1000))
    assert matrix.values.shape == (1000, 32)
    assert {0, 1, 2} <= set(np.unique(matrix.reasons).tolist())


def test_zero_cell_in_matrix_matches_oracle():
    records = [both_rec("10.1/a", 0, field="Z"), both_rec("10.1/b", 0, field="Z"), both_rec("10.1/c", 5)]
    matrix = matrix_vs_oracle(records)
    j = matrix.column_index(IndicatorId(A, Formula.NCS, RefSet.BOTH, Scheme.OA_FIELDS))
    assert matrix.reasons[:2, j].tolist() == [Reason.ZERO_DENOMINATOR] * 2


def test_score_article_agrees_with_score_all():
    records = oracles.random_records(random.Random(2), 150)
    corpus = Corpus.from_records(records)
    tables = compute_all_denominators(corpus)
    matrix = score_all(corpus, denominators=tables)
    for i, rec in enumerate(corpus):
        for j, ind in enumerate(matrix.indicators):
            got = score_article(rec, ind, tables.get(DenominatorContext.of(ind)) if ind.normalized else None)
            if isinstance(got, Reason):
                assert matrix.reasons[i, j] == got
            else:
                assert matrix.values[i, j] == pytest.approx(got, abs=1e-12)


def test_a_only_article_columns():
    records = oracles.random_records(random.Random(9), 100)
    corpus = Corpus.from_records(records)
    matrix = score_all(corpus)
    for i, rec in enumerate(corpus):
        if rec.present_in != {A}:
            continue
        for j, ind in enumerate(matrix.indicators):
            if ind.source is B or ind.refset in (RefSet.SCOPUS, RefSet.BOTH):
                assert matrix.reasons[i, j] == Reason.NOT_IN_REFSET


def test_no_topic_article_columns():
    records = oracles.random_records(random.Random(9), 200)
    corpus = Corpus.from_records(records)
    matrix = score_all(corpus)
    topic_cols = [j for j, ind in enumerate(matrix.indicators) if ind.scheme is Scheme.OA_TOPICS]
    assert len(topic_cols) == 6
    for i, rec in enumerate(corpus):
        if rec.present_in == BOTH and not rec.codes(Scheme.OA_TOPICS):
            assert all(matrix.reasons[i, j] == Reason.NO_CLASS_FOR_SCHEME for j in topic_cols)


def test_missing_denominators_rejected():
    corpus = Corpus.from_records(oracles.random_records(random.Random(1), 30))
    with pytest.raises(InconsistencyError):
        score_all(corpus, denominators={})


def test_threads_give_identical_matrix():
    corpus = Corpus.from_records(oracles.random_records(random.Random(4), 500))
    m1 = score_all(corpus, threads=1)
    m4 = score_all(corpus, threads=4)
    assert m1.values.tobytes() == m4.values.tobytes()
    assert m1.reasons.tobytes() == m4.reasons.tobytes()


def cells_of(corpus, ind):
    """(code, year) -> matrix rows for a single-class indicator."""
    out = {}
    for i, rec in enumerate(corpus):
        codes = rec.codes(ind.scheme)
        if codes:
            out.setdefault((codes[0], rec.year), []).append(i)
    return out


def test_mean_one_property():
    corpus = Corpus.from_records(oracles.random_records(random.Random(13), 800))
    matrix = score_all(corpus)
    tables = compute_all_denominators(corpus)
    checked = 0
    for j, ind in enumerate(matrix.indicators):
        if not ind.normalized or ind.scheme.multi_class:
            continue
        for cell, (mean, n) in tables[DenominatorContext.of(ind)].cells.items():
            if mean <= 0:
                continue
            rows = [i for i in cells_of(corpus, ind)[cell] if matrix.reasons[i, j] == Reason.DEFINED]
            assert len(rows) == n
            assert abs(np.mean(matrix.values[rows, j]) - 1.0) <= 1e-9
            checked += 1
    assert checked > 100


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 500), min_size=2, max_size=25), st.sampled_from([2, 3, 10]))
def test_scale_invariance_ncs_not_nlcs(counts, k):
    recs = [both_rec(f"10.1/{i:03d}", c) for i, c in enumerate(counts)]
    other = [both_rec(f"10.2/{i:03d}", c + 1, field="G") for i, c in enumerate(counts)]
    scaled = [both_rec(r.work_id, r.citations[A] * k) for r in recs]
    m1 = score_all(Corpus.from_records(recs + other))
    m2 = score_all(Corpus.from_records(scaled + other))
    n = len(recs)
    for j, ind in enumerate(m1.indicators):
        if ind.formula is Formula.NCS and ind.scheme is Scheme.OA_FIELDS:
            if m1.reasons[0, j] == Reason.DEFINED:
                assert np.allclose(m1.values[:n, j], m2.values[:n, j], rtol=0, atol=1e-12)
    if len(set(counts) - {0}) > 1:
        j = m1.column_index(IndicatorId(A, Formula.NLCS, RefSet.BOTH, Scheme.OA_FIELDS))
        assert np.any(np.abs(m1.values[:n, j] - m2.values[:n, j]) > 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 200), min_size=2, max_size=30))
def test_within_cell_ranks_follow_counts(counts):
    recs = [both_rec(f"10.1/{i:03d}", c) for i, c in enumerate(counts)]
    m = score_all(Corpus.from_records(recs))
    raw = np.asarray(counts, dtype=float)
    for j, ind in enumerate(m.indicators):
        if ind.normalized and ind.source is A and m.reasons[0, j] == Reason.DEFINED:
            v = m.values[:, j]
            assert (np.sign(np.subtract.outer(v, v)) == np.sign(np.subtract.outer(raw, raw))).all()
