"""DOI linkage of the two indexes and the normalization reference sets.

The linked corpus is held column-wise (numpy arrays plus interned class
codes) so that tens of millions of articles fit in memory; individual
``WorkRecord`` values are materialized on demand.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .model import OA_SCHEMES, DataError, RefSet, ReferenceSet, Scheme, Source, WorkRecord

SOURCE_A = Source.OALEX
SOURCE_B = Source.SCOPUS


class LinkageError(DataError):
    pass


@dataclass(frozen=True)
class LinkCounts:
    source_a: int = 0
    source_b: int = 0
    both: int = 0
    a_only: int = 0
    b_only: int = 0
    total: int = 0

    def holds(self) -> bool:
        return (
            self.total == self.both + self.a_only + self.b_only
            and self.source_a == self.both + self.a_only
            and self.source_b == self.both + self.b_only
        )


@dataclass(frozen=True)
class LinkageReport:
    overall: LinkCounts
    per_year: dict = field(default_factory=dict)  # year -> LinkCounts

    def __getattr__(self, name):
        # n_both, n_a_only, ... mirror the overall counts
        if name.startswith("n_"):
            return getattr(self.overall, name[2:])
        raise AttributeError(name)

    @classmethod
    def from_masks(cls, years: np.ndarray, in_a: np.ndarray, in_b: np.ndarray) -> "LinkageReport":
        def counts(sel):
            a, b = in_a[sel], in_b[sel]
            both = int(np.count_nonzero(a & b))
            a_only = int(np.count_nonzero(a & ~b))
            b_only = int(np.count_nonzero(b & ~a))
            return LinkCounts(both + a_only, both + b_only, both, a_only, b_only, both + a_only + b_only)

        per_year = {int(y): counts(years == y) for y in np.unique(years)}
        return cls(counts(slice(None)), per_year)


class Corpus:
    """Immutable, work-id-sorted, column-oriented set of linked records."""

    def __init__(self, work_ids, dois, year, citations, code_names, codes, multi_offsets, multi_codes, abstract_length):
        self.work_ids: list[str] = work_ids
        self.dois: list = dois
        self.year: np.ndarray = year
        self.citations: dict[Source, np.ndarray] = citations  # -1 where absent
        self.code_names: dict[Scheme, list[str]] = code_names
        self.codes: dict[Scheme, np.ndarray] = codes  # single-class schemes, -1 where absent
        self.multi_offsets: np.ndarray = multi_offsets  # CSR rows for scopus_asjc
        self.multi_codes: np.ndarray = multi_codes
        self.abstract_length: np.ndarray = abstract_length  # -1 where absent
        for arr in (year, multi_offsets, multi_codes, abstract_length, *citations.values(), *codes.values()):
            arr.setflags(write=False)
        self._index = None

    def __len__(self) -> int:
        return len(self.work_ids)

    def present(self, source: Source) -> np.ndarray:
        return self.citations[source] >= 0

    def refset_mask(self, refset: RefSet) -> np.ndarray:
        if refset is RefSet.OALEX:
            return self.present(Source.OALEX)
        if refset is RefSet.SCOPUS:
            return self.present(Source.SCOPUS)
        return self.present(Source.OALEX) & self.present(Source.SCOPUS)

    def index_of(self, work_id: str) -> int:
        if self._index is None:
            self._index = {w: i for i, w in enumerate(self.work_ids)}
        return self._index[work_id]

    def __contains__(self, work_id) -> bool:
        try:
            self.index_of(work_id)
        except KeyError:
            return False
        return True

    def record(self, i: int) -> WorkRecord:
        citations = {s: int(c[i]) for s, c in self.citations.items() if c[i] >= 0}
        classes = {}
        for scheme in OA_SCHEMES:
            code = int(self.codes[scheme][i])
            if code >= 0:
                classes[scheme] = (self.code_names[scheme][code],)
            elif Source.OALEX in citations:
                classes[scheme] = ()
        lo, hi = self.multi_offsets[i], self.multi_offsets[i + 1]
        if hi > lo or Source.SCOPUS in citations:
            names = self.code_names[Scheme.SCOPUS_ASJC]
            classes[Scheme.SCOPUS_ASJC] = tuple(names[c] for c in self.multi_codes[lo:hi])
        abstract = int(self.abstract_length[i])
        return WorkRecord(
            work_id=self.work_ids[i],
            doi=self.dois[i],
            year=int(self.year[i]),
            citations=citations,
            present_in=frozenset(citations),
            classes=classes,
            abstract_length=abstract if abstract >= 0 else None,
        )

    def __iter__(self) -> Iterator[WorkRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def get(self, work_id: str) -> WorkRecord:
        return self.record(self.index_of(work_id))

    @classmethod
    def from_records(cls, records: Iterable[WorkRecord]) -> "Corpus":
        b = _Builder()
        for rec in records:
            b.add(rec)
        return b.build()


class _Builder:
    """Accumulates rows in compact arrays; codes are interned per scheme."""

    def __init__(self):
        self.work_ids: list[str] = []
        self.dois: list = []
        self.year = array("i")
        self.cites = {s: array("q") for s in Source}
        self.abstract = array("q")
        self.interned: dict[Scheme, dict[str, int]] = {s: {} for s in Scheme}
        self.single = {s: array("i") for s in OA_SCHEMES}
        self.multi: list[tuple] = []
        self._combos: dict[tuple, tuple] = {}

    def _intern(self, scheme, code) -> int:
        table = self.interned[scheme]
        idx = table.get(code)
        if idx is None:
            idx = table[code] = len(table)
        return idx

    def add(self, rec: WorkRecord) -> int:
        row = len(self.work_ids)
        self.work_ids.append(rec.work_id)
        # share one string object when the DOI is the work id
        self.dois.append(rec.work_id if rec.doi == rec.work_id else rec.doi)
        self.year.append(rec.year)
        for s in Source:
            self.cites[s].append(rec.citations.get(s, -1))
        self.abstract.append(-1 if rec.abstract_length is None else rec.abstract_length)
        for scheme in OA_SCHEMES:
            codes = rec.codes(scheme)
            self.single[scheme].append(self._intern(scheme, codes[0]) if codes else -1)
        combo = tuple(self._intern(Scheme.SCOPUS_ASJC, c) for c in rec.codes(Scheme.SCOPUS_ASJC))
        self.multi.append(self._combos.setdefault(combo, combo))
        return row

    def merge(self, row: int, rec: WorkRecord):
        """Fold the Scopus view of an already-added DOI into ``row``."""
        for s, c in rec.citations.items():
            self.cites[s][row] = c
        # Scopus abstracts take precedence on merged records
        if rec.abstract_length is not None:
            self.abstract[row] = rec.abstract_length
        for scheme in OA_SCHEMES:
            codes = rec.codes(scheme)
            if codes and self.single[scheme][row] < 0:
                self.single[scheme][row] = self._intern(scheme, codes[0])
        extra = rec.codes(Scheme.SCOPUS_ASJC)
        if extra:
            merged = {c: None for c in self.multi[row]}
            merged.update((self._intern(Scheme.SCOPUS_ASJC, c), None) for c in extra)
            combo = tuple(merged)
            self.multi[row] = self._combos.setdefault(combo, combo)

    def build(self) -> Corpus:
        n = len(self.work_ids)
        order = sorted(range(n), key=self.work_ids.__getitem__)
        for a, b in zip(order, order[1:]):
            if self.work_ids[a] == self.work_ids[b]:
                raise LinkageError(f"duplicate work id {self.work_ids[a]!r}")
        perm = np.asarray(order, dtype=np.int64)

        code_names, remap = {}, {}
        for scheme, table in self.interned.items():
            names = sorted(table)
            code_names[scheme] = names
            lookup = np.empty(len(table), dtype=np.int32)
            for new, name in enumerate(names):
                lookup[table[name]] = new
            remap[scheme] = lookup

        def take(arr, dtype):
            return np.frombuffer(arr, dtype=dtype)[perm].copy() if n else np.empty(0, dtype)

        codes = {}
        for scheme in OA_SCHEMES:
            raw = take(self.single[scheme], np.int32)
            out = np.full(n, -1, dtype=np.int32)
            has = raw >= 0
            out[has] = remap[scheme][raw[has]]
            codes[scheme] = out

        asjc = remap[Scheme.SCOPUS_ASJC]
        lengths = np.zeros(n + 1, dtype=np.int64)
        flat = []
        for new_row, old_row in enumerate(order):
            row_codes = sorted(int(asjc[c]) for c in self.multi[old_row])
            lengths[new_row + 1] = len(row_codes)
            flat.extend(row_codes)
        return Corpus(
            work_ids=[self.work_ids[i] for i in order],
            dois=[self.dois[i] for i in order],
            year=take(self.year, np.int32),
            citations={s: take(self.cites[s], np.int64) for s in Source},
            code_names=code_names,
            codes=codes,
            multi_offsets=np.cumsum(lengths),
            multi_codes=np.asarray(flat, dtype=np.int32),
            abstract_length=take(self.abstract, np.int64),
        )


def link_by_doi(stream_a: Iterable[WorkRecord], stream_b: Iterable[WorkRecord]) -> tuple[Corpus, LinkageReport]:
    """Merge two single-source record streams on DOI.

    Within a source a DOI must be unique. Records without a DOI are kept
    but never matched.
    """
    builder = _Builder()
    by_doi: dict[str, int] = {}
    for rec in stream_a:
        _check_source(rec, SOURCE_A)
        if rec.doi is not None and rec.doi in by_doi:
            raise LinkageError(f"duplicate DOI {rec.doi} in {SOURCE_A.value}")
        row = builder.add(rec)
        if rec.doi is not None:
            by_doi[rec.doi] = row
    n_a_rows = len(builder.work_ids)
    for rec in stream_b:
        _check_source(rec, SOURCE_B)
        row = by_doi.get(rec.doi) if rec.doi is not None else None
        if row is None:
            new_row = builder.add(rec)
            if rec.doi is not None:
                by_doi[rec.doi] = new_row
        elif row >= n_a_rows or builder.cites[SOURCE_B][row] >= 0:
            raise LinkageError(f"duplicate DOI {rec.doi} in {SOURCE_B.value}")
        else:
            builder.merge(row, rec)
    corpus = builder.build()
    report = LinkageReport.from_masks(corpus.year, corpus.present(SOURCE_A), corpus.present(SOURCE_B))
    return corpus, report


def _check_source(rec: WorkRecord, source: Source) -> WorkRecord:
    if rec.present_in != {source}:
        got = sorted(s.value for s in rec.present_in)
        raise LinkageError(f"{rec.work_id}: expected a {source.value}-only record, got {got}")
    return rec


def build_reference_sets(corpus: Corpus) -> dict[RefSet, ReferenceSet]:
    out = {}
    for refset in RefSet:
        mask = corpus.refset_mask(refset)
        members = frozenset(w for w, m in zip(corpus.work_ids, mask) if m)
        out[refset] = ReferenceSet(refset, members)
    return out
