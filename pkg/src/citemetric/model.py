"""Core domain types shared by every stage of the pipeline."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping


class CitemetricError(Exception):
    """Base class for all errors raised by this package."""


class DataError(CitemetricError):
    """Input data violates a contract (duplicate DOI, bad score, ...)."""


class IndicatorParseError(CitemetricError, ValueError):
    pass


class Source(str, enum.Enum):
    OALEX = "oalex"
    SCOPUS = "scopus"

    @property
    def label(self) -> str:
        return _SOURCE_LABELS[self]


class Formula(str, enum.Enum):
    COUNT = "count"
    NCS = "ncs"
    NLCS = "nlcs"

    @property
    def label(self) -> str:
        return _FORMULA_LABELS[self]


class RefSet(str, enum.Enum):
    OALEX = "oalex"
    SCOPUS = "scopus"
    BOTH = "both"

    @property
    def label(self) -> str:
        return _REFSET_LABELS[self]


class Scheme(str, enum.Enum):
    OA_DOMAINS = "oa_domains"
    OA_FIELDS = "oa_fields"
    OA_SUBFIELDS = "oa_subfields"
    OA_TOPICS = "oa_topics"
    SCOPUS_ASJC = "scopus_asjc"

    @property
    def label(self) -> str:
        return _SCHEME_LABELS[self]

    @property
    def multi_class(self) -> bool:
        return self is Scheme.SCOPUS_ASJC

    @property
    def source(self) -> Source:
        """The index that supplies codes for this scheme."""
        return Source.SCOPUS if self is Scheme.SCOPUS_ASJC else Source.OALEX


_SOURCE_LABELS = {Source.OALEX: "OAlex", Source.SCOPUS: "Scopus"}
_FORMULA_LABELS = {Formula.COUNT: "Count", Formula.NCS: "NCS", Formula.NLCS: "NLCS"}
_REFSET_LABELS = {RefSet.OALEX: "OAlex", RefSet.SCOPUS: "Scopus", RefSet.BOTH: "Both"}
_SCHEME_LABELS = {
    Scheme.OA_DOMAINS: "OAlex domains",
    Scheme.OA_FIELDS: "OAlex fields",
    Scheme.OA_SUBFIELDS: "OAlex subfields",
    Scheme.OA_TOPICS: "OAlex topics",
    Scheme.SCOPUS_ASJC: "Scopus fields",
}

OA_SCHEMES = (Scheme.OA_DOMAINS, Scheme.OA_FIELDS, Scheme.OA_SUBFIELDS, Scheme.OA_TOPICS)

# refset -> (allowed count sources, allowed schemes)
_COMBINATION_RULE = {
    RefSet.BOTH: ((Source.OALEX, Source.SCOPUS), tuple(Scheme)),
    RefSet.OALEX: ((Source.OALEX,), OA_SCHEMES),
    RefSet.SCOPUS: ((Source.SCOPUS,), (Scheme.SCOPUS_ASJC,)),
}


def _lookup(enum_cls, text: str, what: str):
    # accept either the display label or the internal id
    for member in enum_cls:
        if text == member.label or text == member.value:
            return member
    raise IndicatorParseError(f"unknown {what} {text!r}")


@dataclass(frozen=True)
class IndicatorId:
    source: Source
    formula: Formula
    refset: RefSet | None = None
    scheme: Scheme | None = None

    def __post_init__(self):
        if self.formula is Formula.COUNT:
            if self.refset is not None or self.scheme is not None:
                raise IndicatorParseError("count indicators take no reference set or scheme")
            return
        if self.refset is None or self.scheme is None:
            raise IndicatorParseError(f"{self.formula.label} needs a reference set and a scheme")
        sources, schemes = _COMBINATION_RULE[self.refset]
        if self.source not in sources or self.scheme not in schemes:
            raise IndicatorParseError(
                f"invalid combination: {self.source.label}|{self.formula.label}|"
                f"{self.refset.label}|{self.scheme.label}"
            )

    @property
    def normalized(self) -> bool:
        return self.formula is not Formula.COUNT

    @property
    def parts(self) -> tuple[str, ...]:
        parts = [self.source.label, self.formula.label]
        if self.normalized:
            parts += [self.refset.label, self.scheme.label]
        return tuple(parts)

    def sort_key(self) -> tuple[str, str, str, str]:
        p = self.parts
        return p + ("",) * (4 - len(p))

    def __str__(self) -> str:
        return format_indicator_id(self)


def format_indicator_id(ind: IndicatorId) -> str:
    return "|".join(ind.parts)


def parse_indicator_id(text: str) -> IndicatorId:
    parts = [p.strip() for p in text.split("|")]
    if len(parts) not in (2, 4):
        raise IndicatorParseError(f"expected 2 or 4 '|'-separated parts, got {text!r}")
    source = _lookup(Source, parts[0], "count source")
    formula = _lookup(Formula, parts[1], "formula")
    if len(parts) == 2:
        return IndicatorId(source, formula)
    if formula is Formula.COUNT:
        raise IndicatorParseError("count indicators only take two parts")
    refset = _lookup(RefSet, parts[2], "reference set")
    scheme = _lookup(Scheme, parts[3], "classification scheme")
    return IndicatorId(source, formula, refset, scheme)


def enumerate_valid_indicators() -> list[IndicatorId]:
    """All 32 indicators, in lexicographic order of their four label parts."""
    out = [IndicatorId(s, Formula.COUNT) for s in Source]
    for refset, (sources, schemes) in _COMBINATION_RULE.items():
        for src, scheme, formula in itertools.product(sources, schemes, (Formula.NCS, Formula.NLCS)):
            out.append(IndicatorId(src, formula, refset, scheme))
    return sorted(out, key=IndicatorId.sort_key)


@dataclass(frozen=True)
class WorkRecord:
    work_id: str
    doi: str | None
    year: int
    citations: Mapping[Source, int] = field(default_factory=dict)
    present_in: frozenset = frozenset()
    doc_type_flags: Mapping[Source, tuple] = field(default_factory=dict)
    classes: Mapping[Scheme, tuple] = field(default_factory=dict)
    abstract_length: int | None = None

    def __post_init__(self):
        for src, c in self.citations.items():
            if src not in self.present_in:
                raise DataError(f"{self.work_id}: citation count for {src.value} but not present there")
            if isinstance(c, bool) or not isinstance(c, int) or c < 0:
                raise DataError(f"{self.work_id}: citation count must be a non-negative integer, got {c!r}")
        for scheme, codes in self.classes.items():
            if not scheme.multi_class and len(codes) > 1:
                raise DataError(f"{self.work_id}: {scheme.value} allows one code, got {len(codes)}")
        if self.abstract_length is not None and self.abstract_length < 0:
            raise DataError(f"{self.work_id}: negative abstract length")

    def codes(self, scheme: Scheme) -> tuple:
        return tuple(self.classes.get(scheme, ()))


@dataclass(frozen=True)
class ClassificationScheme:
    scheme_id: Scheme
    multi_class: bool
    code_universe: frozenset

    @classmethod
    def from_records(cls, scheme: Scheme, records: Iterable[WorkRecord]) -> "ClassificationScheme":
        universe = frozenset(c for r in records for c in r.codes(scheme))
        return cls(scheme, scheme.multi_class, universe)


@dataclass(frozen=True)
class ReferenceSet:
    refset_id: RefSet
    members: frozenset

    def __contains__(self, work_id) -> bool:
        return work_id in self.members

    def __len__(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class DenominatorContext:
    source: Source
    formula: Formula
    refset: RefSet
    scheme: Scheme

    @classmethod
    def of(cls, ind: IndicatorId) -> "DenominatorContext":
        return cls(ind.source, ind.formula, ind.refset, ind.scheme)


@dataclass(frozen=True)
class DenominatorTable:
    """Cell means keyed by (class code, year); ``cells[key] == (mean, n)``."""

    context: DenominatorContext
    cells: Mapping[tuple[str, int], tuple[float, int]]

    def mean(self, code: str, year: int) -> float:
        return self.cells[(code, year)][0]


@dataclass(frozen=True)
class GoldStandard:
    """Article quality scores.

    ``entries`` maps work id to a ``{group: score}`` dict.  Most sources give
    one score per article shared by all its groups; keeping the score per
    group lets pooled analysis average over groups when they differ.
    """

    entries: Mapping[str, Mapping[str, float]]
    provenance: str

    def __post_init__(self):
        for wid, by_group in self.entries.items():
            if not by_group:
                raise DataError(f"{wid}: gold entry has no group")
            for g, s in by_group.items():
                if not g:
                    raise DataError(f"{wid}: empty group label")
                if not (1.0 <= s <= 4.0) or math.isnan(s):
                    raise DataError(f"{wid}: score {s} outside [1, 4]")

    def score(self, work_id: str, group: str | None = None) -> float:
        by_group = self.entries[work_id]
        if group is not None:
            return by_group[group]
        return sum(by_group.values()) / len(by_group)

    def groups(self, work_id: str) -> frozenset:
        return frozenset(self.entries[work_id])

    def all_groups(self) -> list[str]:
        return sorted({g for by_group in self.entries.values() for g in by_group}, key=group_sort_key)

    def group_sizes(self) -> dict[str, int]:
        sizes: dict[str, int] = {}
        for by_group in self.entries.values():
            for g in by_group:
                sizes[g] = sizes.get(g, 0) + 1
        return sizes

    def restrict(self, work_ids) -> "GoldStandard":
        keep = set(work_ids)
        return GoldStandard({w: e for w, e in self.entries.items() if w in keep}, self.provenance)

    def __len__(self) -> int:
        return len(self.entries)


def group_sort_key(label: str):
    # numeric UoA labels sort numerically ("2" before "10")
    return (0, int(label), "") if label.isdigit() else (1, 0, label)


class Status(str, enum.Enum):
    OK = "ok"
    INSUFFICIENT_N = "insufficient_n"
    ZERO_VARIANCE = "zero_variance"
    DEGENERATE_CI = "degenerate_ci"


ALL = "all"


@dataclass(frozen=True)
class CorrelationRecord:
    indicator: IndicatorId
    group: str
    year: int | str  # int, or ALL for all years combined
    n: int
    rho: float | None
    ci_low: float | None
    ci_high: float | None
    status: Status

    def sort_key(self):
        year_key = (1, 0) if self.year == ALL else (0, self.year)
        return (self.indicator.sort_key(), group_sort_key(self.group), year_key)
