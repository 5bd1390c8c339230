"""Streaming readers for per-source line-delimited works exports.

Each works file holds one JSON object per line with the flat layout::

    id, doi, year, citations, type, crossref_type,
    domain, field, subfield, topic,      # OpenAlex primary classification
    asjc_codes,                          # Scopus, list of codes
    abstract_length                      # characters, optional

Parsing is single pass; only the running ``IngestStats`` is kept in memory.
"""

from __future__ import annotations

import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .model import CitemetricError, DataError, Scheme, Source, WorkRecord

log = logging.getLogger(__name__)


class MalformedDOIError(CitemetricError, ValueError):
    pass


class IngestError(DataError):
    pass


_DOI_PREFIX_RE = re.compile(r"^(?:(?:https?://)?(?:dx\.)?doi\.org/|doi:\s*)", re.IGNORECASE)


def normalize_doi(raw: str) -> str:
    if raw is None:
        raise MalformedDOIError("empty DOI")
    doi = _DOI_PREFIX_RE.sub("", raw.strip()).strip().lower()
    if not doi.startswith("10."):
        raise MalformedDOIError(f"not a DOI: {raw!r}")
    return doi


# source -> raw field -> accepted values (compared lowercased)
DEFAULT_TYPE_RULES = {
    Source.OALEX: {"type": frozenset({"article"}), "crossref_type": frozenset({"journal-article"})},
    Source.SCOPUS: {"type": frozenset({"journal article", "article"})},
}


@dataclass(frozen=True)
class FilterPolicy:
    year_min: int = 2014
    year_max: int = 2020
    type_rules: dict = field(default_factory=lambda: dict(DEFAULT_TYPE_RULES))
    abstract_percentile: float | None = None
    require_doi: bool = True
    require_classification: frozenset = frozenset()

    def __post_init__(self):
        if self.year_min > self.year_max:
            raise ValueError(f"year_min {self.year_min} > year_max {self.year_max}")
        if self.abstract_percentile is not None and not 0 <= self.abstract_percentile < 1:
            raise ValueError(f"abstract_percentile must be in [0, 1), got {self.abstract_percentile}")


@dataclass
class IngestStats:
    read: int = 0
    kept: int = 0
    malformed: int = 0
    dropped: Counter = field(default_factory=Counter)
    unclassified: Counter = field(default_factory=Counter)  # kept records lacking a scheme code

    def __add__(self, other: "IngestStats") -> "IngestStats":
        return IngestStats(
            self.read + other.read,
            self.kept + other.kept,
            self.malformed + other.malformed,
            self.dropped + other.dropped,
            self.unclassified + other.unclassified,
        )

    def balanced(self) -> bool:
        return self.read == self.kept + sum(self.dropped.values()) + self.malformed

    def as_dict(self) -> dict:
        return {
            "read": self.read,
            "kept": self.kept,
            "malformed": self.malformed,
            "dropped": dict(sorted(self.dropped.items())),
            "unclassified": dict(sorted(self.unclassified.items())),
        }


class _Malformed(Exception):
    pass


def _as_int(value, what: str) -> int:
    if isinstance(value, bool):
        raise _Malformed(f"{what} is a boolean")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str) and value.strip().lstrip("-").isdigit():
        return int(value)
    raise _Malformed(f"{what} is not an integer: {value!r}")


def _code(value) -> str | None:
    if value is None or value == "":
        return None
    if isinstance(value, dict):
        value = value.get("id")
        if value is None:
            return None
    return str(value)


def _multi_codes(value) -> tuple:
    if value is None:
        return ()
    if isinstance(value, str):
        value = [v for v in re.split(r"[;,|\s]+", value) if v]
    if not isinstance(value, list):
        raise _Malformed(f"asjc_codes is not a list: {value!r}")
    return tuple(sorted({c for c in map(_code, value) if c is not None}))


def _classes(source: Source, row: dict) -> dict:
    if source is Source.OALEX:
        keys = {Scheme.OA_DOMAINS: "domain", Scheme.OA_FIELDS: "field",
                Scheme.OA_SUBFIELDS: "subfield", Scheme.OA_TOPICS: "topic"}
        out = {}
        for scheme, key in keys.items():
            code = _code(row.get(key))
            out[scheme] = (code,) if code is not None else ()
        return out
    return {Scheme.SCOPUS_ASJC: _multi_codes(row.get("asjc_codes"))}


def _type_labels(source: Source, row: dict, policy: FilterPolicy) -> tuple:
    keys = sorted(policy.type_rules.get(source, {})) or ["type"]
    return tuple((k, str(row.get(k) or "")) for k in keys)


def _type_ok(source: Source, labels: tuple, policy: FilterPolicy) -> bool:
    rules = policy.type_rules.get(source, {})
    got = dict(labels)
    return all(got.get(k, "").strip().lower() in allowed for k, allowed in rules.items())


def parse_works_stream(
    source: Source,
    stream: Iterable[str],
    policy: FilterPolicy,
    stats: IngestStats | None = None,
) -> Iterator[WorkRecord]:
    """Yield the records of one source's works file that pass ``policy``.

    ``stats`` (if given) is updated in place as the stream is consumed.
    Malformed lines are counted and skipped. A record without a citation
    count raises ``IngestError``: zero-filling it would bias denominators.
    """
    source = Source(source)
    if stats is None:
        stats = IngestStats()
    for lineno, line in enumerate(stream, 1):
        if not line.strip():
            continue
        stats.read += 1
        try:
            row = json.loads(line)
            if not isinstance(row, dict):
                raise _Malformed("not a JSON object")
            year = _as_int(row.get("year"), "year")
            raw_cites = row.get("citations")
            if raw_cites is None:
                raise IngestError(f"{source.value} line {lineno}: missing citation count (id={row.get('id')!r})")
            cites = _as_int(raw_cites, "citations")
            if cites < 0:
                raise _Malformed("negative citation count")
            raw_abs = row.get("abstract_length")
            abstract_length = None if raw_abs is None else _as_int(raw_abs, "abstract_length")
            if abstract_length is not None and abstract_length < 0:
                raise _Malformed("negative abstract length")
            classes = _classes(source, row)
            labels = _type_labels(source, row, policy)
        except (ValueError, _Malformed) as exc:
            stats.malformed += 1
            log.debug("%s line %d malformed: %s", source.value, lineno, exc)
            continue

        if not policy.year_min <= year <= policy.year_max:
            stats.dropped["year"] += 1
            continue
        if not _type_ok(source, labels, policy):
            stats.dropped["type"] += 1
            continue
        doi = None
        if row.get("doi"):
            try:
                doi = normalize_doi(str(row["doi"]))
            except MalformedDOIError:
                if policy.require_doi:
                    stats.dropped["malformed_doi"] += 1
                    continue
        if doi is None and policy.require_doi:
            stats.dropped["no_doi"] += 1
            continue
        missing = [s for s, codes in classes.items() if not codes]
        if any(s in policy.require_classification for s in missing):
            stats.dropped["no_class"] += 1
            continue
        for s in missing:
            stats.unclassified[s.value] += 1

        raw_id = str(row.get("id") or lineno)
        stats.kept += 1
        yield WorkRecord(
            work_id=doi if doi is not None else f"{source.value}:{raw_id}",
            doi=doi,
            year=year,
            citations={source: cites},
            present_in=frozenset({source}),
            doc_type_flags={source: labels},
            classes=classes,
            abstract_length=abstract_length,
        )


def read_works_file(source: Source, path, policy: FilterPolicy, stats: IngestStats | None = None):
    with open(path, encoding="utf-8") as fh:
        yield from parse_works_stream(source, fh, policy, stats)


def filter_by_abstract_percentile(records: list[WorkRecord], pct: float) -> list[WorkRecord]:
    """Drop articles with missing or shortest abstracts.

    Records without an abstract length go first; then exactly
    ``floor(pct * remaining)`` of the shortest, ties broken by work id.
    Input order is preserved in the result.
    """
    if not 0 <= pct < 1:
        raise ValueError(f"pct must be in [0, 1), got {pct}")
    with_abs = [r for r in records if r.abstract_length is not None]
    k = math.floor(pct * len(with_abs))
    ranked = sorted(with_abs, key=lambda r: (r.abstract_length, r.work_id))
    removed = {id(r) for r in ranked[:k]}
    return [r for r in with_abs if id(r) not in removed]


# --- stage artifact format -------------------------------------------------
# Normalized records persisted between pipeline stages, keyed by internal ids.


def record_to_json(rec: WorkRecord) -> str:
    obj = {
        "work_id": rec.work_id,
        "doi": rec.doi,
        "year": rec.year,
        "citations": {s.value: c for s, c in sorted(rec.citations.items())},
        "present_in": sorted(s.value for s in rec.present_in),
        "classes": {s.value: list(c) for s, c in sorted(rec.classes.items())},
        "abstract_length": rec.abstract_length,
    }
    if rec.doc_type_flags:
        obj["doc_type_flags"] = {s.value: [list(kv) for kv in v] for s, v in sorted(rec.doc_type_flags.items())}
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def record_from_json(line: str) -> WorkRecord:
    obj = json.loads(line)
    return WorkRecord(
        work_id=obj["work_id"],
        doi=obj.get("doi"),
        year=int(obj["year"]),
        citations={Source(s): int(c) for s, c in obj["citations"].items()},
        present_in=frozenset(Source(s) for s in obj["present_in"]),
        doc_type_flags={Source(s): tuple(tuple(kv) for kv in v) for s, v in obj.get("doc_type_flags", {}).items()},
        classes={Scheme(s): tuple(c) for s, c in obj["classes"].items()},
        abstract_length=obj.get("abstract_length"),
    )


def write_records(records: Iterable[WorkRecord], fh: IO[str]) -> int:
    n = 0
    for rec in records:
        fh.write(record_to_json(rec))
        fh.write("\n")
        n += 1
    return n


def read_records(path) -> Iterator[WorkRecord]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield record_from_json(line)

