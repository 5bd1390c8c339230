"""Loaders for article quality gold standards (comma-separated files)."""

from __future__ import annotations

import csv
from collections import defaultdict

from .ingest import MalformedDOIError, normalize_doi
from .model import DataError, GoldStandard

MODES = ("per_run", "pre_aggregated")


def _rows(path, required):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, 2):
            yield lineno, row


def _score(text, where) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise DataError(f"{where}: score {text!r} is not a number") from None
    if not 1.0 <= value <= 4.0:
        raise DataError(f"{where}: score {value} outside [1, 4]")
    return value


def _doi(text, where) -> str:
    try:
        return normalize_doi(text or "")
    except MalformedDOIError as exc:
        raise DataError(f"{where}: {exc}") from None


def _group(text, where) -> str:
    group = (text or "").strip()
    if not group:
        raise DataError(f"{where}: empty group label")
    return group


def load_gold_scores(path, mode: str = "per_run") -> GoldStandard:
    """Read ``doi,group,score[,n_runs]`` rows.

    In ``per_run`` mode a (doi, group) pair may repeat, once per scoring
    run, and the runs are averaged.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    required = ("doi", "group", "score") + (("n_runs",) if mode == "pre_aggregated" else ())
    runs: dict[tuple[str, str], list[float]] = defaultdict(list)
    for lineno, row in _rows(path, required):
        where = f"{path}:{lineno}"
        key = (_doi(row["doi"], where), _group(row["group"], where))
        if mode == "pre_aggregated" and key in runs:
            raise DataError(f"{where}: duplicate row for {key}")
        runs[key].append(_score(row["score"], where))

    entries: dict[str, dict[str, float]] = defaultdict(dict)
    for (doi, group), scores in runs.items():
        entries[doi][group] = sum(scores) / len(scores)
    provenance = "per-run-aggregated" if mode == "per_run" else "pre-aggregated"
    return GoldStandard(dict(entries), provenance)


def derive_departmental_proxy(dept_scores_path, article_map_path) -> GoldStandard:
    """Score each article by the mean of its submitting departments' means."""
    dept_mean = {}
    for lineno, row in _rows(dept_scores_path, ("dept_id", "mean_score")):
        where = f"{dept_scores_path}:{lineno}"
        dept = (row["dept_id"] or "").strip()
        if dept in dept_mean:
            raise DataError(f"{where}: duplicate department {dept!r}")
        dept_mean[dept] = _score(row["mean_score"], where)

    depts: dict[str, set] = defaultdict(set)
    groups: dict[str, set] = defaultdict(set)
    for lineno, row in _rows(article_map_path, ("doi", "dept_id", "group")):
        where = f"{article_map_path}:{lineno}"
        doi = _doi(row["doi"], where)
        dept = (row["dept_id"] or "").strip()
        if dept not in dept_mean:
            raise DataError(f"{where}: department {dept!r} has no score row")
        depts[doi].add(dept)
        groups[doi].add(_group(row["group"], where))

    entries = {}
    for doi in depts:
        means = [dept_mean[d] for d in sorted(depts[doi])]
        score = sum(means) / len(means)
        entries[doi] = {g: score for g in sorted(groups[doi])}
    return GoldStandard(entries, "departmental-proxy")
