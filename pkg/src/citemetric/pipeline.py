"""Run manifest and the five persisted pipeline stages.

Stage layout under the output directory::

    ingest/    oalex.jsonl, scopus.jsonl, ingest_stats.json
    link/      corpus.jsonl, linkage.csv
    score/     denominators.csv, indicator_matrix.csv, indicator_reasons.csv,
               matrix_values.npy, matrix_reasons.npy
    evaluate/  correlations.csv, pooled_correlations.csv, weighted_means.csv,
               evaluation_summary.json
    report/    weighted_means.svg, pooled.svg, groups/group_<label>.svg
"""

from __future__ import annotations

import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import report as rpt
from .evaluate import (
    PER_YEAR,
    POOLED_YEARS,
    EvaluationConfig,
    cell_sizes,
    correlate_by_group,
    pooled_correlation,
    weighted_mean_correlations,
)
from .gold import derive_departmental_proxy, load_gold_scores
from .indicators import IndicatorMatrix, compute_all_denominators, score_all
from .ingest import (
    FilterPolicy,
    IngestStats,
    filter_by_abstract_percentile,
    read_records,
    read_works_file,
    write_records,
)
from .matchset import Corpus, link_by_doi
from .model import ALL, CitemetricError, Scheme, Source, enumerate_valid_indicators

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

STAGES = ("ingest", "link", "score", "evaluate", "report")
GOLD_MODES = ("per_run", "pre_aggregated", "departmental")


class ManifestError(CitemetricError):
    pass


@dataclass
class RunManifest:
    inputs: dict  # Source -> Path
    gold_path: Path | None
    gold_mode: str
    dept_scores: Path | None
    dept_map: Path | None
    gold_require_both: bool
    policy: FilterPolicy
    evaluation: EvaluationConfig
    output_dir: Path
    stages: tuple = STAGES
    threads: int = 1
    base_dir: Path = field(default_factory=Path.cwd)

    def stage_dir(self, stage: str) -> Path:
        return self.output_dir / stage


def _path(base: Path, value) -> Path:
    p = Path(os.path.expandvars(str(value))).expanduser()
    return p if p.is_absolute() else base / p


def load_manifest(path) -> RunManifest:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ManifestError(f"{path}: {exc}") from None
    base = path.resolve().parent
    try:
        inputs = {Source(k): _path(base, v) for k, v in raw.get("inputs", {}).items()}
        gold = raw.get("gold", {})
        filt = raw.get("filter", {})
        ev = raw.get("evaluation", {})
        policy = FilterPolicy(
            year_min=int(filt.get("year_min", 2014)),
            year_max=int(filt.get("year_max", 2020)),
            abstract_percentile=filt.get("abstract_percentile"),
            require_doi=bool(filt.get("require_doi", True)),
            require_classification=frozenset(Scheme(s) for s in filt.get("require_classification", [])),
        )
        evaluation = EvaluationConfig(
            min_n_corr=int(ev.get("min_n_corr", 2)),
            min_n_ci=int(ev.get("min_n_ci", 4)),
            ci_level=float(ev.get("ci_level", 0.95)),
            pooled_dedup=bool(ev.get("pooled_dedup", True)),
        )
        stages = tuple(raw.get("stages", STAGES))
        unknown = [s for s in stages if s not in STAGES]
        if unknown:
            raise ManifestError(f"unknown stages {unknown}")
        mode = gold.get("mode", "per_run")
        if mode not in GOLD_MODES:
            raise ManifestError(f"gold.mode must be one of {GOLD_MODES}")
        return RunManifest(
            inputs=inputs,
            gold_path=_path(base, gold["path"]) if "path" in gold else None,
            gold_mode=mode,
            dept_scores=_path(base, gold["dept_scores"]) if "dept_scores" in gold else None,
            dept_map=_path(base, gold["dept_map"]) if "dept_map" in gold else None,
            gold_require_both=bool(gold.get("require_both", True)),
            policy=policy,
            evaluation=evaluation,
            output_dir=_path(base, raw.get("output_dir", "out")),
            stages=stages,
            threads=int(raw.get("threads", 1)),
            base_dir=base,
        )
    except ManifestError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ManifestError(f"{path}: {exc}") from None


def validate(manifest: RunManifest, stages) -> None:
    """Check everything the selected stages need, without reading data."""
    if manifest.threads < 1:
        raise ManifestError("threads must be >= 1")
    if "ingest" in stages:
        for src in Source:
            p = manifest.inputs.get(src)
            if p is None:
                raise ManifestError(f"inputs.{src.value} is required for ingest")
            if not p.is_file():
                raise ManifestError(f"input file not found: {p}")
    if "evaluate" in stages:
        if manifest.gold_mode == "departmental":
            for name in ("dept_scores", "dept_map"):
                p = getattr(manifest, name)
                if p is None or not p.is_file():
                    raise ManifestError(f"gold.{name} file not found: {p}")
        elif manifest.gold_path is None or not manifest.gold_path.is_file():
            raise ManifestError(f"gold file not found: {manifest.gold_path}")
    out = manifest.output_dir
    probe = out
    while not probe.exists():
        probe = probe.parent
    if not probe.is_dir() or not os.access(probe, os.W_OK):
        raise ManifestError(f"output directory not writable: {out}")


def _require(path: Path, stage: str) -> Path:
    if not path.is_file():
        raise ManifestError(f"missing {path}; run the {stage} stage first")
    return path


def _write_json(obj, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# --- stages ----------------------------------------------------------------


def run_ingest(m: RunManifest) -> dict:
    out = m.stage_dir("ingest")
    out.mkdir(parents=True, exist_ok=True)
    stats = {}
    for src in Source:
        st = IngestStats()
        tmp = out / f"{src.value}.jsonl.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            write_records(read_works_file(src, m.inputs[src], m.policy, st), fh)
        tmp.replace(out / f"{src.value}.jsonl")
        stats[src.value] = st.as_dict()
        log.info("ingest %s: %s", src.value, st.as_dict())
    _write_json(stats, out / "ingest_stats.json")
    return stats


def run_link(m: RunManifest):
    src_dir = m.stage_dir("ingest")
    a = read_records(_require(src_dir / f"{Source.OALEX.value}.jsonl", "ingest"))
    b = read_records(_require(src_dir / f"{Source.SCOPUS.value}.jsonl", "ingest"))
    corpus, linkage = link_by_doi(a, b)
    out = m.stage_dir("link")
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "corpus.jsonl", "w", encoding="utf-8") as fh:
        write_records(corpus, fh)
    rpt.write_linkage_report(linkage, out / "linkage.csv")
    log.info("link: %s", linkage.overall)
    return corpus, linkage


def load_corpus(m: RunManifest) -> Corpus:
    return Corpus.from_records(read_records(_require(m.stage_dir("link") / "corpus.jsonl", "link")))


def run_score(m: RunManifest, corpus: Corpus | None = None) -> IndicatorMatrix:
    corpus = corpus if corpus is not None else load_corpus(m)
    # reference sets come from the corpus presence masks; no id sets needed
    tables = compute_all_denominators(corpus, threads=m.threads)
    matrix = score_all(corpus, denominators=tables, threads=m.threads)
    out = m.stage_dir("score")
    out.mkdir(parents=True, exist_ok=True)
    rpt.write_denominators(tables, out / "denominators.csv")
    rpt.write_indicator_matrix(matrix, out / "indicator_matrix.csv", out / "indicator_reasons.csv")
    np.save(out / "matrix_values.npy", matrix.values)
    np.save(out / "matrix_reasons.npy", matrix.reasons)
    return matrix


def load_gold(m: RunManifest):
    if m.gold_mode == "departmental":
        return derive_departmental_proxy(m.dept_scores, m.dept_map)
    return load_gold_scores(m.gold_path, m.gold_mode)


class _GoldRow(NamedTuple):
    row: int
    work_id: str
    doi: str | None
    year: int
    abstract_length: int | None


def _gold_matrix(m: RunManifest, gold):
    """Matrix rows of gold articles that pass the gold filters."""
    corpus_path = _require(m.stage_dir("link") / "corpus.jsonl", "link")
    score_dir = m.stage_dir("score")
    values = np.load(_require(score_dir / "matrix_values.npy", "score"), mmap_mode="r")
    reasons = np.load(_require(score_dir / "matrix_reasons.npy", "score"), mmap_mode="r")
    both = sorted(s.value for s in Source)
    kept = []
    n_lines = 0
    with open(corpus_path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            n_lines += 1
            obj = json.loads(line)
            if obj["work_id"] not in gold.entries:
                continue
            if m.gold_require_both and obj["present_in"] != both:
                continue
            kept.append(_GoldRow(i, obj["work_id"], obj.get("doi"), int(obj["year"]), obj.get("abstract_length")))
    if values.shape[0] != n_lines:
        raise ManifestError("score artifacts do not match the linked corpus; rerun the score stage")
    summary = {"gold_entries": len(gold), "gold_matched": len(kept)}
    if m.policy.abstract_percentile is not None:
        filtered = filter_by_abstract_percentile(kept, m.policy.abstract_percentile)
        summary["dropped_no_abstract"] = sum(r.abstract_length is None for r in kept)
        summary["dropped_short_abstract"] = len(kept) - len(filtered) - summary["dropped_no_abstract"]
        kept = filtered
    idx = np.asarray([r.row for r in kept], dtype=np.int64)
    matrix = IndicatorMatrix(
        [r.work_id for r in kept],
        [r.doi for r in kept],
        np.asarray([r.year for r in kept], dtype=np.int32),
        enumerate_valid_indicators(),
        np.asarray(values[idx]),
        np.asarray(reasons[idx]),
    )
    summary["gold_used"] = len(kept)
    return matrix, gold.restrict(matrix.work_ids), summary


def run_evaluate(m: RunManifest) -> dict:
    gold = load_gold(m)
    matrix, gold, summary = _gold_matrix(m, gold)
    cfg = m.evaluation
    by_group = correlate_by_group(matrix, gold, cfg, POOLED_YEARS, m.threads)
    by_year = correlate_by_group(matrix, gold, cfg, PER_YEAR, m.threads)
    pooled = pooled_correlation(matrix, gold, cfg, m.threads)
    overall = weighted_mean_correlations(by_group, cell_sizes(matrix, gold, POOLED_YEARS), POOLED_YEARS)
    yearly = weighted_mean_correlations(by_year, cell_sizes(matrix, gold, PER_YEAR), PER_YEAR)
    out = m.stage_dir("evaluate")
    rpt.write_correlation_report(by_group + by_year, out / "correlations.csv")
    rpt.write_correlation_report(pooled, out / "pooled_correlations.csv")
    rpt.write_weighted_means(overall, yearly, out / "weighted_means.csv")
    summary.update(
        groups=len(gold.all_groups()),
        records_by_group=len(by_group),
        records_by_group_year=len(by_year),
        records_total=len(by_group) + len(by_year),
        pooled_records=len(pooled),
        provenance=gold.provenance,
    )
    _write_json(summary, out / "evaluation_summary.json")
    return summary


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _num(text):
    return float(text) if text != "" else None


def run_report(m: RunManifest) -> list[Path]:
    ev = m.stage_dir("evaluate")
    out = m.stage_dir("report")
    labels = [str(i) for i in enumerate_valid_indicators()]
    written = []

    wm = {r["indicator"]: r for r in _read_csv(_require(ev / "weighted_means.csv", "evaluate"))}
    spec = rpt.ChartSpec(
        "Weighted mean Spearman correlations by group",
        labels,
        [
            rpt.Series("overall", [_num(wm[l]["overall_rho"]) if l in wm else None for l in labels]),
            rpt.Series("by year", [_num(wm[l]["by_year_rho"]) if l in wm else None for l in labels]),
        ],
    )
    written.append(rpt.write_chart(spec, out / "weighted_means.svg"))

    def ci_chart(title, rows, path):
        by_ind = {r["indicator"]: r for r in rows}
        vals, lo, hi = [], [], []
        for l in labels:
            r = by_ind.get(l)
            vals.append(_num(r["rho"]) if r else None)
            lo.append(_num(r["ci_low"]) if r else None)
            hi.append(_num(r["ci_high"]) if r else None)
        spec = rpt.ChartSpec(title, labels, [rpt.Series("rho", vals, lo, hi)])
        return rpt.write_chart(spec, path)

    pooled = _read_csv(_require(ev / "pooled_correlations.csv", "evaluate"))
    written.append(ci_chart("Spearman correlations, all groups pooled (95% CI)", pooled, out / "pooled.svg"))

    per_group: dict[str, list] = {}
    for r in _read_csv(_require(ev / "correlations.csv", "evaluate")):
        if r["year"] == ALL:
            per_group.setdefault(r["group"], []).append(r)
    for group, rows in per_group.items():
        safe = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in group)
        written.append(ci_chart(f"Spearman correlations, group {group} (95% CI)", rows,
                                out / "groups" / f"group_{safe}.svg"))
    return written


def run(m: RunManifest, stages, dry_run: bool = False) -> None:
    validate(m, stages)
    if dry_run:
        return
    for stage in STAGES:
        if stage not in stages:
            continue
        log.info("stage %s", stage)
        {"ingest": run_ingest, "link": run_link, "score": run_score,
         "evaluate": run_evaluate, "report": run_report}[stage](m)
