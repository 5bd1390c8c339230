"""Seeded synthetic corpora in the raw works-file layouts.

The generator guarantees that every (group, year) cell of the gold
standard is populated as long as each year has at least ``n_groups``
articles indexed by both sources.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class SyntheticConfig:
    n_articles: int = 1000
    seed: int = 0
    year_min: int = 2014
    year_max: int = 2020
    n_groups: int = 34
    n_domains: int = 4
    n_fields: int = 12
    n_subfields: int = 40
    n_topics: int = 120
    n_asjc: int = 30
    p_both: float = 0.45
    p_b_only: float = 0.05
    p_no_topic: float = 0.03
    p_multi_group: float = 0.1
    gold_fraction: float = 1.0
    max_gold: int = 100_000
    n_runs: int = 5
    noise_rate: float = 0.01  # extra rows that ingest filters must drop


@dataclass(frozen=True)
class SyntheticPaths:
    oalex: Path
    scopus: Path
    gold: Path
    dept_scores: Path
    dept_map: Path
    manifest: Path


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def generate(cfg: SyntheticConfig, out_dir) -> SyntheticPaths:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_articles
    years = np.arange(cfg.year_min, cfg.year_max + 1)

    # classification hierarchy: topic -> subfield -> field -> domain
    sub_field = rng.integers(0, cfg.n_fields, cfg.n_subfields)
    sub_field[: cfg.n_fields] = np.arange(cfg.n_fields)
    field_domain = rng.integers(0, cfg.n_domains, cfg.n_fields)
    field_domain[: cfg.n_domains] = np.arange(cfg.n_domains)
    topic_sub = rng.integers(0, cfg.n_subfields, cfg.n_topics)
    topic_sub[: cfg.n_subfields] = np.arange(cfg.n_subfields)
    field_rate = rng.lognormal(1.5, 0.6, cfg.n_fields)

    topic = rng.integers(0, cfg.n_topics, n)
    sub = topic_sub[topic]
    fld = sub_field[sub]
    dom = field_domain[fld]
    year = rng.choice(years, n)
    age = cfg.year_max + 1 - year
    quality = rng.normal(0, 1, n)
    lam = field_rate[fld] * age * np.exp(0.5 * quality + rng.normal(0, 0.7, n))
    cites_a = rng.poisson(lam)
    cites_b = rng.binomial(cites_a, 0.85)
    abstract = np.maximum(0, rng.normal(1400, 400, n)).astype(np.int64)
    no_topic = rng.random(n) < cfg.p_no_topic

    u = rng.random(n)
    in_b_only = u < cfg.p_b_only
    in_both = (u >= cfg.p_b_only) & (u < cfg.p_b_only + cfg.p_both)
    in_a = ~in_b_only
    in_b = in_b_only | in_both

    # journal-derived ASJC codes loosely tied to field
    base_asjc = (fld * 7) % cfg.n_asjc
    n_codes = rng.choice([1, 2, 3], n, p=[0.45, 0.4, 0.15])
    extra = rng.integers(0, cfg.n_asjc, (n, 2))

    dois = [f"10.{5000 + i % 97}/syn.{i:08d}" for i in range(n)]
    oalex_path = out / "oalex_works.jsonl"
    scopus_path = out / "scopus_works.jsonl"
    noise = rng.random((n, 2)) < cfg.noise_rate
    with open(oalex_path, "w", encoding="utf-8") as fa, open(scopus_path, "w", encoding="utf-8") as fb:
        for i in range(n):
            y = int(year[i])
            if in_a[i]:
                row = {
                    "id": f"W{i:09d}",
                    "doi": f"https://doi.org/{dois[i]}",
                    "year": y,
                    "citations": int(cites_a[i]),
                    "type": "article",
                    "crossref_type": "journal-article",
                    "domain": None if no_topic[i] else f"D{dom[i]}",
                    "field": None if no_topic[i] else f"F{fld[i]:02d}",
                    "subfield": None if no_topic[i] else f"S{sub[i]:03d}",
                    "topic": None if no_topic[i] else f"T{topic[i]:04d}",
                    "abstract_length": int(abstract[i]),
                }
                fa.write(_dumps(row) + "\n")
                if noise[i, 0]:
                    fa.write(_dumps({**row, "id": f"WX{i:09d}", "doi": None}) + "\n")
                    fa.write(_dumps({**row, "id": f"WY{i:09d}", "doi": f"10.1/noise.{i}", "type": "review"}) + "\n")
            if in_b[i]:
                codes = {int(base_asjc[i])} | {int(c) for c in extra[i, : n_codes[i] - 1]}
                row = {
                    "id": f"2-s2.0-{85000000000 + i}",
                    "doi": dois[i].upper(),
                    "year": y,
                    "citations": int(cites_b[i]),
                    "type": "Journal Article",
                    "asjc_codes": [str(1000 + c * 10) for c in sorted(codes)],
                    "abstract_length": int(abstract[i]),
                }
                fb.write(_dumps(row) + "\n")
                if noise[i, 1]:
                    fb.write(_dumps({**row, "id": f"2-s2.0-x{i}", "doi": f"10.2/old.{i}", "year": cfg.year_min - 1}) + "\n")
                    fb.write("{not json\n")

    # gold standard: articles in both indexes, spread round-robin over groups per year
    groups = [str(g + 1) for g in range(cfg.n_groups)]
    both_idx = np.flatnonzero(in_both)
    n_gold = min(cfg.max_gold, int(round(cfg.gold_fraction * len(both_idx))))
    chosen = np.sort(rng.permutation(both_idx)[:n_gold])
    membership: dict[int, list[str]] = {}
    for y in years:
        for k, i in enumerate(chosen[year[chosen] == y]):
            membership[int(i)] = [groups[k % cfg.n_groups]]
    for i in chosen:
        if rng.random() < cfg.p_multi_group and cfg.n_groups > 1:
            other = groups[(groups.index(membership[int(i)][0]) + 1 + rng.integers(0, cfg.n_groups - 1)) % cfg.n_groups]
            membership[int(i)].append(other)

    gold_path = out / "gold_scores.csv"
    with open(gold_path, "w", encoding="utf-8") as fh:
        fh.write("doi,group,score\n")
        for i in chosen:
            for g in membership[int(i)]:
                runs = np.clip(np.rint(2.9 + 0.5 * quality[i] + rng.normal(0, 0.5, cfg.n_runs)), 1, 4)
                for s in runs:
                    fh.write(f"{dois[i]},{g},{int(s)}\n")

    depts_per_group = 4
    dept_mean = np.round(rng.uniform(2.4, 3.6, cfg.n_groups * depts_per_group), 2)
    dept_scores_path = out / "dept_scores.csv"
    with open(dept_scores_path, "w", encoding="utf-8") as fh:
        fh.write("dept_id,mean_score\n")
        for d, m in enumerate(dept_mean):
            fh.write(f"D{d:04d},{m:.2f}\n")
    dept_map_path = out / "dept_map.csv"
    with open(dept_map_path, "w", encoding="utf-8") as fh:
        fh.write("doi,dept_id,group\n")
        for i in chosen:
            for g in membership[int(i)]:
                gi = groups.index(g)
                d = gi * depts_per_group + int(rng.integers(0, depts_per_group))
                fh.write(f"{dois[i]},D{d:04d},{g}\n")

    manifest_path = out / "manifest.toml"
    manifest_path.write_text(
        "# generated by citemetric gen-synthetic\n"
        'output_dir = "out"\n'
        "threads = 1\n\n"
        "[inputs]\n"
        f'oalex = "{oalex_path.name}"\n'
        f'scopus = "{scopus_path.name}"\n\n'
        "[gold]\n"
        f'path = "{gold_path.name}"\n'
        'mode = "per_run"\n\n'
        "[filter]\n"
        f"year_min = {cfg.year_min}\n"
        f"year_max = {cfg.year_max}\n"
        "require_doi = true\n",
        encoding="utf-8",
    )
    return SyntheticPaths(oalex_path, scopus_path, gold_path, dept_scores_path, dept_map_path, manifest_path)
