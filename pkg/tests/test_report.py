import csv
import random
import xml.etree.ElementTree as ET

import pytest

import oracles
from citemetric.evaluate import EvaluationConfig, correlate_by_group
from citemetric.indicators import score_all
from citemetric.matchset import Corpus, link_by_doi
from citemetric.model import ALL, CorrelationRecord, GoldStandard, Status, enumerate_valid_indicators
from citemetric.report import (
    CORRELATION_HEADER,
    AxisMap,
    ChartLayout,
    ChartSpec,
    Series,
    axis_for,
    fmt6,
    render_bar_chart,
    write_correlation_report,
    write_indicator_matrix,
    write_linkage_report,
)

SVG = "{http://www.w3.org/2000/svg}"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_fmt6():
    assert fmt6(0.123456789) == "0.123457"
    assert fmt6(None) == ""


def test_empty_correlation_report_is_header_only(tmp_path):
    p = write_correlation_report([], tmp_path / "c.csv")
    assert p.read_text() == ",".join(CORRELATION_HEADER) + "\n"


def test_correlation_report_sorted_and_deterministic(tmp_path):
    inds = enumerate_valid_indicators()
    recs = [CorrelationRecord(inds[i % 3], g, ALL, 10, 0.25, 0.1, 0.4, Status.OK)
            for i, g in enumerate(["10", "2", "1", "2"])]
    recs.append(CorrelationRecord(inds[0], "3", ALL, 1, None, None, None, Status.INSUFFICIENT_N))
    a = write_correlation_report(recs, tmp_path / "a.csv").read_bytes()
    b = write_correlation_report(list(reversed(recs)), tmp_path / "b.csv").read_bytes()
    assert a == b
    rows = read_csv(tmp_path / "a.csv")[1:]
    assert [r[1] for r in rows if r[0] == str(inds[0])] == ["2", "3", "10"]
    assert rows[1] == [str(inds[0]), "3", "all", "1", "", "", "", "insufficient_n"]


def test_linkage_report_rows(tmp_path):
    from citemetric.model import Source, WorkRecord

    A, B = Source.OALEX, Source.SCOPUS
    a = [WorkRecord(d, d, y, {A: 1}, frozenset({A})) for d, y in [("10.1/a", 2015), ("10.1/b", 2016)]]
    b = [WorkRecord(d, d, y, {B: 1}, frozenset({B})) for d, y in [("10.1/b", 2016), ("10.1/c", 2016)]]
    _, rep = link_by_doi(a, b)
    rows = read_csv(write_linkage_report(rep, tmp_path / "l.csv"))
    assert rows[1:] == [["2015", "1", "0", "0", "1", "0", "1"], ["2016", "1", "2", "1", "0", "1", "2"],
                        ["total", "2", "2", "1", "1", "1", "3"]]


def test_indicator_matrix_csv(tmp_path):
    corpus = Corpus.from_records(oracles.random_records(random.Random(2), 120))
    m = score_all(corpus)
    write_indicator_matrix(m, tmp_path / "m.csv", tmp_path / "r.csv", chunk=7)
    rows = read_csv(tmp_path / "m.csv")
    assert len(rows) == 121 and len(rows[0]) == 35
    n_empty = sum(v == "" for r in rows[1:] for v in r[3:])
    reasons = read_csv(tmp_path / "r.csv")
    assert len(reasons) - 1 == n_empty == int((m.reasons != 0).sum())
    for r in rows[1:]:
        for v, ind in zip(r[3:], m.indicators):
            if v:
                assert float(v) == m.get(r[0], ind)


def chart(values, lo=None, hi=None, labels=None):
    labels = labels or [f"r{i}" for i in range(len(values))]
    return ChartSpec("t", labels, [Series("s", values, lo, hi)])


def test_chart_length_mismatch():
    with pytest.raises(ValueError):
        chart([0.1, 0.2], labels=["a"])
    with pytest.raises(ValueError):
        chart([0.5], [0.6], [0.7])


def test_chart_whiskers_match_axis_oracle():
    values = [0.3, -0.1, 0.55]
    lo = [0.2, -0.3, 0.4]
    hi = [0.4, 0.05, 0.7]
    spec = chart(values, lo, hi)
    svg = render_bar_chart(spec)
    axis = axis_for(spec)
    expected = AxisMap(ChartLayout().label_width, ChartLayout().plot_width, axis.vmin, axis.vmax)
    assert axis == expected and axis.vmin <= -0.3 and axis.vmax >= 0.7
    root = ET.fromstring(svg)
    whiskers = [el for el in root.iter(f"{SVG}line") if el.get("class") == "whisker"]
    assert len(whiskers) == 3
    for el, a, b in zip(whiskers, lo, hi):
        assert float(el.get("x1")) == pytest.approx(expected.px(a), abs=0.005)
        assert float(el.get("x2")) == pytest.approx(expected.px(b), abs=0.005)
    caps = [el for el in root.iter(f"{SVG}line") if el.get("class") == "cap"]
    assert len(caps) == 6


def test_chart_32_bars_and_deterministic():
    labels = [str(i) for i in enumerate_valid_indicators()]
    rng = random.Random(0)
    values = [rng.uniform(-0.2, 0.6) for _ in labels]
    spec = chart(values, labels=labels)
    svg = render_bar_chart(spec)
    assert svg == render_bar_chart(chart(list(values), labels=list(labels)))
    bars = [el for el in ET.fromstring(svg).iter(f"{SVG}rect") if el.get("class") == "bar"]
    assert len(bars) == 32
    zero = axis_for(spec).px(0.0)
    for el, v in zip(bars, values):
        assert float(el.get("width")) == pytest.approx(abs(axis_for(spec).px(v) - zero), abs=0.01)


def test_missing_values_skip_bars():
    svg = render_bar_chart(chart([0.2, None, 0.1]))
    bars = [el for el in ET.fromstring(svg).iter(f"{SVG}rect") if el.get("class") == "bar"]
    assert len(bars) == 2


def test_title_escaped():
    svg = render_bar_chart(ChartSpec("a < b & c", ["x"], [Series("s", [0.1])]))
    assert ET.fromstring(svg).find(f"{SVG}text").text == "a < b & c"


def test_end_to_end_records_to_chart(tmp_path):
    corpus = Corpus.from_records(oracles.random_records(random.Random(6), 300))
    m = score_all(corpus)
    rng = random.Random(1)
    gold = GoldStandard({w: {"1": rng.choice([1.0, 2.0, 3.0, 4.0])} for w in m.work_ids}, "t")
    recs = correlate_by_group(m, gold, EvaluationConfig())
    spec = ChartSpec("group 1", [str(r.indicator) for r in recs],
                     [Series("rho", [r.rho for r in recs], [r.ci_low for r in recs], [r.ci_high for r in recs])])
    ET.fromstring(render_bar_chart(spec))
