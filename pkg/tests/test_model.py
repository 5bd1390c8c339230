import pytest

from citemetric.model import (
    DataError,
    Formula,
    GoldStandard,
    IndicatorId,
    IndicatorParseError,
    RefSet,
    Scheme,
    Source,
    WorkRecord,
    enumerate_valid_indicators,
    format_indicator_id,
    parse_indicator_id,
)


def test_enumerate_has_32_distinct():
    ids = enumerate_valid_indicators()
    assert len(ids) == 32
    assert len(set(ids)) == 32


def test_refset_partition():
    ids = enumerate_valid_indicators()
    normalized = [i for i in ids if i.normalized]
    assert len(normalized) == 30
    by_refset = {r: sum(1 for i in normalized if i.refset is r) for r in RefSet}
    assert by_refset == {RefSet.BOTH: 20, RefSet.OALEX: 8, RefSet.SCOPUS: 2}
    assert sum(1 for i in ids if i.formula is Formula.COUNT) == 2


def test_order_is_lexicographic_and_stable():
    ids = enumerate_valid_indicators()
    assert ids == sorted(ids, key=lambda i: i.sort_key())
    assert ids == enumerate_valid_indicators()


def test_contains_worked_example():
    assert IndicatorId(Source.OALEX, Formula.NLCS, RefSet.BOTH, Scheme.OA_FIELDS) in enumerate_valid_indicators()


def test_format_worked_example():
    ind = IndicatorId(Source.OALEX, Formula.NLCS, RefSet.BOTH, Scheme.OA_FIELDS)
    assert format_indicator_id(ind) == "OAlex|NLCS|Both|OAlex fields"


def test_parse_count_two_parts():
    assert parse_indicator_id("Scopus|Count") == IndicatorId(Source.SCOPUS, Formula.COUNT)


@pytest.mark.parametrize("text", [
    "OAlex|NCS|Scopus|OAlex topics",
    "Scopus|NCS|OAlex|Scopus fields",
    "Scopus|NLCS|Scopus|OAlex fields",
    "OAlex|NCS|OAlex|Scopus fields",
])
def test_parse_rejects_invalid_combination(text):
    with pytest.raises(IndicatorParseError, match="invalid combination"):
        parse_indicator_id(text)


@pytest.mark.parametrize("text", ["OAlex", "OAlex|NCS", "WoS|Count", "OAlex|Count|Both|OAlex fields", "OAlex|MNCS|Both|OAlex fields"])
def test_parse_rejects_malformed(text):
    with pytest.raises(IndicatorParseError):
        parse_indicator_id(text)


def test_round_trip_all():
    for ind in enumerate_valid_indicators():
        assert parse_indicator_id(format_indicator_id(ind)) == ind


def test_parse_accepts_internal_ids():
    assert parse_indicator_id("oalex|nlcs|both|oa_fields") == IndicatorId(
        Source.OALEX, Formula.NLCS, RefSet.BOTH, Scheme.OA_FIELDS)


def test_every_parseable_combination_is_enumerated():
    valid = set(enumerate_valid_indicators())
    for s in Source:
        for f in (Formula.NCS, Formula.NLCS):
            for r in RefSet:
                for k in Scheme:
                    try:
                        ind = IndicatorId(s, f, r, k)
                    except IndicatorParseError:
                        continue
                    assert ind in valid


def test_work_record_invariants():
    with pytest.raises(DataError):
        WorkRecord("x", None, 2015, citations={Source.OALEX: 1}, present_in=frozenset())
    with pytest.raises(DataError):
        WorkRecord("x", None, 2015, citations={Source.OALEX: -1}, present_in=frozenset({Source.OALEX}))
    with pytest.raises(DataError):
        WorkRecord("x", None, 2015, classes={Scheme.OA_FIELDS: ("a", "b")})
    rec = WorkRecord("x", None, 2015, classes={Scheme.SCOPUS_ASJC: ("a", "b", "c")})
    assert rec.codes(Scheme.SCOPUS_ASJC) == ("a", "b", "c")
    assert rec.codes(Scheme.OA_TOPICS) == ()


def test_gold_standard_validation():
    with pytest.raises(DataError):
        GoldStandard({"10.1/a": {"1": 4.5}}, "x")
    with pytest.raises(DataError):
        GoldStandard({"10.1/a": {}}, "x")
    g = GoldStandard({"10.1/a": {"1": 3.0, "2": 4.0}, "10.1/b": {"10": 2.0}}, "x")
    assert g.score("10.1/a") == 3.5
    assert g.all_groups() == ["1", "2", "10"]
    assert g.group_sizes() == {"1": 1, "2": 1, "10": 1}
