import json

import pytest

from ctxpipe.common import Stage
from ctxpipe.dataset import (
    AuthorityType,
    DatasetParseError,
    QualityOutcome,
    aggregate_quality,
    authority_breakdown,
    authority_type_of,
    boundary_lints,
    parse_dataset,
    parse_outcome,
    serialize_dataset,
    size_breakdown,
    stage_presence,
)
from ctxpipe.errors import InputError
from ctxpipe.packages import SizeClass

from conftest import make_dataset_record, table4_dataset, table5_dataset


def parse_one(**kw):
    return parse_dataset(json.dumps([make_dataset_record(1, **kw)]))[0]


# --- outcomes ------------------------------------------------------------


@pytest.mark.parametrize("text,expected", [
    ("Success with no iteration", QualityOutcome.SUCCESS_NO_ITERATION),
    ("SUCCESS WITH ITERATION", QualityOutcome.SUCCESS_WITH_ITERATION),
    ("success-with-iteration", QualityOutcome.SUCCESS_WITH_ITERATION),
    ("partial", QualityOutcome.PARTIAL),
    ("Failed", QualityOutcome.FAILED),
])
def test_parse_outcome_accepts_variants(text, expected):
    assert parse_outcome(text) is expected


def test_parse_outcome_rejects_unknown():
    with pytest.raises(InputError):
        parse_outcome("mostly fine")


def test_outcome_success_flags():
    assert QualityOutcome.SUCCESS_NO_ITERATION.is_success
    assert QualityOutcome.SUCCESS_WITH_ITERATION.is_success
    assert not QualityOutcome.PARTIAL.is_success
    assert not QualityOutcome.FAILED.is_success


# --- parsing -----------------------------------------------------------------


def test_parse_accepts_array_object_and_jsonl():
    record = make_dataset_record(1)
    as_array = json.dumps([record])
    as_object = json.dumps({"records": [record]})
    as_jsonl = json.dumps(record)
    assert len(parse_dataset(as_array)) == 1
    assert len(parse_dataset(as_object)) == 1
    assert len(parse_dataset(as_jsonl)) == 1


def test_parse_collects_issues_across_records():
    bad1 = make_dataset_record(1)
    del bad1["title"]
    bad2 = make_dataset_record(0)
    bad3 = make_dataset_record(3, outcome="sort of done")
    with pytest.raises(DatasetParseError) as err:
        parse_dataset(json.dumps([bad1, bad2, bad3]))
    codes = [i.code for i in err.value.issues]
    assert "MISSING_FIELD" in codes
    assert "BAD_NUMBER" in codes
    assert "BAD_OUTCOME" in codes


def test_parse_validates_evidence_count():
    record = make_dataset_record(1)
    record["evidence"] = ["only one"]
    with pytest.raises(DatasetParseError) as err:
        parse_dataset(json.dumps([record]))
    assert "BAD_EVIDENCE" in {i.code for i in err.value.issues}
    record["evidence"] = ["a", "b", "c", "d", "e"]
    with pytest.raises(DatasetParseError):
        parse_dataset(json.dumps([record]))


def test_parse_validates_pipeline_id():
    record = make_dataset_record(1, pipeline_id="p-low-case")
    with pytest.raises(DatasetParseError) as err:
        parse_dataset(json.dumps([record]))
    assert "BAD_PIPELINE_ID" in {i.code for i in err.value.issues}


def test_parse_validates_stage_names():
    record = make_dataset_record(1, stages=["builder", "tester"])
    with pytest.raises(DatasetParseError) as err:
        parse_dataset(json.dumps([record]))
    assert "BAD_STAGES" in {i.code for i in err.value.issues}


def test_parse_rejects_first_pass_with_multiple_iterations():
    record = make_dataset_record(
        1, outcome="Success with no iteration", iterations=3
    )
    with pytest.raises(DatasetParseError) as err:
        parse_dataset(json.dumps([record]))
    assert "BAD_ITERATIONS" in {i.code for i in err.value.issues}


def test_parse_validates_date_range():
    record = make_dataset_record(1)
    record["date_range"] = {"start": "2025-03-09", "end": "2025-03-01"}
    with pytest.raises(DatasetParseError) as err:
        parse_dataset(json.dumps([record]))
    assert "BAD_DATE_RANGE" in {i.code for i in err.value.issues}


# --- iteration inference ------------------------------------------------------


def test_recorded_iterations_are_exact():
    rec = parse_one(outcome="Success with iteration", iterations=4)
    assert rec.effective_iterations == (4, True)


def test_first_pass_success_is_one_exact_iteration():
    rec = parse_one(outcome="Success with no iteration")
    assert rec.effective_iterations == (1, True)


def test_unrecorded_iterated_success_counts_two_inexact():
    rec = parse_one(outcome="Success with iteration")
    assert rec.effective_iterations == (2, False)


@pytest.mark.parametrize("outcome", ["Partial", "Failed"])
def test_unrecorded_partial_or_failed_counts_one_inexact(outcome):
    rec = parse_one(outcome=outcome)
    assert rec.effective_iterations == (1, False)


# --- serialization ----------------------------------------------------------------


def test_serialize_round_trip_preserves_count_and_fields():
    text = table4_dataset()
    records = parse_dataset(text)
    canonical = serialize_dataset(records)
    again = parse_dataset(canonical)
    assert len(again) == len(records) == 200
    assert again == records
    assert serialize_dataset(again) == canonical


def test_serialize_preserves_optional_fields():
    rec = parse_one(
        outcome="Success with iteration", iterations=3, tokens=1400, chain=True
    )
    clone = parse_dataset(serialize_dataset([rec]))[0]
    assert clone.iterations == 3
    assert clone.total_tokens == 1400
    assert clone.chain is True
    assert clone == rec


# --- boundary lints ------------------------------------------------------------


def test_overlapping_same_pipeline_same_title_is_flagged():
    a = make_dataset_record(1, date="2025-03-01")
    a["date_range"] = {"start": "2025-03-01", "end": "2025-03-05"}
    a["title"] = "draft the report"
    b = make_dataset_record(2, date="2025-03-04")
    b["date_range"] = {"start": "2025-03-04", "end": "2025-03-06"}
    b["title"] = "draft the report"
    records = parse_dataset(json.dumps([a, b]))
    lints = boundary_lints(records)
    assert [l.code for l in lints] == ["DUPLICATE_SUSPECT"]
    assert "1 and 2" in lints[0].message


def test_continuation_with_new_dates_is_not_flagged():
    # The same work picked up in a later session is a new interaction.
    a = make_dataset_record(1)
    a["title"] = "draft the report"
    a["date_range"] = {"start": "2025-03-01", "end": "2025-03-02"}
    b = make_dataset_record(2)
    b["title"] = "draft the report"
    b["date_range"] = {"start": "2025-03-08", "end": "2025-03-09"}
    assert boundary_lints(parse_dataset(json.dumps([a, b]))) == []


def test_disjoint_records_pass_boundary_lints():
    a = make_dataset_record(1, date="2025-03-01")
    b = make_dataset_record(2, date="2025-04-01")
    assert boundary_lints(parse_dataset(json.dumps([a, b]))) == []


# --- quality aggregation ------------------------------------------------------


def test_quality_reproduces_published_per_tool_rates():
    table = aggregate_quality(parse_dataset(table4_dataset()), group_by="tool")
    by_group = {row.group: row for row in table.rows}
    assert by_group["Claude"].first_pass_pct == 57.8
    assert by_group["Claude"].final_success_pct == 92.2
    assert by_group["ChatGPT"].first_pass_pct == 52.0
    assert by_group["ChatGPT"].final_success_pct == 90.8
    assert by_group["overall"].first_pass_pct == 55.0
    assert by_group["overall"].final_success_pct == 91.5


def test_quality_counts_match_composition():
    table = aggregate_quality(parse_dataset(table4_dataset()), group_by="tool")
    claude = next(r for r in table.rows if r.group == "Claude")
    assert (claude.total, claude.first_pass, claude.iterated) == (102, 59, 35)
    assert (claude.partial, claude.failed) == (5, 3)


def test_quality_average_iterations_is_lower_bound_when_inferred():
    table = aggregate_quality(parse_dataset(table4_dataset()))
    row = table.rows[0]
    assert row.group == "overall"
    assert row.avg_is_lower_bound is True
    # 110 exact first-pass + 73 inferred-at-2 + 17 inferred-at-1 = 273/200.
    assert row.avg_iterations == 1.4


def test_quality_exact_when_all_iterations_recorded():
    records = [
        make_dataset_record(1, outcome="Success with no iteration", iterations=1),
        make_dataset_record(2, outcome="Success with iteration", iterations=3),
    ]
    table = aggregate_quality(parse_dataset(json.dumps(records)))
    assert table.rows[0].avg_is_lower_bound is False
    assert table.rows[0].avg_iterations == 2.0


def test_quality_rejects_empty_dataset():
    with pytest.raises(InputError) as err:
        aggregate_quality([])
    assert err.value.code == "EMPTY_DATASET"


def test_quality_rejects_unknown_grouping():
    records = parse_dataset(json.dumps([make_dataset_record(1)]))
    with pytest.raises(InputError) as err:
        aggregate_quality(records, group_by="phase")
    assert err.value.code == "BAD_GROUPING"


# --- authority breakdown --------------------------------------------------------


def test_authority_precedence_file_over_verbal_over_absent():
    file_rec = parse_one(authority="file")
    verbal_rec = parse_one(authority="verbal")
    absent_rec = parse_one(authority=None)
    assert authority_type_of(file_rec) is AuthorityType.FILE_BASED
    assert authority_type_of(verbal_rec) is AuthorityType.VERBAL
    assert authority_type_of(absent_rec) is AuthorityType.ABSENT


def test_mixed_authority_record_counts_as_file_based():
    record = make_dataset_record(1)
    record["context_package"].insert(
        0,
        {
            "priority": 1,
            "role": "authority",
            "type": "verbal",
            "file_name": None,
            "description": "spoken preference",
        },
    )
    rec = parse_dataset(json.dumps([record]))[0]
    assert authority_type_of(rec) is AuthorityType.FILE_BASED


def test_authority_breakdown_reproduces_published_rates():
    rows = authority_breakdown(parse_dataset(table5_dataset()))
    by_type = {row.authority: row for row in rows}
    assert by_type[AuthorityType.FILE_BASED].first_pass_pct == 89
    assert by_type[AuthorityType.VERBAL].first_pass_pct == 64
    assert by_type[AuthorityType.ABSENT].first_pass_pct == 29
    assert by_type[AuthorityType.FILE_BASED].total == 94
    assert by_type[AuthorityType.FILE_BASED].first_pass == 84


# --- size breakdown ----------------------------------------------------------------


def test_size_breakdown_classifies_by_tokens():
    records = parse_dataset(json.dumps([
        make_dataset_record(1, tokens=400, outcome="Success with no iteration"),
        make_dataset_record(2, tokens=800, outcome="Success with iteration", iterations=2),
        make_dataset_record(3, tokens=900, outcome="Success with no iteration"),
        make_dataset_record(4, tokens=2500, outcome="Failed", iterations=1),
    ]))
    rows = size_breakdown(records)
    by_size = {row.size: row for row in rows}
    assert by_size[SizeClass.MINIMAL].total == 1
    assert by_size[SizeClass.MODERATE].total == 2
    assert by_size[SizeClass.COMPREHENSIVE].total == 1
    assert by_size[SizeClass.MODERATE].first_pass_pct == 50
    assert by_size[SizeClass.MODERATE].avg_iterations == 1.5


def test_size_breakdown_skips_unmeasured_records_and_empty_classes():
    records = parse_dataset(json.dumps([
        make_dataset_record(1, tokens=100),
        make_dataset_record(2),  # no token measurement
    ]))
    rows = size_breakdown(records)
    assert [row.size for row in rows] == [SizeClass.MINIMAL]
    assert rows[0].total == 1


# --- stage presence -----------------------------------------------------------------


def test_stage_presence_percentages():
    records = parse_dataset(json.dumps([
        make_dataset_record(1, stages=["reviewer", "design", "builder", "auditor"]),
        make_dataset_record(2, stages=["builder", "auditor"]),
        make_dataset_record(3, stages=["builder"]),
        make_dataset_record(4, stages=["design", "builder"]),
        make_dataset_record(5, stages=["reviewer", "builder"]),
        make_dataset_record(6, stages=["builder", "auditor"]),
        make_dataset_record(7, stages=["builder"]),
        make_dataset_record(8, stages=["design", "builder"]),
    ]))
    presence = stage_presence(records)
    assert presence[Stage.BUILDER] == 100.0
    assert presence[Stage.REVIEWER] == 25.0
    assert presence[Stage.DESIGN] == 37.5
    assert presence[Stage.AUDITOR] == 37.5
