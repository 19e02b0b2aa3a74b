import itertools
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctxpipe.common import Stage
from ctxpipe.errors import InputError
from ctxpipe.packages import (
    AuthorityTag,
    ConflictOutcome,
    ContextElement,
    ContextPackage,
    ContextRole,
    FindingSeverity,
    ManifestError,
    SizeClass,
    SourceKind,
    classify_size,
    estimate_tokens,
    package_to_dict,
    parse_manifest,
    parse_role,
    priority_of,
    resolve_conflict,
    serialize_manifest,
    size_class_for,
    total_tokens,
    validate_package,
)

from conftest import make_element, make_manifest


def element(role: ContextRole, element_id: str = "E1", **kw) -> ContextElement:
    defaults = dict(
        element_id=element_id,
        role=role,
        source_kind=SourceKind.FILE,
        label=f"{role.value} element",
        content_ref=f"refs/{element_id}.md",
        token_estimate=100,
        reviewed=True,
    )
    defaults.update(kw)
    return ContextElement(**defaults)


# --- roles and priorities ---------------------------------------------------


def test_role_priorities_are_fixed():
    assert [priority_of(r) for r in (
        ContextRole.AUTHORITY,
        ContextRole.EXEMPLAR,
        ContextRole.CONSTRAINT,
        ContextRole.RUBRIC,
        ContextRole.METADATA,
    )] == [1, 2, 3, 4, 5]


def test_parse_role_accepts_labels_and_values():
    assert parse_role("Authority") is ContextRole.AUTHORITY
    assert parse_role("metadata") is ContextRole.METADATA
    with pytest.raises(InputError):
        parse_role("boss")


def test_tag_role_restriction():
    with pytest.raises(InputError) as err:
        element(ContextRole.RUBRIC, tags=frozenset({AuthorityTag.DESIGN_AUTHORITY}))
    assert err.value.code == "TAG_ROLE_MISMATCH"


def test_authority_may_carry_tags():
    el = element(ContextRole.AUTHORITY, tags=frozenset({AuthorityTag.MASTER_REFERENCE}))
    assert AuthorityTag.MASTER_REFERENCE in el.tags


# --- conflict resolution -------------------------------------------------


def test_every_unequal_ordered_pair_resolves_to_lower_priority():
    pairs = [
        (a, b) for a, b in itertools.product(ContextRole, ContextRole) if a is not b
    ]
    assert len(pairs) == 20
    for role_a, role_b in pairs:
        a = element(role_a, "A")
        b = element(role_b, "B")
        res = resolve_conflict(a, b)
        assert res.outcome is ConflictOutcome.RESOLVED
        expected = "A" if priority_of(role_a) < priority_of(role_b) else "B"
        assert res.winner == expected


def test_every_equal_pair_escalates():
    for role in ContextRole:
        res = resolve_conflict(element(role, "A"), element(role, "B"))
        assert res.outcome is ConflictOutcome.OPERATOR_ESCALATION
        assert res.winner is None


def test_authority_overrides_metadata():
    # The operator's own prompt loses to the written source of truth.
    res = resolve_conflict(
        element(ContextRole.METADATA, "PROMPT", source_kind=SourceKind.VERBAL),
        element(ContextRole.AUTHORITY, "DOC"),
    )
    assert res.winner == "DOC"
    assert "priority 1" in res.rationale and "priority 5" in res.rationale


def test_authority_overrides_exemplar():
    res = resolve_conflict(
        element(ContextRole.EXEMPLAR, "SAMPLE"),
        element(ContextRole.AUTHORITY, "DOC"),
    )
    assert res.winner == "DOC"
    assert res.loser == "SAMPLE"


def test_rubric_overrides_metadata():
    res = resolve_conflict(
        element(ContextRole.RUBRIC, "BAR"),
        element(ContextRole.METADATA, "PROMPT"),
    )
    assert res.winner == "BAR"


def test_element_cannot_conflict_with_itself():
    el = element(ContextRole.AUTHORITY)
    with pytest.raises(InputError) as err:
        resolve_conflict(el, el)
    assert err.value.code == "SELF_CONFLICT"


# --- validation ------------------------------------------------------------


def package(elements, stage=Stage.BUILDER) -> ContextPackage:
    return ContextPackage("PKG-T", "P-DEMO-API", stage, tuple(elements))


def test_empty_package_is_an_error():
    findings = validate_package(package([]))
    assert [f.code for f in findings] == ["NO_ELEMENTS"]
    assert findings[0].severity is FindingSeverity.ERROR


def test_all_verbal_authority_warns():
    findings = validate_package(
        package([element(ContextRole.AUTHORITY, source_kind=SourceKind.VERBAL)])
    )
    assert "VERBAL_AUTHORITY" in [f.code for f in findings]


def test_missing_file_authority_warns():
    findings = validate_package(package([element(ContextRole.RUBRIC)]))
    assert "NO_FILE_AUTHORITY" in [f.code for f in findings]


def test_unreviewed_file_element_is_noted():
    findings = validate_package(
        package(
            [
                element(ContextRole.AUTHORITY),
                element(ContextRole.EXEMPLAR, "E2", reviewed=False),
            ]
        )
    )
    info = [f for f in findings if f.code == "UNTRUSTED_SOURCE"]
    assert len(info) == 1
    assert info[0].severity is FindingSeverity.INFO
    assert "E2" in info[0].message


def test_clean_package_has_no_findings():
    findings = validate_package(package([element(ContextRole.AUTHORITY)]))
    assert findings == []


def test_findings_sorted_most_severe_first():
    findings = validate_package(
        package(
            [
                element(ContextRole.RUBRIC, "E1", reviewed=False),
                element(ContextRole.EXEMPLAR, "E2", reviewed=False),
            ]
        )
    )
    ranks = [f.severity.rank for f in findings]
    assert ranks == sorted(ranks)


def test_duplicate_element_ids_rejected():
    with pytest.raises(InputError) as err:
        package([element(ContextRole.AUTHORITY, "E1"), element(ContextRole.RUBRIC, "E1")])
    assert err.value.code == "DUPLICATE_ELEMENT_ID"


# --- size classes ------------------------------------------------------------


@pytest.mark.parametrize("total,expected", [
    (0, SizeClass.MINIMAL),
    (499, SizeClass.MINIMAL),
    (500, SizeClass.MODERATE),
    (2000, SizeClass.MODERATE),
    (2001, SizeClass.COMPREHENSIVE),
    (10**9, SizeClass.COMPREHENSIVE),
])
def test_size_class_boundaries(total, expected):
    assert size_class_for(total) is expected


@given(st.integers(min_value=0, max_value=10**6), st.integers(min_value=0, max_value=10**6))
def test_size_class_is_monotone(a, b):
    lo, hi = sorted((a, b))
    order = [SizeClass.MINIMAL, SizeClass.MODERATE, SizeClass.COMPREHENSIVE]
    assert order.index(size_class_for(lo)) <= order.index(size_class_for(hi))


def test_classify_size_sums_elements():
    pkg = package([
        element(ContextRole.AUTHORITY, "E1", token_estimate=450),
        element(ContextRole.RUBRIC, "E2", token_estimate=50),
    ])
    assert total_tokens(pkg) == 500
    assert classify_size(pkg) is SizeClass.MODERATE


def test_estimate_tokens_is_ceil_of_quarter_bytes():
    assert estimate_tokens("") == 0
    assert estimate_tokens("a") == 1
    assert estimate_tokens("abcd") == 1
    assert estimate_tokens("abcde") == 2
    assert estimate_tokens(b"x" * 8) == 2


@given(st.binary(max_size=400), st.binary(max_size=400))
def test_estimate_tokens_subadditive_within_one(a, b):
    # Concatenation can save at most one token of ceiling slack per joint.
    joint = estimate_tokens(a + b)
    parts = estimate_tokens(a) + estimate_tokens(b)
    assert joint <= parts <= joint + 1


def test_estimate_tokens_counts_utf8_bytes():
    assert estimate_tokens("café") == 2  # 5 bytes


# --- manifests ----------------------------------------------------------------


def test_manifest_round_trip_preserves_bytes():
    text = make_manifest(
        elements=[
            make_element("E1", "authority", "file", tags=["design_authority"]),
            make_element("E2", "rubric", "file", label="bar", reviewed=False),
        ]
    )
    pkg = parse_manifest(text)
    canonical = serialize_manifest(pkg)
    assert serialize_manifest(parse_manifest(canonical)) == canonical


def test_manifest_defaults_applied():
    raw = {
        "package_id": "PKG-1",
        "pipeline_id": "P-DEMO-API",
        "stage": "reviewer",
        "elements": [
            {
                "element_id": "E1",
                "role": "authority",
                "source_kind": "file",
                "label": "doc",
                "content_ref": "refs/doc.md",
            }
        ],
    }
    pkg = parse_manifest(json.dumps(raw))
    el = pkg.elements[0]
    assert el.token_estimate == 0
    assert el.reviewed is False
    assert el.tags == frozenset()


def test_manifest_reports_all_issues_at_once():
    raw = {
        "package_id": "PKG-1",
        "stage": "tester",
        "elements": [{"element_id": "E1", "role": "boss"}],
        "extra": True,
    }
    with pytest.raises(ManifestError) as err:
        parse_manifest(json.dumps(raw))
    codes = {i.code for i in err.value.issues}
    assert "MISSING_KEY" in codes
    assert "BAD_STAGE" in codes
    assert "UNKNOWN_KEY" in codes


def test_manifest_rejects_non_json():
    with pytest.raises(ManifestError):
        parse_manifest("not json {")


def test_package_to_dict_lists_every_field():
    pkg = parse_manifest(make_manifest())
    view = package_to_dict(pkg)
    assert set(view) == {"package_id", "pipeline_id", "stage", "elements"}
    assert set(view["elements"][0]) == {
        "element_id",
        "role",
        "source_kind",
        "label",
        "content_ref",
        "token_estimate",
        "tags",
        "reviewed",
    }
