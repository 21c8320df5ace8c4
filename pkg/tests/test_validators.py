import pytest

from src.validators.line_validator import IssueType, LineValidator, ModelValidator

LINE_TESTS = [
    ("a b c", False, True, None, "plain labels"),
    ("", False, False, IssueType.EMPTY_LINE, "empty line"),
    ("   ", False, False, IssueType.EMPTY_LINE, "blank line"),
    ("a\x07b", False, False, IssueType.CONTROL_CHARACTER, "bell character"),
    ("1 2 3", True, True, None, "numeric ids"),
    ("1 -2", True, False, IssueType.NON_NUMERIC_ID, "negative id"),
    ("1 a", True, False, IssueType.NON_NUMERIC_ID, "letter id"),
    ("a\tb", False, True, None, "tab separated"),
]


@pytest.mark.parametrize("line, numeric, valid, issue, msg", LINE_TESTS)
def test_validate_line(line, numeric, valid, issue, msg):
    result = LineValidator.validate_line(line, numeric_ids=numeric)
    assert result.is_valid is valid, f"unexpected: {msg}"
    assert result.issue_type == issue, f"unexpected issue: {msg}"


MODEL_TESTS = [
    ({"weights": [0.1, 0.9]}, True, None, "classical"),
    ({"sets": [{"species": [0, 1], "intensity": 1}]}, True, None, "incidence"),
    ({"weights": []}, False, IssueType.MISSING_FIELD, "no weights"),
    ({"weights": [0.1, "x"]}, False, IssueType.INVALID_INTENSITY, "string weight"),
    ({"weights": [0.1, True]}, False, IssueType.INVALID_INTENSITY, "boolean weight"),
    ({"weights": [float("inf")]}, False, IssueType.INVALID_INTENSITY, "infinite weight"),
    ({"sets": [{"species": [0]}]}, False, IssueType.MISSING_FIELD, "missing intensity"),
    ({"sets": [{"species": [], "intensity": 1}]}, False, IssueType.INVALID_SET, "empty set"),
    ({"sets": [{"species": [-1], "intensity": 1}]}, False, IssueType.INVALID_SET, "negative species"),
    ({"sets": [{"species": [0], "intensity": -1}]}, False, IssueType.INVALID_INTENSITY, "negative intensity"),
    ({}, False, IssueType.MISSING_FIELD, "empty document"),
    ([1, 2], False, IssueType.MISSING_FIELD, "not an object"),
]


@pytest.mark.parametrize("document, valid, issue, msg", MODEL_TESTS)
def test_validate_model(document, valid, issue, msg):
    result = ModelValidator.validate_model(document)
    assert result.is_valid is valid, f"unexpected: {msg}"
    assert result.issue_type == issue, f"unexpected issue: {msg}"
