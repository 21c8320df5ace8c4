"""
Line and model-file validation logic.
"""
import enum
import math
import re
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from src.app.logging_config import get_logger

logger = get_logger(__name__)


class IssueType(str, enum.Enum):
    """Issue type enumeration."""
    EMPTY_LINE = "EMPTY_LINE"
    CONTROL_CHARACTER = "CONTROL_CHARACTER"
    NON_NUMERIC_ID = "NON_NUMERIC_ID"
    MISSING_FIELD = "MISSING_FIELD"
    INVALID_INTENSITY = "INVALID_INTENSITY"
    INVALID_SET = "INVALID_SET"


@dataclass
class ValidationResult:
    """Validation result."""
    is_valid: bool
    issue_type: Optional[IssueType] = None
    message: Optional[str] = None


class LineValidator:
    """Validator for one line of an incidence file."""

    CONTROL_PATTERN = re.compile(r"[\x00-\x08\x0b\x0c\x0e-\x1f\x7f]")
    NUMERIC_PATTERN = re.compile(r"^\d+$")

    @staticmethod
    def validate_line(line: str, numeric_ids: bool = False) -> ValidationResult:
        """
        Validate a single incidence line.

        Blank lines are reported as EMPTY_LINE and are skipped by the loader,
        not treated as errors.

        Args:
            line: Raw line without the trailing newline
            numeric_ids: Require every id to be a non-negative integer

        Returns:
            ValidationResult with validation status
        """
        if not line.strip():
            return ValidationResult(
                is_valid=False,
                issue_type=IssueType.EMPTY_LINE,
                message="Empty line",
            )

        if LineValidator.CONTROL_PATTERN.search(line):
            return ValidationResult(
                is_valid=False,
                issue_type=IssueType.CONTROL_CHARACTER,
                message="Line contains control characters",
            )

        if numeric_ids:
            for token in line.split():
                if not LineValidator.NUMERIC_PATTERN.match(token):
                    return ValidationResult(
                        is_valid=False,
                        issue_type=IssueType.NON_NUMERIC_ID,
                        message=f"Non-numeric species id: {token!r}",
                    )

        return ValidationResult(is_valid=True)


class ModelValidator:
    """Validator for species-model JSON documents."""

    @staticmethod
    def validate_model(document: Dict[str, Any]) -> ValidationResult:
        """
        Validate a model document.

        Accepted shapes are ``{"weights": [...]}`` for classical models and
        ``{"sets": [{"species": [...], "intensity": mu}, ...]}`` for incidence models.

        Args:
            document: Parsed JSON document

        Returns:
            ValidationResult with validation status
        """
        if not isinstance(document, dict):
            return ValidationResult(False, IssueType.MISSING_FIELD, "Model must be a JSON object")

        if "weights" in document:
            weights = document["weights"]
            if not isinstance(weights, list) or not weights:
                return ValidationResult(False, IssueType.MISSING_FIELD, "weights must be a non-empty list")
            return ModelValidator._check_intensities(weights, "weights")

        sets = document.get("sets")
        if not isinstance(sets, list) or not sets:
            return ValidationResult(
                False, IssueType.MISSING_FIELD, "Model needs either 'weights' or 'sets'"
            )

        intensities: List[Any] = []
        for position, entry in enumerate(sets):
            if not isinstance(entry, dict) or "species" not in entry or "intensity" not in entry:
                return ValidationResult(
                    False,
                    IssueType.MISSING_FIELD,
                    f"Set {position} needs 'species' and 'intensity'",
                )
            members = entry["species"]
            if not isinstance(members, list) or not members:
                return ValidationResult(
                    False, IssueType.INVALID_SET, f"Set {position} has no species"
                )
            if not all(isinstance(m, int) and not isinstance(m, bool) and m >= 0 for m in members):
                return ValidationResult(
                    False,
                    IssueType.INVALID_SET,
                    f"Set {position} species must be non-negative integers",
                )
            intensities.append(entry["intensity"])

        return ModelValidator._check_intensities(intensities, "intensity")

    @staticmethod
    def _check_intensities(values: List[Any], name: str) -> ValidationResult:
        for position, value in enumerate(values):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return ValidationResult(
                    False, IssueType.INVALID_INTENSITY, f"{name}[{position}] is not a number"
                )
            if not math.isfinite(value) or value < 0:
                return ValidationResult(
                    False,
                    IssueType.INVALID_INTENSITY,
                    f"{name}[{position}] must be finite and non-negative, got {value}",
                )
        return ValidationResult(is_valid=True)
