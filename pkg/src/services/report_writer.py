"""
Benchmark table output in CSV, JSON and LaTeX.
"""
import csv
import enum
import io
from pathlib import Path

from src.app.logging_config import get_logger
from src.errors import DataError
from src.models.bench import BenchResult

logger = get_logger(__name__)

COLUMNS = ["fraction_seen", "method", "mape_mean", "mape_sem", "n_perms"]

METHOD_HEADERS = {
    "null": "Trivial",
    "gt": "GT",
    "sgt": "SGT",
    "hstar": "$H^*$",
    "ratio-alpha": "Ratio-$\\alpha$",
    "pade": "Pad\\'e",
    "linear": "Linear",
}


class ReportFormat(str, enum.Enum):
    CSV = "csv"
    JSON = "json"
    LATEX = "latex"


def _fmt(value) -> str:
    return "" if value is None else repr(value) if isinstance(value, float) else str(value)


def to_csv(result: BenchResult) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in result.rows:
        writer.writerow([
            _fmt(row.fraction_seen),
            row.method,
            _fmt(row.mape_mean),
            _fmt(row.mape_sem),
            row.n_perms,
        ])
    return buffer.getvalue()


def to_json(result: BenchResult) -> str:
    return result.model_dump_json(indent=2)


def from_json(payload: str) -> BenchResult:
    try:
        return BenchResult.model_validate_json(payload)
    except ValueError as e:
        raise DataError(f"Invalid benchmark result: {e}") from e


def to_latex(result: BenchResult) -> str:
    """One row per seen fraction, one ``mean $\\pm$ sem`` column per method; gaps are dashes."""
    methods = result.methods
    lines = [
        "\\begin{tabular}{l" + "c" * len(methods) + "}",
        "\\hline",
        " & ".join(["\\% seen"] + [METHOD_HEADERS.get(m, m) for m in methods]) + " \\\\",
        "\\hline",
    ]
    for fraction in result.fractions:
        cells = [f"{100.0 * fraction:.0f}"]
        for method in methods:
            row = result.cell(fraction, method)
            if row is None or row.is_gap:
                cells.append("--")
            else:
                cells.append(f"${row.mape_mean:.1f} \\pm {row.mape_sem:.1f}$")
        lines.append(" & ".join(cells) + " \\\\")
    lines.extend(["\\hline", "\\end{tabular}", ""])
    return "\n".join(lines)


_RENDERERS = {
    ReportFormat.CSV: to_csv,
    ReportFormat.JSON: to_json,
    ReportFormat.LATEX: to_latex,
}


def render(result: BenchResult, fmt: ReportFormat) -> str:
    return _RENDERERS[ReportFormat(fmt)](result)


def emit(result: BenchResult, fmt: ReportFormat, path: str) -> Path:
    """
    Write ``result`` to ``path`` in the given format.

    Raises:
        DataError: If the path is not writable
    """
    target = Path(path)
    try:
        target.write_text(render(result, fmt), encoding="utf-8")
    except OSError as e:
        raise DataError(f"Cannot write {path}: {e.strerror or e}") from e
    logger.info(
        "Benchmark table written",
        extra={"path": str(target), "format": ReportFormat(fmt).value, "rows": len(result.rows)},
    )
    return target
