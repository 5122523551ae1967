"""
Plot-ready result files.

This module renders sweep records, supporting lines and bound results as
CSV or JSON, and parses the CSV files back.
"""

import csv
import io
import json
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from wak_converse.experiments import SweepResult
from wak_converse.prob_core import JointPmf
from wak_converse.regions import Corollary1Result, SupportLineResult
from wak_converse.serialization import (
    SchemaError,
    channel_to_dict,
    dumps,
    pmf_to_dict,
)

SWEEP_SCHEMA = "wak_converse sweep v1"
REGION_SCHEMA = "wak_converse region v1"

SWEEP_COLUMNS = (
    "n",
    "size0",
    "size2",
    "log_m0",
    "log_m2",
    "error",
    "exact",
    "ci_low",
    "ci_high",
    "bound",
    "bound_mode",
    "kn_mass",
    "strong_converse_floor",
    "helper",
)
REGION_COLUMNS = (
    "mu",
    "delta",
    "value",
    "r0",
    "r2",
    "markov_gap",
    "method",
    "converged",
    "channel",
)

_INTEGER_COLUMNS = {"n", "size0", "size2"}
_BOOLEAN_COLUMNS = {"exact", "converged"}
_TEXT_COLUMNS = {"bound_mode", "method", "helper"}


def _format_cell(value: Any) -> str:
    """Format one CSV cell.

    Floats use their shortest round-trip representation so that parsing
    recovers them exactly; None becomes an empty cell.

    Args:
        value: Cell value.

    Returns:
        Cell text.
    """
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return json.dumps(value, separators=(",", ":"))
    return str(value)


def _parse_cell(column: str, text: str) -> Any:
    if text == "":
        return None
    if column in _INTEGER_COLUMNS:
        return int(text)
    if column in _BOOLEAN_COLUMNS:
        if text not in ("true", "false"):
            raise SchemaError(
                f"column {column} holds {text!r}", "bad_value", column
            )
        return text == "true"
    if column in _TEXT_COLUMNS:
        return text
    if column == "channel":
        return json.loads(text)
    return float(text)


def _render_csv(
    schema: str,
    columns: Sequence[str],
    rows: Sequence[Dict[str, Any]],
    comments: Sequence[str] = (),
) -> str:
    buffer = io.StringIO()
    buffer.write(f"# {schema}\n")
    for comment in comments:
        buffer.write(f"# {comment}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(row.get(c)) for c in columns])
    return buffer.getvalue()


def _read_csv(
    text: str, schema: str, columns: Sequence[str]
) -> List[Dict[str, Any]]:
    lines = text.splitlines()
    if not lines or lines[0] != f"# {schema}":
        raise SchemaError(
            f"expected header line '# {schema}'", "version_mismatch"
        )
    body = [line for line in lines if not line.startswith("#")]
    reader = csv.reader(body)
    header = next(reader, None)
    if header is None:
        raise SchemaError("missing column header", "missing_field")
    missing = [c for c in columns if c not in header]
    if missing:
        raise SchemaError(
            f"missing columns {missing}", "missing_field", missing[0]
        )
    rows = []
    for values in reader:
        if len(values) != len(header):
            raise SchemaError(
                f"row has {len(values)} cells, header {len(header)}",
                "truncated_table",
            )
        rows.append(
            {
                column: _parse_cell(column, value)
                for column, value in zip(header, values)
            }
        )
    return rows


def render_sweep_csv(result: SweepResult, timing: bool = False) -> str:
    """Sweep records as CSV, one row per blocklength.

    Args:
        result: Sweep to render.
        timing: Whether to add the wall-time column.

    Returns:
        CSV text with a versioned header comment.
    """
    columns = SWEEP_COLUMNS + (("seconds",) if timing else ())
    trend = "none" if result.trend is None else repr(result.trend)
    return _render_csv(
        SWEEP_SCHEMA,
        columns,
        [record.to_dict(timing) for record in result.records],
        comments=[f"spearman_trend {trend}"],
    )


def render_sweep_json(result: SweepResult, timing: bool = False) -> str:
    """Sweep records, trend and warnings as one JSON document."""
    return dumps(
        {
            "schema": SWEEP_SCHEMA,
            "trend": result.trend,
            "warnings": list(result.warnings),
            "records": [record.to_dict(timing) for record in result.records],
        }
    )


def read_sweep_csv(text: str) -> List[Dict[str, Any]]:
    """Parse a file written by :func:`render_sweep_csv`.

    Raises:
        SchemaError: If the header or a row is malformed.
    """
    return _read_csv(text, SWEEP_SCHEMA, SWEEP_COLUMNS)


def render_region_csv(lines: Sequence[SupportLineResult]) -> str:
    """Supporting lines as CSV; the witness channel is a JSON cell."""
    return _render_csv(
        REGION_SCHEMA, REGION_COLUMNS, [line.to_dict() for line in lines]
    )


def read_region_csv(text: str) -> List[Dict[str, Any]]:
    """Parse a file written by :func:`render_region_csv`.

    Raises:
        SchemaError: If the header or a row is malformed.
    """
    return _read_csv(text, REGION_SCHEMA, REGION_COLUMNS)


def render_region_json(
    pxy: JointPmf,
    lines: Sequence[SupportLineResult],
    card: Optional[int] = None,
) -> str:
    """The source, the supporting lines and the frontier of witness
    corners, sorted by r0.

    Witness channels keep their cardinality bound and load back with
    :func:`wak_converse.serialization.channel_from_dict`.
    """
    frontier = sorted(
        {(line.point.r0, line.point.r2) for line in lines}
    )
    return dumps(
        {
            "schema": REGION_SCHEMA,
            "source": pmf_to_dict(pxy),
            "card": card,
            "lines": [
                {**line.to_dict(), "channel": channel_to_dict(line.channel)}
                for line in lines
            ],
            "frontier": [{"r0": r0, "r2": r2} for r0, r2 in frontier],
        }
    )


def render_bound_json(result: Corollary1Result) -> str:
    """Corollary quantities and the bound value."""
    return dumps(result.to_dict())
