"""Subcommands behind ``subheat predict|estimate|verify``.

Each ``cmd_*`` takes a RunConfig and returns rendered text; the click layer
only decides where the text goes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Dict, List, Sequence


def format_number(value: Any) -> str:
    """17 significant digits for floats, so every double round-trips."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def to_json(payload: Any) -> str:
    """JSON with non-finite floats as null."""
    return json.dumps(_json_safe(payload), indent=2) + "\n"


def render(rows: List[Dict[str, Any]], columns: Sequence[str], fmt: str) -> str:
    if fmt == "json":
        return to_json([{c: row[c] for c in columns} for row in rows])
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(row[c]) for c in columns])
    return buffer.getvalue()
