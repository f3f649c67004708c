"""
SubsampledRDP — Result Exporter
Writes sweep rows as CSV or JSON, once, after the sweep is complete.
Numbers are printed with a fixed number of significant digits so that
repeated runs produce byte-identical files.
"""

import csv
import io
import json
import math
import sys
from typing import Iterable, Optional, Sequence

from absl import logging

from privacy import config

FORMATS = ("csv", "json")

BOUND_REPORT_COLUMNS = (
    "alpha",
    "lower",
    "oracle",
    "upper_general",
    "upper_tight",
    "asymptotic_bad",
    "asymptotic_good",
    "pass",
)


# ─── Helpers ──────────────────────────────────────────────────────────────────


def format_number(value, digits: int = config.SIGNIFICANT_DIGITS) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{digits}g}"


def _json_value(value, digits: int):
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, (list, tuple)):
        return [_json_value(v, digits) for v in value]
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(f"{value:.{digits}g}")


def render_rows(rows: Iterable[dict], columns: Sequence[str], fmt: str = "csv") -> str:
    rows = list(rows)
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_number(row.get(col)) for col in columns])
        return buffer.getvalue()
    if fmt == "json":
        digits = config.SIGNIFICANT_DIGITS
        records = [{col: _json_value(row.get(col), digits) for col in columns} for row in rows]
        return json.dumps(records, indent=2) + "\n"
    raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")


def render_record(record: dict) -> str:
    digits = config.SIGNIFICANT_DIGITS
    return json.dumps({k: _json_value(v, digits) for k, v in record.items()}, indent=2) + "\n"


def write_output(text: str, path: Optional[str]) -> bool:
    """Write text to path ("-" or None means stdout). Returns True on success."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return True
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    except OSError as e:
        logging.error("[Exporter] cannot write %s: %s", path, e)
        return False
    logging.info("[Exporter] wrote %s", path)
    return True