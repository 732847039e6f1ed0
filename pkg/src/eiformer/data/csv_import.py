"""CSV ingestion for wide and long layouts.

wide: header "timestamp,<entity>,<entity>,..."; one row per timestamp,
      timestamps strictly increasing. Empty cells become 0.0.
long: header "timestamp,entity,value"; one row per observation. Cells
      absent from the (timestamp x entity) grid become 0.0.

Zero-filling matches the domain semantics: absence of activity is a true
zero, not missing-at-random. The fill count is reported so callers can
judge sparsity. The import report is emitted as JSON on the given stream
(standard output by default).
"""

import csv
import json
import sys
from pathlib import Path

import numpy as np

from ..errors import IngestionError
from .storage import Dataset


def _parse_ts(raw: str, where: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise IngestionError(f"unparseable timestamp {raw!r} at {where}") from exc


def _parse_value(raw: str, where: str) -> float:
    if raw is None or raw.strip() == "":
        return np.nan  # caller converts to zero-fill
    try:
        return float(raw)
    except ValueError as exc:
        raise IngestionError(f"unparseable value {raw!r} at {where}") from exc


def import_csv(path, layout: str = "wide", channel_name: str = "value",
               report_stream=None):
    """Read a CSV file into a Dataset. Returns (dataset, report dict).

    report_stream defaults to standard output; pass report_stream=False to
    suppress emission.
    """
    if layout not in ("wide", "long"):
        raise IngestionError(f"layout must be 'wide' or 'long', got {layout!r}")
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows) < 2:
        raise IngestionError(f"{path} has no data rows")
    header, body = rows[0], rows[1:]

    if layout == "wide":
        dataset, filled = _import_wide(header, body, channel_name, path)
    else:
        dataset, filled = _import_long(header, body, channel_name, path)

    report = {
        "source": str(path),
        "layout": layout,
        "num_steps": dataset.num_steps,
        "num_entities": dataset.num_entities,
        "num_channels": dataset.num_channels,
        "missing_cells_zero_filled": filled,
    }
    if report_stream is None:
        report_stream = sys.stdout
    if report_stream is not False:
        print(json.dumps(report, sort_keys=True), file=report_stream)
    return dataset, report


def _import_wide(header, body, channel_name, path):
    if len(header) < 2:
        raise IngestionError(f"wide header needs timestamp plus entity columns: {header}")
    entity_ids = header[1:]
    if len(set(entity_ids)) != len(entity_ids):
        raise IngestionError("wide header repeats an entity column")
    t_count, n = len(body), len(entity_ids)
    values = np.zeros((t_count, n, 1))
    timestamps = []
    filled = 0
    prev = None
    for r, row in enumerate(body):
        if len(row) != n + 1:
            raise IngestionError(f"row {r + 2} has {len(row)} cells, expected {n + 1}")
        ts = _parse_ts(row[0], f"row {r + 2}")
        if prev is not None and ts <= prev:
            raise IngestionError(
                f"non-monotone timestamps: {ts} after {prev} at row {r + 2}")
        prev = ts
        timestamps.append(ts)
        for i, cell in enumerate(row[1:]):
            v = _parse_value(cell, f"row {r + 2}, entity {entity_ids[i]!r}")
            if np.isnan(v):
                filled += 1
                v = 0.0
            values[r, i, 0] = v
    step = timestamps[1] - timestamps[0] if t_count > 1 else 1.0
    return Dataset(values, entity_ids, timestamps[0], step, [channel_name]), filled


def _import_long(header, body, channel_name, path):
    if [h.strip().lower() for h in header[:3]] != ["timestamp", "entity", "value"]:
        raise IngestionError(
            f"long header must be timestamp,entity,value; got {header}")
    seen = {}
    entity_order = []
    ts_set = set()
    for r, row in enumerate(body):
        if len(row) != 3:
            raise IngestionError(f"row {r + 2} has {len(row)} cells, expected 3")
        ts = _parse_ts(row[0], f"row {r + 2}")
        entity = row[1]
        key = (ts, entity)
        if key in seen:
            raise IngestionError(
                f"duplicate (timestamp, entity) pair ({ts}, {entity!r}) at row {r + 2}")
        v = _parse_value(row[2], f"row {r + 2}")
        if np.isnan(v):
            v = 0.0
        seen[key] = v
        ts_set.add(ts)
        if entity not in entity_order:
            entity_order.append(entity)
    timestamps = sorted(ts_set)
    t_count, n = len(timestamps), len(entity_order)
    ts_index = {ts: i for i, ts in enumerate(timestamps)}
    ent_index = {e: i for i, e in enumerate(entity_order)}
    values = np.zeros((t_count, n, 1))
    for (ts, entity), v in seen.items():
        values[ts_index[ts], ent_index[entity], 0] = v
    filled = t_count * n - len(seen)
    step = timestamps[1] - timestamps[0] if t_count > 1 else 1.0
    return Dataset(values, entity_order, timestamps[0], step, [channel_name]), filled
