"""Result files: rows.csv, envelope.txt and an optional xlsx workbook."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Any

import numpy as np
import rustypyxl
import yaml

from messcore.experiments import ResultEnvelope

ROWS_FILE = "rows.csv"
ENVELOPE_FILE = "envelope.txt"
WORKBOOK_FILE = "rows.xlsx"


def format_cell(value: Any) -> str:
    """Text form of a row value; floats use repr so reruns compare byte for byte."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def plain(value: Any) -> Any:
    """Convert numpy scalars, tuples and enums into YAML-safe builtins."""
    if isinstance(value, dict):
        return {plain(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, (str, int, float)) or value is None:
        return value
    return str(value)


def write_rows(envelope: ResultEnvelope, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(envelope.columns)
        for row in envelope.rows:
            writer.writerow([format_cell(v) for v in row])
    return path


def envelope_document(envelope: ResultEnvelope, error: str | None = None) -> dict[str, Any]:
    residuals = envelope.residuals
    doc = {
        "schema_version": envelope.schema_version,
        "kind": envelope.spec.kind,
        "started": envelope.started,
        "wall_clock_seconds": round(envelope.wall_clock, 3),
        "converged": envelope.converged,
        "versions": envelope.versions,
        "spec": envelope.spec.to_dict(),
        "rows": {
            "file": ROWS_FILE,
            "count": len(envelope.rows),
            "columns": list(envelope.columns),
            "failed": envelope.table.failed(),
            "provenance": "sub_seed = derive_seed(seed, row index)",
        },
        "residuals": {
            "count": len(residuals),
            "max": max(residuals) if residuals else None,
        },
        "meta": envelope.table.meta,
    }
    if envelope.spec.source:
        doc["spec_source"] = envelope.spec.source
    if error:
        doc["error"] = error
    return plain(doc)


def write_envelope(envelope: ResultEnvelope, path: str | Path, error: str | None = None) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        yaml.safe_dump(envelope_document(envelope, error), fh, sort_keys=False, allow_unicode=True)
    return path


def write_workbook(envelope: ResultEnvelope, path: str | Path) -> Path:
    """The rows as one worksheet named after the experiment kind."""
    path = Path(path)
    wb = rustypyxl.Workbook()
    sheet = envelope.spec.kind
    wb.create_sheet(sheet)
    data = [list(envelope.columns)]
    for row in envelope.rows:
        data.append([_xlsx_cell(v) for v in row])
    wb.write_rows(sheet, data)
    wb.save(str(path))
    return path


def _xlsx_cell(value: Any) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return None if math.isnan(v) else v
    if isinstance(value, (int, np.integer)):
        return int(value)
    return str(value)


def write_results(envelope: ResultEnvelope, out_dir: str | Path, xlsx: bool = False,
                  error: str | None = None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [write_rows(envelope, out / ROWS_FILE), write_envelope(envelope, out / ENVELOPE_FILE, error)]
    if xlsx:
        written.append(write_workbook(envelope, out / WORKBOOK_FILE))
    return written
