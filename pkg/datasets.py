"""
VBatt – Tabular file readers shared by trace, task and TCL ingestion.

Supports CSV out of the box. XLSX is supported if openpyxl is installed.
Rows are returned as (line_number, {column: raw string}) so every
validation error can point at the offending row.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

Row = tuple[int, dict[str, str]]


def _read_csv_rows(path: Path) -> Iterable[list[str]]:
    with path.open("r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        for row in reader:
            yield row


def _read_xlsx_rows(path: Path) -> Iterable[list[str]]:
    try:
        import openpyxl  # type: ignore
    except Exception as e:  # noqa: BLE001
        raise RuntimeError(
            "XLSX input requires 'openpyxl'. "
            "Either install it (pip install openpyxl) or export the file to CSV."
        ) from e

    wb = openpyxl.load_workbook(path, read_only=True, data_only=True)
    ws = wb.active
    for r in ws.iter_rows(values_only=True):
        yield ["" if v is None else str(v) for v in r]


def _read_raw_rows(path: Path) -> Iterable[list[str]]:
    if path.suffix.lower() == ".csv":
        return _read_csv_rows(path)
    if path.suffix.lower() in {".xlsx", ".xlsm"}:
        return _read_xlsx_rows(path)
    raise RuntimeError(f"Unsupported data file type: {path.name}")


def read_table(path: str | Path, required: Sequence[str]) -> list[Row]:
    """
    Read a header + rows table and check its shape.

    Raises
    ------
    FileNotFoundError – if *path* does not exist.
    ValueError        – on a missing column or a ragged row.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Data file not found: {path}")

    raw = iter(_read_raw_rows(path))
    header = next(raw, None)
    if not header:
        raise ValueError(f"{path.name}: missing header row")
    keys = [h.strip() for h in header]

    missing = [c for c in required if c not in keys]
    if missing:
        raise ValueError(f"{path.name}: missing column(s) {', '.join(missing)}")

    rows: list[Row] = []
    for line_no, values in enumerate(raw, start=2):
        if not any(v.strip() for v in values):
            continue
        if len(values) != len(keys):
            raise ValueError(
                f"{path.name}: row {line_no} has {len(values)} fields, expected {len(keys)}"
            )
        rows.append((line_no, {k: v.strip() for k, v in zip(keys, values)}))
    return rows


def parse_float(row: Row, key: str, source: str = "") -> float:
    line_no, values = row
    raw = values.get(key, "")
    try:
        return float(raw)
    except ValueError as e:
        raise ValueError(f"{source}row {line_no}: column {key!r} is not a number: {raw!r}") from e


def parse_int(row: Row, key: str, source: str = "") -> int:
    value = parse_float(row, key, source)
    if value != int(value):
        raise ValueError(f"{source}row {row[0]}: column {key!r} must be an integer, got {value}")
    return int(value)


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    """Write a CSV table, UTF-8, newline-terminated. Floats use repr so they round-trip."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])


def format_cell(value: object) -> str:
    if isinstance(value, float):
        return repr(float(value))   # np.float64 reprs as "np.float64(...)" on numpy 2
    return str(value)
