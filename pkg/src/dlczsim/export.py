"""CSV/JSON writers and readers for dlczsim curves and reports."""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from dlczsim.models import CurveMetadata, CurveOutput

logger = logging.getLogger(__name__)

DATA_COLUMNS = ("dt_ns", "g12", "sigma")


class ExportError(Exception):
    """Custom exception for failed writes or unreadable curve files."""
    pass


class DataFileError(Exception):
    """Custom exception for malformed measured-data files."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _metadata_lines(metadata: CurveMetadata) -> list[str]:
    lines = [
        f"scenario: {metadata.scenario}",
        f"kind: {metadata.kind}",
        f"version: {metadata.version}",
        f"preset_version: {metadata.preset_version}",
        f"config_hash: {metadata.config_hash}",
    ]
    if metadata.backend is not None:
        lines.append(f"backend: {metadata.backend}")
    lines += [f"units.{key}: {value}" for key, value in sorted(metadata.units.items())]
    lines += [f"extra.{key}: {value}" for key, value in sorted(metadata.extra.items())]
    return lines


def format_curve_csv(curve: CurveOutput) -> str:
    """Render a curve as '#' metadata lines, a header row and repr-formatted rows."""
    buffer = io.StringIO()
    for line in _metadata_lines(curve.metadata):
        buffer.write(f"# {line}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(curve.columns)
    for row in curve.rows:
        writer.writerow([repr(float(value)) for value in row])
    return buffer.getvalue()


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise ExportError(f"Cannot write {path}: {e}") from e


def sidecar_path(path: Path) -> Path:
    return Path(path).with_suffix(".json")


def write_curve(curve: CurveOutput, path: Path) -> tuple[Path, Path]:
    """Write ``curve`` to ``path`` as CSV plus a JSON sidecar with the same metadata.

    Returns:
        The CSV and sidecar paths.

    Raises:
        ExportError: If either file cannot be written.
    """
    path = Path(path)
    json_path = sidecar_path(path)
    if json_path == path:
        raise ExportError(f"Output {path} would collide with its JSON sidecar; use a .csv name")
    _write_text(path, format_curve_csv(curve))
    sidecar = {"metadata": curve.metadata.model_dump(), "columns": curve.columns, "rows": len(curve.rows)}
    _write_text(json_path, json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    logger.debug("Wrote %d rows to %s", len(curve.rows), path)
    return path, json_path


def write_report(report: BaseModel, path: Path) -> Path:
    """Write a pydantic report as indented JSON."""
    path = Path(path)
    _write_text(path, json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True) + "\n")
    return path


def _parse_metadata(lines: list[str]) -> CurveMetadata:
    fields: dict[str, object] = {}
    units: dict[str, str] = {}
    extra: dict[str, str] = {}
    for line in lines:
        key, sep, value = line.partition(":")
        if not sep:
            continue
        key, value = key.strip(), value.strip()
        if key.startswith("units."):
            units[key.removeprefix("units.")] = value
        elif key.startswith("extra."):
            extra[key.removeprefix("extra.")] = value
        else:
            fields[key] = value
    return CurveMetadata(**fields, units=units, extra=extra)


def read_curve_csv(path: Path) -> CurveOutput:
    """Read a curve written by :func:`write_curve`.

    Raises:
        ExportError: If the file is missing, lacks metadata or has bad rows.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ExportError(f"Cannot read {path}: {e}") from e

    comments: list[str] = []
    body: list[str] = []
    for line in text.splitlines():
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif line.strip():
            body.append(line)
    if not body:
        raise ExportError(f"{path} has no header row")
    try:
        metadata = _parse_metadata(comments)
    except ValueError as e:
        raise ExportError(f"{path} has incomplete metadata: {e}") from e

    reader = csv.reader(body)
    columns = next(reader)
    rows = []
    for number, row in enumerate(reader, start=2):
        try:
            rows.append([float(value) for value in row])
        except ValueError as e:
            raise ExportError(f"{path}: row {number} is not numeric") from e
    return CurveOutput(metadata=metadata, columns=columns, rows=rows)


def read_g12_data(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read measured cross-correlations from a CSV with columns dt_ns, g12, sigma.

    Lines starting with '#' and blank lines are ignored; the first remaining
    line must be a header naming the three columns in any order.

    Raises:
        DataFileError: With the offending line number for malformed content.
    """
    path = Path(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataFileError(f"cannot read {path}: {e}") from e

    header: list[str] | None = None
    values: list[list[float]] = []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cells = [cell.strip() for cell in next(csv.reader([stripped]))]
        if header is None:
            if sorted(cells) != sorted(DATA_COLUMNS):
                raise DataFileError(f"header must name {', '.join(DATA_COLUMNS)}, got {cells}", number)
            header = cells
            continue
        if len(cells) != len(header):
            raise DataFileError(f"expected {len(header)} values, got {len(cells)}", number)
        try:
            record = dict(zip(header, (float(cell) for cell in cells)))
        except ValueError as e:
            raise DataFileError(f"non-numeric value ({e})", number) from e
        if record["sigma"] <= 0:
            raise DataFileError("sigma must be positive", number)
        values.append([record[name] for name in DATA_COLUMNS])

    if header is None:
        raise DataFileError(f"{path} has no header row")
    if not values:
        raise DataFileError(f"{path} has no data rows")
    table = np.array(values, dtype=float)
    return table[:, 0], table[:, 1], table[:, 2]
