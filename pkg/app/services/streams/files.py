"""
CSV ingestion: one point per line, comma separated decimal floats, an optional
header line and an optional trailing integer label column. Rows are parsed
lazily so memory does not grow with the file.
"""
import csv
import logging
from pathlib import Path
from typing import Iterator, Union

import numpy as np

from app.internal.errors import ConfigurationError, StreamParseError
from app.services.streams.points import HighDimPoint

logger = logging.getLogger(__name__)

SUPPORTED_FORMATS = ("csv",)


def _is_number(field: str) -> bool:
    try:
        float(field)
    except ValueError:
        return False
    return True


def _is_header(row: list[str]) -> bool:
    return bool(row) and not any(_is_number(f) for f in row)


def _rows(path: Path) -> Iterator[tuple[int, list[str]]]:
    with open(path, newline="", encoding="utf-8") as f:
        for line_number, row in enumerate(csv.reader(f), start=1):
            if not row or all(not f.strip() for f in row):
                continue
            if line_number == 1 and _is_header(row):
                continue
            yield line_number, row


def file_stream(path: Union[str, Path], fmt: str = "csv", labels: bool = False) -> Iterator[HighDimPoint]:
    path = Path(path)
    if fmt not in SUPPORTED_FORMATS:
        raise ConfigurationError(f"unsupported input format {fmt!r}; expected one of {SUPPORTED_FORMATS}")
    if not path.is_file():
        raise ConfigurationError(f"input file not found: {path}")

    width = None
    next_id = 0
    for line_number, row in _rows(path):
        if width is None:
            width = len(row)
            if labels and width < 2:
                raise StreamParseError("label column needs at least one coordinate", line_number)
        elif len(row) != width:
            raise StreamParseError(f"expected {width} fields, found {len(row)}", line_number)
        try:
            values = [float(f) for f in (row[:-1] if labels else row)]
            label = int(row[-1]) if labels else None
        except ValueError as e:
            raise StreamParseError(f"non-numeric field ({e})", line_number) from e
        if not np.all(np.isfinite(values)):
            raise StreamParseError("non-finite value", line_number)
        yield HighDimPoint(id=next_id, coords=np.asarray(values), label=label)
        next_id += 1
    logger.info(f"Read {next_id} points from {path}")


def count_rows(path: Union[str, Path]) -> int:
    """Data rows in a CSV file (header and blank lines excluded)"""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"input file not found: {path}")
    return sum(1 for _ in _rows(path))
