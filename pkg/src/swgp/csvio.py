"""CSV reading/writing with round-trip exact floats and atomic replacement."""

from __future__ import annotations

import csv
import io
import os
import tempfile


class CsvFormatError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


def format_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, int)) and not isinstance(v, float):
        return str(int(v))
    return format(float(v), ".17g")


def dumps(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    """Write atomically: temp file in the target directory, then rename."""
    text = dumps(header, rows)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(path):
    """Return ``(header, rows)`` with all cells as strings."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError("empty file", line=1)
    return rows[0], rows[1:]


def read_numeric(path, expected_prefix=None):
    """Read a CSV of floats; returns ``(header, list of float rows)``.

    Raises :class:`CsvFormatError` with the 1-based line number on bad input.
    """
    header, rows = read_csv(path)
    header = [h.strip() for h in header]
    if expected_prefix is not None and header[: len(expected_prefix)] != list(expected_prefix):
        raise CsvFormatError(f"header must start with {','.join(expected_prefix)}", line=1)
    out = []
    for i, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise CsvFormatError(f"expected {len(header)} fields, got {len(row)}", line=i)
        try:
            out.append([float(c) for c in row])
        except ValueError as exc:
            raise CsvFormatError(str(exc), line=i) from None
    return header, out
