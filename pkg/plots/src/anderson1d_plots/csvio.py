"""Validated readers for the simulation CLI's CSV files.

Each figure kind declares the exact header it consumes; anything else is
rejected naming the offending column.  Trailing ``# seed=...`` metadata
comments are skipped.
"""

from __future__ import annotations

import csv

import numpy as np

SCHEMAS = {
    "figure": ["n", "log_norm", "fit"],
    "dos": ["lambda_bin_center", "density", "method"],
    "temperature": ["x", "measured", "stderr", "predicted"],
    "tails": ["sample_id", "s", "q", "fluct"],
}


class SchemaError(ValueError):
    """The CSV header does not match the declared schema."""


def read_table(path: str, kind: str) -> dict[str, np.ndarray]:
    """Columns of a schema-validated CSV as arrays (strings stay strings)."""
    expected = SCHEMAS[kind]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {expected}")
        if header != expected:
            for got, want in zip(header, expected):
                if got != want:
                    raise SchemaError(
                        f"{path}: column {got!r} where {want!r} was expected")
            raise SchemaError(
                f"{path}: header {header} does not match schema {expected}")
        rows = [row for row in reader if row and not row[0].startswith("#")]
    if not rows:
        raise SchemaError(f"{path}: no rows")
    cols: dict[str, np.ndarray] = {}
    for j, name in enumerate(expected):
        values = [row[j] for row in rows]
        try:
            cols[name] = np.asarray(values, dtype=float)
        except ValueError:
            cols[name] = np.asarray(values)
    return cols
