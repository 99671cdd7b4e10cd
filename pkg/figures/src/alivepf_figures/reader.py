"""Reader for the experiment CSV contract.

Every experiment CSV starts with one ``# key=value ...`` metadata line,
followed by a header row and comma-separated data rows. Floats are
written with repr so they round-trip exactly, empty cells are missing
values, and list-valued metadata entries are ';'-joined. The metadata
line always carries ``rows=<count>``, which must match the number of
data rows actually present.

This module only parses; it never computes statistics. All numbers in
the rendered figures come straight from the files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class SchemaMismatch(Exception):
    """A CSV does not match the expected layout for its figure family.

    ``columns`` lists the offending column names when the problem is a
    missing or malformed column; it is empty for structural problems
    (missing metadata line, ragged rows, row-count mismatch).
    """

    def __init__(self, message: str, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


@dataclass(frozen=True)
class TableFile:
    """One parsed CSV: metadata mapping, header, and per-column cells."""

    path: Path
    meta: dict
    header: tuple
    columns: dict = field(repr=False)
    n_rows: int

    def label(self) -> str:
        """Short legend label: the most distinguishing metadata entry."""
        for key in ("series", "epsilon", "n", "experiment"):
            if key in self.meta and self.meta[key]:
                prefix = "" if key in ("series", "experiment") else f"{key}="
                return f"{prefix}{self.meta[key]}"
        return self.path.stem


def read_table(path) -> TableFile:
    """Parse one experiment CSV, validating the structural contract."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise SchemaMismatch(f"cannot read {path}: {err}")
    lines = text.splitlines()
    if len(lines) < 2 or not lines[0].startswith("# "):
        raise SchemaMismatch(
            f"{path}: expected a '# key=value ...' metadata line and a header")
    meta = {}
    for token in lines[0][2:].split(" "):
        if not token:
            continue
        key, _, value = token.partition("=")
        meta[key] = value
    header = tuple(lines[1].split(","))
    if any(not name for name in header):
        raise SchemaMismatch(f"{path}: header has empty column names")
    if len(set(header)) != len(header):
        duplicates = sorted({c for c in header if header.count(c) > 1})
        raise SchemaMismatch(f"{path}: duplicate columns {duplicates}",
                             columns=duplicates)
    rows = []
    for number, line in enumerate(lines[2:], start=3):
        cells = line.split(",")
        if len(cells) != len(header):
            raise SchemaMismatch(
                f"{path}: line {number} has {len(cells)} cells, "
                f"header has {len(header)}")
        rows.append(cells)
    if "rows" in meta:
        try:
            declared = int(meta["rows"])
        except ValueError:
            raise SchemaMismatch(f"{path}: non-integer rows={meta['rows']!r}")
        if declared != len(rows):
            raise SchemaMismatch(
                f"{path}: metadata declares rows={declared} "
                f"but {len(rows)} data rows are present")
    columns = {
        name: [row[i] for row in rows] for i, name in enumerate(header)
    }
    return TableFile(path=path, meta=meta, header=header, columns=columns,
                     n_rows=len(rows))


def require_columns(table: TableFile, names) -> None:
    """Raise SchemaMismatch listing every expected column that is absent."""
    missing = [name for name in names if name not in table.columns]
    if missing:
        raise SchemaMismatch(
            f"{table.path}: missing columns {missing} "
            f"(has {list(table.header)})", columns=missing)


def floats(table: TableFile, name: str) -> np.ndarray:
    """One column as floats; empty cells become nan."""
    require_columns(table, (name,))
    values = np.empty(table.n_rows)
    for i, cell in enumerate(table.columns[name]):
        if cell == "":
            values[i] = math.nan
            continue
        try:
            values[i] = float(cell)
        except ValueError:
            raise SchemaMismatch(
                f"{table.path}: column {name!r} has non-numeric "
                f"cell {cell!r}", columns=[name])
    return values


def strings(table: TableFile, name: str) -> list:
    """One column as raw strings."""
    require_columns(table, (name,))
    return list(table.columns[name])


def meta_indices(meta, key: str) -> list:
    """A ';'-joined integer list from the metadata line ([] if absent)."""
    raw = meta.get(key, "")
    if not raw:
        return []
    try:
        return [int(part) for part in raw.split(";")]
    except ValueError:
        raise SchemaMismatch(f"metadata {key}={raw!r} is not a ';'-joined "
                             f"integer list")
