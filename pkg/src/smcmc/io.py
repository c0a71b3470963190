"""CSV ingestion and result emission.

Numbers are written with 17 significant digits so repeated runs can be compared
byte for byte; wall-clock timings go to a separate file for the same reason.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "CsvFormatError",
    "SCHEMAS",
    "HYPERTENSION_CUTOFF",
    "load_csv",
    "fmt",
    "Table",
    "write_csv",
    "read_csv",
    "sha256_file",
    "emit_report",
]

# systolic blood pressure strictly above this is classed as hypertensive
HYPERTENSION_CUTOFF = 139.0

SCHEMAS: dict[str, tuple[str, ...]] = {
    "mixture": ("y",),
    "gp": ("x1", "x2", "y"),
    "heart": ("sbp", "obesity", "age"),
}


class CsvFormatError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def load_csv(path: str | Path, schema: str) -> list:
    """Read observations for ``schema``.

    ``mixture`` yields floats from column ``y``; ``gp`` yields ``(x, y)`` pairs
    from ``x1, x2, y``; ``heart`` yields ``(x, y)`` with ``x = (obesity, age)`` and
    ``y = 1`` when ``sbp > 139``.  Other columns are ignored.  A file with only a
    header gives an empty list.
    """
    if schema not in SCHEMAS:
        raise ValueError(f"unknown schema {schema!r}; choose from {sorted(SCHEMAS)}")
    need = SCHEMAS[schema]
    path = Path(path)
    out: list = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().strip('"') for h in next(reader)]
        except StopIteration:
            raise CsvFormatError(path, 1, "missing header row") from None
        missing = [c for c in need if c not in header]
        if missing:
            raise CsvFormatError(path, 1, f"header lacks column(s) {missing}")
        idx = [header.index(c) for c in need]
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CsvFormatError(path, line, f"expected {len(header)} fields, got {len(row)}")
            vals = []
            for c, i in zip(need, idx):
                try:
                    v = float(row[i])
                except ValueError:
                    raise CsvFormatError(path, line, f"non-numeric value {row[i]!r} in column {c!r}") from None
                if not math.isfinite(v):
                    raise CsvFormatError(path, line, f"non-finite value in column {c!r}")
                vals.append(v)
            if schema == "mixture":
                out.append(vals[0])
            elif schema == "gp":
                if vals[2] not in (0.0, 1.0):
                    raise CsvFormatError(path, line, f"label must be 0 or 1, got {row[idx[2]]!r}")
                out.append((np.array(vals[:2]), int(vals[2])))
            else:
                sbp, obesity, age = vals
                out.append((np.array([obesity, age]), int(sbp > HYPERTENSION_CUTOFF)))
    return out


def fmt(v: Any) -> str:
    """17-significant-digit text for floats; blanks for ``None``."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


@dataclass
class Table:
    header: Sequence[str]
    rows: list[Sequence[Any]] = field(default_factory=list)


def write_csv(path: str | Path, table: Table) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(table.header)
            for row in table.rows:
                if len(row) != len(table.header):
                    raise ValueError(f"row of length {len(row)} for header of length {len(table.header)}")
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def emit_report(
    tables: dict[str, Table],
    outdir: str | Path,
    manifest: dict[str, Any],
    timings: Table | None = None,
    report: dict[str, Any] | None = None,
) -> dict[str, Path]:
    """Write every table as ``<name>.csv`` plus ``manifest.json``.

    The manifest receives a ``files`` entry mapping each CSV to its sha256.
    ``timings`` (non-deterministic) is written to ``timing.csv`` and left out of
    the digests; ``report`` is dumped to ``report.json``.
    """
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written: dict[str, Path] = {}
    for name, table in tables.items():
        written[name] = write_csv(out / f"{name}.csv", table)
    files = {p.name: sha256_file(p) for p in written.values()}
    if report is not None:
        p = out / "report.json"
        p.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        written["report"] = p
        files[p.name] = sha256_file(p)
    if timings is not None:
        written["timing"] = write_csv(out / "timing.csv", timings)
    man = dict(manifest)
    man["files"] = files
    p = out / "manifest.json"
    p.write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
    written["manifest"] = p
    return written


def rows_from(records: Iterable[dict[str, Any]], header: Sequence[str]) -> Table:
    return Table(list(header), [[r.get(h) for h in header] for r in records])
