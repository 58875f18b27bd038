"""Result rows, CSV writers, and config fingerprints.

CSV files are UTF-8 with a header row and RFC-4180 quoting; floats are
formatted with ``repr`` (shortest round-trip), so identical runs produce
byte-identical files.  Timestamps live only in the JSON manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence


def format_cell(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(float(x))  # plain shortest round-trip, also for numpy scalars
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if x is None:
        return ""
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(c) for c in row])


def stable_fingerprint(obj: Any) -> str:
    """sha256 of the canonical JSON serialization (sorted keys)."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class ResultRow:
    """One verified quantity: value, reference, tolerance, verdict, provenance."""

    experiment: str
    check: str
    value: float | str
    std_error: float | None = None
    reference: float | str | None = None
    tolerance: float | None = None
    passed: bool | None = None
    samples: int | None = None
    seed: str = ""
    fingerprint: str = ""

    HEADER = (
        "experiment",
        "check",
        "value",
        "std_error",
        "reference",
        "tolerance",
        "passed",
        "samples",
        "seed",
        "fingerprint",
    )

    def cells(self) -> tuple:
        return (
            self.experiment,
            self.check,
            self.value,
            self.std_error,
            self.reference,
            self.tolerance,
            self.passed,
            self.samples,
            self.seed,
            self.fingerprint,
        )


@dataclass
class ExperimentResult:
    """Rows plus optional named series for external plotting."""

    rows: list[ResultRow] = field(default_factory=list)
    series: dict[str, tuple[tuple[str, ...], list[tuple]]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows if r.passed is not None)


def write_result_csv(path: Path, rows: Iterable[ResultRow]) -> None:
    write_csv(path, ResultRow.HEADER, (r.cells() for r in rows))
