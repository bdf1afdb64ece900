"""Report records and their JSON/CSV serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

# significant digits kept in serialized output
DIGITS = 10


def clean(value: Any, digits: int = DIGITS) -> Any:
    """Convert to JSON-ready builtins, rounding floats to ``digits`` significant digits."""
    if isinstance(value, dict):
        return {str(k): clean(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v, digits) for v in value]
    if isinstance(value, np.ndarray):
        return clean(value.tolist(), digits)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [clean(value.real, digits), clean(value.imag, digits)]
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x) or math.isinf(x):
            return str(x)
        if x == 0.0:
            return 0.0
        out = float(f"{x:.{digits - 1}e}")
        return 0.0 if out == 0.0 else out
    return value


@dataclass
class BoundReport:
    """Outcome of checking ``lhs <= rhs``; the tolerance is kept in ``context``."""

    name: str
    lhs: float
    rhs: float
    satisfied: bool
    slack: float
    context: dict = field(default_factory=dict)

    @classmethod
    def compare(cls, name: str, lhs: float, rhs: float, tol: float,
                context: Optional[dict] = None) -> "BoundReport":
        ctx = dict(context or {})
        ctx["tolerance"] = tol
        lhs, rhs = float(lhs), float(rhs)
        return cls(name, lhs, rhs, bool(lhs <= rhs + tol), rhs - lhs, ctx)

    @classmethod
    def psd(cls, name: str, min_eig: float, tol: float, context: Optional[dict] = None) -> "BoundReport":
        """Dominance ``A <= B`` given ``min_eig = lambda_min(B - A)``."""
        ctx = dict(context or {})
        ctx["form"] = "lambda_max(lhs_op - rhs_op) <= 0"
        return cls.compare(name, -min_eig, 0.0, tol, ctx)

    def to_dict(self) -> dict:
        return clean({"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                      "satisfied": self.satisfied, "slack": self.slack, "context": self.context})


@dataclass
class ExperimentReport:
    """Sampled runs of a protocol, with exact reference values in ``exact``.

    ``tables`` maps a table name to ``{outcome: probability}``; every table
    sums to one.
    """

    trials: int
    acceptance_rate: float
    empirical_min_entropy: Optional[float]
    tables: dict
    seeds: list
    exact: dict = field(default_factory=dict)

    def __post_init__(self):
        if not -1e-9 <= self.acceptance_rate <= 1.0 + 1e-9:
            raise ValueError(f"acceptance rate {self.acceptance_rate} outside [0, 1]")
        # exact probabilities may overshoot by round-off
        self.acceptance_rate = min(max(float(self.acceptance_rate), 0.0), 1.0)
        for name, table in self.tables.items():
            total = sum(table.values())
            if table and abs(total - 1.0) > 1e-9:
                raise ValueError(f"table {name!r} sums to {total}")

    def to_dict(self) -> dict:
        return clean({"trials": self.trials, "acceptance_rate": self.acceptance_rate,
                      "empirical_min_entropy": self.empirical_min_entropy,
                      "tables": self.tables, "seeds": self.seeds, "exact": self.exact})


def dumps(obj: Any) -> str:
    return json.dumps(clean(obj), indent=2, sort_keys=True) + "\n"


CSV_FIELDS = ("item", "kind", "name", "lhs", "rhs", "satisfied", "slack", "context")


def reports_csv(rows: list[dict]) -> str:
    """CSV text for flattened report rows (``item`` and ``kind`` plus report fields)."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        out = {k: row.get(k, "") for k in CSV_FIELDS}
        out["context"] = json.dumps(clean(row.get("context", {})), sort_keys=True)
        w.writerow(out)
    return buf.getvalue()
