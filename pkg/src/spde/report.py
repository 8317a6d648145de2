"""Structured study results shared by every module and the CLI."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

SCHEMA_VERSION = 1

PASS = "PASS"
FAIL = "FAIL"
DIVERGENT = "DIVERGENT"
COMPUTED = "COMPUTED"


def _plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


@dataclass
class Report:
    """Outcome of a study: verdict, scalar values, tables and the settings used.

    ``tables`` maps a table name to a list of row dicts sharing the same keys,
    which is what the CLI writes out as CSV.
    """

    name: str
    verdict: str
    values: dict[str, Any] = field(default_factory=dict)
    tables: dict[str, list[dict[str, Any]]] = field(default_factory=dict)
    tolerances: dict[str, float] = field(default_factory=dict)
    rng: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict in (PASS, COMPUTED)

    def to_dict(self) -> dict[str, Any]:
        return _plain(
            {
                "schema": SCHEMA_VERSION,
                "name": self.name,
                "verdict": self.verdict,
                "values": self.values,
                "tables": self.tables,
                "tolerances": self.tolerances,
                "rng": self.rng,
                "notes": self.notes,
            }
        )

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def fit_loglog(x, y) -> dict[str, float]:
    """Least-squares slope of log(y) against log(x), with standard error and R^2."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 2:
        raise ValueError("need at least two points for a log-log fit")
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = coef
    resid = ly - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    n = lx.size
    if n > 2:
        s2 = ss_res / (n - 2)
        se = math.sqrt(s2 / float(((lx - lx.mean()) ** 2).sum()))
    else:
        se = 0.0
    return {"slope": float(slope), "intercept": float(intercept), "stderr": se, "r2": r2}
