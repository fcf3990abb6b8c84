"""Scenario reports: aggregation and JSON/CSV emission.

JSON layout (see :data:`REPORT_SCHEMA`)::

    {
      "schema_version": 1,
      "scenario": "CvHeterodyneResend",
      "config": {...config echo...},
      "config_hash": "<sha256 hex>",
      "n_trials": 100000,
      "metrics": {"<snake_case>": {"mean", "variance", "ci_lo", "ci_hi", "n",
                                    "analytic_ref", "sigmas_off"}},
      "values": {"<snake_case>": number},
      "notes": {"<snake_case>": string},
      "sweep": null | {"columns": [...], "rows": [[...], ...]},
      "caveats": [string, ...],
      "errors": [{"code": string, "message": string}, ...]
    }

Non-finite numbers are written as ``null``.  Wall-clock time is kept on the
report object but only emitted on request, so two runs of the same config
produce identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

from .config import ScenarioConfig

Z95 = 1.959963984540054

CSV_METRIC_COLUMNS = ("name", "mean", "var", "ci_lo", "ci_hi", "n", "analytic_ref", "sigmas_off")

_NUM = {"type": ["number", "null"]}
REPORT_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": [
        "schema_version", "scenario", "config", "config_hash", "n_trials",
        "metrics", "values", "notes", "sweep", "caveats", "errors",
    ],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "scenario": {"type": "string"},
        "config": {"type": "object"},
        "config_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "n_trials": {"type": "integer", "minimum": 0},
        "metrics": {
            "type": "object",
            "propertyNames": {"pattern": "^[a-z][a-z0-9_]*$"},
            "additionalProperties": {
                "type": "object",
                "required": ["mean", "variance", "ci_lo", "ci_hi", "n", "analytic_ref", "sigmas_off"],
                "additionalProperties": False,
                "properties": {
                    "mean": _NUM, "variance": _NUM, "ci_lo": _NUM, "ci_hi": _NUM,
                    "n": {"type": "integer", "minimum": 0},
                    "analytic_ref": _NUM, "sigmas_off": _NUM,
                },
            },
        },
        "values": {
            "type": "object",
            "propertyNames": {"pattern": "^[a-z][a-z0-9_]*$"},
            "additionalProperties": _NUM,
        },
        "notes": {"type": "object", "additionalProperties": {"type": "string"}},
        "sweep": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["columns", "rows"],
                    "properties": {
                        "columns": {"type": "array", "items": {"type": "string"}},
                        "rows": {"type": "array", "items": {"type": "array", "items": _NUM}},
                    },
                },
            ]
        },
        "caveats": {"type": "array", "items": {"type": "string"}},
        "errors": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["code", "message"],
                "properties": {"code": {"type": "string"}, "message": {"type": "string"}},
            },
        },
        "timing": {"type": "object"},
    },
}


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    variance: float
    ci_lo: float
    ci_hi: float
    n: int
    analytic_ref: Optional[float] = None
    sigmas_off: Optional[float] = None

    @property
    def standard_error(self) -> float:
        return math.sqrt(self.variance / self.n) if self.n > 0 else math.nan


def summarize(values: np.ndarray, analytic_ref: Optional[float] = None) -> MetricSummary:
    """Mean, sample variance and normal 95% interval with compensated sums."""
    x = np.asarray(values, dtype=float).ravel()
    n = int(x.size)
    if n == 0:
        return MetricSummary(math.nan, math.nan, math.nan, math.nan, 0, analytic_ref, None)
    mean = math.fsum(x) / n
    var = math.fsum((x - mean) ** 2) / (n - 1) if n > 1 else 0.0
    se = math.sqrt(var / n)
    sigmas = None
    if analytic_ref is not None and math.isfinite(analytic_ref):
        diff = mean - analytic_ref
        sigmas = 0.0 if diff == 0.0 else (diff / se if se > 0 else math.copysign(math.inf, diff))
    return MetricSummary(mean, var, mean - Z95 * se, mean + Z95 * se, n, analytic_ref, sigmas)


@dataclass
class ScenarioReport:
    config: ScenarioConfig
    metrics: dict[str, MetricSummary] = field(default_factory=dict)
    values: dict[str, float] = field(default_factory=dict)
    notes: dict[str, str] = field(default_factory=dict)
    sweep_columns: Optional[list[str]] = None
    sweep_rows: Optional[list[list[float]]] = None
    caveats: list[str] = field(default_factory=list)
    errors: list[dict[str, str]] = field(default_factory=list)
    wall_clock_s: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.errors

    def add_error(self, code: str, message: str) -> None:
        self.errors.append({"code": code, "message": message})

    def to_dict(self, include_timing: bool = False) -> dict[str, Any]:
        d: dict[str, Any] = {
            "schema_version": 1,
            "scenario": self.config.scenario.value,
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash,
            "n_trials": self.config.n_trials,
            "metrics": {
                k: {
                    "mean": m.mean, "variance": m.variance, "ci_lo": m.ci_lo,
                    "ci_hi": m.ci_hi, "n": m.n, "analytic_ref": m.analytic_ref,
                    "sigmas_off": m.sigmas_off,
                }
                for k, m in self.metrics.items()
            },
            "values": dict(self.values),
            "notes": dict(self.notes),
            "sweep": None if self.sweep_columns is None
            else {"columns": list(self.sweep_columns), "rows": [list(r) for r in self.sweep_rows or []]},
            "caveats": list(self.caveats),
            "errors": list(self.errors),
        }
        if include_timing:
            d["timing"] = {"wall_clock_s": self.wall_clock_s}
        return _finite_or_null(d)


def _finite_or_null(obj):
    if isinstance(obj, dict):
        return {k: _finite_or_null(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_null(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def format_number(x) -> str:
    """17 significant digits with a '.' decimal point; empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    f = float(x)
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return format(f, ".17g")


def report_to_json(report: ScenarioReport, include_timing: bool = False) -> str:
    return json.dumps(report.to_dict(include_timing), sort_keys=True, indent=2, allow_nan=False) + "\n"


def report_to_csv(report: ScenarioReport) -> str:
    """Metric table, or the sweep grid when the report carries one."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if report.sweep_columns is not None:
        w.writerow(report.sweep_columns)
        for row in report.sweep_rows or []:
            w.writerow([format_number(v) for v in row])
        return buf.getvalue()
    w.writerow(CSV_METRIC_COLUMNS)
    for name, m in report.metrics.items():
        w.writerow([name] + [format_number(v) for v in (
            m.mean, m.variance, m.ci_lo, m.ci_hi, m.n, m.analytic_ref, m.sigmas_off)])
    for name, v in report.values.items():
        w.writerow([name, format_number(v), "", "", "", "", "", ""])
    return buf.getvalue()


def sweep_to_csv(key: str, results: Sequence[tuple[float, ScenarioReport]]) -> str:
    """Plot-ready table with one row per grid point of a parameter sweep."""
    metric_names: list[str] = []
    value_names: list[str] = []
    for _, rep in results:
        metric_names += [k for k in rep.metrics if k not in metric_names]
        value_names += [k for k in rep.values if k not in value_names]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = [key]
    for k in metric_names:
        header += [f"{k}_mean", f"{k}_ci_lo", f"{k}_ci_hi"]
    header += value_names
    w.writerow(header)
    for x, rep in results:
        row = [format_number(x)]
        for k in metric_names:
            m = rep.metrics.get(k)
            row += [format_number(m.mean), format_number(m.ci_lo), format_number(m.ci_hi)] if m else ["", "", ""]
        row += [format_number(rep.values.get(k)) for k in value_names]
        w.writerow(row)
    return buf.getvalue()


def sweep_to_json(key: str, results: Sequence[tuple[float, ScenarioReport]]) -> str:
    doc = {"sweep_key": key, "points": [{"value": x, "report": r.to_dict()} for x, r in results]}
    return json.dumps(_finite_or_null(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(text: str, destination) -> None:
    if destination is None or destination == "-":
        import sys

        sys.stdout.write(text)
        return
    path = Path(destination)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write report to {str(path)!r}: {exc}") from exc


def emit_report(report: ScenarioReport, fmt: str = "json", destination=None,
                include_timing: bool = False) -> str:
    """Serialise ``report`` as ``json`` or ``csv`` and write it to ``destination``.

    ``destination`` may be a path, ``"-"``/``None`` for stdout.  Returns the text.
    """
    if fmt == "json":
        text = report_to_json(report, include_timing)
    elif fmt == "csv":
        text = report_to_csv(report)
    else:
        raise ValueError(f"format must be 'json' or 'csv', got {fmt!r}")
    _write(text, destination)
    return text


def emit_sweep(key: str, results: Iterable[tuple[float, ScenarioReport]], fmt: str = "csv",
               destination=None) -> str:
    results = list(results)
    text = sweep_to_csv(key, results) if fmt == "csv" else sweep_to_json(key, results)
    _write(text, destination)
    return text
