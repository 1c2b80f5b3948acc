"""Feature time series, correlation matrix and file exports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from . import charts
from .addressintel import AddressProfile
from .coreperiphery import CorePeripheryResult
from .features import FEATURE_NAMES, FeatureVector

AUX_NAMES = ("total_value", "n_addresses")

FEATURE_TITLES = {
    "n_components": "Number of components",
    "largest_component_ratio": "Relative size of the largest component",
    "modularity": "Modularity",
    "degree_centrality_std": "Std. of degree centrality",
    "n_core": "Number of core nodes",
    "avg_core_degree": "Average degree of core nodes",
    "total_value": "Daily transaction value (base units)",
    "n_addresses": "Number of addresses",
}

TABLE_COLUMNS = (
    "date",
    *FEATURE_NAMES,
    "n_core_raw",
    "avg_core_degree_raw",
    "z_error",
    "p_value",
    "significant",
    "total_value",
    "n_addresses",
)

PROFILE_COLUMNS = ("address", "kind", "label", "core_days", "outlier")


@dataclass(frozen=True)
class DayResult:
    """Everything reported for one day: features, activity totals, raw core-periphery output."""

    features: FeatureVector
    total_value: int
    n_addresses: int
    core: CorePeripheryResult | None = None

    @property
    def day(self) -> date:
        return self.features.day

    def to_dict(self) -> dict:
        return {
            "features": self.features.to_dict(),
            "total_value": str(self.total_value),
            "n_addresses": self.n_addresses,
            "core_periphery": self.core.to_dict() if self.core else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DayResult":
        f = dict(d["features"])
        f["day"] = date.fromisoformat(f["day"])
        cp = d.get("core_periphery")
        return cls(
            FeatureVector(**f),
            int(d["total_value"]),
            d["n_addresses"],
            CorePeripheryResult.from_dict(cp) if cp else None,
        )


@dataclass
class FeatureTable:
    rows: list[DayResult]
    metadata: dict = field(default_factory=dict)

    @property
    def dates(self) -> list[date]:
        return [r.day for r in self.rows]

    def column(self, name: str) -> list:
        if name in FEATURE_NAMES:
            return [getattr(r.features, name) for r in self.rows]
        if name in AUX_NAMES:
            return [getattr(r, name) for r in self.rows]
        raise KeyError(name)

    def records(self) -> list[dict]:
        out = []
        for r in self.rows:
            cp = r.core
            rec = {"date": r.day.isoformat()}
            rec.update({name: getattr(r.features, name) for name in FEATURE_NAMES})
            rec.update({
                "n_core_raw": cp.n_core if cp else None,
                "avg_core_degree_raw": cp.avg_core_degree if cp else None,
                "z_error": cp.z_error if cp else None,
                "p_value": cp.p_value if cp else None,
                "significant": cp.significant if cp else None,
                "total_value": r.total_value,
                "n_addresses": r.n_addresses,
            })
            out.append(rec)
        return out


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric matrix of pairwise correlations; NaN marks undefined entries."""

    labels: tuple[str, ...]
    values: np.ndarray
    method: str = "pearson"

    def get(self, a: str, b: str) -> float | None:
        v = self.values[self.labels.index(a), self.labels.index(b)]
        return None if math.isnan(v) else float(v)


def assemble_timeseries(per_day: Mapping[date, DayResult], metadata: dict | None = None) -> FeatureTable:
    if not per_day:
        raise ValueError("no days to assemble")
    rows = []
    for d in sorted(per_day):
        row = per_day[d]
        if row.day != d:
            raise ValueError(f"row for {row.day} filed under {d}")
        rows.append(row)
    return FeatureTable(rows, dict(metadata or {}))


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc, yc = x - x.mean(), y - y.mean()
    r = float(np.dot(xc, yc) / math.sqrt(float(np.dot(xc, xc)) * float(np.dot(yc, yc))))
    return max(-1.0, min(1.0, r))


def correlation_matrix(table: FeatureTable, method: str = "pearson", extended: bool = False) -> CorrelationMatrix:
    """Pairwise correlation across days.

    Any feature that is constant over the table gets an undefined (NaN) row and
    column, diagonal included.  ``extended`` appends the two activity columns.
    """
    if len(table.rows) < 2:
        raise ValueError("correlation needs at least two days")
    if method not in ("pearson", "spearman"):
        raise ValueError(f"unknown correlation method {method!r}")
    labels = FEATURE_NAMES + (AUX_NAMES if extended else ())
    cols = []
    for name in labels:
        col = np.array([float(v) for v in table.column(name)])
        cols.append(rankdata(col) if method == "spearman" else col)
    constant = [bool(np.all(c == c[0])) for c in cols]
    k = len(labels)
    out = np.full((k, k), np.nan)
    for i in range(k):
        if constant[i]:
            continue
        out[i, i] = 1.0
        for j in range(i + 1, k):
            if not constant[j]:
                out[i, j] = out[j, i] = _pearson(cols[i], cols[j])
    return CorrelationMatrix(labels, out, method)


def render_line_chart(dates: Sequence[date], values: Sequence[float], title: str,
                      x_label: str = "Date", y_label: str = "") -> bytes:
    return charts.render_line_chart(dates, values, title, x_label, y_label)


def render_heatmap(matrix: CorrelationMatrix, title: str = "Feature correlation") -> bytes:
    return charts.render_heatmap(matrix.labels, matrix.values, title)


# -- serialization ----------------------------------------------------------


def format_cell(v) -> str:
    """CSV cell text: shortest round-trip floats, blank for missing or undefined."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    if isinstance(v, (np.floating,)):
        return format_cell(float(v))
    if hasattr(v, "value"):
        return str(v.value)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    if isinstance(v, int) and not isinstance(v, bool) and abs(v) > 2**53:
        return str(v)
    if hasattr(v, "value"):
        return v.value
    return v


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def _profile_rows(profiles: Sequence[AddressProfile]) -> list[list]:
    return [[p.address, p.kind, p.label, p.core_days, p.outlier] for p in profiles]


def dumps(artifact, fmt: str) -> str:
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown export format {fmt!r}")
    if isinstance(artifact, FeatureTable):
        if fmt == "csv":
            recs = artifact.records()
            return _csv_text(TABLE_COLUMNS, [[rec[c] for c in TABLE_COLUMNS] for rec in recs])
        doc = {
            "metadata": artifact.metadata,
            "columns": list(TABLE_COLUMNS),
            "rows": [{c: _json_value(rec[c]) for c in TABLE_COLUMNS} for rec in artifact.records()],
        }
    elif isinstance(artifact, CorrelationMatrix):
        if fmt == "csv":
            rows = [[lab, *artifact.values[i].tolist()] for i, lab in enumerate(artifact.labels)]
            return _csv_text(("feature", *artifact.labels), rows)
        doc = {
            "method": artifact.method,
            "labels": list(artifact.labels),
            "values": [[_json_value(float(v)) for v in row] for row in artifact.values],
        }
    elif isinstance(artifact, (list, tuple)) and all(isinstance(p, AddressProfile) for p in artifact):
        if fmt == "csv":
            return _csv_text(PROFILE_COLUMNS, _profile_rows(artifact))
        doc = [dict(zip(PROFILE_COLUMNS, [_json_value(v) for v in row])) for row in _profile_rows(artifact)]
    else:
        raise TypeError(f"cannot export {type(artifact).__name__}")
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def write_text(path: Path, text: str | bytes) -> Path:
    """Write with LF line endings; IO failures name the path."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(text, bytes):
            path.write_bytes(text)
        else:
            path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}", str(path)) from exc
    return path


def export(artifact, fmt: str, path: Path) -> Path:
    return write_text(path, dumps(artifact, fmt))


def write_bundle(directory: Path, table: FeatureTable, corr: CorrelationMatrix | None,
                 profiles: Sequence[AddressProfile], token: str, activity_charts: bool = False) -> list[Path]:
    """Write the CSV tables and SVG charts for one token; returns the written paths."""
    directory = Path(directory)
    written = [
        export(table, "csv", directory / "features.csv"),
        export(profiles, "csv", directory / "profiles.csv"),
    ]
    if corr is not None:
        written.append(export(corr, "csv", directory / "correlation.csv"))
    chart_dir = directory / "charts"
    names = list(FEATURE_NAMES) + (list(AUX_NAMES) if activity_charts else [])
    expected = {f"{name}.svg" for name in names} | ({"correlation.svg"} if corr is not None else set())
    if chart_dir.exists():
        for old in chart_dir.glob("*.svg"):
            if old.name not in expected:
                old.unlink()
    for name in names:
        svg = render_line_chart(table.dates, [float(v) for v in table.column(name)],
                                f"{token}: {FEATURE_TITLES[name]}", "Date", FEATURE_TITLES[name])
        written.append(write_text(chart_dir / f"{name}.svg", svg))
    if corr is not None:
        written.append(write_text(chart_dir / "correlation.svg",
                                  render_heatmap(corr, f"{token}: feature correlation ({corr.method})")))
    return written
