"""Trace and report file formats plus dBm/linear conversions.

Trace CSV schema: optional '#' comment lines carrying key=value metadata
(unit, rbw_hz, instrument, grid_start_hz, grid_step_hz), then the header row
``frequency_hz,psd`` followed by two numeric columns.  Frequencies must be
ascending and uniform.  Values are written with 17 significant digits so
float64 roundtrips are lossless.

Reports are JSON with sorted keys and an explicit schema_version; the
timestamp field is optional and omitted by default so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

import numpy as np

from . import __version__ as _tool_version
from .dshi import UNIT_DBM, UNIT_LINEAR, SpectrumTrace
from .errors import DomainError, ParseError, SchemaError, TraceIOError
from .estimate import FitResult, LinewidthEstimate
from .lineshape import FrequencyGrid

__all__ = [
    "SCHEMA_VERSION",
    "AnalysisReport",
    "dbm_to_linear",
    "linear_to_dbm",
    "read_trace",
    "write_trace",
    "write_report",
    "read_report",
]

SCHEMA_VERSION = 1

_HEADER_ROW = "frequency_hz,psd"
_UNIT_ALIASES = {
    "linear": UNIT_LINEAR,
    "linear-power-per-hz": UNIT_LINEAR,
    "dbm": UNIT_DBM,
    "dbm-per-rbw": UNIT_DBM,
}


def dbm_to_linear(value_dbm):
    """Power in mW from dBm."""
    out = 10.0 ** (np.asarray(value_dbm, dtype=float) / 10.0)
    return float(out) if np.ndim(value_dbm) == 0 else out


def linear_to_dbm(value_mw):
    """dBm from power in mW; non-positive input is outside the log domain."""
    arr = np.asarray(value_mw, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("dBm is undefined for non-positive power")
    out = 10.0 * np.log10(arr)
    return out if np.ndim(value_mw) else float(out)


def write_trace(trace: SpectrumTrace, path) -> None:
    """Write a trace in the CSV schema (17 significant digits)."""
    grid = trace.grid
    lines = [
        f"# unit={trace.unit}",
        f"# rbw_hz={trace.rbw:.17g}",
        f"# grid_start_hz={grid.start:.17g}",
        f"# grid_step_hz={grid.step:.17g}",
        _HEADER_ROW,
    ]
    freqs = grid.points()
    lines.extend(
        f"{freqs[i]:.17g},{trace.values[i]:.17g}" for i in range(grid.count)
    )
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise TraceIOError(f"cannot write trace to {path}: {exc}") from exc


def read_trace(path) -> SpectrumTrace:
    """Parse a trace CSV, rejecting non-monotone or non-uniform grids."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            raw_lines = fh.readlines()
    except OSError as exc:
        raise TraceIOError(f"cannot read trace from {path}: {exc}") from exc

    meta: Dict[str, str] = {}
    freqs = []
    values = []
    header_seen = False
    for lineno, line in enumerate(raw_lines, start=1):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            body = text[1:].strip()
            if "=" in body:
                key, _, val = body.partition("=")
                meta[key.strip()] = val.strip()
            continue
        if not header_seen:
            if text != _HEADER_ROW:
                raise ParseError(f"expected header {_HEADER_ROW!r}, got {text!r}",
                                 lineno)
            header_seen = True
            continue
        parts = text.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 2 columns, got {len(parts)}", lineno)
        try:
            freqs.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError:
            raise ParseError(f"non-numeric row {text!r}", lineno) from None

    if not header_seen:
        raise ParseError("missing header row")
    if len(freqs) < 2:
        raise SchemaError(f"trace needs >= 2 rows, found {len(freqs)}")

    f = np.asarray(freqs)
    if np.any(np.diff(f) <= 0):
        raise SchemaError("frequencies must be strictly ascending")
    step = (f[-1] - f[0]) / (len(f) - 1)
    grid = FrequencyGrid(f[0], step, len(f))
    if "grid_start_hz" in meta and "grid_step_hz" in meta:
        declared = FrequencyGrid(float(meta["grid_start_hz"]),
                                 float(meta["grid_step_hz"]), len(f))
        if abs(declared.start - f[0]) <= 1e-9 * step and \
                abs(declared.step - step) <= 1e-9 * step:
            grid = declared
    if np.max(np.abs(f - grid.points())) > 1e-6 * step:
        raise SchemaError("frequency grid is not uniform")

    unit_token = meta.get("unit", UNIT_LINEAR).lower()
    if unit_token not in _UNIT_ALIASES:
        raise SchemaError(f"unknown unit {unit_token!r}")
    rbw = float(meta.get("rbw_hz", 0.0))
    return SpectrumTrace(grid, np.asarray(values), _UNIT_ALIASES[unit_token], rbw)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalysisReport:
    """Self-describing record of one estimation/fit run."""

    input: Dict[str, Any]
    method: str
    payload: Union[LinewidthEstimate, FitResult]
    config: Dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None
    tool_version: str = _tool_version
    timestamp: Optional[str] = None


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if math.isnan(value):
            return None
        return value
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, frozenset):
        return sorted(obj)
    return obj


def _payload_dict(payload) -> Dict[str, Any]:
    if isinstance(payload, LinewidthEstimate):
        return {
            "result": {
                "lorentzian_fwhm_hz": payload.lorentzian_fwhm,
                "gaussian_fwhm_hz": payload.gaussian_fwhm,
                "voigt_fwhm_hz": payload.voigt_fwhm,
                "single_laser_fwhm_hz": payload.single_laser_fwhm,
                "flags": sorted(payload.flags),
                "iterations": payload.iterations,
                "residual": payload.residual,
            }
        }
    if isinstance(payload, FitResult):
        return {
            "fit": {
                "parameters": payload.parameters,
                "covariance": payload.covariance,
                "converged": payload.converged,
                "iterations": payload.iterations,
                "residual_norm": payload.residual_norm,
            }
        }
    raise DomainError(f"cannot serialize payload of type {type(payload).__name__}")


def write_report(report: AnalysisReport, path) -> None:
    """Serialize a report as sorted-key JSON (diff-stable)."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": report.tool_version,
        "input": report.input,
        "method": report.method,
        "config": report.config,
        "seed": report.seed,
    }
    if report.timestamp is not None:
        doc["timestamp"] = report.timestamp
    doc.update(_payload_dict(report.payload))
    try:
        with open(path, "w", encoding="ascii") as fh:
            json.dump(_sanitize(doc), fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise TraceIOError(f"cannot write report to {path}: {exc}") from exc


def read_report(path) -> Dict[str, Any]:
    """Load a report back as a plain dictionary."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            return json.load(fh)
    except OSError as exc:
        raise TraceIOError(f"cannot read report from {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid report JSON in {path}: {exc}") from exc
