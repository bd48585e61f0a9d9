"""Readers and writers for spectrum, map, correlation, config and report files.

Spectrum file::

    # kind: transmittance            (or transmittance_percent, absorption_cm-1)
    # thickness_um: 300              (required for the transmittance kinds)
    680,0.61
    681,0.6102

Map file::

    # retardation_map
    # width: 3
    # height: 2
    # pixel_pitch_um: 10
    # unit: nm
    0,3.1,nan
    2.5,2.9,3.0

Parsers never repair data: unsorted or duplicate wavelengths, malformed
numbers and shape mismatches are errors that carry the offending line.
Writers emit floats with ``repr`` so a parse of written data is exact.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import CorrelationPoint
from .birefringence import RetardationMap
from .types import SampleGeometry, Spectrum, SpectrumKind, ValidationError, WavelengthGrid

SCHEMA_VERSION = "1.0"
CORRELATION_HEADER = "sample_id,p1_ppm,metric,metric_err"

_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_DIRECTIVE = re.compile(r"^#\s*([A-Za-z_][\w\-]*)\s*:\s*(.*?)\s*$")


class ParseError(ValueError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


def _number(token: str, path, lineno) -> float:
    t = token.strip()
    if not _NUMBER.match(t):
        raise ParseError(f"malformed number {token!r}", path, lineno)
    return float(t)


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

_KINDS = {
    "transmittance": (SpectrumKind.TRANSMITTANCE, 1.0),
    "transmittance_percent": (SpectrumKind.TRANSMITTANCE, 100.0),
    "absorption_cm-1": (SpectrumKind.ABSORPTION, 1.0),
}


def _read_lines(path):
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8 text ({exc})", path) from exc


def parse_spectrum_text(text: str, path=None):
    """Parse spectrum file content; see :func:`parse_spectrum`."""
    directives = {}
    wl, vals = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if wl:
                raise ParseError("header line after data rows", path, lineno)
            m = _DIRECTIVE.match(line)
            if m:
                key = m.group(1).lower()
                if key in directives:
                    raise ParseError(f"duplicate directive {key!r}", path, lineno)
                directives[key] = m.group(2)
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 'wavelength_nm,value', got {raw!r}", path, lineno)
        x = _number(parts[0], path, lineno)
        y = _number(parts[1], path, lineno)
        if wl:
            if x == wl[-1]:
                raise ParseError(f"duplicate wavelength {x:g} nm", path, lineno)
            if x < wl[-1]:
                raise ParseError(f"wavelengths not sorted ascending at {x:g} nm", path, lineno)
        wl.append(x)
        vals.append(y)

    if "kind" not in directives:
        raise ParseError("missing '# kind:' directive", path)
    kind_key = directives["kind"].strip().lower()
    if kind_key not in _KINDS:
        raise ParseError(f"unknown kind {directives['kind']!r}", path)
    kind, scale = _KINDS[kind_key]

    geom = None
    if "thickness_um" in directives:
        t = _number(directives["thickness_um"], path, None)
        try:
            geom = SampleGeometry(t)
        except ValidationError as exc:
            raise ParseError(str(exc), path) from exc
    elif kind is SpectrumKind.TRANSMITTANCE:
        raise ParseError("missing '# thickness_um:' directive", path)

    if len(wl) < 2:
        raise ParseError(f"need at least 2 data rows, got {len(wl)}", path)
    values = np.asarray(vals) / scale if scale != 1.0 else np.asarray(vals)
    meta = {k: v for k, v in directives.items() if k not in ("kind", "thickness_um")}
    if path is not None:
        meta["source"] = str(path)
    try:
        spec = Spectrum(WavelengthGrid(wl), values, kind, meta=meta)
    except ValidationError as exc:
        raise ParseError(str(exc), path) from exc
    return spec, geom


def parse_spectrum(path):
    """Read a spectrum file.

    Returns
    -------
    (Spectrum, SampleGeometry or None)
        Percent transmittance is normalised to a fraction here and nowhere
        else. Geometry is ``None`` only for absorption files without a
        thickness directive.
    """
    return parse_spectrum_text("\n".join(_read_lines(path)), path)


def format_spectrum(s: Spectrum, geom: Optional[SampleGeometry] = None, extra: Optional[dict] = None) -> str:
    lines = [f"# kind: {s.kind.value}"]
    if geom is not None:
        lines.append(f"# thickness_um: {geom.thickness_um!r}")
    elif s.kind is SpectrumKind.TRANSMITTANCE:
        raise ValueError("a transmittance file needs the sample thickness")
    for k, v in (extra or {}).items():
        lines.append(f"# {k}: {v}")
    for x, y in zip(s.wavelengths, s.values):
        lines.append(f"{float(x)!r},{float(y)!r}")
    return "\n".join(lines) + "\n"


def write_spectrum(path, s: Spectrum, geom: Optional[SampleGeometry] = None, extra: Optional[dict] = None) -> None:
    Path(path).write_text(format_spectrum(s, geom, extra), encoding="utf-8")


# ---------------------------------------------------------------------------
# maps
# ---------------------------------------------------------------------------

def parse_map_text(text: str, path=None) -> RetardationMap:
    lines = text.splitlines()
    directives = {}
    flags = set()
    rows = []
    row_lines = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if rows:
                raise ParseError("header line after data rows", path, lineno)
            m = _DIRECTIVE.match(line)
            if m:
                directives[m.group(1).lower()] = m.group(2)
            else:
                flags.add(line.lstrip("#").strip().lower())
            continue
        rows.append(line)
        row_lines.append(lineno)

    if "retardation_map" not in flags:
        raise ParseError("missing '# retardation_map' header", path)
    for key in ("width", "height", "pixel_pitch_um", "unit"):
        if key not in directives:
            raise ParseError(f"missing '# {key}:' directive", path)
    if directives["unit"].strip().lower() != "nm":
        raise ParseError(f"unsupported unit {directives['unit']!r}; expected nm", path)
    try:
        W = int(directives["width"])
        H = int(directives["height"])
    except ValueError:
        raise ParseError("width and height must be integers", path) from None
    if W < 1 or H < 1:
        raise ParseError("width and height must be positive", path)
    pitch = _number(directives["pixel_pitch_um"], path, None)
    if len(rows) != H:
        raise ParseError(f"header declares height {H} but file has {len(rows)} rows", path)

    values = np.empty((H, W))
    mask = np.ones((H, W), dtype=bool)
    for r, (row, lineno) in enumerate(zip(rows, row_lines)):
        tokens = row.split(",")
        if len(tokens) != W:
            raise ParseError(
                f"row {r} has {len(tokens)} values, header declares width {W}", path, lineno
            )
        for c, tok in enumerate(tokens):
            t = tok.strip()
            if t.lower() == "nan":
                mask[r, c] = False
                values[r, c] = np.nan
                continue
            v = _number(t, path, lineno)
            if v < 0:
                raise ParseError(f"negative retardation {v!r} at row {r}, column {c}", path, lineno)
            values[r, c] = v
    try:
        return RetardationMap(values, mask, pitch)
    except ValidationError as exc:
        raise ParseError(str(exc), path) from exc


def parse_map(path) -> RetardationMap:
    return parse_map_text("\n".join(_read_lines(path)), path)


def format_map(m: RetardationMap) -> str:
    lines = [
        "# retardation_map",
        f"# width: {m.width}",
        f"# height: {m.height}",
        f"# pixel_pitch_um: {float(m.pixel_pitch_um)!r}",
        "# unit: nm",
    ]
    for r in range(m.height):
        lines.append(",".join(
            repr(float(m.values[r, c])) if m.mask[r, c] else "nan" for c in range(m.width)
        ))
    return "\n".join(lines) + "\n"


def write_map(path, m: RetardationMap) -> None:
    Path(path).write_text(format_map(m), encoding="utf-8")


# ---------------------------------------------------------------------------
# correlation tables
# ---------------------------------------------------------------------------

def parse_correlation_text(text: str, path=None) -> list[CorrelationPoint]:
    points = []
    header_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line.replace(" ", "") != CORRELATION_HEADER:
                raise ParseError(f"expected header {CORRELATION_HEADER!r}", path, lineno)
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", path, lineno)
        sid = parts[0].strip()
        if not sid:
            raise ParseError("empty sample_id", path, lineno)
        p1 = _number(parts[1], path, lineno)
        y = _number(parts[2], path, lineno)
        err = None if parts[3].strip() == "" else _number(parts[3], path, lineno)
        if not p1 > 0:
            raise ParseError(f"p1_ppm must be positive, got {p1!r}", path, lineno)
        points.append(CorrelationPoint(p1_ppm=p1, y=y, y_err=err, sample_id=sid))
    if not header_seen:
        raise ParseError(f"missing header {CORRELATION_HEADER!r}", path)
    return points


def parse_correlation(path) -> list[CorrelationPoint]:
    return parse_correlation_text("\n".join(_read_lines(path)), path)


def format_correlation(points) -> str:
    lines = [CORRELATION_HEADER]
    for p in points:
        err = "" if p.y_err is None else repr(float(p.y_err))
        lines.append(f"{p.sample_id},{float(p.p1_ppm)!r},{float(p.y)!r},{err}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def parse_config_text(text: str, path=None) -> dict:
    """Flat ``key = value`` pairs; ``#`` starts a comment. Values stay strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", path, lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ParseError("empty key", path, lineno)
        if key in out:
            raise ParseError(f"duplicate key {key!r}", path, lineno)
        out[key] = value
    return out


def parse_config(path) -> dict:
    return parse_config_text("\n".join(_read_lines(path)), path)


def float_list(value: str) -> list[float]:
    return [float(v) for v in value.replace(";", ",").split(",") if v.strip()]


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass
class ReportDocument:
    command: str
    inputs: list = field(default_factory=list)   # [{"path": ..., "sha256": ...}]
    config: dict = field(default_factory=dict)   # every default that shaped a number
    results: dict = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    def add_input(self, path) -> None:
        self.inputs.append({"path": str(path), "sha256": file_sha256(path)})

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "command": self.command,
            "inputs": self.inputs,
            "config": self.config,
            "results": self.results,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if dataclasses.is_dataclass(obj) and hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    if hasattr(obj, "name") and hasattr(obj, "value"):  # enums
        return obj.name
    return obj


def dumps_report(doc: ReportDocument) -> str:
    # float repr is the shortest string that round-trips exactly
    return json.dumps(_jsonable(doc.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_report(doc: ReportDocument, path) -> None:
    Path(path).write_text(dumps_report(doc), encoding="utf-8")


def read_report(path) -> ReportDocument:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return ReportDocument(
        command=data["command"],
        inputs=data.get("inputs", []),
        config=data.get("config", {}),
        results=data.get("results", {}),
        schema_version=data["schema_version"],
    )
