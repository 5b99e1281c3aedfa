"""Citizen-science walk sessions: GPS alignment of handheld-sensor streams,
GeoJSON export, per-team elapsed-time series, and affine calibration of
low-cost units against compliance-grade reference instruments.

A walk session file is YAML with team metadata plus three streams:
``gps`` fixes, ``samples`` (encoded record lines, same codec as the archive),
and free-text ``annotations``. See scenarios/walk_team_red.yaml.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np
import yaml

from .analytics import ols
from .errors import (
    DegeneratePredictor,
    InsufficientGps,
    InsufficientPairs,
    ParseError,
    ValidationError,
)
from .records import METRIC_FIELDS, SampleRecord, decode_line, format_ts, parse_when


@dataclass(frozen=True)
class GpsFix:
    ts: datetime
    lat: float
    lon: float
    accuracy_m: float = 5.0

    def __post_init__(self):
        if self.accuracy_m <= 0.0:
            raise ValidationError("accuracy_m", "GPS accuracy must be > 0")


@dataclass(frozen=True)
class Annotation:
    ts: datetime
    label: str


@dataclass(frozen=True)
class WalkTrace:
    team_id: str
    device_id: str
    gps_fixes: tuple
    samples: tuple
    annotations: tuple = ()
    dust_min_particle_um: float = 1.0  # handheld kits count coarser particles
    clock_offset_s: float = 0.0  # device clock minus GPS clock; 0 assumed

    def __post_init__(self):
        for name, stream in (("gps_fixes", self.gps_fixes), ("samples", self.samples)):
            times = [item.ts for item in stream]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValidationError(name, f"{name} timestamps must be strictly increasing")


@dataclass(frozen=True)
class AlignedSample:
    ts: datetime
    lat: float
    lon: float
    record: SampleRecord
    annotations: tuple = ()


@dataclass(frozen=True)
class AlignedTrace:
    team_id: str
    points: tuple
    dropped_before: int
    dropped_after: int
    annotations: tuple = ()


def align(trace: WalkTrace, annotation_window_s: float = 30.0) -> AlignedTrace:
    """Geo-reference each sample by linear interpolation between the bracketing
    GPS fixes. Samples outside the fix envelope are dropped and counted."""
    fixes = trace.gps_fixes
    if len(fixes) < 2:
        raise InsufficientGps(f"need at least 2 fixes, got {len(fixes)}")
    fix_t = np.array([f.ts.timestamp() for f in fixes])
    fix_lat = np.array([f.lat for f in fixes])
    fix_lon = np.array([f.lon for f in fixes])
    offset = trace.clock_offset_s
    points = []
    dropped_before = dropped_after = 0
    for rec in trace.samples:
        t = rec.ts.timestamp() - offset
        if t < fix_t[0]:
            dropped_before += 1
            continue
        if t > fix_t[-1]:
            dropped_after += 1
            continue
        lat = float(np.interp(t, fix_t, fix_lat))
        lon = float(np.interp(t, fix_t, fix_lon))
        near = tuple(
            a
            for a in trace.annotations
            if abs((a.ts - rec.ts).total_seconds()) <= annotation_window_s
        )
        points.append(AlignedSample(rec.ts, lat, lon, rec, near))
    return AlignedTrace(
        team_id=trace.team_id,
        points=tuple(points),
        dropped_before=dropped_before,
        dropped_after=dropped_after,
        annotations=trace.annotations,
    )


def export_geojson(aligned_traces) -> dict:
    """One LineString per team (RFC 7946 [lon, lat] positions) plus Point
    features for annotations; empty teams are omitted."""
    features = []
    for trace in aligned_traces:
        if not trace.points:
            continue
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[p.lon, p.lat] for p in trace.points],
                },
                "properties": {"team_id": trace.team_id},
            }
        )
        point_times = np.array([p.ts.timestamp() for p in trace.points])
        for ann in trace.annotations:
            idx = int(np.argmin(np.abs(point_times - ann.ts.timestamp())))
            p = trace.points[idx]
            features.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
                    "properties": {
                        "team_id": trace.team_id,
                        "label": ann.label,
                        "ts": format_ts(ann.ts),
                    },
                }
            )
    return {"type": "FeatureCollection", "features": features}


@dataclass(frozen=True)
class CalibrationModel:
    metric: str
    gain: float
    offset: float
    fit_r_squared: float
    n_pairs: int
    pairing_tolerance_s: float

    def apply(self, value: float) -> float:
        return self.gain * value + self.offset


def team_series(trace: WalkTrace, metric: str, calibration: CalibrationModel | None = None):
    """(elapsed seconds from first sample, value) pairs; values raw unless a
    calibration model for the metric is supplied."""
    if metric not in METRIC_FIELDS:
        raise ValidationError("metric", f"unknown metric {metric!r}")
    if calibration is not None and calibration.metric != metric:
        raise ValidationError(
            "calibration", f"model is for {calibration.metric!r}, not {metric!r}"
        )
    if not trace.samples:
        return []
    t0 = trace.samples[0].ts
    out = []
    for rec in trace.samples:
        v = rec.value(metric)
        if calibration is not None:
            v = calibration.apply(v)
        out.append(((rec.ts - t0).total_seconds(), v))
    return out


def fit_calibration(
    low_cost_samples,
    reference_samples,
    metric: str,
    pairing_tolerance_s: float = 10.0,
) -> CalibrationModel:
    """Least-squares affine correction reference = gain * low_cost + offset,
    over samples paired to the nearest reference reading within tolerance."""
    if metric not in METRIC_FIELDS:
        raise ValidationError("metric", f"unknown metric {metric!r}")
    refs = sorted(reference_samples, key=lambda r: r.ts)
    if not refs:
        raise InsufficientPairs("no reference samples")
    ref_t = np.array([r.ts.timestamp() for r in refs])
    xs, ys = [], []
    for rec in low_cost_samples:
        t = rec.ts.timestamp()
        idx = int(np.argmin(np.abs(ref_t - t)))
        if abs(ref_t[idx] - t) <= pairing_tolerance_s:
            xs.append(rec.value(metric))
            ys.append(refs[idx].value(metric))
    if len(xs) < 2:
        raise InsufficientPairs(
            f"only {len(xs)} pairs within {pairing_tolerance_s} s; need >= 2"
        )
    if len(set(xs)) == 1:
        raise DegeneratePredictor("low-cost values have zero variance")
    if len(xs) == 2:
        # Two points define the line exactly; ols needs three.
        gain = (ys[1] - ys[0]) / (xs[1] - xs[0])
        return CalibrationModel(metric, gain, ys[0] - gain * xs[0], 1.0, 2, pairing_tolerance_s)
    fit = ols(xs, ys)
    return CalibrationModel(
        metric=metric,
        gain=fit.slope,
        offset=fit.intercept,
        fit_r_squared=fit.r_squared,
        n_pairs=fit.n,
        pairing_tolerance_s=pairing_tolerance_s,
    )


def apply_calibration(model: CalibrationModel, samples):
    """Pure transform: returns new records with the metric corrected; the
    input records are untouched."""
    return [rec.with_value(model.metric, model.apply(rec.value(model.metric))) for rec in samples]


# ---------------------------------------------------------------------------
# Session files


def load_session(path) -> WalkTrace:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ParseError(mark.line + 1 if mark else 0, f"bad session file: {e}") from e
    if not isinstance(raw, dict):
        raise ParseError(0, "session file must be a mapping")
    try:
        gps = tuple(
            GpsFix(
                ts=parse_when(f["ts"]),
                lat=float(f["lat"]),
                lon=float(f["lon"]),
                accuracy_m=float(f.get("accuracy_m", 5.0)),
            )
            for f in raw.get("gps", ())
        )
        samples = tuple(decode_line(line, i) for i, line in enumerate(raw.get("samples", ()), 1))
        annotations = tuple(
            Annotation(ts=parse_when(a["ts"]), label=str(a["label"]))
            for a in raw.get("annotations", ())
        )
        return WalkTrace(
            team_id=str(raw["team_id"]),
            device_id=str(raw.get("device_id", raw["team_id"])),
            gps_fixes=gps,
            samples=samples,
            annotations=annotations,
            dust_min_particle_um=float(raw.get("dust_min_particle_um", 1.0)),
            clock_offset_s=float(raw.get("clock_offset_s", 0.0)),
        )
    except KeyError as e:
        raise ParseError(0, f"missing session field {e.args[0]!r}") from e
    except (TypeError, ValueError) as e:
        raise ParseError(0, f"bad session value: {e}") from e


def write_geojson(doc: dict, path):
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
