"""Synthetic environment scenarios: parametric diurnal ground-truth curves
per metric, placement-dependent forcing (e.g. rooftop solar heating),
cross-metric couplings, and injected events.

Scenario files are YAML; see ``scenarios/redhook.yaml`` for the schema in use.
All times are UTC. Metrics are the ground-truth channels:
temperature_c, humidity_pct, pressure_hpa, dust_p001cf, noise_dbspl,
illuminance_arb.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from .errors import InvalidParameter, ValidationError
from .records import parse_when as _parse_when

GROUND_TRUTH_METRICS = (
    "temperature_c",
    "humidity_pct",
    "pressure_hpa",
    "dust_p001cf",
    "noise_dbspl",
    "illuminance_arb",
)

_SECONDS_PER_DAY = 86400.0


def _epoch(ts: datetime) -> float:
    return ts.timestamp()


def _hour_of_day(epochs: np.ndarray) -> np.ndarray:
    return (epochs % _SECONDS_PER_DAY) / 3600.0


def _is_weekend(epochs: np.ndarray) -> np.ndarray:
    # Epoch day 0 (1970-01-01) was a Thursday.
    weekday = (np.floor_divide(epochs, _SECONDS_PER_DAY).astype(np.int64) + 3) % 7
    return weekday >= 5


def haversine_m(lat1, lon1, lat2, lon2) -> float:
    r = 6_371_000.0
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * r * math.asin(math.sqrt(a))


@dataclass(frozen=True)
class DiurnalCurve:
    """mean + amplitude * sin(2*pi*(hour - phase_hour)/24), optionally with a
    different amplitude share on weekends."""

    mean: float
    amplitude: float = 0.0
    phase_hour: float = 0.0
    weekend_factor: float = 1.0

    def __call__(self, epochs: np.ndarray) -> np.ndarray:
        h = _hour_of_day(epochs)
        amp = np.where(
            _is_weekend(epochs), self.amplitude * self.weekend_factor, self.amplitude
        )
        return self.mean + amp * np.sin(2.0 * np.pi * (h - self.phase_hour) / 24.0)


@dataclass(frozen=True)
class PlacementForcing:
    """Half-sine additive bump applied to one metric for one placement,
    nonzero on [start_hour, end_hour) and peaking at the midpoint."""

    placement: str
    metric: str
    peak: float
    start_hour: float = 8.0
    end_hour: float = 20.0

    def __call__(self, epochs: np.ndarray) -> np.ndarray:
        h = _hour_of_day(epochs)
        span = self.end_hour - self.start_hour
        if span <= 0:
            raise InvalidParameter("forcing window must have end_hour > start_hour")
        phase = (h - self.start_hour) / span
        bump = np.where((phase >= 0.0) & (phase < 1.0), np.sin(np.pi * phase), 0.0)
        return self.peak * bump


@dataclass(frozen=True)
class Coupling:
    """Additive cross-metric dependence: target += gain * raw(source)."""

    source: str
    target: str
    gain: float


@dataclass(frozen=True)
class Event:
    """Injected disturbance on one metric over [start, end), applied either to
    an explicit node list or to every node within radius_m of a point."""

    start: datetime
    end: datetime
    metric: str
    magnitude: float
    mode: str = "mul"  # "add" | "mul"
    node_ids: tuple = ()
    center: tuple | None = None  # (lat, lon)
    radius_m: float = 0.0

    def __post_init__(self):
        if self.mode not in ("add", "mul"):
            raise ValidationError("mode", "event mode must be 'add' or 'mul'")
        if self.mode == "mul" and self.magnitude <= 0.0:
            raise ValidationError("magnitude", "multiplicative magnitude must be > 0")
        if self.end <= self.start:
            raise ValidationError("end", "event interval is empty")

    def affects(self, node_config) -> bool:
        if self.node_ids:
            return node_config.node_id in self.node_ids
        if self.center is not None:
            d = haversine_m(
                self.center[0],
                self.center[1],
                node_config.location.lat,
                node_config.location.lon,
            )
            return d <= self.radius_m
        return True  # no targeting clause: fleet-wide


@dataclass(frozen=True)
class EnvironmentScenario:
    t0: datetime
    t1: datetime
    curves: dict = field(default_factory=dict)  # metric -> DiurnalCurve
    node_overrides: dict = field(default_factory=dict)  # node_id -> {metric: curve}
    forcings: tuple = ()
    couplings: tuple = ()
    events: tuple = ()

    def __post_init__(self):
        if self.t1 <= self.t0:
            raise ValidationError("t1", "scenario range is empty")
        for ev in self.events:
            if ev.start < self.t0 or ev.end > self.t1:
                raise ValidationError("events", "event interval outside scenario range")
        for m in self.curves:
            if m not in GROUND_TRUTH_METRICS:
                raise ValidationError("curves", f"unknown metric {m!r}")

    def covers(self, t0: datetime, t1: datetime) -> bool:
        return self.t0 <= t0 and t1 <= self.t1

    def _raw(self, node_config, metric: str, epochs: np.ndarray) -> np.ndarray:
        curve = self.node_overrides.get(node_config.node_id, {}).get(
            metric, self.curves.get(metric)
        )
        v = curve(epochs) if curve is not None else np.zeros_like(epochs)
        for f in self.forcings:
            if f.metric == metric and f.placement == node_config.placement:
                v = v + f(epochs)
        return v

    def ground_truth(self, node_config, metric: str, epochs) -> np.ndarray:
        """True field value at the node's location for each epoch second.
        Couplings are applied on raw (pre-event) source values, then events."""
        if metric not in GROUND_TRUTH_METRICS:
            raise ValidationError("metric", f"unknown metric {metric!r}")
        epochs = np.asarray(epochs, dtype=float)
        v = self._raw(node_config, metric, epochs)
        for c in self.couplings:
            if c.target == metric:
                v = v + c.gain * self._raw(node_config, c.source, epochs)
        for ev in self.events:
            if ev.metric != metric or not ev.affects(node_config):
                continue
            mask = (epochs >= _epoch(ev.start)) & (epochs < _epoch(ev.end))
            if ev.mode == "add":
                v = np.where(mask, v + ev.magnitude, v)
            else:
                v = np.where(mask, v * ev.magnitude, v)
        return v


def _curve_from(d: dict) -> DiurnalCurve:
    return DiurnalCurve(
        mean=float(d["mean"]),
        amplitude=float(d.get("amplitude", 0.0)),
        phase_hour=float(d.get("phase_hour", 0.0)),
        weekend_factor=float(d.get("weekend_factor", 1.0)),
    )


def load_scenario(path) -> EnvironmentScenario:
    raw = yaml.safe_load(Path(path).read_text())
    if not isinstance(raw, dict) or "time" not in raw:
        raise ValidationError("time", f"scenario file {path} lacks a 'time' section")
    events = []
    for e in raw.get("events", ()):
        center = tuple(e["center"]) if "center" in e else None
        events.append(
            Event(
                start=_parse_when(e["start"]),
                end=_parse_when(e["end"]),
                metric=e["metric"],
                magnitude=float(e["magnitude"]),
                mode=e.get("mode", "mul"),
                node_ids=tuple(e.get("nodes", ())),
                center=center,
                radius_m=float(e.get("radius_m", 0.0)),
            )
        )
    return EnvironmentScenario(
        t0=_parse_when(raw["time"]["start"]),
        t1=_parse_when(raw["time"]["end"]),
        curves={m: _curve_from(d) for m, d in raw.get("metrics", {}).items()},
        node_overrides={
            node: {m: _curve_from(d) for m, d in per.items()}
            for node, per in raw.get("node_overrides", {}).items()
        },
        forcings=tuple(
            PlacementForcing(
                placement=f["placement"],
                metric=f["metric"],
                peak=float(f["peak"]),
                start_hour=float(f.get("start_hour", 8.0)),
                end_hour=float(f.get("end_hour", 20.0)),
            )
            for f in raw.get("placement_forcing", ())
        ),
        couplings=tuple(
            Coupling(source=c["source"], target=c["target"], gain=float(c["gain"]))
            for c in raw.get("couplings", ())
        ),
        events=tuple(events),
    )
