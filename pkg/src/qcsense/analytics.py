"""Fleet analytics: hourly aggregation, humidity-dust regression, paired
temperature differentials, robust hour-of-week signatures ("neighborhood
pulse"), anomaly detection, and network-wide vs. localized scope
classification.

All functions are pure; records are expected sorted as RecordStore.query
returns them. Time buckets are half-open UTC calendar hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from zoneinfo import ZoneInfo

import numpy as np

from .errors import (
    DegeneratePredictor,
    InsufficientData,
    NoOverlap,
    ValidationError,
)
from .records import METRIC_FIELDS

HOURS_PER_WEEK = 168
MAD_SIGMA_SCALE = 1.4826  # consistency factor for Gaussian data


# ---------------------------------------------------------------------------
# Hourly aggregation


@dataclass(frozen=True)
class HourlyEntry:
    hour_start: datetime
    value: float
    n: int


@dataclass(frozen=True)
class HourlySeries:
    node_id: str
    metric: str
    entries: tuple

    def as_dict(self) -> dict:
        return {e.hour_start: e.value for e in self.entries}


def _check_metric(metric: str):
    if metric not in METRIC_FIELDS:
        raise ValidationError("metric", f"unknown metric {metric!r}")


def hourly_aggregate(records, metric: str, stat: str = "mean") -> HourlySeries:
    """Per-UTC-hour mean (or median) of one metric. Empty hours are absent."""
    _check_metric(metric)
    if stat not in ("mean", "median"):
        raise ValidationError("stat", f"stat must be 'mean' or 'median', got {stat!r}")
    buckets: dict[datetime, list[float]] = {}
    node_id = ""
    for rec in records:
        node_id = rec.node_id
        hour = rec.ts.replace(minute=0, second=0, microsecond=0)
        buckets.setdefault(hour, []).append(rec.value(metric))
    agg = np.mean if stat == "mean" else np.median
    entries = tuple(
        HourlyEntry(hour, float(agg(vals)), len(vals))
        for hour, vals in sorted(buckets.items())
    )
    return HourlySeries(node_id=node_id, metric=metric, entries=entries)


# ---------------------------------------------------------------------------
# Ordinary least squares with slope significance


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r: float
    r_squared: float
    t_stat: float
    p_value: float
    n: int


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularized incomplete beta (Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-12:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(ln_front) * _beta_cf(a, b, x) / a
    return 1.0 - math.exp(ln_front) * _beta_cf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t_stat: float, df: int) -> float:
    """P(|T| >= |t|) for Student t with df degrees of freedom."""
    if df < 1:
        raise InsufficientData("degrees of freedom must be >= 1")
    if math.isinf(t_stat):
        return 0.0
    x = df / (df + t_stat * t_stat)
    return regularized_incomplete_beta(df / 2.0, 0.5, x)


def ols(x, y) -> RegressionResult:
    """Simple linear regression y = slope*x + intercept with Pearson r and a
    two-sided t-test on the slope."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("x", "x and y must be 1-D and the same length")
    n = len(x)
    if n < 3:
        raise InsufficientData(f"need at least 3 points, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise DegeneratePredictor("predictor has zero variance")
    sxy = float(dx @ dy)
    syy = float(dy @ dy)
    slope = sxy / sxx
    intercept = float(y.mean()) - slope * float(x.mean())
    if syy == 0.0:
        # Constant response: perfect flat fit, no association to test.
        return RegressionResult(slope, intercept, 0.0, 0.0, 0.0, 1.0, n)
    r = max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))
    if 1.0 - r * r < 1e-15:
        return RegressionResult(slope, intercept, r, r * r, math.inf, 0.0, n)
    t_stat = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = student_t_two_sided_p(t_stat, n - 2)
    return RegressionResult(slope, intercept, r, r * r, t_stat, p, n)


# ---------------------------------------------------------------------------
# Paired differentials (roof vs. street temperature)


@dataclass(frozen=True)
class BucketStats:
    minimum: float
    maximum: float
    median: float
    n: int


@dataclass(frozen=True)
class DifferentialResult:
    metric: str
    node_a: str
    node_b: str
    diffs: tuple  # ((hour_start, a_minus_b), ...)
    day_stats: BucketStats | None
    evening_stats: BucketStats | None
    histogram: tuple  # ((bin_left, count), ...)
    bin_width: float


def _bucket_stats(values) -> BucketStats | None:
    if not values:
        return None
    arr = np.asarray(values)
    return BucketStats(float(arr.min()), float(arr.max()), float(np.median(arr)), len(arr))


def differential_distribution(
    records_a,
    records_b,
    metric: str,
    day_window=(8, 18),
    evening_window=(20, 6),
    tz: str = "UTC",
    bin_width: float = 1.0,
) -> DifferentialResult:
    """Hourly A-minus-B differences over common hours, bucketed into local
    daytime / evening windows, plus a fixed-width histogram."""
    series_a = hourly_aggregate(records_a, metric)
    series_b = hourly_aggregate(records_b, metric)
    by_hour_b = series_b.as_dict()
    zone = ZoneInfo(tz)
    diffs = []
    day_vals, evening_vals = [], []
    for entry in series_a.entries:
        other = by_hour_b.get(entry.hour_start)
        if other is None:
            continue
        d = entry.value - other
        diffs.append((entry.hour_start, d))
        local_h = entry.hour_start.astimezone(zone).hour
        if day_window[0] <= local_h < day_window[1]:
            day_vals.append(d)
        if local_h >= evening_window[0] or local_h < evening_window[1]:
            evening_vals.append(d)
    if not diffs:
        raise NoOverlap("series share no common hours")
    counts: dict[float, int] = {}
    for _, d in diffs:
        left = math.floor(d / bin_width) * bin_width
        counts[left] = counts.get(left, 0) + 1
    return DifferentialResult(
        metric=metric,
        node_a=series_a.node_id,
        node_b=series_b.node_id,
        diffs=tuple(diffs),
        day_stats=_bucket_stats(day_vals),
        evening_stats=_bucket_stats(evening_vals),
        histogram=tuple(sorted(counts.items())),
        bin_width=bin_width,
    )


# ---------------------------------------------------------------------------
# Hour-of-week signatures and anomaly detection


@dataclass(frozen=True)
class SignatureBucket:
    median: float
    mad: float
    n: int
    low_confidence: bool


@dataclass(frozen=True)
class Signature:
    node_id: str
    metric: str
    buckets: dict  # hour_of_week (0..167, Monday 00 = 0) -> SignatureBucket
    train_start: datetime
    train_end: datetime


def hour_of_week(ts: datetime) -> int:
    return ts.weekday() * 24 + ts.hour


def build_signature(records, metric: str) -> Signature:
    """Robust per-hour-of-week baseline: median and MAD of all training
    samples in each bucket. Buckets fed by fewer than two distinct days are
    marked low-confidence."""
    _check_metric(metric)
    records = list(records)
    if not records:
        raise InsufficientData("no training records")
    node_id = records[0].node_id
    values: dict[int, list[float]] = {}
    days: dict[int, set] = {}
    for rec in records:
        b = hour_of_week(rec.ts)
        values.setdefault(b, []).append(rec.value(metric))
        days.setdefault(b, set()).add(rec.ts.date())
    buckets = {}
    for b, vals in values.items():
        arr = np.asarray(vals)
        med = float(np.median(arr))
        mad = float(np.median(np.abs(arr - med)))
        buckets[b] = SignatureBucket(med, mad, len(vals), low_confidence=len(days[b]) < 2)
    return Signature(
        node_id=node_id,
        metric=metric,
        buckets=buckets,
        train_start=min(r.ts for r in records),
        train_end=max(r.ts for r in records) + timedelta(milliseconds=1),
    )


@dataclass(frozen=True)
class AnomalyEvent:
    node_id: str
    metric: str
    start: datetime
    end: datetime
    peak_z: float
    peak_value: float
    direction: str  # "high" | "low"


@dataclass(frozen=True)
class DetectionResult:
    events: tuple
    evaluated: int
    skipped: int  # samples falling in absent signature buckets


def robust_z(value: float, bucket: SignatureBucket) -> float:
    eps = 1e-9 * max(1.0, abs(bucket.median))
    return (value - bucket.median) / max(MAD_SIGMA_SCALE * bucket.mad, eps)


def detect_anomalies(
    records,
    signature: Signature,
    k: float = 3.5,
    sampling_interval_s: float | None = None,
) -> DetectionResult:
    """Flag samples with robust |z| > k against the signature; consecutive
    flagged samples separated by at most two sampling intervals merge into
    one event carrying the peak excursion."""
    if k <= 0.0:
        raise ValidationError("k", "threshold k must be > 0")
    records = [r for r in records]
    if sampling_interval_s is None:
        gaps = [
            (b.ts - a.ts).total_seconds() for a, b in zip(records, records[1:])
        ]
        sampling_interval_s = float(np.median(gaps)) if gaps else 1.0
    flagged = []
    evaluated = skipped = 0
    for rec in records:
        bucket = signature.buckets.get(hour_of_week(rec.ts))
        if bucket is None:
            skipped += 1
            continue
        evaluated += 1
        value = rec.value(signature.metric)
        z = robust_z(value, bucket)
        if abs(z) > k:
            flagged.append((rec.ts, z, value))
    events = []
    merge_gap = 2.0 * sampling_interval_s + 1e-9
    run: list = []
    for item in flagged:
        if run and (item[0] - run[-1][0]).total_seconds() > merge_gap:
            events.append(_finish_event(run, signature, sampling_interval_s))
            run = []
        run.append(item)
    if run:
        events.append(_finish_event(run, signature, sampling_interval_s))
    return DetectionResult(events=tuple(events), evaluated=evaluated, skipped=skipped)


def _finish_event(run, signature: Signature, interval_s: float) -> AnomalyEvent:
    peak_ts, peak_z, peak_value = max(run, key=lambda item: abs(item[1]))
    return AnomalyEvent(
        node_id=signature.node_id,
        metric=signature.metric,
        start=run[0][0],
        end=run[-1][0] + timedelta(seconds=interval_s),
        peak_z=peak_z,
        peak_value=peak_value,
        direction="high" if peak_z > 0 else "low",
    )


# ---------------------------------------------------------------------------
# Network-wide vs. localized scope


@dataclass(frozen=True)
class ScopedAnomaly:
    metric: str
    start: datetime
    end: datetime
    node_ids: tuple
    scope: str  # "network_wide" | "localized"


def classify_scope(
    events_by_node: dict,
    metric: str,
    fleet,
    overlap_window_s: float = 3600.0,
    quorum: float = 0.75,
) -> list[ScopedAnomaly]:
    """Group same-metric events whose intervals overlap within the window
    (transitively) and label each group network_wide when participation
    reaches the quorum fraction of the fleet, inclusive."""
    if not 0.0 < quorum <= 1.0:
        raise ValidationError("quorum", "quorum must be in (0, 1]")
    fleet_ids = sorted({getattr(n, "node_id", n) for n in fleet})
    if not fleet_ids:
        raise ValidationError("fleet", "fleet must not be empty")
    events = [
        ev
        for evs in events_by_node.values()
        for ev in evs
        if ev.metric == metric
    ]
    if not events:
        return []
    events.sort(key=lambda e: (e.start, e.end))
    slack = timedelta(seconds=overlap_window_s)
    groups: list[list[AnomalyEvent]] = []
    group_end = None
    for ev in events:
        if group_end is not None and ev.start < group_end + slack:
            groups[-1].append(ev)
            group_end = max(group_end, ev.end)
        else:
            groups.append([ev])
            group_end = ev.end
    out = []
    for group in groups:
        nodes = tuple(sorted({ev.node_id for ev in group}))
        wide = len(nodes) + 1e-9 >= quorum * len(fleet_ids)
        out.append(
            ScopedAnomaly(
                metric=metric,
                start=min(ev.start for ev in group),
                end=max(ev.end for ev in group),
                node_ids=nodes,
                scope="network_wide" if wide else "localized",
            )
        )
    return out
