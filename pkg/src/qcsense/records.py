"""Sample records and the line-delimited archive codec.

One record per line, comma-separated, fields in FIELD_ORDER. Timestamps are
ISO-8601 UTC with milliseconds (``2016-06-10T15:00:00.000Z``). Floats use the
shortest representation that round-trips. Flags are ';'-joined in sorted
order; an empty flag column means no flags.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

from .errors import ParseError, ValidationError

FIELD_ORDER = (
    "node_id",
    "ts",
    "temperature_c",
    "humidity_pct",
    "pressure_hpa",
    "lpo_ratio_pct",
    "dust_p001cf",
    "noise_dbspl",
    "lux_ch0",
    "lux_ch1",
    "flags",
)

#: Numeric channels that analytics can address by name.
METRIC_FIELDS = (
    "temperature_c",
    "humidity_pct",
    "pressure_hpa",
    "lpo_ratio_pct",
    "dust_p001cf",
    "noise_dbspl",
    "lux_ch0",
    "lux_ch1",
)

_FLAG_RE = re.compile(r"^(contention_loss|clipped|missing_channel:[A-Za-z0-9_]+)$")
_TS_FMT = "%Y-%m-%dT%H:%M:%S.%f"


@dataclass(slots=True, frozen=True)
class SampleRecord:
    node_id: str
    ts: datetime
    temperature_c: float
    humidity_pct: float
    pressure_hpa: float
    lpo_ratio_pct: float
    dust_p001cf: float
    noise_dbspl: float
    lux_ch0: float
    lux_ch1: float
    flags: frozenset = field(default_factory=frozenset)

    def validate(self):
        if not self.node_id:
            raise ValidationError("node_id", "node_id must be non-empty")
        if "," in self.node_id or "\n" in self.node_id:
            raise ValidationError("node_id", "node_id must not contain ',' or newline")
        ts = self.ts
        if ts.tzinfo is None or ts.utcoffset() != timezone.utc.utcoffset(None):
            raise ValidationError("ts", "timestamp must be UTC-aware")
        if ts.microsecond % 1000 != 0:
            raise ValidationError("ts", "timestamp precision is milliseconds")
        if not 0.0 <= self.humidity_pct <= 100.0:
            raise ValidationError("humidity_pct", f"humidity {self.humidity_pct} outside [0,100]")
        if not 0.0 <= self.lpo_ratio_pct <= 100.0:
            raise ValidationError("lpo_ratio_pct", f"lpo {self.lpo_ratio_pct} outside [0,100]")
        if self.dust_p001cf < 0.0:
            raise ValidationError("dust_p001cf", "dust concentration must be >= 0")
        if self.lux_ch0 < 0.0:
            raise ValidationError("lux_ch0", "luminosity must be >= 0")
        if self.lux_ch1 < 0.0:
            raise ValidationError("lux_ch1", "luminosity must be >= 0")
        for f in self.flags:
            if not _FLAG_RE.match(f):
                raise ValidationError("flags", f"unknown flag {f!r}")
        return self

    def value(self, metric: str) -> float:
        if metric not in METRIC_FIELDS:
            raise ValidationError("metric", f"unknown metric {metric!r}")
        return getattr(self, metric)

    def with_value(self, metric: str, value: float) -> "SampleRecord":
        if metric not in METRIC_FIELDS:
            raise ValidationError("metric", f"unknown metric {metric!r}")
        return replace(self, **{metric: value})


def format_ts(ts: datetime) -> str:
    return ts.strftime(_TS_FMT)[:-3] + "Z"


def parse_ts(text: str) -> datetime:
    if not text.endswith("Z"):
        raise ValueError(f"timestamp {text!r} must end in Z")
    return datetime.strptime(text[:-1], _TS_FMT).replace(tzinfo=timezone.utc)


def parse_when(value) -> datetime:
    """Lenient timestamp input for config/session files: accepts datetimes
    (as YAML produces), second-precision Zulu strings, or full codec form."""
    if isinstance(value, datetime):
        return value if value.tzinfo else value.replace(tzinfo=timezone.utc)
    text = str(value)
    if text.endswith("Z") and "." not in text:
        text = text[:-1] + ".000Z"
    return parse_ts(text)


def _fmt(v: float) -> str:
    return repr(float(v))


def encode_record(rec: SampleRecord) -> str:
    return ",".join(
        (
            rec.node_id,
            format_ts(rec.ts),
            _fmt(rec.temperature_c),
            _fmt(rec.humidity_pct),
            _fmt(rec.pressure_hpa),
            _fmt(rec.lpo_ratio_pct),
            _fmt(rec.dust_p001cf),
            _fmt(rec.noise_dbspl),
            _fmt(rec.lux_ch0),
            _fmt(rec.lux_ch1),
            ";".join(sorted(rec.flags)),
        )
    )


def encode(records) -> str:
    return "".join(encode_record(r) + "\n" for r in records)


def decode_line(line: str, line_no: int = 1) -> SampleRecord:
    parts = line.rstrip("\n").split(",")
    if len(parts) != len(FIELD_ORDER):
        raise ParseError(line_no, f"expected {len(FIELD_ORDER)} fields, got {len(parts)}")
    try:
        ts = parse_ts(parts[1])
        nums = [float(p) for p in parts[2:10]]
    except ValueError as e:
        raise ParseError(line_no, str(e)) from e
    flags = frozenset(parts[10].split(";")) if parts[10] else frozenset()
    rec = SampleRecord(parts[0], ts, *nums, flags=flags)
    rec.validate()
    return rec


def decode(text: str):
    records = []
    for i, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            records.append(decode_line(line, i))
    return records


def record_to_dict(rec: SampleRecord) -> dict:
    d = {name: getattr(rec, name) for name in METRIC_FIELDS}
    d["node_id"] = rec.node_id
    d["ts"] = format_ts(rec.ts)
    d["flags"] = sorted(rec.flags)
    return d


def record_from_dict(d: dict) -> SampleRecord:
    try:
        rec = SampleRecord(
            node_id=str(d["node_id"]),
            ts=parse_ts(str(d["ts"])),
            flags=frozenset(d.get("flags", ())),
            **{name: float(d[name]) for name in METRIC_FIELDS},
        )
    except KeyError as e:
        raise ValidationError(str(e.args[0]), f"missing field {e.args[0]}") from e
    except ValueError as e:
        raise ValidationError("ts", str(e)) from e
    rec.validate()
    return rec
