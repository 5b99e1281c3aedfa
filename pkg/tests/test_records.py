from datetime import datetime, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcsense.errors import ParseError, ValidationError
from qcsense.records import (
    FIELD_ORDER,
    SampleRecord,
    decode,
    decode_line,
    encode,
    encode_record,
    format_ts,
    parse_ts,
    record_from_dict,
    record_to_dict,
)

from conftest import make_record, ts

finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e9, max_value=1e9)
nonneg = st.floats(allow_nan=False, allow_infinity=False, min_value=0.0, max_value=1e9)
pct = st.floats(min_value=0.0, max_value=100.0)

record_strategy = st.builds(
    SampleRecord,
    node_id=st.text(
        alphabet=st.characters(whitelist_categories=("L", "N"), whitelist_characters="-_"),
        min_size=1,
        max_size=16,
    ),
    ts=st.datetimes(
        min_value=datetime(2000, 1, 1), max_value=datetime(2030, 1, 1)
    ).map(lambda d: d.replace(microsecond=(d.microsecond // 1000) * 1000, tzinfo=timezone.utc)),
    temperature_c=finite,
    humidity_pct=pct,
    pressure_hpa=finite,
    lpo_ratio_pct=pct,
    dust_p001cf=nonneg,
    noise_dbspl=finite,
    lux_ch0=nonneg,
    lux_ch1=nonneg,
    flags=st.sets(
        st.sampled_from(["contention_loss", "clipped", "missing_channel:lux_ch1"]),
        max_size=3,
    ).map(frozenset),
)


@given(record_strategy)
def test_round_trip_property(rec):
    assert decode(encode([rec])) == [rec]


def test_round_trip_preserves_flag_sets():
    rec = make_record(flags=frozenset({"clipped", "contention_loss"}))
    assert decode_line(encode_record(rec)) == rec


def test_humidity_bound_rejected():
    line = encode_record(make_record()).split(",")
    line[3] = "130.0"
    with pytest.raises(ValidationError) as exc:
        decode_line(",".join(line))
    assert exc.value.field == "humidity_pct"


def test_millisecond_timestamp_survives():
    rec = make_record(when=ts(10, 15, 0, 0, ms=0))
    back = decode_line(encode_record(rec))
    assert back.ts == rec.ts
    assert format_ts(back.ts) == "2016-06-10T15:00:00.000Z"
    rec = make_record(when=ts(10, 15, 30, 2, ms=250))
    assert decode_line(encode_record(rec)).ts.microsecond == 250_000


def test_field_order_is_normative():
    line = encode_record(make_record(node_id="abc", when=ts(10, 15)))
    parts = line.split(",")
    assert len(parts) == len(FIELD_ORDER)
    assert parts[0] == "abc"
    assert parts[1] == "2016-06-10T15:00:00.000Z"


def test_malformed_line_carries_line_number():
    text = encode([make_record()]) + "garbage,line\n"
    with pytest.raises(ParseError) as exc:
        decode(text)
    assert exc.value.line_no == 2


def test_non_numeric_field_is_parse_error():
    line = encode_record(make_record()).replace("22.0", "abc")
    with pytest.raises(ParseError):
        decode_line(line)


def test_unknown_flag_rejected():
    with pytest.raises(ValidationError):
        make_record(flags=frozenset({"bogus"})).validate()


def test_sub_millisecond_timestamp_rejected():
    rec = make_record(when=ts(10).replace(microsecond=1))
    with pytest.raises(ValidationError):
        rec.validate()


def test_naive_timestamp_rejected():
    rec = make_record(when=datetime(2016, 6, 10))
    with pytest.raises(ValidationError):
        rec.validate()


def test_parse_ts_requires_zulu():
    with pytest.raises(ValueError):
        parse_ts("2016-06-10T15:00:00.000")


@given(record_strategy)
def test_dict_round_trip(rec):
    assert record_from_dict(record_to_dict(rec)) == rec


def test_dict_missing_field():
    d = record_to_dict(make_record())
    del d["temperature_c"]
    with pytest.raises(ValidationError):
        record_from_dict(d)
