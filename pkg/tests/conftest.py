from datetime import datetime, timedelta, timezone

import pytest

from qcsense.config import Location, NodeConfig, SensorSuiteSpec
from qcsense.records import SampleRecord
from qcsense.scenario import DiurnalCurve, EnvironmentScenario

UTC = timezone.utc

JUNE = datetime(2016, 6, 1, tzinfo=UTC)
JULY = datetime(2016, 7, 1, tzinfo=UTC)


def ts(day, hour=0, minute=0, second=0, ms=0, month=6):
    return datetime(2016, month, day, hour, minute, second, ms * 1000, tzinfo=UTC)


def make_record(node_id="n1", when=None, **overrides):
    base = dict(
        node_id=node_id,
        ts=when or ts(10, 15),
        temperature_c=22.0,
        humidity_pct=55.0,
        pressure_hpa=1013.0,
        lpo_ratio_pct=5.0,
        dust_p001cf=3000.0,
        noise_dbspl=62.0,
        lux_ch0=400.0,
        lux_ch1=280.0,
    )
    base.update(overrides)
    return SampleRecord(**base)


def constant_records(node_id, t0, n, interval_s=5, **overrides):
    return [
        make_record(node_id, t0 + timedelta(seconds=i * interval_s), **overrides)
        for i in range(n)
    ]


BASE_CURVES = {
    "temperature_c": DiurnalCurve(mean=22.0, amplitude=6.0, phase_hour=9.0),
    "humidity_pct": DiurnalCurve(mean=60.0, amplitude=10.0, phase_hour=21.0),
    "pressure_hpa": DiurnalCurve(mean=1013.0, amplitude=2.0, phase_hour=0.0),
    "dust_p001cf": DiurnalCurve(mean=4000.0, amplitude=1500.0, phase_hour=3.0),
    "noise_dbspl": DiurnalCurve(mean=62.0, amplitude=8.0, phase_hour=12.0),
    "illuminance_arb": DiurnalCurve(mean=500.0, amplitude=450.0, phase_hour=6.0),
}


@pytest.fixture
def scenario():
    return EnvironmentScenario(t0=JUNE, t1=JULY, curves=dict(BASE_CURVES))


def make_node(node_id="n1", seed=7, placement="ground", **overrides):
    return NodeConfig(
        node_id=node_id,
        location=overrides.pop("location", Location(40.675, -74.010, 3.0)),
        placement=placement,
        rng_seed=seed,
        **overrides,
    )


@pytest.fixture
def node():
    return make_node()


@pytest.fixture
def quiet_node():
    return make_node(suite=SensorSuiteSpec().noiseless(), enclosure="bare")
