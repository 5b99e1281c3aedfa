import numpy as np
import pytest

from qcsense.config import Location
from qcsense.errors import ValidationError
from qcsense.scenario import (
    Coupling,
    DiurnalCurve,
    EnvironmentScenario,
    Event,
    PlacementForcing,
    haversine_m,
    load_scenario,
)

from conftest import BASE_CURVES, JUNE, JULY, make_node, ts


def epochs_at(*stamps):
    return np.array([s.timestamp() for s in stamps])


def test_diurnal_curve_shape():
    curve = DiurnalCurve(mean=10.0, amplitude=4.0, phase_hour=6.0)
    noon = curve(epochs_at(ts(8, 12)))  # 6 h past phase: sine peak
    midnight = curve(epochs_at(ts(8, 0)))
    assert noon[0] == pytest.approx(14.0)
    assert midnight[0] == pytest.approx(10.0 - 4.0 * np.sin(np.pi / 2), abs=1e-9)


def test_weekend_factor():
    curve = DiurnalCurve(mean=10.0, amplitude=4.0, phase_hour=6.0, weekend_factor=0.5)
    # 2016-06-11 was a Saturday, 2016-06-10 a Friday
    sat = curve(epochs_at(ts(11, 12)))[0]
    fri = curve(epochs_at(ts(10, 12)))[0]
    assert sat == pytest.approx(12.0)
    assert fri == pytest.approx(14.0)


def test_forcing_window_and_peak():
    forcing = PlacementForcing("roof", "temperature_c", peak=18.0, start_hour=8, end_hour=20)
    assert forcing(epochs_at(ts(10, 14)))[0] == pytest.approx(18.0)
    assert forcing(epochs_at(ts(10, 8)))[0] == 0.0
    for h in (0, 3, 6, 20, 22):
        assert forcing(epochs_at(ts(10, h)))[0] == 0.0


def test_forcing_applies_per_placement(scenario):
    forced = EnvironmentScenario(
        t0=JUNE,
        t1=JULY,
        curves=dict(BASE_CURVES),
        forcings=(PlacementForcing("roof", "temperature_c", 18.0),),
    )
    e = epochs_at(ts(10, 14))
    roof = forced.ground_truth(make_node(placement="roof"), "temperature_c", e)
    ground = forced.ground_truth(make_node(placement="ground"), "temperature_c", e)
    assert roof[0] - ground[0] == pytest.approx(18.0)


def test_coupling_adds_scaled_source():
    sc = EnvironmentScenario(
        t0=JUNE,
        t1=JULY,
        curves=dict(BASE_CURVES),
        couplings=(Coupling("humidity_pct", "dust_p001cf", 40.0),),
    )
    node = make_node()
    e = epochs_at(ts(10, 12))
    hum = sc.ground_truth(node, "humidity_pct", e)[0]
    base = sc.ground_truth(node, "dust_p001cf", e)[0] - 40.0 * hum
    plain = EnvironmentScenario(t0=JUNE, t1=JULY, curves=dict(BASE_CURVES))
    assert base == pytest.approx(plain.ground_truth(node, "dust_p001cf", e)[0])


def test_event_by_node_list():
    ev = Event(ts(17, 15), ts(17, 18), "dust_p001cf", 50.0, node_ids=("a",))
    sc = EnvironmentScenario(t0=JUNE, t1=JULY, curves=dict(BASE_CURVES), events=(ev,))
    e = epochs_at(ts(17, 16))
    hit = sc.ground_truth(make_node("a"), "dust_p001cf", e)[0]
    miss = sc.ground_truth(make_node("b"), "dust_p001cf", e)[0]
    assert hit == pytest.approx(50.0 * miss)


def test_event_by_radius():
    ev = Event(
        ts(17, 15), ts(17, 18), "dust_p001cf", 2.0,
        center=(40.675, -74.010), radius_m=200.0,
    )
    sc = EnvironmentScenario(t0=JUNE, t1=JULY, curves=dict(BASE_CURVES), events=(ev,))
    near = make_node("near", location=Location(40.6751, -74.0101))
    far = make_node("far", location=Location(40.6850, -74.0300))
    e = epochs_at(ts(17, 16))
    assert sc.ground_truth(near, "dust_p001cf", e)[0] == pytest.approx(
        2.0 * sc.ground_truth(far, "dust_p001cf", e)[0], rel=1e-9
    )


def test_event_interval_respected():
    ev = Event(ts(17, 15), ts(17, 18), "dust_p001cf", 50.0, node_ids=("a",))
    sc = EnvironmentScenario(t0=JUNE, t1=JULY, curves=dict(BASE_CURVES), events=(ev,))
    node = make_node("a")
    before = sc.ground_truth(node, "dust_p001cf", epochs_at(ts(17, 14, 59, 59)))[0]
    at_end = sc.ground_truth(node, "dust_p001cf", epochs_at(ts(17, 18)))[0]
    plain = EnvironmentScenario(t0=JUNE, t1=JULY, curves=dict(BASE_CURVES))
    assert before == pytest.approx(plain.ground_truth(node, "dust_p001cf", epochs_at(ts(17, 14, 59, 59)))[0])
    assert at_end == pytest.approx(plain.ground_truth(node, "dust_p001cf", epochs_at(ts(17, 18)))[0])


def test_event_outside_range_rejected():
    ev = Event(ts(17, 15, month=7), ts(17, 18, month=7), "dust_p001cf", 2.0)
    with pytest.raises(ValidationError):
        EnvironmentScenario(t0=JUNE, t1=JULY, curves=dict(BASE_CURVES), events=(ev,))


def test_empty_range_rejected():
    with pytest.raises(ValidationError):
        EnvironmentScenario(t0=JULY, t1=JUNE)


def test_multiplicative_magnitude_positive():
    with pytest.raises(ValidationError):
        Event(ts(17, 15), ts(17, 18), "dust_p001cf", -1.0, mode="mul")


def test_haversine_sanity():
    # one degree of latitude is about 111 km
    assert haversine_m(40.0, -74.0, 41.0, -74.0) == pytest.approx(111_195, rel=0.01)


def test_load_bundled_scenario():
    from pathlib import Path

    sc = load_scenario(Path(__file__).resolve().parents[1] / "scenarios" / "redhook.yaml")
    assert sc.covers(ts(1), ts(30))
    assert len(sc.events) == 2
    assert sc.forcings[0].placement == "roof"
    assert sc.couplings[0].gain == 40.0
    node = make_node("rhi-ground")
    e = epochs_at(ts(17, 16))
    spiked = sc.ground_truth(node, "dust_p001cf", e)[0]
    calm = sc.ground_truth(make_node("park-ground"), "dust_p001cf", e)[0]
    assert spiked == pytest.approx(50.0 * calm)
