import numpy as np
import pytest

from qcsense.config import SensorSuiteSpec
from qcsense.errors import InvalidRange, UncoveredScenario
from qcsense.nodesim import mic_duty_cycle, simulate_node, simulate_fleet
from qcsense.records import encode

from conftest import make_node, ts


def test_one_hour_yields_720_records(node, scenario):
    recs = simulate_node(node, scenario, ts(10, 14), ts(10, 15))
    assert len(recs) == 720


def test_timestamps_are_arithmetic(node, scenario):
    recs = simulate_node(node, scenario, ts(10, 14), ts(10, 15))
    deltas = {(b.ts - a.ts).total_seconds() for a, b in zip(recs, recs[1:])}
    assert deltas == {5.0}
    assert recs[0].ts == ts(10, 14)


def test_record_count_floor_rule(scenario):
    node = make_node(sampling_interval_s=7)
    recs = simulate_node(node, scenario, ts(10, 14), ts(10, 15))
    assert len(recs) == 3600 // 7


def test_byte_identical_reruns(node, scenario):
    a = simulate_node(node, scenario, ts(10), ts(10, 2))
    b = simulate_node(node, scenario, ts(10), ts(10, 2))
    assert encode(a) == encode(b)


def test_different_seeds_differ(scenario):
    a = simulate_node(make_node(seed=1), scenario, ts(10), ts(10, 1))
    b = simulate_node(make_node(seed=2), scenario, ts(10), ts(10, 1))
    assert encode(a) != encode(b)


def test_empty_window_rejected(node, scenario):
    with pytest.raises(InvalidRange):
        simulate_node(node, scenario, ts(10, 15), ts(10, 14))


def test_uncovered_scenario_rejected(node, scenario):
    with pytest.raises(UncoveredScenario):
        simulate_node(node, scenario, ts(28), ts(28, 1, month=7))


def test_zero_noise_matches_ground_truth_exactly(quiet_node, scenario):
    recs = simulate_node(quiet_node, scenario, ts(10, 6), ts(10, 7))
    epochs = np.array([r.ts.timestamp() for r in recs])
    for metric, attr in [
        ("temperature_c", "temperature_c"),
        ("humidity_pct", "humidity_pct"),
        ("pressure_hpa", "pressure_hpa"),
        ("dust_p001cf", "dust_p001cf"),
        ("noise_dbspl", "noise_dbspl"),
    ]:
        gt = scenario.ground_truth(quiet_node, metric, epochs)
        got = np.array([getattr(r, attr) for r in recs])
        assert np.array_equal(gt, got), metric
    lux_gt = scenario.ground_truth(quiet_node, "illuminance_arb", epochs)
    assert np.array_equal(np.array([r.lux_ch0 for r in recs]), lux_gt)


def test_zero_noise_lux_channel_subset(quiet_node, scenario):
    recs = simulate_node(quiet_node, scenario, ts(10, 6), ts(10, 7))
    for r in recs:
        assert r.lux_ch1 <= r.lux_ch0
        assert r.lux_ch1 == pytest.approx(0.7 * r.lux_ch0, rel=1e-12)


def test_acrylic_enclosure_attenuates_lux_by_ten_percent(scenario):
    quiet = SensorSuiteSpec().noiseless()
    bare = make_node(suite=quiet, enclosure="bare")
    acrylic = make_node(suite=quiet, enclosure="acrylic_top")
    recs_bare = simulate_node(bare, scenario, ts(10, 12), ts(10, 13))
    recs_acr = simulate_node(acrylic, scenario, ts(10, 12), ts(10, 13))
    for rb, ra in zip(recs_bare, recs_acr):
        assert ra.lux_ch0 == pytest.approx(0.9 * rb.lux_ch0, rel=1e-12)


def test_single_mcu_undercounts_lpo(scenario):
    quiet = SensorSuiteSpec().noiseless()
    dual = make_node(suite=quiet, mcu_count=2)
    single = make_node(suite=quiet, mcu_count=1)
    recs_dual = simulate_node(dual, scenario, ts(10, 12), ts(10, 13))
    recs_single = simulate_node(single, scenario, ts(10, 12), ts(10, 13))
    for rd, rs in zip(recs_dual, recs_single):
        duty = float(mic_duty_cycle(rs.noise_dbspl))
        assert rs.lpo_ratio_pct == pytest.approx(rd.lpo_ratio_pct * (1 - duty), rel=1e-9)
        if duty > 0:
            assert "contention_loss" in rs.flags
            assert rs.dust_p001cf < rd.dust_p001cf


def test_noisy_records_validate(node, scenario):
    for rec in simulate_node(node, scenario, ts(10, 3), ts(10, 4)):
        rec.validate()


def test_mic_quantization_keeps_noise_channel_close(scenario):
    # 10-bit ADC with the amplifier in front: dB error stays small
    node = make_node(suite=SensorSuiteSpec(noise_scale=0.0))
    recs = simulate_node(node, scenario, ts(10, 12), ts(10, 13))
    epochs = np.array([r.ts.timestamp() for r in recs])
    gt = scenario.ground_truth(node, "noise_dbspl", epochs)
    got = np.array([r.noise_dbspl for r in recs])
    # quantization granularity dominates at the quiet end of the diurnal curve
    assert np.max(np.abs(got - gt)) < 1.0


def test_fleet_rejects_duplicate_ids(node, scenario):
    with pytest.raises(InvalidRange):
        simulate_fleet([node, node], scenario, ts(10), ts(10, 1))


def test_fleet_simulates_all(scenario):
    fleet = [make_node(f"n{i}", seed=i) for i in range(3)]
    out = simulate_fleet(fleet, scenario, ts(10), ts(10, 1))
    assert set(out) == {"n0", "n1", "n2"}
    assert all(len(v) == 720 for v in out.values())
