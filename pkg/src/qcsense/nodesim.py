"""Deterministic sensor-node emulator.

Converts scenario ground truth into the record stream a deployed node would
log every sampling interval: Gaussian channel error (sigma = accuracy / 2),
ADC quantization on the microphone path, within-interval exponential
smoothing of the mic signal, dust LPO synthesis via the inverse calibration
curve, single-MCU sampling-contention losses, and enclosure attenuation of
the luminosity channels. Identical (config, scenario) inputs produce
bit-identical output; all randomness comes from config.rng_seed.
"""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np

from .config import NodeConfig
from .errors import InvalidRange, UncoveredScenario
from .records import SampleRecord
from .scenario import EnvironmentScenario
from .sensors import (
    adc_quantize,
    concentration_to_lpo,
    dbspl_to_mic_rms,
    lpo_to_concentration,
    mic_rms_to_dbspl,
)

_EMPTY = frozenset()
_CONTENTION = frozenset({"contention_loss"})
_CLIPPED = frozenset({"clipped"})
_BOTH = frozenset({"contention_loss", "clipped"})

# Microphone duty-cycle proxy: fraction of MCU time spent on audio as the
# ambient level sweeps 40 dB (idle) to 100 dB (saturated).
_DUTY_DB_LOW = 40.0
_DUTY_DB_HIGH = 100.0


def mic_duty_cycle(noise_dbspl):
    db = np.asarray(noise_dbspl, dtype=float)
    return np.clip((db - _DUTY_DB_LOW) / (_DUTY_DB_HIGH - _DUTY_DB_LOW), 0.0, 1.0)


def simulate_node(
    config: NodeConfig,
    scenario: EnvironmentScenario,
    t0: datetime,
    t1: datetime,
) -> list[SampleRecord]:
    """Emulate one node over [t0, t1); returns floor((t1-t0)/interval) records."""
    if t1 <= t0:
        raise InvalidRange(f"simulation window [{t0}, {t1}) is empty")
    if not scenario.covers(t0, t1):
        raise UncoveredScenario(
            f"scenario covers [{scenario.t0}, {scenario.t1}), requested [{t0}, {t1})"
        )
    suite = config.suite
    step_s = config.sampling_interval_s
    n = int((t1 - t0).total_seconds() // step_s)
    epochs = t0.timestamp() + step_s * np.arange(n, dtype=float)
    rng = np.random.default_rng(config.rng_seed)
    ns = suite.noise_scale

    gt = {
        m: scenario.ground_truth(config, m, epochs)
        for m in (
            "temperature_c",
            "humidity_pct",
            "pressure_hpa",
            "dust_p001cf",
            "noise_dbspl",
            "illuminance_arb",
        )
    }

    # Draw order is part of the determinism contract; do not reorder.
    temp = gt["temperature_c"] + ns * (suite.temp_accuracy_c / 2.0) * rng.standard_normal(n)
    hum_raw = gt["humidity_pct"] + ns * (suite.humidity_accuracy_pct / 2.0) * rng.standard_normal(n)
    pres = gt["pressure_hpa"] + ns * (suite.pressure_accuracy_hpa / 2.0) * rng.standard_normal(n)
    lpo_noise = ns * suite.lpo_sigma_pct * rng.standard_normal(n)
    mic_noise = ns * suite.noise_db_sigma * rng.standard_normal((n, suite.mic_subsamples))
    lux0_noise = ns * suite.lux_rel_sigma * rng.standard_normal(n)
    lux1_noise = ns * suite.lux_rel_sigma * rng.standard_normal(n)

    hum = np.clip(hum_raw, 0.0, 100.0)
    clipped = hum != hum_raw

    # Dust: invert the calibration curve to get the raw LPO a sensor would
    # report, degrade it by contention, then convert back.
    c_max = lpo_to_concentration(100.0)
    c_true = np.clip(gt["dust_p001cf"], lpo_to_concentration(0.0), c_max)
    clipped |= gt["dust_p001cf"] > c_max
    r_true = concentration_to_lpo(c_true)
    if config.mcu_count == 1:
        undercount = mic_duty_cycle(gt["noise_dbspl"])
    else:
        undercount = np.zeros(n)
    r_raw = r_true * (1.0 - undercount) + lpo_noise
    lpo = np.clip(r_raw, 0.0, 100.0)
    clipped |= lpo != r_raw
    if ns == 0.0 and config.mcu_count == 2:
        dust = c_true  # identity path: avoids curve round-trip rounding
    else:
        dust = lpo_to_concentration(lpo)

    # Microphone: synthesize amplified RMS voltage per sub-sample, quantize,
    # smooth within the interval, convert the settled value back to dB SPL.
    sub_db = gt["noise_dbspl"][:, None] + mic_noise
    if ns == 0.0 and suite.adc_bits is None:
        noise_db = gt["noise_dbspl"].copy()
    else:
        v = dbspl_to_mic_rms(sub_db, suite.mic_sensitivity_dbv) * suite.mic_gain
        if suite.adc_bits is not None:
            full_scale = suite.adc_reference_v
            clipped |= np.any(v > full_scale, axis=1)
            v = adc_quantize(v, suite.adc_bits, full_scale)
            lsb = full_scale / (2**suite.adc_bits)
            v = np.maximum(v, lsb / 2.0)  # zero code still carries a level
        alpha = suite.smoothing_alpha
        y = v[:, 0].copy()
        for k in range(1, suite.mic_subsamples):
            y = y + alpha * (v[:, k] - y)
        noise_db = mic_rms_to_dbspl(y / suite.mic_gain, suite.mic_sensitivity_dbv)

    enc = config.lux_enclosure_factor
    lux0 = np.maximum(gt["illuminance_arb"] * enc * (1.0 + lux0_noise), 0.0)
    lux1 = np.maximum(
        gt["illuminance_arb"] * suite.lux_ch1_fraction * enc * (1.0 + lux1_noise), 0.0
    )

    contended = undercount > 0.0
    dt = timedelta(seconds=step_s)
    records = []
    for i in range(n):
        if contended[i]:
            flags = _BOTH if clipped[i] else _CONTENTION
        else:
            flags = _CLIPPED if clipped[i] else _EMPTY
        records.append(
            SampleRecord(
                node_id=config.node_id,
                ts=t0 + i * dt,
                temperature_c=float(temp[i]),
                humidity_pct=float(hum[i]),
                pressure_hpa=float(pres[i]),
                lpo_ratio_pct=float(lpo[i]),
                dust_p001cf=float(dust[i]),
                noise_dbspl=float(noise_db[i]),
                lux_ch0=float(lux0[i]),
                lux_ch1=float(lux1[i]),
                flags=flags,
            )
        )
    return records


def simulate_fleet(fleet, scenario, t0, t1):
    """Simulate every node; returns {node_id: records}. Node ids must be unique."""
    seen = set()
    for cfg in fleet:
        if cfg.node_id in seen:
            raise InvalidRange(f"duplicate node_id {cfg.node_id!r} in fleet")
        seen.add(cfg.node_id)
    return {cfg.node_id: simulate_node(cfg, scenario, t0, t1) for cfg in fleet}
