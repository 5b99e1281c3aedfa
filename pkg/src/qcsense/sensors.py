"""Channel-level sensor models: dust LPO curve and its inverse, microphone
level conversion, exponential smoothing, ADC quantization, power budget, and
the single-MCU sampling-contention model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameter, NonPositiveSignal, OutOfRange

# Cubic calibration curve for commodity optical dust sensors:
# concentration (particles / 0.01 ft^3) as a function of low-pulse-occupancy
# ratio in percent. Strictly increasing on [0, 100]; replaceable per device.
DUST_CURVE_COEFFS = (1.1, -3.8, 520.0, 0.62)

REFERENCE_DB_SPL = 94.0  # 1 kHz calibration tone level for dBV sensitivity


def lpo_to_concentration(lpo_ratio_pct):
    """Concentration in particles per 0.01 ft^3 for an LPO ratio in [0, 100].

    Accepts scalars or numpy arrays; scalars return floats.
    """
    r = np.asarray(lpo_ratio_pct, dtype=float)
    if np.any(r < 0.0) or np.any(r > 100.0):
        raise OutOfRange(f"LPO ratio outside [0, 100]")
    a, b, c, d = DUST_CURVE_COEFFS
    out = ((a * r + b) * r + c) * r + d
    return float(out) if np.isscalar(lpo_ratio_pct) else out


def concentration_to_lpo(concentration):
    """Inverse of lpo_to_concentration on [0, 100], by monotone bisection.

    Converges to well below 1e-9 in the ratio; accepts scalars or arrays.
    """
    c_min = lpo_to_concentration(0.0)
    c_max = lpo_to_concentration(100.0)
    c = np.asarray(concentration, dtype=float)
    if np.any(c < c_min) or np.any(c > c_max):
        raise OutOfRange(
            f"concentration outside curve range [{c_min}, {c_max}]"
        )
    lo = np.zeros_like(c)
    hi = np.full_like(c, 100.0)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        below = lpo_to_concentration(mid) < c
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    r = 0.5 * (lo + hi)
    return float(r) if np.isscalar(concentration) else r


def mic_rms_to_dbspl(v_rms, sensitivity_dbv: float = -42.0):
    """Sound level in dB SPL for a microphone RMS voltage.

    The sensitivity is the output level in dBV at the 94 dB SPL reference
    tone, so v_rms = 10^(sensitivity/20) V maps to exactly 94 dB SPL.
    """
    v = np.asarray(v_rms, dtype=float)
    if np.any(v <= 0.0):
        raise NonPositiveSignal("microphone RMS voltage must be > 0")
    v_ref = 10.0 ** (sensitivity_dbv / 20.0)
    out = REFERENCE_DB_SPL + 20.0 * np.log10(v / v_ref)
    return float(out) if np.isscalar(v_rms) else out


def dbspl_to_mic_rms(dbspl, sensitivity_dbv: float = -42.0):
    """Inverse of mic_rms_to_dbspl: synthesize the RMS voltage for a level."""
    db = np.asarray(dbspl, dtype=float)
    v_ref = 10.0 ** (sensitivity_dbv / 20.0)
    out = v_ref * 10.0 ** ((db - REFERENCE_DB_SPL) / 20.0)
    return float(out) if np.isscalar(dbspl) else out


def smooth(series, alpha: float):
    """Exponential moving average y0 = x0, yi = alpha*xi + (1-alpha)*y(i-1)."""
    if not 0.0 < alpha <= 1.0:
        raise InvalidParameter(f"alpha {alpha} outside (0, 1]")
    xs = list(series)
    if not xs:
        raise InvalidParameter("cannot smooth an empty series")
    out = [float(xs[0])]
    for x in xs[1:]:
        # incremental form keeps constant series exactly fixed
        out.append(out[-1] + alpha * (float(x) - out[-1]))
    return out


def adc_quantize(v, bits: int, reference_v: float):
    """Round-to-nearest quantization onto 2^bits codes over [0, reference_v].

    Values take at most 2^bits distinct levels; |quantized - true| is at most
    one step for in-range inputs.
    """
    if bits <= 0:
        raise InvalidParameter("adc_bits must be positive")
    step = reference_v / (2**bits)
    codes = np.clip(np.round(np.asarray(v, dtype=float) / step), 0, 2**bits - 1)
    out = codes * step
    return float(out) if np.isscalar(v) else out


@dataclass(frozen=True)
class ContentionReport:
    lpo_undercount_fraction: float


def contention_loss(config, noise_duty_cycle: float) -> ContentionReport:
    """Fraction of dust LPO pulses missed while the controller services the
    microphone. A dedicated second MCU eliminates the loss entirely; a single
    MCU loses pulses in proportion to the microphone duty cycle."""
    if not 0.0 <= noise_duty_cycle <= 1.0:
        raise InvalidParameter(f"duty cycle {noise_duty_cycle} outside [0, 1]")
    if config.mcu_count == 2:
        return ContentionReport(0.0)
    return ContentionReport(noise_duty_cycle)


def battery_life_hours(config, battery_mah: float) -> float:
    """Runtime estimate: capacity divided by the summed draw of enabled sensors."""
    if battery_mah <= 0.0:
        raise InvalidParameter("battery capacity must be > 0 mAh")
    draw = sum(
        ma
        for name, ma in config.suite.current_draw_ma.items()
        if name not in config.disabled_sensors
    )
    if draw <= 0.0:
        raise InvalidParameter("no enabled sensors draw current")
    return battery_mah / draw
