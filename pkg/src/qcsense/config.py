"""Node identity, placement, and sensor-suite specifications."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import ValidationError

PLACEMENTS = ("roof", "ground", "indoor")
ENCLOSURES = ("bare", "acrylic_top")

#: Luminosity attenuation observed when the enclosure window is acrylic.
ACRYLIC_LUX_FACTOR = 0.9

#: Per-sensor supply current in mA; dust dominates, total 130.
DEFAULT_CURRENT_DRAW_MA = {
    "dust": 90.0,
    "microphone": 15.0,
    "temp_humidity_pressure": 5.0,
    "luminosity": 5.0,
    "logger_rtc": 15.0,
}

DEFAULT_BATTERY_MAH = 550.0  # 9 V alkaline, configurable


@dataclass(frozen=True)
class Location:
    lat: float
    lon: float
    elevation_m: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValidationError("lat", f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValidationError("lon", f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class SensorSuiteSpec:
    temp_accuracy_c: float = 0.5
    humidity_accuracy_pct: float = 3.0
    pressure_accuracy_hpa: float = 1.0
    mic_sensitivity_dbv: float = -42.0
    mic_band_hz: tuple = (100.0, 15000.0)
    mic_sample_rate_hz: float = 60000.0
    mic_gain: float = 100.0  # pre-ADC amplifier, keeps quiet levels above one LSB
    adc_bits: int | None = 10  # None disables quantization
    adc_reference_v: float = 3.3
    lux_bands_nm: tuple = ((300, 1100), (500, 1100))
    lux_ch1_fraction: float = 0.7  # narrower band sees a fixed share of ch0
    dust_min_particle_um: float = 0.1
    current_draw_ma: dict = field(default_factory=lambda: dict(DEFAULT_CURRENT_DRAW_MA))
    # Error-model knobs; accuracies are interpreted as 2-sigma, so sigma = accuracy/2.
    lpo_sigma_pct: float = 0.5
    noise_db_sigma: float = 0.5
    lux_rel_sigma: float = 0.02
    smoothing_alpha: float = 0.2
    mic_subsamples: int = 8
    noise_scale: float = 1.0  # 0 turns off all stochastic error

    def __post_init__(self):
        for name in ("temp_accuracy_c", "humidity_accuracy_pct", "pressure_accuracy_hpa"):
            if getattr(self, name) <= 0.0:
                raise ValidationError(name, "accuracy must be > 0")
        if self.adc_bits is not None and self.adc_bits <= 0:
            raise ValidationError("adc_bits", "adc_bits must be positive")
        if self.mic_sample_rate_hz <= 2.0 * self.mic_band_hz[1]:
            raise ValidationError(
                "mic_sample_rate_hz", "sampling rate must exceed twice the upper band edge"
            )
        if not 0.0 < self.lux_ch1_fraction <= 1.0:
            raise ValidationError("lux_ch1_fraction", "fraction must be in (0, 1]")
        if self.noise_scale < 0.0:
            raise ValidationError("noise_scale", "noise_scale must be >= 0")
        if not 0.0 < self.smoothing_alpha <= 1.0:
            raise ValidationError("smoothing_alpha", "alpha must be in (0, 1]")
        if self.mic_subsamples < 1:
            raise ValidationError("mic_subsamples", "need at least one sub-sample")

    def noiseless(self) -> "SensorSuiteSpec":
        """Copy with all stochastic error and quantization turned off."""
        return replace(self, noise_scale=0.0, adc_bits=None)


@dataclass(frozen=True)
class NodeConfig:
    node_id: str
    location: Location
    placement: str = "ground"
    suite: SensorSuiteSpec = field(default_factory=SensorSuiteSpec)
    sampling_interval_s: int = 5
    mcu_count: int = 2
    enclosure: str = "acrylic_top"
    rng_seed: int = 0
    disabled_sensors: frozenset = frozenset()

    def __post_init__(self):
        if not self.node_id:
            raise ValidationError("node_id", "node_id must be non-empty")
        if self.sampling_interval_s < 1:
            raise ValidationError("sampling_interval_s", "interval must be >= 1 s")
        if self.mcu_count not in (1, 2):
            raise ValidationError("mcu_count", "mcu_count must be 1 or 2")
        if self.placement not in PLACEMENTS:
            raise ValidationError("placement", f"placement must be one of {PLACEMENTS}")
        if self.enclosure not in ENCLOSURES:
            raise ValidationError("enclosure", f"enclosure must be one of {ENCLOSURES}")
        if not 0 <= self.rng_seed < 2**64:
            raise ValidationError("rng_seed", "seed must fit in 64 unsigned bits")
        unknown = set(self.disabled_sensors) - set(self.suite.current_draw_ma)
        if unknown:
            raise ValidationError("disabled_sensors", f"unknown sensors {sorted(unknown)}")

    @property
    def lux_enclosure_factor(self) -> float:
        return ACRYLIC_LUX_FACTOR if self.enclosure == "acrylic_top" else 1.0
