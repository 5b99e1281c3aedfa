"""Desk-scale urban quality-of-life sensing stack: deterministic node
emulator, append-only record archive, HTTP ingestion gateway, fleet
analytics, and citizen-science field-kit processing."""

from .config import Location, NodeConfig, SensorSuiteSpec
from .records import SampleRecord
from .scenario import EnvironmentScenario, load_scenario
from .store import RecordStore

__all__ = [
    "EnvironmentScenario",
    "Location",
    "NodeConfig",
    "RecordStore",
    "SampleRecord",
    "SensorSuiteSpec",
    "load_scenario",
]

__version__ = "0.1.0"
