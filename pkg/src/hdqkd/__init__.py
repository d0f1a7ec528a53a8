"""Finite-key rates of d-dimensional time-phase QKD from an indoor wireless user
to a central office over a shared quantum-classical DWDM access network."""

from .config import DEFAULT_CONFIG, ConfigError, SystemConfig, WavelengthPlan, validate
from .core import ChannelBudget, NoiseBudget, db_to_linear, linear_to_db
from .finite_key import DecoyStatistics, KeyRateResult, key_length
from .simulator import Evaluation, ScenarioPoint, evaluate, expected_counts, sweep

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CONFIG",
    "ConfigError",
    "SystemConfig",
    "WavelengthPlan",
    "validate",
    "ChannelBudget",
    "NoiseBudget",
    "db_to_linear",
    "linear_to_db",
    "DecoyStatistics",
    "KeyRateResult",
    "key_length",
    "Evaluation",
    "ScenarioPoint",
    "evaluate",
    "expected_counts",
    "sweep",
]
