"""LP-FNO melt-pool surrogate."""

from ._lpfno import (
    LpfnoError,
    Model,
    build_plan,
    normalized_enthalpy,
    oracle_sample,
    speed_from_enthalpy,
)

__all__ = [
    "LpfnoError",
    "Model",
    "build_plan",
    "normalized_enthalpy",
    "oracle_sample",
    "speed_from_enthalpy",
]
