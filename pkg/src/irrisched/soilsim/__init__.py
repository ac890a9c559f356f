from .grid import ColumnGrid
from .hydraulics import (
    CLAY_LOAM,
    LOAM,
    SANDY_LOAM,
    SOIL_LIBRARY,
    HydraulicParams,
    capillary_capacity,
    conductivity,
    load_parameter_sets,
    psi_from_theta,
    water_content,
)
from .solver import (
    KERNEL_BACKEND,
    ColumnState,
    DailyForcing,
    DayFluxes,
    observe,
    step_day,
    step_day_detailed,
)
from .uptake import FeddesThresholds, root_uptake, stress_response

__all__ = [
    "ColumnGrid",
    "ColumnState",
    "DailyForcing",
    "DayFluxes",
    "FeddesThresholds",
    "HydraulicParams",
    "KERNEL_BACKEND",
    "LOAM",
    "SANDY_LOAM",
    "CLAY_LOAM",
    "SOIL_LIBRARY",
    "capillary_capacity",
    "conductivity",
    "load_parameter_sets",
    "observe",
    "psi_from_theta",
    "root_uptake",
    "step_day",
    "step_day_detailed",
    "stress_response",
    "water_content",
]
