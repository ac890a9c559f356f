"""Daily state transition and observation map for one soil column.

``step_day`` advances the capillary-pressure-head profile by 1440 minutes
of implicit integration and applies additive process noise; ``observe``
maps heads to noisy volumetric moisture. The integration kernel is the
compiled extension when available, otherwise the pure-Python reference
(override with IRRISCHED_FORCE_PYTHON=1).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import NonConvergence, NonFiniteState
from . import _kernel_py
from .grid import ColumnGrid
from .hydraulics import HydraulicParams, capillary_capacity, water_content
from .uptake import SECONDS_PER_DAY, FeddesThresholds

if os.environ.get("IRRISCHED_FORCE_PYTHON"):
    _kernel = _kernel_py
else:
    try:
        from . import _kernel_cy as _kernel
    except ImportError:
        _kernel = _kernel_py

KERNEL_BACKEND = _kernel.BACKEND

# Newton controls (head residual tolerance in metres).
NEWTON_TOL = 1.0e-8
NEWTON_MAX_ITER = 50
MAX_HALVINGS = 4

# Soil-limited evaporation: the surface evaporative flux fades linearly to
# zero as the surface head falls from EV_RAMP_START to EV_RAMP_END.
EV_RAMP_START = -50.0
EV_RAMP_END = -150.0

# Floor on the capacity used to convert moisture-space process noise into
# an equivalent head perturbation.
_NOISE_CAP_FLOOR = 1.0e-5


@dataclass
class ColumnState:
    """Capillary pressure heads (m) at the grid nodes."""

    psi: np.ndarray

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=float)
        if not np.all(np.isfinite(self.psi)):
            raise NonFiniteState("column state contains non-finite heads")

    def copy(self) -> "ColumnState":
        return ColumnState(self.psi.copy())


@dataclass(frozen=True)
class DailyForcing:
    """One day of boundary forcing, stored in m/day at the API boundary.

    ev_fraction splits crop evapotranspiration kc*et0 into surface
    evaporation (EV) and transpiration demand.
    """

    u_irr: float = 0.0
    precip: float = 0.0
    et0: float = 0.0
    kc: float = 0.0
    zr: float = 0.5
    ev_fraction: float = 0.1

    def __post_init__(self):
        if self.u_irr < 0.0 or self.precip < 0.0 or self.et0 < 0.0:
            raise ValueError("forcing depths must be nonnegative")
        if not (0.0 <= self.ev_fraction <= 1.0):
            raise ValueError("ev_fraction must lie in [0, 1]")
        if self.zr <= 0.0:
            raise ValueError("rooting depth must be positive")


@dataclass(frozen=True)
class DayFluxes:
    """Boundary/sink water totals for one simulated day, in metres.

    surface_net = water_in - runoff - evaporation is the flux the solver
    actually pushed through the soil surface.
    """

    water_in: float
    runoff: float
    evaporation: float
    drainage: float
    uptake: float

    @property
    def surface_net(self) -> float:
        return self.water_in - self.runoff - self.evaporation


def _base_sink(forcing: DailyForcing, grid: ColumnGrid) -> np.ndarray:
    """Uniform (stress-free) uptake distribution over the rooted nodes, 1/s."""
    tp = max(0.0, (1.0 - forcing.ev_fraction) * forcing.kc * forcing.et0) / SECONDS_PER_DAY
    base = np.zeros(grid.node_count)
    if tp > 0.0:
        roots = grid.root_nodes(forcing.zr)
        base[roots] = tp / (len(roots) * grid.dz)
    return base


def step_day_detailed(
    state: ColumnState,
    forcing: DailyForcing,
    phi: HydraulicParams,
    grid: ColumnGrid,
    feddes: FeddesThresholds,
    process_std: float = 0.0,
    rng: np.random.Generator | None = None,
    step_minutes: float = 30.0,
    top_sealed: bool = False,
    bottom_sealed: bool = False,
) -> tuple[ColumnState, DayFluxes]:
    """Advance one day and report the boundary water totals.

    ``top_sealed``/``bottom_sealed`` replace the flux boundary conditions
    with no-flow walls; they exist for conservation testing only.
    """
    if not np.all(np.isfinite(state.psi)):
        raise NonFiniteState("non-finite head profile on entry")
    n_steps = int(round(1440.0 / step_minutes))
    dt = step_minutes * 60.0
    supply = (forcing.u_irr + forcing.precip) / SECONDS_PER_DAY
    ev_pot = forcing.ev_fraction * forcing.kc * forcing.et0 / SECONDS_PER_DAY
    base_sink = _base_sink(forcing, grid)

    psi_out, fluxes, status, fail_step, fail_res = _kernel.day_step(
        np.ascontiguousarray(state.psi, dtype=float),
        phi.as_tuple(),
        grid.dz,
        n_steps,
        dt,
        supply,
        ev_pot,
        np.ascontiguousarray(base_sink),
        (feddes.psi1, feddes.psi2, feddes.psi3, feddes.psi4),
        EV_RAMP_START,
        EV_RAMP_END,
        bool(top_sealed),
        bool(bottom_sealed),
        NEWTON_TOL,
        NEWTON_MAX_ITER,
        MAX_HALVINGS,
    )
    psi_out = np.asarray(psi_out, dtype=float)
    if status == _kernel_py.STATUS_NO_CONVERGENCE:
        raise NonConvergence(
            f"Newton failed at inner step {fail_step} (residual {fail_res:.3e})",
            step_index=fail_step,
            residual_norm=fail_res,
        )
    if status == _kernel_py.STATUS_NON_FINITE or not np.all(np.isfinite(psi_out)):
        raise NonFiniteState(f"solver produced non-finite heads at inner step {fail_step}")

    if process_std > 0.0:
        if rng is None:
            raise ValueError("process noise requested without an rng")
        dtheta = rng.normal(0.0, process_std, size=psi_out.shape)
        cap = np.maximum(capillary_capacity(psi_out, phi), _NOISE_CAP_FLOOR)
        psi_out = psi_out + dtheta / cap
        if not np.all(np.isfinite(psi_out)):
            raise NonFiniteState("non-finite heads after process noise")

    return ColumnState(psi_out), DayFluxes(*fluxes)


def step_day(
    state: ColumnState,
    forcing: DailyForcing,
    phi: HydraulicParams,
    grid: ColumnGrid,
    feddes: FeddesThresholds,
    process_std: float = 0.0,
    rng: np.random.Generator | None = None,
    step_minutes: float = 30.0,
) -> ColumnState:
    """Daily state transition x_{k+1} = F(x_k, u_k) + noise."""
    new_state, _ = step_day_detailed(
        state, forcing, phi, grid, feddes, process_std, rng, step_minutes
    )
    return new_state


def observe(
    state: ColumnState,
    phi: HydraulicParams,
    output_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Noisy volumetric moisture output y = H(x) + v, clipped to the
    physical range [theta_r, theta_s]."""
    if not np.all(np.isfinite(state.psi)):
        raise NonFiniteState("non-finite head profile in observe")
    y = water_content(state.psi, phi)
    if output_std > 0.0:
        if rng is None:
            raise ValueError("output noise requested without an rng")
        y = y + rng.normal(0.0, output_std, size=y.shape)
    return np.clip(y, phi.theta_r, phi.theta_s)
