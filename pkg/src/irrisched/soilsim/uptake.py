"""Root water extraction sink for the column solver.

Potential transpiration is spread uniformly over the rooted nodes and each
node's share is reduced by a Feddes-type (Feddes et al. 1978) trapezoidal
stress response evaluated on the local pressure head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ColumnGrid
from .hydraulics import HydraulicParams, psi_from_theta

SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class FeddesThresholds:
    """Pressure-head breakpoints of the trapezoidal stress response.

    psi1 > psi2 > psi3 > psi4: extraction is zero above psi1 (anaerobic)
    and below psi4 (wilting), optimal on [psi3, psi2], linear in between.
    """

    psi1: float
    psi2: float
    psi3: float
    psi4: float

    def __post_init__(self):
        if not (self.psi1 > self.psi2 > self.psi3 > self.psi4):
            raise ValueError(
                f"require psi1 > psi2 > psi3 > psi4, got "
                f"({self.psi1}, {self.psi2}, {self.psi3}, {self.psi4})"
            )

    @classmethod
    def from_moisture(
        cls,
        phi: HydraulicParams,
        theta_anaerobic: float,
        theta_opt_hi: float,
        theta_opt_lo: float,
        theta_wilt: float,
    ) -> "FeddesThresholds":
        """Map moisture-space thresholds through the retention curve."""
        return cls(
            psi1=psi_from_theta(theta_anaerobic, phi),
            psi2=psi_from_theta(theta_opt_hi, phi),
            psi3=psi_from_theta(theta_opt_lo, phi),
            psi4=psi_from_theta(theta_wilt, phi),
        )


def stress_response(psi, fd: FeddesThresholds):
    """Dimensionless extraction multiplier rho(psi) in [0, 1]."""
    psi_arr = np.asarray(psi, dtype=float)
    rho = np.zeros_like(psi_arr)
    wet = (psi_arr > fd.psi2) & (psi_arr < fd.psi1)
    rho = np.where(wet, (fd.psi1 - psi_arr) / (fd.psi1 - fd.psi2), rho)
    rho = np.where((psi_arr <= fd.psi2) & (psi_arr >= fd.psi3), 1.0, rho)
    dry = (psi_arr < fd.psi3) & (psi_arr > fd.psi4)
    rho = np.where(dry, (psi_arr - fd.psi4) / (fd.psi3 - fd.psi4), rho)
    if rho.ndim == 0:
        return float(rho)
    return rho


def root_uptake(
    psi_profile: np.ndarray,
    kc: float,
    et0: float,
    zr: float,
    ev_fraction: float,
    grid: ColumnGrid,
    fd: FeddesThresholds,
) -> np.ndarray:
    """Volumetric sink per node, 1/s.

    The transpiration share of crop demand, Tp = (1 - ev_fraction)*kc*et0
    (et0 in m/day), is distributed uniformly over the rooted nodes; the
    column integral of the sink never exceeds Tp.
    """
    tp = max(0.0, (1.0 - ev_fraction) * kc * et0) / SECONDS_PER_DAY
    sink = np.zeros(grid.node_count)
    if tp == 0.0:
        return sink
    roots = grid.root_nodes(zr)
    base = tp / (len(roots) * grid.dz)
    sink[roots] = base * stress_response(np.asarray(psi_profile)[roots], fd)
    return sink
