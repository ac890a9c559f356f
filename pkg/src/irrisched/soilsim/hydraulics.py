"""Soil water retention and conductivity closures.

Retention follows van Genuchten (1980) with the Mualem (1976) restriction
m = 1 - 1/n; unsaturated conductivity is the van Genuchten-Mualem closed
form. Heads are in metres (negative when unsaturated), conductivities in
m/s, moisture contents in m3/m3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Capillary capacity assigned on the saturated branch (psi >= 0) so the
# storage term never vanishes from the solver Jacobian.
C_SAT = 1.0e-5

# Treat heads above this as saturated when evaluating conductivity slopes;
# the Mualem derivative is singular at psi -> 0-.
_PSI_SAT_EPS = -1.0e-9


@dataclass(frozen=True)
class HydraulicParams:
    """Van Genuchten parameter set for one soil type.

    Attributes:
        Ks: saturated hydraulic conductivity, m/s.
        theta_s: saturated volumetric moisture content, m3/m3.
        theta_r: residual volumetric moisture content, m3/m3.
        alpha: retention shape parameter, 1/m.
        n: retention shape parameter, dimensionless (> 1).
    """

    Ks: float
    theta_s: float
    theta_r: float
    alpha: float
    n: float

    def __post_init__(self):
        if not (0.0 <= self.theta_r < self.theta_s <= 1.0):
            raise ValueError(
                f"require 0 <= theta_r < theta_s <= 1, got theta_r={self.theta_r}, "
                f"theta_s={self.theta_s}"
            )
        if self.Ks <= 0.0:
            raise ValueError(f"Ks must be positive, got {self.Ks}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.n <= 1.0:
            raise ValueError(f"n must exceed 1, got {self.n}")

    @property
    def m(self) -> float:
        return 1.0 - 1.0 / self.n

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.Ks, self.theta_s, self.theta_r, self.alpha, self.n)


def water_content(psi, phi: HydraulicParams):
    """Volumetric moisture content theta_v(psi).

    Saturated branch (psi >= 0) returns theta_s. Accepts scalars or arrays.
    """
    psi_arr = np.asarray(psi, dtype=float)
    u = np.power(-phi.alpha * np.minimum(psi_arr, 0.0), phi.n)
    theta = phi.theta_r + (phi.theta_s - phi.theta_r) * np.power(1.0 + u, -phi.m)
    theta = np.where(psi_arr >= 0.0, phi.theta_s, theta)
    if theta.ndim == 0:
        return float(theta)
    return theta


def capillary_capacity(psi, phi: HydraulicParams):
    """Specific moisture capacity C(psi) = d theta / d psi, 1/m.

    Analytic derivative of the retention curve for psi < 0; the saturated
    branch returns the regularization constant C_SAT.
    """
    psi_arr = np.asarray(psi, dtype=float)
    neg = np.minimum(psi_arr, -np.finfo(float).tiny)
    ap = -phi.alpha * neg
    u = np.power(ap, phi.n)
    cap = (
        (phi.theta_s - phi.theta_r)
        * phi.m
        * phi.n
        * phi.alpha
        * np.power(ap, phi.n - 1.0)
        * np.power(1.0 + u, -(phi.m + 1.0))
    )
    cap = np.where(psi_arr >= 0.0, C_SAT, cap)
    if cap.ndim == 0:
        return float(cap)
    return cap


def effective_saturation(psi, phi: HydraulicParams):
    """Se = (theta - theta_r) / (theta_s - theta_r), in [0, 1]."""
    psi_arr = np.asarray(psi, dtype=float)
    u = np.power(-phi.alpha * np.minimum(psi_arr, 0.0), phi.n)
    se = np.power(1.0 + u, -phi.m)
    if se.ndim == 0:
        return float(se)
    return se


def conductivity(psi, phi: HydraulicParams):
    """Unsaturated hydraulic conductivity K(psi), m/s (Mualem form).

    K = Ks * Se^(1/2) * [1 - (1 - Se^(1/m))^m]^2, with K(psi >= 0) = Ks.
    """
    psi_arr = np.asarray(psi, dtype=float)
    u = np.power(-phi.alpha * np.minimum(psi_arr, 0.0), phi.n)
    se = np.power(1.0 + u, -phi.m)
    # Se^(1/m) == 1/(1+u) exactly under the Mualem restriction.
    inner = 1.0 - np.power(u / (1.0 + u), phi.m)
    k = phi.Ks * np.sqrt(se) * inner * inner
    k = np.where(psi_arr >= 0.0, phi.Ks, k)
    if k.ndim == 0:
        return float(k)
    return k


def conductivity_slope(psi, phi: HydraulicParams):
    """dK/dpsi, m/s per m, used by the solver Jacobian.

    Zero on the saturated branch; near psi = 0- the analytic slope is
    singular, so heads above _PSI_SAT_EPS are treated as saturated.
    """
    psi_arr = np.asarray(psi, dtype=float)
    neg = np.minimum(psi_arr, _PSI_SAT_EPS)
    ap = -phi.alpha * neg
    u = np.power(ap, phi.n)
    one_plus = 1.0 + u
    se = np.power(one_plus, -phi.m)
    frac = u / one_plus
    inner = 1.0 - np.power(frac, phi.m)
    # dSe/dpsi equals the capillary capacity over (theta_s - theta_r).
    dse = phi.m * phi.n * phi.alpha * np.power(ap, phi.n - 1.0) * np.power(one_plus, -(phi.m + 1.0))
    # dK/dSe = Ks * [ inner^2 / (2 sqrt(Se)) + 2 sqrt(Se) inner dA/dSe ]
    # with dA/dSe = (1 - Se^(1/m))^(m-1) * Se^(1/m - 1).
    frac_safe = np.clip(frac, 1e-300, 1.0)
    se_safe = np.clip(se, 1e-300, 1.0)
    da_dse = np.power(frac_safe, phi.m - 1.0) * np.power(se_safe, 1.0 / phi.m - 1.0)
    dk_dse = phi.Ks * (
        inner * inner / (2.0 * np.sqrt(se_safe)) + 2.0 * np.sqrt(se_safe) * inner * da_dse
    )
    slope = dk_dse * dse
    slope = np.where(psi_arr >= _PSI_SAT_EPS, 0.0, slope)
    if slope.ndim == 0:
        return float(slope)
    return slope


def psi_from_theta(theta, phi: HydraulicParams):
    """Invert the retention curve: head (m) at a given moisture content.

    Moisture is clipped into (theta_r, theta_s); theta at or above
    saturation maps to psi = 0.
    """
    theta_arr = np.asarray(theta, dtype=float)
    se = (theta_arr - phi.theta_r) / (phi.theta_s - phi.theta_r)
    se = np.clip(se, 1e-12, 1.0)
    with np.errstate(divide="ignore"):
        inner = np.power(se, -1.0 / phi.m) - 1.0
    psi = -np.power(np.maximum(inner, 0.0), 1.0 / phi.n) / phi.alpha
    if psi.ndim == 0:
        return float(psi)
    return psi


def load_parameter_sets(path) -> dict[str, HydraulicParams]:
    """Read named hydraulic parameter sets from a YAML fixture file.

    The file maps set names to mappings whose keys match the
    HydraulicParams field names.
    """
    import yaml

    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    out = {}
    for name, fields in raw.items():
        out[name] = HydraulicParams(**{k: float(v) for k, v in fields.items()})
    return out


# Literature parameter sets (Carsel & Parrish 1988 class averages) used as
# the default calibration for the three management-zone soil types.
LOAM = HydraulicParams(Ks=2.9e-6, theta_s=0.43, theta_r=0.078, alpha=3.6, n=1.56)
SANDY_LOAM = HydraulicParams(Ks=1.23e-5, theta_s=0.41, theta_r=0.065, alpha=7.5, n=1.89)
CLAY_LOAM = HydraulicParams(Ks=7.22e-7, theta_s=0.41, theta_r=0.095, alpha=1.9, n=1.31)

SOIL_LIBRARY = {"loam": LOAM, "sandy_loam": SANDY_LOAM, "clay_loam": CLAY_LOAM}


def _scalar_vg(psi: float, Ks: float, ts: float, tr: float, alpha: float, n: float):
    """Scalar theta/C/K/dK evaluation shared with the pure-Python kernel.

    Returns (theta, C, K, dK_dpsi). Kept free of numpy so the fallback
    kernel's arithmetic matches the compiled kernel op-for-op.
    """
    if psi >= 0.0:
        return ts, C_SAT, Ks, 0.0
    m = 1.0 - 1.0 / n
    ap = -alpha * psi
    t = math.log(ap)
    u = math.exp(n * t)
    w = math.log1p(u)
    se = math.exp(-m * w)
    theta = tr + (ts - tr) * se
    cap = (ts - tr) * m * n * alpha * (u / ap) * math.exp(-(m + 1.0) * w)
    frac = u / (1.0 + u)
    inner = 1.0 - math.exp(m * math.log(frac)) if frac > 0.0 else 1.0
    sqrt_se = math.sqrt(se)
    k = Ks * sqrt_se * inner * inner
    if psi >= _PSI_SAT_EPS:
        dk = 0.0
    else:
        dse = m * n * alpha * (u / ap) * math.exp(-(m + 1.0) * w) if u > 0.0 else 0.0
        da_dse = math.exp((m - 1.0) * math.log(frac)) * math.exp((1.0 / m - 1.0) * math.log(se))
        dk_dse = Ks * (inner * inner / (2.0 * sqrt_se) + 2.0 * sqrt_se * inner * da_dse)
        dk = dk_dse * dse
    return theta, cap, k, dk
