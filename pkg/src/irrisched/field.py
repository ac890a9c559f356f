"""Multi-zone field composition, forcing generators, and target bounds.

Management zones share daily weather and crop forcing but evolve through
independent soil columns; there is no lateral coupling between zones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidBounds, NonConvergence
from .soilsim import (
    SOIL_LIBRARY,
    ColumnGrid,
    ColumnState,
    DailyForcing,
    FeddesThresholds,
    HydraulicParams,
    observe,
    psi_from_theta,
    step_day,
    water_content,
)

MM_PER_M = 1000.0

# Depth-quarter weights for the root-zone aggregate, surface quarter first.
ROOT_ZONE_WEIGHTS = (0.4, 0.3, 0.2, 0.1)

# Anaerobic threshold: moisture at a suction of 0.1 m (near saturation).
ANAEROBIC_HEAD = -0.1


def target_bounds(theta_fc: float, theta_wp: float, mad: float) -> tuple[float, float]:
    """Upper/lower root-zone moisture targets from field capacity, wilting
    point, and management allowable depletion."""
    if not theta_wp < theta_fc:
        raise InvalidBounds(f"need theta_wp < theta_fc, got {theta_wp} >= {theta_fc}")
    if not 0.0 < mad <= 1.0:
        raise InvalidBounds(f"MAD must lie in (0, 1], got {mad}")
    nu_upper = theta_fc
    nu_lower = theta_fc - mad * (theta_fc - theta_wp)
    return nu_upper, nu_lower


@dataclass(frozen=True)
class ZoneConfig:
    """Static description of one management zone."""

    zone_id: int
    phi: HydraulicParams
    theta_fc: float
    theta_wp: float
    mad: float = 0.5

    def __post_init__(self):
        # raises InvalidBounds on bad inputs
        target_bounds(self.theta_fc, self.theta_wp, self.mad)

    @property
    def nu_upper(self) -> float:
        return target_bounds(self.theta_fc, self.theta_wp, self.mad)[0]

    @property
    def nu_lower(self) -> float:
        return target_bounds(self.theta_fc, self.theta_wp, self.mad)[1]

    @property
    def theta_anaerobic(self) -> float:
        return water_content(ANAEROBIC_HEAD, self.phi)

    def feddes(self) -> FeddesThresholds:
        return FeddesThresholds.from_moisture(
            self.phi, self.theta_anaerobic, self.nu_upper, self.nu_lower, self.theta_wp
        )


def default_zones() -> list[ZoneConfig]:
    """Three-zone calibration: loam / sandy loam (targets 0.280/0.200) and
    clay loam (targets 0.300/0.230), all at MAD = 0.5."""
    return [
        ZoneConfig(zone_id=0, phi=SOIL_LIBRARY["loam"], theta_fc=0.280, theta_wp=0.120),
        ZoneConfig(zone_id=1, phi=SOIL_LIBRARY["sandy_loam"], theta_fc=0.280, theta_wp=0.120),
        ZoneConfig(zone_id=2, phi=SOIL_LIBRARY["clay_loam"], theta_fc=0.300, theta_wp=0.160),
    ]


@dataclass
class FieldState:
    zones: list[ColumnState]
    day_index: int = 0
    gdd_cum: float = 0.0

    def __post_init__(self):
        if len(self.zones) < 1:
            raise ValueError("need at least one zone")
        if self.day_index < 0 or self.gdd_cum < 0.0:
            raise ValueError("day_index and gdd_cum must be nonnegative")

    def copy(self) -> "FieldState":
        return FieldState([z.copy() for z in self.zones], self.day_index, self.gdd_cum)


@dataclass(frozen=True)
class WeatherDay:
    """Daily weather: reference ET and precipitation in m/day, mean air
    temperature in degrees C."""

    et0: float
    precip: float
    t_avg: float

    def __post_init__(self):
        if self.et0 < 0.0 or self.precip < 0.0:
            raise ValueError("et0 and precip must be nonnegative")


@dataclass(frozen=True)
class ForcingNoise:
    et0: float = 0.0005
    precip: float = 0.001
    kc: float = 0.02
    t_avg: float = 1.0


@dataclass(frozen=True)
class NoiseSpec:
    """Noise configuration for training and season simulations."""

    process_std: float = 0.0002
    output_std: float = 0.0005
    forcing: ForcingNoise = field(default_factory=ForcingNoise)
    forecast_growth_rate: float = 0.15
    forecast_growth_cap: float = 3.0

    def __post_init__(self):
        if self.process_std < 0 or self.output_std < 0:
            raise ValueError("noise stds must be nonnegative")

    def growth(self, lead: int) -> float:
        return min(1.0 + self.forecast_growth_rate * lead, self.forecast_growth_cap)


def root_zone_moisture(y: np.ndarray, zr: float, grid: ColumnGrid) -> float:
    """Depth-quarter weighted root-zone moisture aggregate.

    Quarter means over [0, zr] are combined with weights 0.4/0.3/0.2/0.1
    from the surface down; boundary nodes join the shallower quarter.
    """
    if zr > grid.depth + 1e-12:
        raise ValueError(f"rooting depth {zr} exceeds column depth {grid.depth}")
    y = np.asarray(y, dtype=float)
    groups = grid.quarter_slices(zr)
    return float(
        sum(w * np.mean(y[g]) for w, g in zip(ROOT_ZONE_WEIGHTS, groups))
    )


def gdd_step(t_avg: float, t_base: float = 5.0) -> float:
    """Daily growing-degree-day increment, clamped at zero."""
    return max(0.0, t_avg - t_base)


def kc_of_gdd(g: float) -> float:
    """Crop coefficient of soft spring wheat from cumulative GDD.

    Quartic empirical relation, clamped below at zero where the raw
    polynomial turns negative (pre-emergence and senescence).
    """
    if g < 0.0:
        raise ValueError("cumulative GDD must be nonnegative")
    raw = (
        -0.0207
        + 0.00266 * g
        + 4.7e-8 * g**2
        - 2.0e-9 * g**3
        + 2.70e-13 * g**4
    )
    return max(0.0, raw)


@dataclass(frozen=True)
class WeatherModel:
    """Stochastic season weather: uniform daily ET0, a two-state rainfall
    occurrence chain with exponential depths, and a sinusoidal temperature
    cycle with Gaussian noise."""

    et0_min_mm: float = 1.04
    et0_max_mm: float = 9.0
    rain_wet_prob: float = 0.25
    rain_persistence: float = 0.5
    rain_mean_depth_mm: float = 5.0
    temp_mean: float = 16.0
    temp_amplitude: float = 5.0
    temp_noise_std: float = 2.0

    def wet_given_dry(self) -> float:
        """Transition probability dry->wet that yields the stationary
        wet-day probability under the configured persistence."""
        pi = self.rain_wet_prob
        p11 = self.rain_persistence
        if pi >= 1.0:
            return 1.0
        return max(0.0, min(1.0, pi * (1.0 - p11) / (1.0 - pi)))


def generate_weather(
    season_length: int,
    rng: np.random.Generator,
    model: WeatherModel | None = None,
) -> list[WeatherDay]:
    """Draw a season of daily weather; deterministic for a given rng state."""
    if season_length < 1:
        raise ValueError("season_length must be at least 1")
    model = model or WeatherModel()
    p01 = model.wet_given_dry()
    days = []
    wet = rng.random() < model.rain_wet_prob
    for d in range(season_length):
        et0 = rng.uniform(model.et0_min_mm, model.et0_max_mm) / MM_PER_M
        if wet:
            depth = rng.exponential(model.rain_mean_depth_mm) / MM_PER_M
        else:
            depth = 0.0
        progress = d / max(season_length - 1, 1)
        t_avg = (
            model.temp_mean
            - model.temp_amplitude * np.cos(2.0 * np.pi * progress)
            + rng.normal(0.0, model.temp_noise_std)
        )
        days.append(WeatherDay(et0=et0, precip=depth, t_avg=float(t_avg)))
        p_wet_next = model.rain_persistence if wet else p01
        wet = rng.random() < p_wet_next
    return days


def perturb_forcing(
    w: WeatherDay,
    kc: float,
    lead: int,
    spec: NoiseSpec,
    rng: np.random.Generator,
) -> tuple[WeatherDay, float]:
    """Noisy copy of one day of forcing, with noise growing in the
    forecast lead time; all quantities clipped to their physical ranges."""
    if lead < 0:
        raise ValueError("lead must be nonnegative")
    g = spec.growth(lead)
    fn = spec.forcing
    et0 = max(0.0, w.et0 + rng.normal(0.0, fn.et0 * g)) if fn.et0 > 0 else w.et0
    precip = max(0.0, w.precip + rng.normal(0.0, fn.precip * g)) if fn.precip > 0 else w.precip
    t_avg = w.t_avg + rng.normal(0.0, fn.t_avg * g) if fn.t_avg > 0 else w.t_avg
    kc_out = max(0.0, kc + rng.normal(0.0, fn.kc * g)) if fn.kc > 0 else kc
    return WeatherDay(et0=et0, precip=precip, t_avg=float(t_avg)), kc_out


def zone_rngs(seed: int, n_zones: int) -> list[np.random.Generator]:
    """Independent per-zone random streams from one seed (each column owns
    its own rng, keeping zone trajectories decoupled)."""
    seqs = np.random.SeedSequence(seed).spawn(n_zones)
    return [np.random.default_rng(s) for s in seqs]


def field_step(
    fs: FieldState,
    u_irr: np.ndarray,
    weather: WeatherDay,
    kc: float,
    configs: list[ZoneConfig],
    grid: ColumnGrid,
    noise: NoiseSpec,
    rngs: list[np.random.Generator] | None,
    zr: float = 0.5,
    ev_fraction: float = 0.1,
) -> tuple[FieldState, list[np.ndarray]]:
    """Advance every zone one day and observe the new moisture profiles.

    Zones consume the same weather/crop forcing but are otherwise fully
    independent, each drawing noise from its own rng; solver failures are
    re-raised tagged with the zone id.
    """
    u_irr = np.asarray(u_irr, dtype=float)
    if u_irr.shape[0] != len(fs.zones) or len(configs) != len(fs.zones):
        raise ValueError("per-zone irrigation and configs must match the zone count")
    if rngs is None:
        rngs = [None] * len(fs.zones)
    if len(rngs) != len(fs.zones):
        raise ValueError("need one rng per zone")
    new_states = []
    outputs = []
    for i, (state, cfg, rng) in enumerate(zip(fs.zones, configs, rngs)):
        forcing = DailyForcing(
            u_irr=float(u_irr[i]),
            precip=weather.precip,
            et0=weather.et0,
            kc=kc,
            zr=zr,
            ev_fraction=ev_fraction,
        )
        try:
            nxt = step_day(
                state, forcing, cfg.phi, grid, cfg.feddes(),
                process_std=noise.process_std, rng=rng,
            )
        except NonConvergence as err:
            err.zone_id = cfg.zone_id
            err.day = fs.day_index
            raise
        new_states.append(nxt)
        outputs.append(observe(nxt, cfg.phi, output_std=noise.output_std, rng=rng))
    gdd = fs.gdd_cum + gdd_step(weather.t_avg)
    return FieldState(new_states, fs.day_index + 1, gdd), outputs


def sample_initial_state(
    cfg: ZoneConfig, grid: ColumnGrid, rng: np.random.Generator, margin: float = 0.03
) -> ColumnState:
    """Depth-uniform initial profile with moisture drawn uniformly from
    [nu_lower - margin, nu_upper]."""
    theta0 = rng.uniform(cfg.nu_lower - margin, cfg.nu_upper)
    return ColumnState(np.full(grid.node_count, psi_from_theta(theta0, cfg.phi)))
