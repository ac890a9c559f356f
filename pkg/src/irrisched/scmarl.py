"""Semi-centralized multi-agent scheduling core.

A single coordinator decides the daily field-wide yes/no irrigation switch
from all zones' moisture profiles; one local agent per zone proposes the
irrigation amount. In semi-centralized mode the coordinator's decision is
communicated to the local agents and embedded in their policy inputs; in
the decentralized ablation the decision only gates the applied amounts.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import MissingArtifact, ShapeMismatch
from .field import (
    NoiseSpec,
    WeatherDay,
    WeatherModel,
    ZoneConfig,
    field_step,
    FieldState,
    gdd_step,
    generate_weather,
    kc_of_gdd,
    perturb_forcing,
    root_zone_moisture,
    sample_initial_state,
    zone_rngs,
)
from .neural import (
    CategoricalHead,
    GaussianHead,
    MinMaxNormalizer,
    assign_parameters,
    load_arrays,
    save_arrays,
)
from .ppo import AcAgent, PpoConfig, Transition, UpdateStats, update
from .soilsim import ColumnGrid, ColumnState, DailyForcing, observe, step_day

MODE_SCMARL = "scmarl"
MODE_DMARL = "dmarl"

BUNDLE_MANIFEST = "bundle.json"


@dataclass(frozen=True)
class RewardWeights:
    """Weights of the tracking / water-cost reward terms."""

    alpha_la: float = 1.0
    beta_la: float = 1.0
    alpha_ca: float = 0.1
    beta_ca: float = 1.0
    q_upper: float = 1.2e6
    q_lower: float = 1.0e6
    r_c: float = 1000.0
    r_u: float = 9000.0

    def __post_init__(self):
        vals = (self.alpha_la, self.beta_la, self.alpha_ca, self.beta_ca,
                self.q_upper, self.q_lower, self.r_c, self.r_u)
        if any(v <= 0 for v in vals):
            raise ValueError("all reward weights must be positive")


def zone_tracking_reward(
    theta_rz: float, nu_lower: float, nu_upper: float, q_lower: float, q_upper: float
) -> float:
    """Piecewise-linear band-tracking penalty; zero inside the closed band."""
    if theta_rz < nu_lower:
        return -q_lower * abs(theta_rz - nu_lower)
    if theta_rz > nu_upper:
        return -q_upper * abs(theta_rz - nu_upper)
    return 0.0


def local_reward(
    theta_rz_next: float,
    a_la: float,
    weights: RewardWeights,
    bounds: tuple[float, float],
) -> float:
    """Local agent reward: band tracking on the successor root-zone
    moisture plus the per-unit cost of the prescribed amount."""
    nu_upper, nu_lower = bounds
    r_z = zone_tracking_reward(theta_rz_next, nu_lower, nu_upper, weights.q_lower, weights.q_upper)
    return weights.alpha_la * r_z + weights.beta_la * (-weights.r_u * a_la)


def coordinator_reward(
    theta_rz_all: list[float],
    c: int,
    weights: RewardWeights,
    bounds_all: list[tuple[float, float]],
) -> float:
    """Coordinator reward: summed zone tracking terms plus the fixed cost
    of an irrigation event."""
    if len(theta_rz_all) != len(bounds_all):
        raise ValueError("need one bound pair per zone")
    total = 0.0
    for theta_rz, (nu_upper, nu_lower) in zip(theta_rz_all, bounds_all):
        total += zone_tracking_reward(theta_rz, nu_lower, nu_upper, weights.q_lower, weights.q_upper)
    return weights.alpha_ca * total + weights.beta_ca * (-weights.r_c * c)


# normalization ranges for the non-moisture state entries
ET0_RANGE = (0.0, 0.0095)
KC_RANGE = (0.0, 1.3)
RAIN_RANGE = (0.0, 0.06)
DECISION_RANGE = (0.0, 1.0)


def _local_normalizer(cfg: ZoneConfig, nx: int, with_decision: bool) -> MinMaxNormalizer:
    lo = [cfg.phi.theta_r] * nx + [ET0_RANGE[0], KC_RANGE[0], RAIN_RANGE[0]]
    hi = [cfg.phi.theta_s] * nx + [ET0_RANGE[1], KC_RANGE[1], RAIN_RANGE[1]]
    if with_decision:
        lo.append(DECISION_RANGE[0])
        hi.append(DECISION_RANGE[1])
    return MinMaxNormalizer(np.array(lo), np.array(hi))


def _coordinator_normalizer(cfgs: list[ZoneConfig], nx: int) -> MinMaxNormalizer:
    lo, hi = [], []
    for cfg in cfgs:
        lo += [cfg.phi.theta_r] * nx
        hi += [cfg.phi.theta_s] * nx
    lo += [ET0_RANGE[0], KC_RANGE[0], RAIN_RANGE[0]]
    hi += [ET0_RANGE[1], KC_RANGE[1], RAIN_RANGE[1]]
    return MinMaxNormalizer(np.array(lo), np.array(hi))


@dataclass
class JointAction:
    c: int
    a_la: np.ndarray          # raw Gaussian samples (or means), one per zone
    a_clipped: np.ndarray     # prescriptions clipped to [0, a_max]
    u_applied: np.ndarray     # c * a_clipped
    coord_state: np.ndarray
    local_states: list[np.ndarray]
    coord_log_prob: float = 0.0
    coord_value: float = 0.0
    local_log_probs: np.ndarray | None = None
    local_values: np.ndarray | None = None


class AgentBundle:
    """Coordinator plus per-zone local agents with their normalizers."""

    def __init__(
        self,
        mode: str,
        zone_configs: list[ZoneConfig],
        grid: ColumnGrid,
        ppo_config: PpoConfig,
        seed: int,
        a_max: float = 0.030,
        u_align: float = 0.001,
    ):
        if mode not in (MODE_SCMARL, MODE_DMARL):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.a_max = a_max
        self.u_align = u_align
        self.n_zones = len(zone_configs)
        self.nx = grid.node_count
        self.ppo_config = ppo_config

        with_decision = mode == MODE_SCMARL
        self.local_dim = self.nx + 3 + (1 if with_decision else 0)
        self.coord_dim = self.n_zones * self.nx + 3
        self.coord_norm = _coordinator_normalizer(zone_configs, self.nx)
        self.local_norms = [
            _local_normalizer(cfg, self.nx, with_decision) for cfg in zone_configs
        ]
        if self.coord_norm.dim != self.coord_dim or any(
            n.dim != self.local_dim for n in self.local_norms
        ):
            raise ShapeMismatch("state dimensions inconsistent with normalizers")

        seq = np.random.SeedSequence(seed)
        coord_seed, *local_seeds = seq.spawn(1 + self.n_zones)
        coord_rng = np.random.default_rng(coord_seed)
        self.coordinator = AcAgent(
            "coordinator",
            CategoricalHead(self.coord_dim, 2, coord_rng),
            self.coord_dim,
            ppo_config,
            coord_rng,
        )
        self.locals: list[AcAgent] = []
        for i, ls in enumerate(local_seeds):
            rng = np.random.default_rng(ls)
            head = GaussianHead(
                self.local_dim, 1, rng, init_std=0.2 * a_max, mean_bias=0.5 * a_max
            )
            self.locals.append(AcAgent(f"local_{i}", head, self.local_dim, ppo_config, rng))

    # -- state construction -------------------------------------------------

    def coordinator_state(self, ys: list[np.ndarray], et0: float, kc: float, rn: float) -> np.ndarray:
        raw = np.concatenate([np.asarray(y, dtype=float) for y in ys] + [[et0, kc, rn]])
        if raw.shape[0] != self.coord_dim:
            raise ShapeMismatch(f"coordinator state has {raw.shape[0]} dims, want {self.coord_dim}")
        return self.coord_norm.normalize(raw)

    def local_state(
        self, zone: int, y: np.ndarray, et0: float, kc: float, rn: float, c: int | None
    ) -> np.ndarray:
        parts = [np.asarray(y, dtype=float), [et0, kc, rn]]
        if self.mode == MODE_SCMARL:
            if c is None:
                raise ValueError("semi-centralized local state requires the decision")
            parts.append([float(c)])
        raw = np.concatenate(parts)
        if raw.shape[0] != self.local_dim:
            raise ShapeMismatch(f"local state has {raw.shape[0]} dims, want {self.local_dim}")
        return self.local_norms[zone].normalize(raw)

    # -- joint action -------------------------------------------------------

    def act_joint(
        self,
        ys: list[np.ndarray],
        et0: float,
        kc: float,
        rn: float,
        rng: np.random.Generator | None = None,
        greedy: bool = False,
    ) -> JointAction:
        """Coordinator first, then the local agents (decision appended to
        their inputs in semi-centralized mode); applied water is gated by
        the decision."""
        s_ca = self.coordinator_state(ys, et0, kc, rn)
        if greedy:
            c = self.coordinator.head.greedy(s_ca)
            lp_c = 0.0
        else:
            c, lp_c, _ = self.coordinator.head.sample(s_ca, rng)
        v_c = self.coordinator.value(s_ca) if not greedy else 0.0

        a_raw = np.zeros(self.n_zones)
        lps = np.zeros(self.n_zones)
        vals = np.zeros(self.n_zones)
        states = []
        c_for_state = c if self.mode == MODE_SCMARL else None
        for i, agent in enumerate(self.locals):
            s_la = self.local_state(i, ys[i], et0, kc, rn, c_for_state)
            states.append(s_la)
            if greedy:
                a = float(agent.head.mean(s_la)[0, 0])
            else:
                sample, lp, _ = agent.head.sample(s_la, rng)
                a = float(sample[0, 0])
                lps[i] = float(lp[0])
                vals[i] = agent.value(s_la)
            a_raw[i] = a
        a_clip = np.clip(a_raw, 0.0, self.a_max)
        return JointAction(
            c=int(c),
            a_la=a_raw,
            a_clipped=a_clip,
            u_applied=float(c) * a_clip,
            coord_state=s_ca,
            local_states=states,
            coord_log_prob=float(lp_c),
            coord_value=v_c,
            local_log_probs=lps,
            local_values=vals,
        )

    # -- persistence ---------------------------------------------------------

    def agents(self) -> list[AcAgent]:
        return [self.coordinator, *self.locals]

    def save(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        manifest = {
            "mode": self.mode,
            "a_max": self.a_max,
            "u_align": self.u_align,
            "n_zones": self.n_zones,
            "nx": self.nx,
            "local_dim": self.local_dim,
            "coord_dim": self.coord_dim,
        }
        with open(os.path.join(out_dir, BUNDLE_MANIFEST), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
        for agent, norm in zip(
            self.agents(), [self.coord_norm, *self.local_norms]
        ):
            arrays = {f"actor/{k}": v for k, v in agent.head.parameters().items()}
            arrays.update({f"critic/{k}": v for k, v in agent.critic.parameters().items()})
            arrays["norm_lo"] = norm.lo
            arrays["norm_hi"] = norm.hi
            save_arrays(
                os.path.join(out_dir, f"{agent.name}.json"),
                arrays,
                meta={"agent": agent.name, "mode": self.mode},
            )

    @classmethod
    def load(
        cls,
        out_dir,
        zone_configs: list[ZoneConfig],
        grid: ColumnGrid,
        ppo_config: PpoConfig | None = None,
    ) -> "AgentBundle":
        manifest_path = os.path.join(out_dir, BUNDLE_MANIFEST)
        if not os.path.exists(manifest_path):
            raise MissingArtifact(f"no bundle manifest at {manifest_path}")
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
        bundle = cls(
            manifest["mode"],
            zone_configs,
            grid,
            ppo_config or PpoConfig(),
            seed=0,
            a_max=manifest["a_max"],
            u_align=manifest["u_align"],
        )
        if bundle.n_zones != manifest["n_zones"] or bundle.nx != manifest["nx"]:
            raise ShapeMismatch("checkpoint was trained for a different field layout")
        for agent in bundle.agents():
            path = os.path.join(out_dir, f"{agent.name}.json")
            if not os.path.exists(path):
                raise MissingArtifact(f"missing agent checkpoint {path}")
            arrays, _ = load_arrays(path)
            assign_parameters(
                agent.head.parameters(),
                {k.removeprefix("actor/"): v for k, v in arrays.items() if k.startswith("actor/")},
            )
            assign_parameters(
                agent.critic.parameters(),
                {k.removeprefix("critic/"): v for k, v in arrays.items() if k.startswith("critic/")},
            )
        return bundle


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 2000
    season_days: int = 113
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    weights: RewardWeights = field(default_factory=RewardWeights)
    weather: WeatherModel = field(default_factory=WeatherModel)
    zr: float = 0.5
    ev_fraction: float = 0.1
    init_margin: float = 0.03


@dataclass
class RunResult:
    bundle: AgentBundle
    scores: dict[str, list[float]]        # per-agent per-episode raw scores
    stats: list[UpdateStats]


def _episode_window(
    train_cfg: TrainConfig, horizon: int, weather_rng: np.random.Generator
) -> tuple[list[WeatherDay], list[float]]:
    """Sample a mid-season forcing window of horizon+1 days with aligned
    crop coefficients."""
    total = max(train_cfg.season_days, horizon + 1)
    season = generate_weather(total, weather_rng, train_cfg.weather)
    kcs = []
    gdd = 0.0
    for day in season:
        kcs.append(kc_of_gdd(gdd))
        gdd += gdd_step(day.t_avg)
    hi = total - horizon - 1
    start = int(weather_rng.integers(0, hi + 1)) if hi > 0 else 0
    return season[start : start + horizon + 1], kcs[start : start + horizon + 1]


def train_run(
    bundle: AgentBundle,
    zone_configs: list[ZoneConfig],
    grid: ColumnGrid,
    train_cfg: TrainConfig,
    seed: int,
) -> RunResult:
    """One training run over the configured number of episodes.

    Per timestep: the coordinator acts on the concatenated zone outputs,
    locals act on (optionally decision-augmented) states, the environment
    advances on true forcing while agents see noisy copies, rewards are
    computed from successor root-zone moisture, the coordinator updates
    before its successor decision is evaluated, and local successor states
    embed that successor decision.
    """
    horizon = bundle.ppo_config.horizon
    reward_scale = bundle.ppo_config.reward_scale
    weights = train_cfg.weights
    bounds = [(cfg.nu_upper, cfg.nu_lower) for cfg in zone_configs]

    seq = np.random.SeedSequence(seed)
    s_agent, s_weather, s_init, s_forcing, s_ppo, s_env = seq.spawn(6)
    agent_rng = np.random.default_rng(s_agent)
    weather_rng = np.random.default_rng(s_weather)
    init_rng = np.random.default_rng(s_init)
    forcing_rng = np.random.default_rng(s_forcing)
    ppo_rng = np.random.default_rng(s_ppo)

    scores: dict[str, list[float]] = {a.name: [] for a in bundle.agents()}
    all_stats: list[UpdateStats] = []

    for episode in range(train_cfg.episodes):
        days, kcs = _episode_window(train_cfg, horizon, weather_rng)
        env_rngs = zone_rngs(int(s_env.generate_state(1)[0]) + episode, bundle.n_zones)
        fs = FieldState(
            [sample_initial_state(cfg, grid, init_rng, train_cfg.init_margin) for cfg in zone_configs]
        )
        ys = [
            observe(state, cfg.phi, train_cfg.noise.output_std, rng)
            for state, cfg, rng in zip(fs.zones, zone_configs, env_rngs)
        ]
        w_noisy, kc_noisy = perturb_forcing(days[0], kcs[0], 0, train_cfg.noise, forcing_rng)
        ep_scores = {a.name: 0.0 for a in bundle.agents()}

        for t in range(horizon):
            joint = bundle.act_joint(
                ys, w_noisy.et0, kc_noisy, w_noisy.precip, rng=agent_rng
            )

            fs, ys_next = field_step(
                fs, joint.u_applied, days[t], kcs[t], zone_configs, grid,
                train_cfg.noise, env_rngs, zr=train_cfg.zr, ev_fraction=train_cfg.ev_fraction,
            )
            theta_rz = [
                root_zone_moisture(y, train_cfg.zr, grid) for y in ys_next
            ]
            r_locals = [
                local_reward(theta_rz[i], float(joint.a_clipped[i]), weights, bounds[i])
                for i in range(bundle.n_zones)
            ]
            r_coord = coordinator_reward(theta_rz, joint.c, weights, bounds)

            w_next, kc_next = perturb_forcing(
                days[t + 1], kcs[t + 1], 0, train_cfg.noise, forcing_rng
            )
            s_ca_next = bundle.coordinator_state(ys_next, w_next.et0, kc_next, w_next.precip)
            done = t == horizon - 1
            bundle.coordinator.pool.add(
                Transition(
                    joint.coord_state, joint.c, r_coord / reward_scale, s_ca_next,
                    joint.coord_log_prob, joint.coord_value, done=False,
                )
            )
            if bundle.coordinator.pool.full:
                st = update(bundle.coordinator, ppo_rng)
                st.episode = episode
                all_stats.append(st)

            # successor decision from the (possibly just updated) coordinator
            c_plus, _, _ = bundle.coordinator.head.sample(s_ca_next, agent_rng)
            c_for_next = c_plus if bundle.mode == MODE_SCMARL else None

            for i, agent in enumerate(bundle.locals):
                s_la_next = bundle.local_state(
                    i, ys_next[i], w_next.et0, kc_next, w_next.precip, c_for_next
                )
                agent.pool.add(
                    Transition(
                        joint.local_states[i], joint.a_la[i], r_locals[i] / reward_scale,
                        s_la_next, float(joint.local_log_probs[i]),
                        float(joint.local_values[i]), done=False,
                    )
                )
                if agent.pool.full:
                    st = update(agent, ppo_rng)
                    st.episode = episode
                    all_stats.append(st)

            ep_scores["coordinator"] += r_coord
            for i in range(bundle.n_zones):
                ep_scores[f"local_{i}"] += r_locals[i]
            ys = ys_next
            w_noisy, kc_noisy = w_next, kc_next

        for name, val in ep_scores.items():
            scores[name].append(val)

    return RunResult(bundle=bundle, scores=scores, stats=all_stats)


def evaluate_alignment(
    bundle: AgentBundle,
    zone_configs: list[ZoneConfig],
    grid: ColumnGrid,
    n_evals: int,
    rng: np.random.Generator,
    weather: WeatherModel | None = None,
) -> tuple[int, int, float]:
    """Fraction of random field states on which every local agent's greedy
    prescription conforms to the coordinator's greedy decision (amounts
    above u_align on yes-days, at or below it on no-days)."""
    weather = weather or WeatherModel()
    successes = 0
    for _ in range(n_evals):
        ys = []
        for cfg in zone_configs:
            state = sample_initial_state(cfg, grid, rng)
            ys.append(observe(state, cfg.phi))
        et0 = rng.uniform(weather.et0_min_mm, weather.et0_max_mm) / 1000.0
        rain = 0.0 if rng.random() > 0.25 else rng.exponential(weather.rain_mean_depth_mm) / 1000.0
        kc = rng.uniform(0.0, 1.2)
        joint = bundle.act_joint(ys, et0, kc, rain, greedy=True)
        amounts = joint.a_clipped
        if joint.c == 1:
            ok = bool(np.all(amounts > bundle.u_align))
        else:
            ok = bool(np.all(amounts <= bundle.u_align))
        successes += int(ok)
    failures = n_evals - successes
    return successes, failures, successes / n_evals


def rollout_horizon(
    bundle: AgentBundle,
    est_states: list[ColumnState],
    forecasts: list[tuple[WeatherDay, float]],
    np_days: int,
    zone_configs: list[ZoneConfig],
    grid: ColumnGrid,
    zr: float = 0.5,
    ev_fraction: float = 0.1,
) -> tuple[np.ndarray, np.ndarray]:
    """Greedy open-loop evaluation against the noise-free calibrated zone
    models from the estimated states; returns the decision sequence (Np,)
    and the per-zone prescribed amounts (M, Np)."""
    if np_days < 1:
        raise ValueError("need a horizon of at least one day")
    if len(forecasts) < np_days:
        raise ValueError(f"forecasts cover {len(forecasts)} < {np_days} days")
    states = [s.copy() for s in est_states]
    c_seq = np.zeros(np_days, dtype=int)
    a_seq = np.zeros((bundle.n_zones, np_days))
    for k in range(np_days):
        weather, kc = forecasts[k]
        ys = [observe(s, cfg.phi) for s, cfg in zip(states, zone_configs)]
        joint = bundle.act_joint(ys, weather.et0, kc, weather.precip, greedy=True)
        c_seq[k] = joint.c
        a_seq[:, k] = joint.a_clipped
        new_states = []
        for i, cfg in enumerate(zone_configs):
            forcing = DailyForcing(
                u_irr=float(joint.u_applied[i]),
                precip=weather.precip,
                et0=weather.et0,
                kc=kc,
                zr=zr,
                ev_fraction=ev_fraction,
            )
            new_states.append(step_day(states[i], forcing, cfg.phi, grid, cfg.feddes()))
        states = new_states
    return c_seq, a_seq


def write_curves_csv(path, scores_per_run: list[dict[str, list[float]]]) -> None:
    """Learning-curve CSV: per episode and agent, the mean score across runs."""
    agents = list(scores_per_run[0].keys())
    n_episodes = len(scores_per_run[0][agents[0]])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("episode,agent_id,mean_score\n")
        for ep in range(n_episodes):
            for name in agents:
                vals = [run[name][ep] for run in scores_per_run]
                fh.write(f"{ep},{name},{np.mean(vals):.6g}\n")
