"""Clipped-surrogate proximal policy optimization with generalized
advantage estimation, one trajectory pool per agent."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import EmptyPool, LengthMismatch
from .neural import Adam, CategoricalHead, GaussianHead, Mlp


@dataclass(frozen=True)
class PpoConfig:
    lr: float = 1e-5
    horizon: int = 30
    minibatch: int = 64
    epochs: int = 20
    gamma: float = 0.99
    gae_lambda: float = 0.97
    clip: float = 0.25
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    # rewards are divided by this before storage and restored in reporting
    reward_scale: float = 1e4

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must lie in [0, 1]")
        if self.clip <= 0.0:
            raise ValueError("clip must be positive")
        if self.horizon < 1 or self.minibatch < 1 or self.epochs < 1:
            raise ValueError("horizon, minibatch and epochs must be positive")


@dataclass
class Transition:
    state: np.ndarray
    action: Union[int, np.ndarray]
    reward: float
    next_state: np.ndarray
    log_prob: float
    value_estimate: float
    done: bool = False


class TrajectoryPool:
    """Ordered transition store for one agent, cleared on every update."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.transitions: list[Transition] = []

    def __len__(self):
        return len(self.transitions)

    @property
    def full(self) -> bool:
        return len(self.transitions) >= self.capacity

    def add(self, tr: Transition) -> None:
        if self.full:
            raise LengthMismatch("pool already holds a full horizon")
        self.transitions.append(tr)

    def clear(self) -> None:
        self.transitions = []


def gae(
    rewards: np.ndarray,
    values: np.ndarray,
    bootstrap_value: float,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimation over one trajectory.

    delta_t = r_t + gamma*V_{t+1} - V_t with V_T = bootstrap_value;
    A_t = sum_l (gamma*lam)^l delta_{t+l}; returns = A + V.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if rewards.shape != values.shape:
        raise LengthMismatch(
            f"rewards ({rewards.shape}) and values ({values.shape}) differ"
        )
    t_len = rewards.shape[0]
    next_values = np.append(values[1:], bootstrap_value)
    deltas = rewards + gamma * next_values - values
    advantages = np.empty(t_len)
    acc = 0.0
    for t in range(t_len - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        advantages[t] = acc
    return advantages, advantages + values


def clipped_policy_loss(
    log_prob_new: np.ndarray,
    log_prob_old: np.ndarray,
    advantage: np.ndarray,
    clip: float,
) -> tuple[float, np.ndarray]:
    """Clipped surrogate loss and its gradient w.r.t. the new log-probs.

    L = -mean(min(rho*A, clip(rho, 1-eps, 1+eps)*A)), rho = exp(lp - lp_old).
    """
    lp_new = np.asarray(log_prob_new, dtype=float)
    lp_old = np.asarray(log_prob_old, dtype=float)
    adv = np.asarray(advantage, dtype=float)
    rho = np.exp(lp_new - lp_old)
    unclipped = rho * adv
    clipped = np.clip(rho, 1.0 - clip, 1.0 + clip) * adv
    loss = -float(np.mean(np.minimum(unclipped, clipped)))
    # gradient flows only where the unclipped branch attains the min
    active = unclipped <= clipped
    dlp = np.where(active, -rho * adv, 0.0) / lp_new.shape[0]
    return loss, dlp


class AcAgent:
    """Actor-critic pair with its own optimizers and trajectory pool."""

    def __init__(
        self,
        name: str,
        head: Union[GaussianHead, CategoricalHead],
        state_dim: int,
        config: PpoConfig,
        rng: np.random.Generator,
        hidden: tuple[int, int] = (64, 64),
    ):
        self.name = name
        self.head = head
        self.critic = Mlp((state_dim, *hidden, 1), rng, out_gain=1.0)
        self.critic_opt = Adam(config.lr)
        self.actor_opt = Adam(config.lr)
        self.pool = TrajectoryPool(config.horizon)
        self.config = config

    def value(self, x: np.ndarray) -> float:
        return float(self.critic.forward(x)[0, 0])


@dataclass
class UpdateStats:
    agent_id: str
    mean_reward: float
    policy_loss: float
    value_loss: float
    approx_kl: float
    entropy: float
    episode: int = -1

    CSV_HEADER = "episode,agent_id,mean_reward,policy_loss,value_loss,approx_kl,entropy"

    def csv_row(self) -> str:
        return (
            f"{self.episode},{self.agent_id},{self.mean_reward:.6g},"
            f"{self.policy_loss:.6g},{self.value_loss:.6g},"
            f"{self.approx_kl:.6g},{self.entropy:.6g}"
        )


def update(agent: AcAgent, rng: np.random.Generator, config: PpoConfig | None = None) -> UpdateStats:
    """Run the PPO update on the agent's pool and clear it."""
    cfg = config or agent.config
    pool = agent.pool
    if len(pool) == 0:
        raise EmptyPool(f"agent {agent.name}: update requested on an empty pool")

    trs = pool.transitions
    states = np.stack([np.asarray(t.state, dtype=float) for t in trs])
    rewards = np.array([t.reward for t in trs])
    values = np.array([t.value_estimate for t in trs])
    lp_old = np.array([t.log_prob for t in trs])
    discrete = isinstance(agent.head, CategoricalHead)
    if discrete:
        actions = np.array([int(t.action) for t in trs])
    else:
        actions = np.stack([np.asarray(t.action, dtype=float).reshape(-1) for t in trs])

    if trs[-1].done:
        bootstrap = 0.0
    else:
        bootstrap = agent.value(np.asarray(trs[-1].next_state, dtype=float))
    advantages, returns = gae(rewards, values, bootstrap, cfg.gamma, cfg.gae_lambda)
    adv_norm = (advantages - advantages.mean()) / (advantages.std() + 1e-8)

    n = len(trs)
    policy_losses, value_losses, kls, entropies = [], [], [], []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            idx = order[start : start + cfg.minibatch]
            b = idx.shape[0]
            xb = states[idx]

            # actor
            agent.head.zero_grads()
            if discrete:
                lp_new, ent, ctx = agent.head.forward_batch(xb, actions[idx])
                loss, dlp = clipped_policy_loss(lp_new, lp_old[idx], adv_norm[idx], cfg.clip)
                dent = np.full(b, -cfg.entropy_coef / b)
                agent.head.backward_batch(dlp, dent, ctx)
                ent_mean = float(np.mean(ent))
            else:
                lp_new, ctx = agent.head.forward_batch(xb, actions[idx])
                loss, dlp = clipped_policy_loss(lp_new, lp_old[idx], adv_norm[idx], cfg.clip)
                agent.head.backward_batch(dlp, -cfg.entropy_coef, ctx)
                ent_mean = agent.head.entropy()
            agent.actor_opt.step(agent.head.parameters(), agent.head.grads())

            # critic
            agent.critic.zero_grads()
            cache = []
            v = agent.critic.forward(xb, cache)[:, 0]
            verr = v - returns[idx]
            vloss = cfg.value_coef * float(np.mean(verr * verr))
            agent.critic.backward((2.0 * cfg.value_coef * verr / b)[:, None], cache)
            agent.critic_opt.step(agent.critic.parameters(), agent.critic.grads)

            policy_losses.append(loss)
            value_losses.append(vloss)
            kls.append(float(np.mean(lp_old[idx] - lp_new)))
            entropies.append(ent_mean)

    stats = UpdateStats(
        agent_id=agent.name,
        mean_reward=float(np.mean(rewards)) * cfg.reward_scale,
        policy_loss=float(np.mean(policy_losses)),
        value_loss=float(np.mean(value_losses)),
        approx_kl=float(np.mean(kls)),
        entropy=float(np.mean(entropies)),
    )
    pool.clear()
    return stats
