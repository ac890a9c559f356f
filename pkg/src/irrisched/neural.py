"""Minimal dense-network substrate for the scheduling agents.

Provides exactly what the policy optimizer needs: a tanh multi-layer
perceptron with reverse-mode gradients (parameters and inputs), diagonal
Gaussian and two-way categorical policy heads, a min-max input normalizer,
an Adam optimizer, and a portable text checkpoint format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBounds, ShapeMismatch

CHECKPOINT_VERSION = 1

LOG_2PI = float(np.log(2.0 * np.pi))


def orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    """Orthogonal weight initialization scaled by ``gain``."""
    a = rng.normal(size=shape)
    u, _, vt = np.linalg.svd(a, full_matrices=False)
    q = u if u.shape == shape else vt
    return gain * q[: shape[0], : shape[1]]


class Mlp:
    """Fully connected tanh network: input -> hidden... -> affine output.

    Weights W have shape (fan_in, fan_out); forward accepts a single
    vector or a batch (B, fan_in). ``backward`` accumulates parameter
    gradients into ``grads`` and returns the gradient w.r.t. the input.
    """

    def __init__(
        self,
        layer_sizes: tuple[int, ...],
        rng: np.random.Generator,
        out_gain: float = 1.0,
        hidden_gain: float = np.sqrt(2.0),
    ):
        if len(layer_sizes) < 2:
            raise ShapeMismatch("need at least input and output sizes")
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        self.weights = []
        self.biases = []
        for li, (fan_in, fan_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
            gain = out_gain if li == len(layer_sizes) - 2 else hidden_gain
            self.weights.append(orthogonal(rng, (fan_in, fan_out), gain))
            self.biases.append(np.zeros(fan_out))
        self.zero_grads()

    @property
    def n_transforms(self) -> int:
        return len(self.weights)

    def zero_grads(self):
        self.grads = {
            **{f"W{i}": np.zeros_like(w) for i, w in enumerate(self.weights)},
            **{f"b{i}": np.zeros_like(b) for i, b in enumerate(self.biases)},
        }

    def parameters(self) -> dict[str, np.ndarray]:
        return {
            **{f"W{i}": w for i, w in enumerate(self.weights)},
            **{f"b{i}": b for i, b in enumerate(self.biases)},
        }

    def forward(self, x: np.ndarray, cache: list | None = None) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.layer_sizes[0]:
            raise ShapeMismatch(
                f"input width {x.shape[1]} != expected {self.layer_sizes[0]}"
            )
        h = x
        if cache is not None:
            cache.append(h)
        for i in range(self.n_transforms):
            z = h @ self.weights[i] + self.biases[i]
            h = np.tanh(z) if i < self.n_transforms - 1 else z
            if cache is not None:
                cache.append(h)
        return h

    def backward(self, dout: np.ndarray, cache: list) -> np.ndarray:
        """Backpropagate dL/d(output); returns dL/d(input)."""
        d = np.atleast_2d(dout)
        for i in range(self.n_transforms - 1, -1, -1):
            h_out = cache[i + 1]
            h_in = cache[i]
            if i < self.n_transforms - 1:
                d = d * (1.0 - h_out * h_out)  # tanh'
            self.grads[f"W{i}"] += h_in.T @ d
            self.grads[f"b{i}"] += d.sum(axis=0)
            d = d @ self.weights[i].T
        return d


@dataclass
class MinMaxNormalizer:
    """Per-dimension affine map onto [-2, 2] with clipping."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if self.lo.shape != self.hi.shape:
            raise DegenerateBounds("bound arrays must share a shape")
        if np.any(self.hi <= self.lo):
            raise DegenerateBounds("every dimension needs min < max")

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def normalize(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        x = -2.0 + 4.0 * (z - self.lo) / (self.hi - self.lo)
        return np.clip(x, -2.0, 2.0)


class GaussianHead:
    """Diagonal Gaussian policy: state-dependent mean, learned state-free
    log standard deviation."""

    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        rng: np.random.Generator,
        hidden: tuple[int, int] = (64, 64),
        init_std: float | np.ndarray = 0.2,
        mean_bias: float = 0.0,
    ):
        self.mlp = Mlp((state_dim, *hidden, action_dim), rng, out_gain=0.01)
        self.mlp.biases[-1][:] = mean_bias
        self.log_std = np.full(action_dim, np.log(init_std), dtype=float)
        self.grad_log_std = np.zeros(action_dim)
        self.action_dim = action_dim

    def parameters(self) -> dict[str, np.ndarray]:
        return {**self.mlp.parameters(), "log_std": self.log_std}

    def grads(self) -> dict[str, np.ndarray]:
        return {**self.mlp.grads, "log_std": self.grad_log_std}

    def zero_grads(self):
        self.mlp.zero_grads()
        self.grad_log_std = np.zeros(self.action_dim)

    def mean(self, x: np.ndarray) -> np.ndarray:
        return self.mlp.forward(x)

    def sample(self, x: np.ndarray, rng: np.random.Generator):
        """Draw action = mean + std*eps; returns (action, log_prob, entropy)."""
        mu = self.mlp.forward(x)
        std = np.exp(self.log_std)
        eps = rng.standard_normal(mu.shape)
        action = mu + std * eps
        lp = self.log_prob_of(mu, action)
        return action, lp, self.entropy()

    def log_prob_of(self, mu: np.ndarray, action: np.ndarray) -> np.ndarray:
        std = np.exp(self.log_std)
        z = (action - mu) / std
        return -0.5 * np.sum(z * z, axis=-1) - np.sum(self.log_std) - 0.5 * self.action_dim * LOG_2PI

    def entropy(self) -> float:
        return float(np.sum(self.log_std) + 0.5 * self.action_dim * (1.0 + LOG_2PI))

    def forward_batch(self, x: np.ndarray, actions: np.ndarray):
        """Batch log-probs with a cache for ``backward_batch``."""
        cache = []
        mu = self.mlp.forward(x, cache)
        lp = self.log_prob_of(mu, actions)
        return lp, (cache, mu, np.atleast_2d(actions))

    def backward_batch(self, dlp: np.ndarray, dentropy: float, ctx) -> None:
        """Accumulate gradients of sum(dlp * log_prob) + dentropy * entropy."""
        cache, mu, actions = ctx
        std = np.exp(self.log_std)
        z = (actions - mu) / std
        dmu = dlp[:, None] * z / std
        self.mlp.backward(dmu, cache)
        self.grad_log_std += np.sum(dlp[:, None] * (z * z - 1.0), axis=0)
        self.grad_log_std += dentropy * np.ones(self.action_dim)


class CategoricalHead:
    """Two-way categorical policy over softmax logits."""

    def __init__(
        self,
        state_dim: int,
        n_actions: int,
        rng: np.random.Generator,
        hidden: tuple[int, int] = (64, 64),
    ):
        self.mlp = Mlp((state_dim, *hidden, n_actions), rng, out_gain=0.01)
        self.n_actions = n_actions

    def parameters(self) -> dict[str, np.ndarray]:
        return self.mlp.parameters()

    def grads(self) -> dict[str, np.ndarray]:
        return self.mlp.grads

    def zero_grads(self):
        self.mlp.zero_grads()

    @staticmethod
    def softmax(logits: np.ndarray) -> np.ndarray:
        shifted = logits - np.max(logits, axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / np.sum(e, axis=-1, keepdims=True)

    def probs(self, x: np.ndarray) -> np.ndarray:
        return self.softmax(self.mlp.forward(x))

    def sample(self, x: np.ndarray, rng: np.random.Generator):
        """Returns (action, log_prob, entropy) for one state."""
        p = self.probs(x)[0]
        a = int(rng.choice(self.n_actions, p=p))
        lp = float(np.log(p[a]))
        ent = float(-np.sum(p * np.log(p)))
        return a, lp, ent

    def greedy(self, x: np.ndarray) -> int:
        return int(np.argmax(self.probs(x)[0]))

    def forward_batch(self, x: np.ndarray, actions: np.ndarray):
        cache = []
        logits = self.mlp.forward(x, cache)
        p = self.softmax(logits)
        acts = np.asarray(actions, dtype=int)
        lp = np.log(p[np.arange(len(acts)), acts])
        ent = -np.sum(p * np.log(p), axis=-1)
        return lp, ent, (cache, p, acts)

    def backward_batch(self, dlp: np.ndarray, dent: np.ndarray, ctx) -> None:
        """Accumulate gradients of sum(dlp*log_prob) + sum(dent*entropy)."""
        cache, p, acts = ctx
        onehot = np.zeros_like(p)
        onehot[np.arange(len(acts)), acts] = 1.0
        dlogits = dlp[:, None] * (onehot - p)
        logp = np.log(p)
        ent = -np.sum(p * logp, axis=-1, keepdims=True)
        dlogits += dent[:, None] * (-p * (logp + ent))
        self.mlp.backward(dlogits, cache)


class Adam:
    """Adam optimizer over named parameter dictionaries."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, p in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            mhat = self.m[name] / (1 - self.beta1**self.t)
            vhat = self.v[name] / (1 - self.beta2**self.t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write named arrays to the portable text checkpoint format."""
    doc = {
        "version": CHECKPOINT_VERSION,
        "meta": meta or {},
        "arrays": {
            name: {"shape": list(a.shape), "data": np.asarray(a, dtype=float).ravel().tolist()}
            for name, a in arrays.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ShapeMismatch(f"unsupported checkpoint version {doc.get('version')}")
    arrays = {
        name: np.asarray(spec["data"], dtype=float).reshape(spec["shape"])
        for name, spec in doc["arrays"].items()
    }
    return arrays, doc.get("meta", {})


def assign_parameters(params: dict[str, np.ndarray], values: dict[str, np.ndarray]) -> None:
    """Copy checkpoint arrays into live parameter storage, shape-checked."""
    for name, p in params.items():
        if name not in values:
            raise ShapeMismatch(f"checkpoint missing array {name!r}")
        v = values[name]
        if v.shape != p.shape:
            raise ShapeMismatch(f"array {name!r} shape {v.shape} != expected {p.shape}")
        p[...] = v
