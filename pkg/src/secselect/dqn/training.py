"""DQN training primitives: TD targets, one Adam step, epsilon-greedy action choice."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Any, Mapping

import numpy as np

from secselect.dqn.network import EVAL, TRAIN, Adam, QNetwork
from secselect.dqn.replay import Batch, ReplayBuffer
from secselect.errors import ConfigurationError, ContractViolation

HIDDEN_DIMS = (128, 64)


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    lr: float = 1e-3
    batch_size: int = 64
    buffer_capacity: int = 50_000
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 10_000
    target_sync: int = 500
    dropout: float = 0.2
    disable_batchnorm: bool = False
    learning_starts: int = 64
    train_every: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not self.lr > 0:
            raise ConfigurationError(f"learning rate must be > 0, got {self.lr}")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ConfigurationError(f"need 0 <= eps_end <= eps_start <= 1, got {self.eps_end}, {self.eps_start}")
        for name in ("batch_size", "buffer_capacity", "eps_decay_steps", "target_sync", "train_every"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.batch_size > self.buffer_capacity:
            raise ConfigurationError("batch_size exceeds buffer_capacity")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.learning_starts < self.batch_size:
            raise ConfigurationError("learning_starts must be >= batch_size")

    @classmethod
    def from_dict(cls, cfg: Mapping[str, Any] | None) -> "TrainConfig":
        cfg = dict(cfg or {})
        known = {f.name for f in fields(cls)}
        unknown = set(cfg) - known
        if unknown:
            raise ConfigurationError(f"unknown train option(s): {sorted(unknown)}")
        if "batch_size" in cfg and "learning_starts" not in cfg:
            cfg["learning_starts"] = max(cls.learning_starts, int(cfg["batch_size"]))
        return cls(**cfg)

    def to_dict(self) -> dict:
        return asdict(self)

    def epsilon(self, step: int) -> float:
        """Linear decay from eps_start to eps_end over eps_decay_steps environment steps."""
        frac = max(step, 0) / self.eps_decay_steps
        if frac >= 1.0:
            return self.eps_end
        return self.eps_start + frac * (self.eps_end - self.eps_start)


def build_network(obs_dim: int, n_actions: int, config: TrainConfig, dtype=np.float32) -> QNetwork:
    return QNetwork(
        [obs_dim, *HIDDEN_DIMS, n_actions],
        dropout=config.dropout,
        batchnorm=not config.disable_batchnorm,
        seed=config.seed,
        dtype=dtype,
    )


def masked_argmax(q: np.ndarray, mask: np.ndarray) -> int:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ContractViolation("no valid action in mask")
    # first maximal valid index, invalid entries never considered
    valid = np.flatnonzero(mask)
    return int(valid[np.argmax(np.asarray(q)[valid])])


def td_targets(batch: Batch, target_net: QNetwork, gamma: float) -> np.ndarray:
    rewards = np.asarray(batch.rewards, dtype=np.float64)
    dones = np.asarray(batch.dones, dtype=bool)
    masks = np.asarray(batch.next_masks, dtype=bool)
    q_next = np.asarray(target_net.forward(batch.next_obs, EVAL), dtype=np.float64)
    live = ~dones & masks.any(axis=1)
    best = np.zeros(len(rewards))
    if live.any():
        best[live] = np.where(masks[live], q_next[live], -np.inf).max(axis=1)
    return np.where(live, rewards + gamma * best, rewards)


def fit_batch(net: QNetwork, opt: Adam, obs: np.ndarray, actions: np.ndarray, targets: np.ndarray,
              mode: str = TRAIN) -> float:
    """One Adam step on the mean squared error between Q(obs, action) and targets."""
    q, cache = net.forward(obs, mode, keep_cache=True)
    rows = np.arange(len(actions))
    err = q[rows, actions].astype(np.float64) - targets
    loss = float(np.mean(err**2))
    dq = np.zeros(q.shape, dtype=np.float64)
    dq[rows, actions] = 2.0 * err / len(actions)
    grads = net.backward(dq, cache)
    opt.step(net.params, grads)
    return loss


def train_step(
    net: QNetwork,
    target_net: QNetwork,
    buffer: ReplayBuffer,
    config: TrainConfig,
    opt: Adam,
    rng: np.random.Generator,
) -> float:
    """Sample a batch, take one gradient step and return the pre-step TD loss."""
    if len(buffer) < config.batch_size:
        raise ContractViolation(f"replay holds {len(buffer)} transitions, batch needs {config.batch_size}")
    batch = buffer.sample(config.batch_size, rng)
    targets = td_targets(batch, target_net, config.gamma)
    return fit_batch(net, opt, batch.obs, batch.actions, targets)


def select_action(net: QNetwork, obs: np.ndarray, mask: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    mask = np.asarray(mask, dtype=bool)
    valid = np.flatnonzero(mask)
    if valid.size == 0:
        raise ContractViolation("no valid action in mask")
    if rng.random() < eps:
        return int(valid[rng.integers(valid.size)])
    return masked_argmax(net.forward(obs, EVAL), mask)


def sync_target(net: QNetwork, target_net: QNetwork) -> QNetwork:
    target_net.load_state(net.state())
    return target_net
