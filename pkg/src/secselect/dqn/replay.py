"""Fixed-capacity ring buffer of transitions with uniform sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from secselect.errors import ContractViolation


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool
    next_mask: np.ndarray


@dataclass(frozen=True)
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray
    next_masks: np.ndarray

    def __len__(self) -> int:
        return len(self.actions)


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, n_actions: int) -> None:
        if capacity < 1:
            raise ContractViolation(f"replay capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float64)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float64)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=np.float64)
        self.dones = np.zeros(capacity, dtype=bool)
        self.next_masks = np.zeros((capacity, n_actions), dtype=bool)
        self._pos = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, tr: Transition) -> None:
        if not 0.0 <= tr.reward <= 1.0:
            raise ContractViolation(f"reward {tr.reward} outside [0, 1]")
        i = self._pos
        self.obs[i] = tr.obs
        self.actions[i] = tr.action
        self.rewards[i] = tr.reward
        self.next_obs[i] = tr.next_obs
        self.dones[i] = tr.done
        # a terminal next state has no valid continuation
        self.next_masks[i] = False if tr.done else tr.next_mask
        self._pos = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        if self._size == 0:
            raise ContractViolation("cannot sample from an empty replay buffer")
        if batch_size > self._size:
            raise ContractViolation(f"batch of {batch_size} requested from {self._size} transitions")
        idx = rng.choice(self._size, size=batch_size, replace=False)
        return Batch(
            self.obs[idx], self.actions[idx], self.rewards[idx],
            self.next_obs[idx], self.dones[idx], self.next_masks[idx],
        )
