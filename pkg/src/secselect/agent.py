"""Observation encoding, action masking and the fixed baseline policies.

Observation layout (all entries in [0, 1])::

    [t / horizon]
    [tau_u importances]                       m
    [decay g(t) per operation]                m   (0 when not required)
    [present, ops one-hot (m), loss]          current offer
    [present, ops one-hot (m), loss] * K      contact slots
    [cumulative loss / budget]
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from secselect.environment.env import EpisodeState, ServiceSelectionEnv
from secselect.errors import ContractViolation

OBS_LAYOUT_VERSION = 1

ACCEPT_CURRENT = 0


def observation_length(m: int, K: int) -> int:
    return 2 + 2 * m + (K + 1) * (m + 2)


def encode_observation(state: EpisodeState, env: ServiceSelectionEnv) -> np.ndarray:
    m, K = env.m, env.K
    obs = np.zeros(observation_length(m, K))
    horizon = env.path_length(state) * env.delta_t(state)
    obs[0] = min(state.t / horizon, 1.0)
    obs[1:1 + m] = state.tau_u
    obs[1 + m:1 + 2 * m] = env.decay_vector(state)
    pos = 1 + 2 * m
    slots = [env.current_provider(state)] + list(state.contacts)
    for provider in slots:
        if provider is not None:
            obs[pos] = 1.0
            obs[pos + 1:pos + 1 + m] = env.provider_ops(provider)
            obs[pos + 1 + m] = env.provider_loss(provider)
        pos += m + 2
    obs[pos] = min(state.cumulative_loss / state.loss_budget, 1.0)
    return obs


def action_mask(state: EpisodeState, env: ServiceSelectionEnv) -> np.ndarray:
    mask = np.zeros(env.n_actions, dtype=bool)
    mask[ACCEPT_CURRENT] = env.current_provider(state) is not None
    for k, c in enumerate(state.contacts):
        mask[1 + k] = c is not None
    mask[env.decline_action] = True
    return mask


class Policy(Protocol):
    def act(self, obs: np.ndarray, mask: np.ndarray) -> int: ...


class AlwaysAccept:
    """Accept whatever is on offer: the current provider, else the lowest occupied slot."""

    def act(self, obs: np.ndarray, mask: np.ndarray) -> int:
        return always_accept_policy(obs, mask)


def always_accept_policy(obs: np.ndarray, mask: np.ndarray) -> int:
    valid = np.flatnonzero(mask)
    if valid.size == 0:
        raise ContractViolation("no valid action")
    return int(valid[0])


class RandomAction:
    def __init__(self, rng: np.random.Generator | int | None = None) -> None:
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    def act(self, obs: np.ndarray, mask: np.ndarray) -> int:
        return random_policy(obs, mask, self.rng)


def random_policy(obs: np.ndarray, mask: np.ndarray, rng: np.random.Generator) -> int:
    valid = np.flatnonzero(mask)
    if valid.size == 0:
        raise ContractViolation("no valid action")
    return int(valid[rng.integers(valid.size)])
