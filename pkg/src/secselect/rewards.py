"""Deadline decay, accept/decline rewards and the contact-list replacement rule."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from secselect.errors import ContractViolation
from secselect.lattice import SecurityClass, WeightedSecurityLattice


class ActionKind(str, enum.Enum):
    ACCEPT_CURRENT = "accept_current"
    ACCEPT_CONTACT = "accept_contact"
    DECLINE = "decline"


@dataclass(frozen=True)
class RewardBreakdown:
    r_o: float
    r_sl: float
    r_total: float
    action_kind: ActionKind


def decay(t: float, deadlines: np.ndarray, required_mask: np.ndarray | None = None) -> np.ndarray:
    """Sigmoid urgency per operation: 1/(1+exp(t - deadline/2)) before the deadline, 0 after.

    Entries outside ``required_mask`` are zeroed.  Evaluated in a form that
    cannot overflow for large ``t``.
    """
    deadlines = np.asarray(deadlines, dtype=np.float64)
    x = t - deadlines / 2.0
    out = np.empty_like(deadlines)
    pos = x > 0
    ex = np.exp(-np.abs(x))
    out[pos] = ex[pos] / (1.0 + ex[pos])
    out[~pos] = 1.0 / (1.0 + ex[~pos])
    out[t >= deadlines] = 0.0
    if required_mask is not None:
        out[~np.asarray(required_mask, dtype=bool)] = 0.0
    return out


def reward_operations(tau_u: np.ndarray, tau_sigma: np.ndarray, t: float, deadlines: np.ndarray) -> float:
    tau_u = np.asarray(tau_u, dtype=np.float64)
    mass = tau_u.sum()
    if not mass > 0:
        raise ContractViolation("no operation is still required; the episode should already have succeeded")
    g = decay(t, deadlines, tau_u > 0)
    return float(np.dot(tau_u * g, np.asarray(tau_sigma, dtype=np.float64)) / mass)


def reward_security(
    service_class: SecurityClass,
    required_class: SecurityClass,
    lattice: WeightedSecurityLattice,
    rho_max: float | None = None,
) -> float:
    return 1.0 - lattice.normalized_security_loss(service_class, required_class, rho_max)


def reward_accept_from_parts(r_o: float, loss: float, kind: ActionKind = ActionKind.ACCEPT_CURRENT) -> RewardBreakdown:
    r_sl = 1.0 - loss
    return RewardBreakdown(r_o, r_sl, (r_o + r_sl) / 2.0, kind)


def reward_accept(
    tau_u: np.ndarray,
    tau_sigma: np.ndarray,
    t: float,
    deadlines: np.ndarray,
    loss: float,
    kind: ActionKind = ActionKind.ACCEPT_CURRENT,
) -> RewardBreakdown:
    """Accept reward: mean of the operation reward and one minus the normalized loss."""
    return reward_accept_from_parts(reward_operations(tau_u, tau_sigma, t, deadlines), loss, kind)


def reward_decline(available_losses: Sequence[float]) -> RewardBreakdown:
    """Smallest normalized loss among the services on offer; 0 with nothing on offer."""
    value = float(min(available_losses)) if len(available_losses) else 0.0
    return RewardBreakdown(0.0, 0.0, value, ActionKind.DECLINE)


@dataclass(frozen=True)
class AddToFreeSlot:
    slot: int


@dataclass(frozen=True)
class Replace:
    slot: int


@dataclass(frozen=True)
class Reject:
    pass


ReplacementDecision = AddToFreeSlot | Replace | Reject


def contact_replacement(candidate_r_o: float, contact_r_o: Sequence[float | None]) -> ReplacementDecision:
    """Decide where a newly met provider goes in the contact list.

    ``contact_r_o`` has one entry per slot: the slot's current operation reward,
    or None if the slot is free.  A free slot is always taken (lowest index).
    Otherwise the weakest contact is evicted only if the candidate is strictly
    better; ties on the minimum go to the lowest slot.
    """
    if not contact_r_o:
        return Reject()
    for k, v in enumerate(contact_r_o):
        if v is None:
            return AddToFreeSlot(k)
    worst = int(np.argmin(np.asarray(contact_r_o, dtype=np.float64)))
    if candidate_r_o > contact_r_o[worst]:
        return Replace(worst)
    return Reject()
