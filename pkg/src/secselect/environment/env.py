"""Episodic service-selection simulator.

Actions are integers: 0 accepts the provider met at the current step,
1..K accept the provider held in contact slot k-1, K+1 declines.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from secselect.environment.scenario import Scenario
from secselect.errors import ConfigurationError, ContractViolation
from secselect.rewards import (
    ActionKind,
    AddToFreeSlot,
    Replace,
    RewardBreakdown,
    contact_replacement,
    decay,
    reward_accept,
    reward_decline,
    reward_operations,
)
from secselect.sla import UserRequirements

_LOSS_EPS = 1e-12


class Status(str, enum.Enum):
    RUNNING = "running"
    SUCCESS = "success"
    SECURITY_VIOLATION = "security_violation"
    TIME_EXPIRED = "time_expired"
    PATH_EXHAUSTED = "path_exhausted"


TERMINAL_STATUSES = (Status.SUCCESS, Status.SECURITY_VIOLATION, Status.TIME_EXPIRED, Status.PATH_EXHAUSTED)


@dataclass(frozen=True)
class Task:
    """Required-operation importances and deadlines over the operation universe."""

    tau_u: np.ndarray
    deadlines: np.ndarray

    @property
    def n_required(self) -> int:
        return int(np.count_nonzero(self.tau_u))


@dataclass(frozen=True)
class TaskSampler:
    """Draws a random task: a subset of operations with importance and deadlines."""

    n_required: tuple[int, int] = (1, 3)
    importance: tuple[float, float] = (0.1, 1.0)
    deadline_s: tuple[float, float] = (600.0, 1200.0)

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any] | None) -> "TaskSampler":
        cfg = dict(cfg or {})
        return cls(
            tuple(cfg.get("n_required", cls.n_required)),
            tuple(cfg.get("importance", cls.importance)),
            tuple(cfg.get("deadline_s", cls.deadline_s)),
        )

    def to_config(self) -> dict:
        return {"n_required": list(self.n_required), "importance": list(self.importance), "deadline_s": list(self.deadline_s)}

    def sample(self, m: int, rng: np.random.Generator) -> Task:
        lo, hi = self.n_required
        if not 1 <= lo <= hi <= m:
            raise ConfigurationError(f"n_required range {self.n_required} invalid for {m} operations")
        k = int(rng.integers(lo, hi + 1))
        ops = rng.choice(m, size=k, replace=False)
        tau = np.zeros(m)
        deadlines = np.zeros(m)
        ilo, ihi = self.importance
        # importance lives in (0, 1]; draw from (lo, hi] by flipping a [0, 1) uniform
        tau[ops] = ihi - rng.random(k) * (ihi - ilo)
        dlo, dhi = self.deadline_s
        deadlines[ops] = rng.uniform(dlo, dhi, size=k)
        return Task(tau, deadlines)


@dataclass(frozen=True)
class AcceptRecord:
    step: int
    provider: int
    service: int
    kind: ActionKind
    loss: float
    n_ops: int
    n_unneeded: int


@dataclass
class EpisodeState:
    path: int
    step_index: int
    t: float
    tau_u: np.ndarray
    initial_tau_u: np.ndarray
    deadlines: np.ndarray
    loss_budget: float
    contacts: list[int | None]
    cumulative_loss: float = 0.0
    status: Status = Status.RUNNING
    accepted: list[AcceptRecord] = field(default_factory=list)
    rewards: list[RewardBreakdown] = field(default_factory=list)

    @property
    def done(self) -> bool:
        return self.status != Status.RUNNING

    def clone(self) -> "EpisodeState":
        return EpisodeState(
            self.path, self.step_index, self.t, self.tau_u.copy(), self.initial_tau_u.copy(),
            self.deadlines.copy(), self.loss_budget, list(self.contacts), self.cumulative_loss,
            self.status, list(self.accepted), list(self.rewards),
        )


class ServiceSelectionEnv:
    """Binds a scenario to a user's security requirements and a contact-list size.

    Normalized losses of every service against the user's requirement for its
    service type are computed once; episodes only index into them.
    """

    def __init__(
        self,
        scenario: Scenario,
        requirements: UserRequirements,
        contact_size: int = 0,
        task_sampler: TaskSampler | None = None,
    ) -> None:
        if contact_size < 0:
            raise ConfigurationError(f"contact list size must be >= 0, got {contact_size}")
        self.scenario = scenario
        self.requirements = requirements
        self.K = int(contact_size)
        self.task_sampler = task_sampler or TaskSampler()
        self.m = scenario.m
        lat = scenario.lattice
        rho = lat.rho_max
        losses = []
        for svc in scenario.services:
            stype = svc.sla.service_type
            if stype not in requirements.required_class:
                raise ConfigurationError(f"requirements give no security class for service type {stype!r}")
            user_lat = requirements.user_lattice(stype, lat)
            losses.append(user_lat.normalized_security_loss(svc.security_class, requirements.required_class[stype], rho))
        self.service_loss = np.array(losses)
        self.service_ops = scenario.onehot_matrix()
        self.provider_service = np.array([p.service for p in scenario.providers], dtype=np.int64)
        if requirements.tau_u:
            self.fixed_task = Task(*requirements.vectors(scenario.universe.operations))
        else:
            self.fixed_task = None

    @property
    def n_actions(self) -> int:
        return self.K + 2

    @property
    def decline_action(self) -> int:
        return self.K + 1

    def provider_loss(self, provider: int) -> float:
        return float(self.service_loss[self.provider_service[provider]])

    def provider_ops(self, provider: int) -> np.ndarray:
        return self.service_ops[self.provider_service[provider]]

    def current_provider(self, state: EpisodeState) -> int | None:
        return self.scenario.paths[state.path].steps[state.step_index]

    def path_length(self, state: EpisodeState) -> int:
        return len(self.scenario.paths[state.path])

    def delta_t(self, state: EpisodeState) -> float:
        return self.scenario.paths[state.path].delta_t

    # -- episode lifecycle -------------------------------------------------------

    def sample_task(self, rng: np.random.Generator) -> Task:
        return self.task_sampler.sample(self.m, rng)

    def reset(
        self,
        rng: np.random.Generator | int | None = None,
        task: Task | None = None,
        path: int | None = None,
        training: bool = True,
    ) -> EpisodeState:
        """Start an episode on a uniformly drawn path.

        The task comes from ``task`` if given, else from the fixed requirements
        when not training, else from the task sampler.
        """
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        if path is None:
            path = int(rng.integers(len(self.scenario.paths)))
        if task is None:
            if self.fixed_task is not None and not training:
                task = self.fixed_task
            else:
                task = self.sample_task(rng)
        tau = np.asarray(task.tau_u, dtype=np.float64)
        deadlines = np.asarray(task.deadlines, dtype=np.float64)
        if tau.shape != (self.m,) or deadlines.shape != (self.m,):
            raise ConfigurationError(f"task vectors must have length {self.m}")
        if not np.any(tau > 0):
            raise ConfigurationError("task requires no operation")
        if np.any((tau > 0) & ~(deadlines > 0)):
            raise ConfigurationError("every required operation needs a positive deadline")
        return EpisodeState(
            path=path,
            step_index=0,
            t=0.0,
            tau_u=tau.copy(),
            initial_tau_u=tau.copy(),
            deadlines=deadlines.copy(),
            loss_budget=self.requirements.loss_budget,
            contacts=[None] * self.K,
        )

    def available_losses(self, state: EpisodeState) -> list[float]:
        out = []
        cur = self.current_provider(state)
        if cur is not None:
            out.append(self.provider_loss(cur))
        out.extend(self.provider_loss(c) for c in state.contacts if c is not None)
        return out

    def operation_reward(self, state: EpisodeState, provider: int) -> float:
        return reward_operations(state.tau_u, self.provider_ops(provider), state.t, state.deadlines)

    def step(self, state: EpisodeState, action: int) -> tuple[EpisodeState, float, bool, dict]:
        """Apply ``action`` in place and return (state, reward, done, info)."""
        if state.status != Status.RUNNING:
            raise ContractViolation(f"episode already finished ({state.status.value})")
        action = int(action)
        current = self.current_provider(state)
        accepted_provider = None
        if action == 0:
            if current is None:
                raise ContractViolation("accept-current chosen but no provider is met at this step")
            accepted_provider, kind = current, ActionKind.ACCEPT_CURRENT
        elif 1 <= action <= self.K:
            slot = action - 1
            if state.contacts[slot] is None:
                raise ContractViolation(f"accept-contact chosen on empty slot {slot}")
            accepted_provider, kind = state.contacts[slot], ActionKind.ACCEPT_CONTACT
            state.contacts[slot] = None
        elif action == self.decline_action:
            kind = ActionKind.DECLINE
        else:
            raise ContractViolation(f"action {action} outside [0, {self.decline_action}]")

        if accepted_provider is not None:
            ops = self.provider_ops(accepted_provider)
            loss = self.provider_loss(accepted_provider)
            breakdown = reward_accept(state.tau_u, ops, state.t, state.deadlines, loss, kind)
            needed = (ops > 0) & (state.tau_u > 0)
            state.accepted.append(
                AcceptRecord(
                    state.step_index, accepted_provider, int(self.provider_service[accepted_provider]), kind, loss,
                    int(np.count_nonzero(ops)), int(np.count_nonzero(ops) - np.count_nonzero(needed)),
                )
            )
            state.tau_u[ops > 0] = 0.0
            state.cumulative_loss += loss
        else:
            breakdown = reward_decline(self.available_losses(state))
            if current is not None and current not in state.contacts:
                self._offer_contact(state, current)

        state.rewards.append(breakdown)
        state.step_index += 1
        state.t = state.step_index * self.delta_t(state)
        state.status = self._terminal_status(state)
        info = {"breakdown": breakdown, "accepted_provider": accepted_provider, "status": state.status}
        return state, breakdown.r_total, state.done, info

    def _offer_contact(self, state: EpisodeState, provider: int) -> None:
        if self.K == 0:
            return
        cand = self.operation_reward(state, provider)
        held = [None if c is None else self.operation_reward(state, c) for c in state.contacts]
        decision = contact_replacement(cand, held)
        if isinstance(decision, (AddToFreeSlot, Replace)):
            state.contacts[decision.slot] = provider

    def _terminal_status(self, state: EpisodeState) -> Status:
        if not np.any(state.tau_u > 0):
            return Status.SUCCESS
        if state.cumulative_loss > state.loss_budget + _LOSS_EPS:
            return Status.SECURITY_VIOLATION
        if np.any((state.tau_u > 0) & (state.t >= state.deadlines)):
            return Status.TIME_EXPIRED
        if state.step_index >= self.path_length(state):
            return Status.PATH_EXHAUSTED
        return Status.RUNNING

    def decay_vector(self, state: EpisodeState) -> np.ndarray:
        return decay(state.t, state.deadlines, state.tau_u > 0)
