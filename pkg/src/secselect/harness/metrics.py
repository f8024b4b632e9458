"""Per-episode metrics (COP, TLO, UNNO, STEPS) and their aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from secselect.environment.env import EpisodeState, ServiceSelectionEnv, Status
from secselect.errors import ContractViolation


def compute_cop(initial_tau_u, final_tau_u, weighted: bool = False) -> float:
    """Fraction of initially required operations completed by the end of the episode."""
    init = np.asarray(initial_tau_u, dtype=np.float64)
    final = np.asarray(final_tau_u, dtype=np.float64)
    if init.shape != final.shape:
        raise ContractViolation(f"tau_u shapes differ: {init.shape} vs {final.shape}")
    required = init > 0
    if not required.any():
        raise ContractViolation("no operation was required")
    done = required & (final == 0)
    if weighted:
        return math.fsum(init[done]) / math.fsum(init[required])
    return int(done.sum()) / int(required.sum())


def compute_tlo(accepted_losses: Iterable[float]) -> float:
    return math.fsum(accepted_losses)


def compute_unno(accepted_ops: Sequence, required_at_accept: Sequence) -> float | None:
    """Share of the operations carried by accepted services that were not required
    when accepted.  None when nothing was accepted."""
    if len(accepted_ops) != len(required_at_accept):
        raise ContractViolation("one requirement vector per accepted service is needed")
    total = unneeded = 0
    for ops, tau in zip(accepted_ops, required_at_accept):
        ops = np.asarray(ops) > 0
        total += int(ops.sum())
        unneeded += int((ops & ~(np.asarray(tau) > 0)).sum())
    if total == 0:
        return None
    return unneeded / total


def compute_steps(state: EpisodeState, env: ServiceSelectionEnv, mode: str = "traversed") -> float:
    path = env.scenario.paths[state.path]
    if mode == "traversed":
        return state.step_index / len(path)
    amp_total = path.amp_steps
    if mode == "visited":
        return sum(s is not None for s in path.steps[: state.step_index]) / amp_total
    if mode == "accepted":
        return min(len(state.accepted) / amp_total, 1.0)
    raise ContractViolation(f"unknown STEPS mode {mode!r}")


@dataclass(frozen=True)
class EpisodeRecord:
    status: Status
    cop: float
    tlo: float
    unno: float | None
    steps: float
    n_accepts: int
    episode_return: float
    path: int
    length: int


def episode_record(
    state: EpisodeState,
    env: ServiceSelectionEnv,
    cop_mode: str = "count",
    steps_mode: str = "traversed",
    unno_mode: str = "acceptance",
) -> EpisodeRecord:
    if not state.done:
        raise ContractViolation("episode is still running")
    ops = [env.service_ops[a.service] for a in state.accepted]
    if unno_mode == "acceptance":
        # every accept record already counts ops not required at that moment
        total = sum(a.n_ops for a in state.accepted)
        unno = sum(a.n_unneeded for a in state.accepted) / total if total else None
    else:
        unno = compute_unno(ops, [state.initial_tau_u] * len(ops))
    return EpisodeRecord(
        status=state.status,
        cop=compute_cop(state.initial_tau_u, state.tau_u, weighted=cop_mode == "importance"),
        tlo=compute_tlo(a.loss for a in state.accepted),
        unno=unno,
        steps=compute_steps(state, env, steps_mode),
        n_accepts=len(state.accepted),
        episode_return=math.fsum(r.r_total for r in state.rewards),
        path=state.path,
        length=env.path_length(state),
    )


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    mean = math.fsum(values) / len(values)
    var = math.fsum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(var)


def summarize(records: Sequence[EpisodeRecord]) -> dict:
    """Means and population standard deviations; UNNO over episodes where it is defined."""
    out: dict = {"episodes": len(records)}
    for name in ("cop", "tlo", "steps"):
        out[f"{name}_mean"], out[f"{name}_std"] = _mean_std([getattr(r, name) for r in records])
    unno = [r.unno for r in records if r.unno is not None]
    out["unno_mean"], out["unno_std"] = _mean_std(unno)
    out["unno_n"] = len(unno)
    for st in Status:
        if st is not Status.RUNNING:
            out[f"n_{st.value}"] = sum(r.status is st for r in records)
    out["within_budget"] = sum(r.status is not Status.SECURITY_VIOLATION for r in records)
    return out


def bootstrap_mean_ci(values: Sequence[float], n_boot: int = 10_000, level: float = 0.95,
                      seed: int = 0) -> tuple[float, float, float]:
    """Percentile bootstrap interval for the mean: (mean, low, high)."""
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise ContractViolation("bootstrap of an empty sample")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, x.size, size=(n_boot, x.size))
    means = x[idx].mean(axis=1)
    alpha = (1.0 - level) / 2
    return float(x.mean()), float(np.quantile(means, alpha)), float(np.quantile(means, 1 - alpha))


def paired_differences(a: Sequence[EpisodeRecord], b: Sequence[EpisodeRecord], metric: str) -> list[float]:
    """Per-episode ``metric(b) - metric(a)`` over matched episode lists, skipping
    pairs where either value is undefined (UNNO without accepts)."""
    if len(a) != len(b):
        raise ContractViolation(f"matched episode lists differ in length: {len(a)} vs {len(b)}")
    out = []
    for ra, rb in zip(a, b):
        va, vb = getattr(ra, metric), getattr(rb, metric)
        if va is not None and vb is not None:
            out.append(vb - va)
    return out
