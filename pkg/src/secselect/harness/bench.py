"""Wall-clock latency of single-observation eval-mode forward passes."""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from secselect.dqn.checkpoint import load_checkpoint
from secselect.dqn.network import EVAL, QNetwork
from secselect.errors import ConfigurationError


def bench_inference(
    checkpoint: str | Path | QNetwork,
    repetitions: int = 1000,
    warmup: int = 50,
    obs: np.ndarray | None = None,
    seed: int = 0,
) -> dict:
    """Mean / median / 99th percentile latency in milliseconds."""
    if not isinstance(repetitions, int) or repetitions < 1:
        raise ConfigurationError(f"repetitions must be a positive integer, got {repetitions!r}")
    net = checkpoint if isinstance(checkpoint, QNetwork) else load_checkpoint(checkpoint)
    if obs is None:
        obs = np.random.default_rng(seed).random(net.in_dim)
    obs = np.asarray(obs, dtype=net.dtype)
    for _ in range(max(warmup, 0)):
        net.forward(obs, EVAL)
    times = np.empty(repetitions)
    clock = time.perf_counter
    for i in range(repetitions):
        t0 = clock()
        net.forward(obs, EVAL)
        times[i] = clock() - t0
    ms = times * 1e3
    return {
        "repetitions": repetitions,
        "mean_ms": float(ms.mean()),
        "p50_ms": float(np.percentile(ms, 50)),
        "p99_ms": float(np.percentile(ms, 99)),
    }
