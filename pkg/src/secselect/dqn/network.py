"""Numpy multilayer perceptron for action values, with manual backprop.

Hidden block: linear -> batch norm -> dropout -> ReLU.  The output layer is
linear.  Weights are stored as (fan_in, fan_out) so a batch propagates as
``x @ W + b``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from secselect.errors import StructuralError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

TRAIN = "train"
EVAL = "eval"


@dataclass
class _Cache:
    inputs: list[np.ndarray]
    zhat: list[np.ndarray | None]
    inv_std: list[np.ndarray | None]
    drop_masks: list[np.ndarray | None]
    pre_relu: list[np.ndarray]
    mode: str


class QNetwork:
    def __init__(
        self,
        dims: Sequence[int],
        dropout: float = 0.2,
        batchnorm: bool = True,
        seed: int | None = 0,
        dtype=np.float32,
    ) -> None:
        dims = [int(d) for d in dims]
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise StructuralError(f"invalid layer dims {dims}")
        if not 0.0 <= dropout < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {dropout}")
        self.dims = dims
        self.dropout = float(dropout)
        self.batchnorm = bool(batchnorm)
        self.dtype = np.dtype(dtype)
        self.rng = np.random.default_rng(seed)
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        for l, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            bound = np.sqrt(6.0 / fan_in)
            self.params[f"W{l}"] = self.rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(self.dtype)
            self.params[f"b{l}"] = np.zeros(fan_out, dtype=self.dtype)
            if self.batchnorm and l < self.n_layers - 1:
                self.params[f"gamma{l}"] = np.ones(fan_out, dtype=self.dtype)
                self.params[f"beta{l}"] = np.zeros(fan_out, dtype=self.dtype)
                self.buffers[f"mean{l}"] = np.zeros(fan_out, dtype=self.dtype)
                self.buffers[f"var{l}"] = np.ones(fan_out, dtype=self.dtype)

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    @property
    def in_dim(self) -> int:
        return self.dims[0]

    @property
    def out_dim(self) -> int:
        return self.dims[-1]

    def forward(self, x: np.ndarray, mode: str = EVAL, keep_cache: bool = False):
        """Q-values for one observation (1-D) or a batch (2-D).

        In train mode batch norm uses batch statistics (and updates the running
        ones) and dropout is active; eval mode is deterministic.
        """
        x = np.asarray(x, dtype=self.dtype)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise StructuralError(f"expected input width {self.in_dim}, got shape {x.shape}")
        if mode == TRAIN and self.batchnorm and x.shape[0] < 2:
            raise StructuralError("train-mode batch norm needs a batch of at least 2")
        cache = _Cache([], [], [], [], [], mode)
        a = x
        for l in range(self.n_layers):
            cache.inputs.append(a)
            z = a @ self.params[f"W{l}"] + self.params[f"b{l}"]
            if l == self.n_layers - 1:
                a = z
                break
            zhat = inv_std = None
            if self.batchnorm:
                if mode == TRAIN:
                    mu = z.mean(axis=0)
                    var = z.var(axis=0)
                    n = z.shape[0]
                    self.buffers[f"mean{l}"] = ((1 - BN_MOMENTUM) * self.buffers[f"mean{l}"] + BN_MOMENTUM * mu).astype(self.dtype)
                    self.buffers[f"var{l}"] = (
                        (1 - BN_MOMENTUM) * self.buffers[f"var{l}"] + BN_MOMENTUM * var * n / (n - 1)
                    ).astype(self.dtype)
                else:
                    mu, var = self.buffers[f"mean{l}"], self.buffers[f"var{l}"]
                inv_std = (1.0 / np.sqrt(var + BN_EPS)).astype(self.dtype)
                zhat = (z - mu) * inv_std
                z = self.params[f"gamma{l}"] * zhat + self.params[f"beta{l}"]
            mask = None
            if mode == TRAIN and self.dropout > 0:
                mask = ((self.rng.random(z.shape) >= self.dropout) / (1.0 - self.dropout)).astype(self.dtype)
                z = z * mask
            cache.zhat.append(zhat)
            cache.inv_std.append(inv_std)
            cache.drop_masks.append(mask)
            cache.pre_relu.append(z)
            a = np.maximum(z, 0)
        out = a[0] if single else a
        return (out, cache) if keep_cache else out

    def backward(self, dout: np.ndarray, cache: _Cache) -> dict[str, np.ndarray]:
        """Gradients of every parameter given dLoss/dQ for the cached batch."""
        dout = np.asarray(dout, dtype=self.dtype)
        if dout.ndim == 1:
            dout = dout[None, :]
        grads: dict[str, np.ndarray] = {}
        L = self.n_layers - 1
        grads[f"W{L}"] = cache.inputs[L].T @ dout
        grads[f"b{L}"] = dout.sum(axis=0)
        da = dout @ self.params[f"W{L}"].T
        for l in range(L - 1, -1, -1):
            dz = da * (cache.pre_relu[l] > 0)
            if cache.drop_masks[l] is not None:
                dz = dz * cache.drop_masks[l]
            if self.batchnorm:
                zhat, inv_std = cache.zhat[l], cache.inv_std[l]
                grads[f"gamma{l}"] = (dz * zhat).sum(axis=0)
                grads[f"beta{l}"] = dz.sum(axis=0)
                dzhat = dz * self.params[f"gamma{l}"]
                if cache.mode == TRAIN:
                    n = dzhat.shape[0]
                    dz = inv_std / n * (n * dzhat - dzhat.sum(axis=0) - zhat * (dzhat * zhat).sum(axis=0))
                else:
                    dz = dzhat * inv_std
            grads[f"W{l}"] = cache.inputs[l].T @ dz
            grads[f"b{l}"] = dz.sum(axis=0)
            da = dz @ self.params[f"W{l}"].T
        return grads

    # -- state --------------------------------------------------------------------

    def state(self) -> dict[str, np.ndarray]:
        out = {k: v.copy() for k, v in self.params.items()}
        out.update({k: v.copy() for k, v in self.buffers.items()})
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for k in self.params:
            if state[k].shape != self.params[k].shape:
                raise StructuralError(f"parameter {k}: shape {state[k].shape} != {self.params[k].shape}")
            self.params[k] = np.array(state[k], dtype=self.dtype, copy=True)
        for k in self.buffers:
            self.buffers[k] = np.array(state[k], dtype=self.dtype, copy=True)

    def clone(self) -> "QNetwork":
        other = QNetwork(self.dims, self.dropout, self.batchnorm, None, self.dtype)
        other.load_state(self.state())
        other.rng = copy.deepcopy(self.rng)
        return other

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in (*self.params.values(), *self.buffers.values()))


class Adam:
    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8) -> None:
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(params[k].dtype)
