"""Binary checkpoint format (little-endian).

    magic      4 bytes  b"SLQN"
    version    u32
    obs layout u32
    n_layers   u32      number of linear layers
    flags      u32      bit 0: hidden layers carry batch norm
    dims       u32 * (n_layers + 1)
    per layer  W (fan_in x fan_out, row-major), b, then for hidden layers with
               batch norm: scale, shift, running mean, running variance; all f32
    crc32      u32      over every preceding byte
"""

from __future__ import annotations

import os
import struct
import zlib

import numpy as np

from secselect.agent import OBS_LAYOUT_VERSION
from secselect.dqn.network import QNetwork
from secselect.errors import CheckpointError

MAGIC = b"SLQN"
FORMAT_VERSION = 1
FLAG_BATCHNORM = 1

_F32 = np.dtype("<f4")


def _layer_keys(net: QNetwork, l: int) -> list[str]:
    keys = [f"W{l}", f"b{l}"]
    if net.batchnorm and l < net.n_layers - 1:
        keys += [f"gamma{l}", f"beta{l}", f"mean{l}", f"var{l}"]
    return keys


def checkpoint_bytes(net: QNetwork, obs_layout: int = OBS_LAYOUT_VERSION) -> bytes:
    flags = FLAG_BATCHNORM if net.batchnorm else 0
    parts = [MAGIC, struct.pack("<IIII", FORMAT_VERSION, obs_layout, net.n_layers, flags)]
    parts.append(struct.pack(f"<{len(net.dims)}I", *net.dims))
    state = net.state()
    for l in range(net.n_layers):
        for key in _layer_keys(net, l):
            parts.append(np.ascontiguousarray(state[key], dtype=_F32).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_checkpoint(net: QNetwork, path: str | os.PathLike, obs_layout: int = OBS_LAYOUT_VERSION) -> None:
    data = checkpoint_bytes(net, obs_layout)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_checkpoint_bytes(data: bytes, expect_obs_layout: int = OBS_LAYOUT_VERSION, dtype=np.float32) -> QNetwork:
    if len(data) < 24:
        raise CheckpointError(f"file truncated: {len(data)} bytes is shorter than the header")
    if data[:4] != MAGIC:
        raise CheckpointError(f"magic mismatch: expected {MAGIC!r}, found {data[:4]!r}")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    version, layout, n_layers, flags = struct.unpack_from("<IIII", data, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"format version mismatch: expected {FORMAT_VERSION}, found {version}")
    if layout != expect_obs_layout:
        raise CheckpointError(f"obs layout version mismatch: expected {expect_obs_layout}, found {layout}")
    if flags & ~FLAG_BATCHNORM:
        raise CheckpointError(f"flags field has unknown bits set: {flags:#x}")
    if not 1 <= n_layers <= 64:
        raise CheckpointError(f"layer count {n_layers} out of range")
    off = 20
    if len(data) < off + 4 * (n_layers + 1) + 4:
        raise CheckpointError("file truncated inside the dims table")
    dims = list(struct.unpack_from(f"<{n_layers + 1}I", data, off))
    off += 4 * (n_layers + 1)
    net = QNetwork(dims, dropout=0.0, batchnorm=bool(flags & FLAG_BATCHNORM), seed=0, dtype=dtype)
    expected = off + 4 * sum(v.size for v in net.state().values()) + 4
    if len(data) != expected:
        raise CheckpointError(f"file size {len(data)} does not match {expected} bytes implied by dims {dims}")
    if zlib.crc32(body) != crc:
        raise CheckpointError("crc32 mismatch: file is corrupt")
    state = {}
    for l in range(n_layers):
        for key in _layer_keys(net, l):
            shape = (net.params.get(key) if key in net.params else net.buffers[key]).shape
            n = int(np.prod(shape))
            state[key] = np.frombuffer(data, dtype=_F32, count=n, offset=off).reshape(shape)
            off += 4 * n
    net.load_state(state)
    return net


def load_checkpoint(path: str | os.PathLike, expect_obs_layout: int = OBS_LAYOUT_VERSION, dtype=np.float32) -> QNetwork:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"{path}: cannot read ({exc})") from None
    return load_checkpoint_bytes(data, expect_obs_layout, dtype)
