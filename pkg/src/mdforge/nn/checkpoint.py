"""MDNN0001 checkpoint files.

Layout: 8-byte magic, u32 descriptor length, UTF-8 architecture descriptor
(one line per layer), then every parameter as little-endian f32 in layer
order. Conv/Dense store weights then biases; BatchNorm stores gamma, beta,
running_mean, running_var.
"""

import struct

import numpy as np

from .network import ModelSpec, Network

MAGIC = b"MDNN0001"
_ORDER = ("w", "b", "gamma", "beta", "running_mean", "running_var")


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, net):
    desc = net.spec.describe().encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(desc)))
        fh.write(desc)
        for p in net.params:
            for key in _ORDER:
                if key in p:
                    fh.write(np.ascontiguousarray(p[key], dtype="<f4").tobytes())


def load_checkpoint(path, expected_spec=None):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise CheckpointError(f"{path}: not an MDNN0001 checkpoint")
    (length,) = struct.unpack_from("<I", blob, 8)
    try:
        spec = ModelSpec.parse(blob[12 : 12 + length].decode("utf-8"))
    except (UnicodeDecodeError, ValueError, IndexError) as exc:
        raise CheckpointError(f"{path}: bad architecture descriptor: {exc}") from None
    if expected_spec is not None and spec != expected_spec:
        raise CheckpointError(f"{path}: architecture does not match the configured model")
    net = Network(spec, seed=0, dtype=np.float32)
    offset = 12 + length
    for p in net.params:
        for key in _ORDER:
            if key in p:
                count = p[key].size
                end = offset + 4 * count
                if end > len(blob):
                    raise CheckpointError(f"{path}: truncated parameter data")
                p[key] = np.frombuffer(blob, "<f4", count, offset).reshape(p[key].shape).astype(np.float32)
                offset = end
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return net
