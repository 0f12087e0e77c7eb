"""Stateless seed derivation so every pipeline stage gets an independent stream."""

import zlib

import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master, *parts):
    """Mix ``master`` with a sequence of string tags / integers into a 64-bit seed.

    Strings are hashed with CRC32 so tags like ``"synth"`` are stable across
    interpreter runs (``hash()`` is salted).
    """
    state = _splitmix64(int(master) & _MASK)
    for part in parts:
        if isinstance(part, str):
            value = zlib.crc32(part.encode("utf-8"))
        else:
            value = int(part) & _MASK
        state = _splitmix64(state ^ value)
    return state


def make_rng(master, *parts):
    return np.random.Generator(np.random.PCG64(derive_seed(master, *parts)))
