"""Seeded random streams.

All randomness goes through numpy's Philox-4x64 counter-based generator
keyed directly by an integer, so a stream is a pure function of its key
and independent of platform word size or global RNG state.
"""

import hashlib

import numpy as np


def philox(key):
    key = int(key)
    if key < 0 or key >= 2**128:
        raise ValueError(f"Philox key must be in [0, 2**128), got {key}")
    return np.random.Generator(np.random.Philox(key=key))


def derive_key(*parts):
    """Stable 64-bit key from arbitrary printable parts (sha256 based)."""
    text = "/".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "little")


def box_muller(key, n):
    """``n`` standard normal draws from the Philox stream keyed by ``key``.

    Uniform pairs (u1, u2) are consumed in order; each pair yields
    r*cos(2*pi*u2) followed by r*sin(2*pi*u2), r = sqrt(-2 ln u1).
    """
    m = (n + 1) // 2
    u = philox(key).random(2 * m).reshape(m, 2)
    u1 = 1.0 - u[:, 0]  # (0, 1], keeps log finite
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u[:, 1]
    z = np.empty((m, 2))
    z[:, 0] = r * np.cos(theta)
    z[:, 1] = r * np.sin(theta)
    return z.reshape(-1)[:n]
