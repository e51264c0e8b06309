"""Deterministic random-stream derivation.

All randomness in the package flows from a single 64-bit seed. Each
consumer derives its own independent stream by hashing its name together
with the seed, so adding or reordering consumers never perturbs the
draws of another.
"""

import hashlib

import numpy as np

__all__ = ["stream", "substream_seed"]


def substream_seed(seed, name):
    """Derive a child seed for ``name`` from a root ``seed``.

    The derivation is a SHA-256 hash of ``"<seed>:<name>"`` truncated to
    128 bits, which numpy's ``SeedSequence`` accepts as entropy.
    """
    digest = hashlib.sha256(f"{int(seed)}:{name}".encode()).digest()
    return int.from_bytes(digest[:16], "little")


def stream(seed, name):
    """Return a ``numpy.random.Generator`` for the named consumer."""
    return np.random.default_rng(np.random.SeedSequence(substream_seed(seed, name)))
