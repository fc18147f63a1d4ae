"""Deterministic seed derivation.

Every random decision in the package flows through a stream keyed by
(master seed, context labels), so that runs are reproducible bit-for-bit
and independent of execution order or parallelism.
"""

import hashlib


def derive_seed(*parts) -> int:
    """Derive a stable 64-bit seed from a master seed plus context labels.

    Parts are stringified and hashed, so e.g. derive_seed(7, "local", 3, 12)
    names the RNG stream of client 12 in round 3 of a run seeded with 7.
    """
    tag = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(tag).digest()[:8], "little")
