"""Stable sub-seed derivation.

Every component seeds its own rng stream from (master_seed, purpose-label)
via SHA-256, so changing one component's config never shifts another's
randomness and any stage can be reproduced in isolation.
"""
from __future__ import annotations

import hashlib


def derive_seed(master_seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{master_seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")
