"""Deterministic sub-seed derivation.

One master seed drives every randomized stage. Sub-seeds are derived as
``sha256("<master>/<tag>")`` truncated to 64 bits, so adding a new stage
(a new tag) never shifts the seeds of existing stages.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, tag: str) -> int:
    """Derive the sub-seed for a purpose-tagged consumer of ``master``."""
    digest = hashlib.sha256(f"{master}/{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
