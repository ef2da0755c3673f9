"""Platform-stable derivation of 64-bit seeds from a base seed and labels."""
from __future__ import annotations

import hashlib
from typing import Iterable, Tuple

import numpy as np


def derive_seed(base: int, labels: Iterable[Tuple[str, object]] = ()) -> int:
    """BLAKE2b of the base seed and the ordered ``(name, value)`` labels."""
    h = hashlib.blake2b(digest_size=8, person=b"mmhybrid-seed")
    h.update(int(base).to_bytes(8, "little", signed=False))
    for name, value in labels:
        for part in (str(name), repr(value)):
            raw = part.encode()
            h.update(len(raw).to_bytes(4, "little"))
            h.update(raw)
    return int.from_bytes(h.digest(), "little")


def stream(base: int, *labels: Tuple[str, object]) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(base, labels)))
