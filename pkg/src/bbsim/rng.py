"""Reproducible random streams.

Every run owns one PCG64 stream. Streams are derived from a 64-bit master
seed and an integer key through :class:`numpy.random.SeedSequence`
(``entropy=master_seed, spawn_key=key``), so the stream of a sweep cell
depends only on ``(master_seed, N, E_index, replicate)`` and never on
worker scheduling.

All draws are defined on the raw 64-bit output so that the compiled and the
pure-Python kernels consume the stream identically:

* uniform: ``(raw >> 11) * 2**-53`` in [0, 1)
* coin:    ``raw >> 63`` (1 means "up")
* sign:    ``+1`` if ``raw >> 63 == 0`` else ``-1``
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

_TWO_M53 = 1.0 / 9007199254740992.0
SEED_MASK = (1 << 64) - 1


class RngStream:
    def __init__(self, master_seed: int, key: Sequence[int] = ()):
        self.master_seed = int(master_seed) & SEED_MASK
        self.key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=self.key)
        self.bit_generator = np.random.PCG64(ss)

    @classmethod
    def for_cell(cls, master_seed: int, N: int, e_index: int, replicate: int) -> "RngStream":
        """Stream of one sweep cell; a single run uses ``(N, 0, 0)``."""
        return cls(master_seed, (N, e_index, replicate))

    def raw(self) -> int:
        return int(self.bit_generator.random_raw())

    def uniform(self) -> float:
        return (self.raw() >> 11) * _TWO_M53

    def coin(self) -> bool:
        return (self.raw() >> 63) == 1

    def sign(self) -> int:
        return -1 if self.raw() >> 63 else 1

    # position in the stream, for checkpoints
    def get_state(self) -> dict:
        st = self.bit_generator.state
        return {
            "state": str(st["state"]["state"]),
            "inc": str(st["state"]["inc"]),
            "has_uint32": int(st["has_uint32"]),
            "uinteger": int(st["uinteger"]),
        }

    def set_state(self, d: dict) -> None:
        self.bit_generator.state = {
            "bit_generator": "PCG64",
            "state": {"state": int(d["state"]), "inc": int(d["inc"])},
            "has_uint32": int(d["has_uint32"]),
            "uinteger": int(d["uinteger"]),
        }
