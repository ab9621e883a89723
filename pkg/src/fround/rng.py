"""Seeded random streams for reproducible runs.

Every draw is addressed by ``(purpose, key_id, counter)``: the key comes from
``SeedSequence(seed, spawn_key=(purpose, key_id))`` and the counter selects a
Philox block, so a stream never depends on how many other streams were
consumed before it.  Element ``i`` of ``uniforms(..., n)`` is the same for
every ``n > i``, which keeps the values seen by vehicle ``i`` unchanged when
vehicles are added to a scenario.
"""

from __future__ import annotations

import enum

import numpy as np
from scipy.special import ndtri


class Purpose(enum.IntEnum):
    SPAWN_POSITION = 1
    SPAWN_LANE = 2
    SPEED_NOISE = 3
    ROGUE_CHOICE = 4
    LOSS = 5


class Streams:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gens: dict[tuple[int, int], tuple[np.random.Philox, np.random.Generator, dict]] = {}

    def _entry(self, purpose: Purpose, key_id: int):
        k = (int(purpose), int(key_id))
        entry = self._gens.get(k)
        if entry is None:
            key = np.random.SeedSequence(self.seed, spawn_key=k).generate_state(2, np.uint64)
            bg = np.random.Philox(key=key)
            entry = self._gens[k] = (bg, np.random.Generator(bg), bg.state)
        return entry

    def generator(self, purpose: Purpose, key_id: int = 0, counter: int = 0) -> np.random.Generator:
        """Generator positioned at block ``counter`` of the ``(purpose, key_id)`` stream.

        The returned object is shared per stream and repositioned on the next
        call; draw from it before asking for another block.
        """
        bg, gen, state = self._entry(purpose, key_id)
        # counter lives in the top word; draws advance the low word
        state["state"]["counter"][:] = (0, 0, 0, counter)
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        bg.state = state
        return gen

    def uniforms(self, purpose: Purpose, n: int, key_id: int = 0, counter: int = 0) -> np.ndarray:
        return self.generator(purpose, key_id, counter).random(n)

    def normals(self, purpose: Purpose, n: int, key_id: int = 0, counter: int = 0) -> np.ndarray:
        # inverse CDF keeps one uniform per normal, preserving prefix stability
        u = self.uniforms(purpose, n, key_id, counter)
        return ndtri(np.maximum(u, np.finfo(float).tiny))
