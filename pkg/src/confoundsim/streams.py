"""Counter-based random streams for replayable, chunkable simulation.

Every simulated interaction consumes exactly :data:`UNIFORMS_PER_ROW`
uniform doubles from a Philox counter-based generator keyed by
``(seed, day, substream)``.  Because the generator can be advanced to any
draw index in O(1), a day can be simulated in chunks of any size, in any
order, serially or in parallel, and the resulting log is byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["UNIFORMS_PER_ROW", "DayStream"]

# Fixed per-row budget: x1, x2, action cell, click, sale, plus three spare
# columns.  Unused draws are still consumed so row i always starts at draw
# offset i * UNIFORMS_PER_ROW.  The stride is 8 because Philox advances in
# blocks of 4 sixty-four-bit outputs; two whole blocks per row keep every
# row start block-aligned.
UNIFORMS_PER_ROW = 8
_DRAWS_PER_BLOCK = 4


@dataclass(frozen=True)
class DayStream:
    """Replayable uniform stream for one simulated day.

    Parameters
    ----------
    seed : int
        Run-level seed, nonnegative.
    day : int
        Day index; distinct days get independent streams.
    substream : int
        Extra tag separating streams that share a (seed, day) pair, e.g.
        concurrent A/B arms.
    """

    seed: int
    day: int
    substream: int = 0

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def _key(self) -> np.ndarray:
        ss = np.random.SeedSequence([int(self.seed), int(self.day), int(self.substream)])
        return ss.generate_state(2, np.uint64)

    def uniforms(self, start: int, count: int) -> np.ndarray:
        """Uniform draws for rows ``start .. start + count - 1``.

        Returns a ``(count, UNIFORMS_PER_ROW)`` float64 array that does not
        depend on how the row range is partitioned into calls.
        """
        if start < 0 or count < 0:
            raise ValueError("start and count must be nonnegative")
        bg = np.random.Philox(key=self._key())
        bg.advance(start * UNIFORMS_PER_ROW // _DRAWS_PER_BLOCK)
        return np.random.Generator(bg).random((count, UNIFORMS_PER_ROW))
