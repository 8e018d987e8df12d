"""Counter-based random streams for reproducible parallel Monte Carlo.

Every draw is addressed by (master_seed, stream_id): the pair keys a Philox
generator, so substreams are independent and can be created in any order, on
any worker, with identical results.  Replicate k of a coupled pair uses the
stream pair (2k, 2k+1).
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox

from .grids import FrequencyGrid

_SEED_BOUND = 2 ** 64


def substream(master_seed: int, stream_id: int) -> Generator:
    """Independent generator keyed by (master_seed, stream_id)."""
    if not 0 <= master_seed < _SEED_BOUND:
        raise ValueError(f"master seed must be a 64-bit unsigned integer, got {master_seed}")
    if not 0 <= stream_id < _SEED_BOUND:
        raise ValueError(f"stream id must be a 64-bit unsigned integer, got {stream_id}")
    key = np.array([master_seed, stream_id], dtype=np.uint64)
    return Generator(Philox(key=key))


def hermitian_noise(grid: FrequencyGrid, master_seed: int, stream_id: int) -> np.ndarray:
    """Complex standard Gaussian array over the grid with zeta(-xi) = conj(zeta(xi)).

    One real pair (a, b) is drawn per half-grid node, zeta = (a + ib)/sqrt(2)
    (so E|zeta|^2 = 1), and the mirror node receives the conjugate.  Spectral
    sums against such noise are real up to roundoff.
    """
    rng = substream(master_seed, stream_id)
    half = grid.half_indices
    draws = rng.standard_normal((half.size, 2))
    values = (draws[:, 0] + 1j * draws[:, 1]) / np.sqrt(2.0)
    zeta = np.empty(grid.size, dtype=complex)
    zeta[half] = values
    zeta[grid.mirror[half]] = np.conj(values)
    return zeta
