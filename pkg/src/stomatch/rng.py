"""Counter-based random numbers: Philox4x32-10, vectorized over numpy arrays.

Every uniform is a pure function of (seed, trial, stream, draw index), so a
trial's randomness does not depend on how trials are batched or scheduled.
The counter words are (draw block, stream, trial low, trial high) and the
key is the 64-bit seed split into two 32-bit words.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
ROUNDS = 10

# Named streams so the arrival process and the algorithm never share draws.
STREAM_ARRIVALS = 0
STREAM_ALGORITHM = 1
STREAM_AUX = 2


def _split_seed(seed: int) -> tuple[int, int]:
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed & 0xFFFFFFFF, seed >> 32


def philox4x32(counter: np.ndarray, key) -> np.ndarray:
    """Apply Philox4x32-10 to a (..., 4) uint32 counter array."""
    ctr = np.asarray(counter, dtype=np.uint32)
    c0, c1, c2, c3 = (ctr[..., n].astype(np.uint64) for n in range(4))
    k0, k1 = np.uint32(key[0]), np.uint32(key[1])
    with np.errstate(over="ignore"):
        for r in range(ROUNDS):
            if r:
                k0 = np.uint32(k0 + _W0)
                k1 = np.uint32(k1 + _W1)
            p0 = _M0 * c0
            p1 = _M1 * c2
            hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
            hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
            c0 = hi1 ^ c1 ^ np.uint64(k0)
            c1 = lo1
            c2 = hi0 ^ c3 ^ np.uint64(k1)
            c3 = lo0
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def _to_unit(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # 53 random bits -> [0, 1); never returns 1.0.
    return ((a >> 5).astype(np.float64) * 67108864.0 + (b >> 6).astype(np.float64)) / 9007199254740992.0


def uniforms(seed: int, trials, stream: int, draws) -> np.ndarray:
    """Uniforms in [0, 1) for every (trial, draw) pair, broadcast together.

    ``trials`` and ``draws`` are integer arrays (or scalars) that broadcast
    against each other; each Philox block yields two doubles, so draw d uses
    block d // 2, half d % 2.
    """
    trials = np.asarray(trials, dtype=np.uint64)
    draws = np.asarray(draws, dtype=np.uint64)
    trials, draws = np.broadcast_arrays(trials, draws)
    ctr = np.empty(trials.shape + (4,), dtype=np.uint32)
    ctr[..., 0] = (draws >> np.uint64(1)).astype(np.uint32)
    ctr[..., 1] = np.uint32(stream)
    ctr[..., 2] = (trials & _MASK32).astype(np.uint32)
    ctr[..., 3] = (trials >> _SHIFT32).astype(np.uint32)
    out = philox4x32(ctr, _split_seed(seed))
    odd = (draws & np.uint64(1)).astype(bool)
    first = _to_unit(out[..., 0], out[..., 1])
    second = _to_unit(out[..., 2], out[..., 3])
    return np.where(odd, second, first)


def uniform_block(seed: int, trials, stream: int, start: int, count: int) -> np.ndarray:
    """(len(trials), count) uniforms for draws start .. start + count - 1."""
    trials = np.asarray(trials, dtype=np.uint64).reshape(-1, 1)
    if count <= 0:
        return np.empty((trials.shape[0], 0))
    # Generate each Philox block once and interleave its two halves.
    first_block, last_block = start // 2, (start + count - 1) // 2
    blocks = np.arange(first_block, last_block + 1, dtype=np.uint64).reshape(1, -1)
    trials_b, blocks_b = np.broadcast_arrays(trials, blocks)
    ctr = np.empty(trials_b.shape + (4,), dtype=np.uint32)
    ctr[..., 0] = blocks_b.astype(np.uint32)
    ctr[..., 1] = np.uint32(stream)
    ctr[..., 2] = (trials_b & _MASK32).astype(np.uint32)
    ctr[..., 3] = (trials_b >> _SHIFT32).astype(np.uint32)
    out = philox4x32(ctr, _split_seed(seed))
    pair = np.stack([_to_unit(out[..., 0], out[..., 1]), _to_unit(out[..., 2], out[..., 3])], axis=-1)
    flat = pair.reshape(trials.shape[0], -1)
    offset = start - 2 * first_block
    return flat[:, offset:offset + count]
