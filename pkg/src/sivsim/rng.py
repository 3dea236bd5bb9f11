"""Counter-based random numbers (Philox4x32-10).

Every trajectory owns an independent stream addressed by ``(seed,
stream_id)``; the n-th draw of a stream is a pure function of ``(seed,
stream_id, n)``. Results are therefore identical for any scheduling of
trajectories across workers, and identical between the numba and numpy
execution paths.

The scalar helpers below are written so that :func:`numba.njit` can
compile them unchanged; :func:`uniforms` is the vectorized batch variant
used by the pure-numpy path.
"""

from __future__ import annotations

import numpy as np

__all__ = ["philox4x32_10", "uniform_pair", "uniforms", "PhiloxStream"]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def philox4x32_10(c0, c1, c2, c3, k0, k1):
    """One Philox4x32 block with 10 rounds; all arguments are uint64
    holding 32-bit values. Returns four 32-bit words as uint64."""
    for _ in range(10):
        p0 = _M0 * (c0 & _MASK32)
        p1 = _M1 * (c2 & _MASK32)
        n0 = ((p1 >> _SHIFT32) ^ c1 ^ k0) & _MASK32
        n1 = p1 & _MASK32
        n2 = ((p0 >> _SHIFT32) ^ c3 ^ k1) & _MASK32
        n3 = p0 & _MASK32
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def _make_uniform_pair(philox):
    # closure binding lets sivsim.kernels compile this body against a
    # jitted philox while the module-level version stays plain python
    def uniform_pair(seed, stream_id, block):
        """Two uniform doubles in [0, 1) from one Philox block.

        The counter encodes (block, stream_id); the key encodes the seed,
        so distinct seeds and distinct streams never share blocks.
        """
        seed = np.uint64(seed)
        stream_id = np.uint64(stream_id)
        block = np.uint64(block)
        x0, x1, x2, x3 = philox(
            block & _MASK32,
            (block >> _SHIFT32) & _MASK32,
            stream_id & _MASK32,
            (stream_id >> _SHIFT32) & _MASK32,
            seed & _MASK32,
            (seed >> _SHIFT32) & _MASK32,
        )
        u0 = np.float64(((x0 << _SHIFT32) | x1) >> np.uint64(11)) * _INV53
        u1 = np.float64(((x2 << _SHIFT32) | x3) >> np.uint64(11)) * _INV53
        return u0, u1

    return uniform_pair


uniform_pair = _make_uniform_pair(philox4x32_10)


def uniforms(seed: int, stream_id: int, start: int, n: int) -> np.ndarray:
    """Uniform doubles number ``start .. start+n-1`` of a stream, vectorized.

    Bit-identical to ``n`` successive scalar draws via :func:`uniform_pair`
    (draw ``i`` lives in block ``i // 2``, slot ``i % 2``).
    """
    if n <= 0:
        return np.zeros(0, dtype=np.float64)
    idx = np.arange(start, start + n, dtype=np.uint64)
    blocks = np.unique(idx >> np.uint64(1))
    c0 = blocks & _MASK32
    c1 = (blocks >> _SHIFT32) & _MASK32
    c2 = np.full_like(blocks, np.uint64(stream_id) & _MASK32)
    c3 = np.full_like(blocks, (np.uint64(stream_id) >> _SHIFT32) & _MASK32)
    k0 = np.uint64(seed) & _MASK32
    k1 = (np.uint64(seed) >> _SHIFT32) & _MASK32
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = ((p1 >> _SHIFT32) ^ c1 ^ k0) & _MASK32
        n1 = p1 & _MASK32
        n2 = ((p0 >> _SHIFT32) ^ c3 ^ k1) & _MASK32
        n3 = p0 & _MASK32
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    pair = np.empty((blocks.size, 2), dtype=np.float64)
    pair[:, 0] = (((c0 << _SHIFT32) | c1) >> np.uint64(11)).astype(np.float64) * _INV53
    pair[:, 1] = (((c2 << _SHIFT32) | c3) >> np.uint64(11)).astype(np.float64) * _INV53
    block_of = (idx >> np.uint64(1)) - blocks[0]
    slot_of = (idx & np.uint64(1)).astype(np.int64)
    return pair[block_of.astype(np.int64), slot_of]


class PhiloxStream:
    """Sequential view of one (seed, stream_id) stream."""

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._next = 0

    def uniform(self) -> float:
        u0, u1 = uniform_pair(self.seed, self.stream_id, self._next >> 1)
        u = u1 if (self._next & 1) else u0
        self._next += 1
        return float(u)

    def uniform_array(self, n: int) -> np.ndarray:
        out = uniforms(self.seed, self.stream_id, self._next, n)
        self._next += n
        return out
