"""Counter-based random substreams (Philox4x32-10).

Every draw is a pure function of ``(seed, path, step, stream)``: the 64-bit
seed is the Philox key and the counter words are ``(path, step, stream, 0)``.
Any subset of paths can therefore be generated in any order, by any number
of workers, and the results agree bit for bit.
"""

import numpy as np

DIFFUSION = 0
JUMP_COUNT = 1
JUMP_SIZE = 2
VARIANCE = 3

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_LO = np.uint64(0xFFFFFFFF)
_HI = np.uint64(32)
_MASK32 = 0xFFFFFFFF


def philox4x32(counter, key, rounds=10):
    """Apply the Philox4x32 bijection.

    ``counter`` is a 4-tuple of integers or broadcastable uint arrays, ``key``
    a pair of 32-bit integers.  Returns four uint64 arrays holding 32-bit words.
    """
    c0, c1, c2, c3 = np.broadcast_arrays(*(np.asarray(c, dtype=np.uint64) for c in counter))
    k0, k1 = int(key[0]) & _MASK32, int(key[1]) & _MASK32
    for _ in range(rounds):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _HI) ^ c1 ^ np.uint64(k0),
            p1 & _LO,
            (p0 >> _HI) ^ c3 ^ np.uint64(k1),
            p0 & _LO,
        )
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def seed_key(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed & _MASK32, seed >> 32


def _to_unit(hi, lo):
    # 52 random bits plus half an ulp: exact in float64 and strictly inside (0, 1)
    bits = ((hi >> np.uint64(6)) << np.uint64(26)) | (lo >> np.uint64(6))
    return (bits.astype(np.float64) + 0.5) * 2.0**-52


def uniforms(seed, stream, paths, steps):
    """Open-interval uniforms, shape ``(len(paths), len(steps))``."""
    p = np.asarray(paths, dtype=np.uint64)[:, None]
    s = np.asarray(steps, dtype=np.uint64)[None, :]
    x0, x1, _, _ = philox4x32((p, s, stream, 0), seed_key(seed))
    return _to_unit(x0, x1)


def normals(seed, stream, paths, steps):
    """Standard normals (Box-Muller, cosine branch), shape ``(len(paths), len(steps))``."""
    p = np.asarray(paths, dtype=np.uint64)[:, None]
    s = np.asarray(steps, dtype=np.uint64)[None, :]
    x0, x1, x2, x3 = philox4x32((p, s, stream, 0), seed_key(seed))
    u1 = _to_unit(x0, x1)
    u2 = _to_unit(x2, x3)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
