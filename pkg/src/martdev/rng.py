"""Counter-based uniforms keyed by (seed, stream, step, tag).

A vectorised Philox4x32-10 block cipher: every (stream, step) cell of a
simulation grid gets its own counter, so any path can be regenerated in
isolation and a batch of paths equals the stack of single paths.
"""

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_ROUNDS = 10

# variate groups; distinct tags never share a counter
TAG_MAGNITUDE = 0
TAG_WEIGHT = 1
TAG_DESIGN = 2
TAG_SCALE = 3


def philox4x32(counter, key):
    """Philox4x32-10 on broadcastable uint32-valued arrays.

    ``counter`` is a 4-tuple of arrays and ``key`` a 2-tuple of ints.
    Returns the four output words as uint64 arrays holding 32-bit values.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK32 for c in counter)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(_ROUNDS):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = (
            hi1 ^ c1 ^ np.uint64(k0),
            lo1,
            hi0 ^ c3 ^ np.uint64(k1),
            lo0,
        )
        if r < _ROUNDS - 1:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
    return c0, c1, c2, c3


def _to_unit(hi, lo):
    # 53 random bits, offset by half an ulp: result lies strictly in (0, 1)
    bits = ((hi << _SHIFT32) | lo) >> np.uint64(11)
    return (bits.astype(np.float64) + 0.5) * 2.0**-53


@nb.njit(cache=True, nogil=True)
def _fill_uniforms(k0, k1, streams, step0, n_steps, tag, out):  # pragma: no cover - jitted
    mask = np.uint64(0xFFFFFFFF)
    m0 = np.uint64(0xD2511F53)
    m1 = np.uint64(0xCD9E8D57)
    sh = np.uint64(32)
    for r in range(streams.shape[0]):
        s = streams[r]
        for k in range(n_steps):
            st = np.uint64(step0 + k)
            c0 = st & mask
            c1 = (st >> sh) | (np.uint64(tag) << np.uint64(16))
            c2 = s & mask
            c3 = s >> sh
            a0 = np.uint64(k0)
            a1 = np.uint64(k1)
            for i in range(10):
                p0 = m0 * c0
                p1 = m1 * c2
                n0 = (p1 >> sh) ^ c1 ^ a0
                n2 = (p0 >> sh) ^ c3 ^ a1
                c1 = p1 & mask
                c3 = p0 & mask
                c0 = n0
                c2 = n2
                a0 = (a0 + np.uint64(0x9E3779B9)) & mask
                a1 = (a1 + np.uint64(0xBB67AE85)) & mask
            b0 = ((c0 << sh) | c1) >> np.uint64(11)
            b1 = ((c2 << sh) | c3) >> np.uint64(11)
            out[r, k, 0] = (float(b0) + 0.5) * 2.0**-53
            out[r, k, 1] = (float(b1) + 0.5) * 2.0**-53


def uniforms(seed, streams, n_steps, tag=TAG_MAGNITUDE, step0=0):
    """Return a ``(len(streams), n_steps, 2)`` array of uniforms in (0, 1).

    Entry ``[r, k, j]`` depends only on ``(seed, streams[r], step0 + k, tag, j)``,
    which is what makes path prefixes and single-stream replays line up with
    batch draws.
    """
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    streams = np.ascontiguousarray(np.atleast_1d(streams), dtype=np.uint64)
    out = np.empty((streams.shape[0], int(n_steps), 2))
    _fill_uniforms(seed & 0xFFFFFFFF, seed >> 32, streams, int(step0), int(n_steps), int(tag), out)
    return out


def uniforms_reference(seed, streams, n_steps, tag=TAG_MAGNITUDE, step0=0):
    """Pure-numpy twin of :func:`uniforms`; slow, kept as a cross-check."""
    seed = int(seed)
    streams = np.atleast_1d(np.asarray(streams, dtype=np.uint64))
    steps = np.arange(step0, step0 + n_steps, dtype=np.uint64)
    s = streams[:, None]
    k = steps[None, :]
    w0, w1, w2, w3 = philox4x32(
        (k & _MASK32, (k >> _SHIFT32) | (np.uint64(tag) << np.uint64(16)), s & _MASK32, s >> _SHIFT32),
        (seed & 0xFFFFFFFF, seed >> 32),
    )
    out = np.empty(w0.shape + (2,))
    out[..., 0] = _to_unit(w0, w1)
    out[..., 1] = _to_unit(w2, w3)
    return out
