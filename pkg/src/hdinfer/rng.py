"""Deterministic counter-based random streams.

Every draw is a pure function of an immutable (seed, stream) pair plus a
counter position, so replicate-level parallelism can hand out independent
substreams without shared mutable state. Word ``k`` of the stream keyed by
``K`` is

    mix64(K + (k + 1) * GOLDEN)        (arithmetic mod 2**64)

where ``mix64`` is the SplitMix64 output permutation and ``GOLDEN`` is
2**64 / phi rounded to odd. Uniform doubles take the top 53 bits of a
word. Gaussian variates use the Box-Muller transform on consecutive word
pairs rather than a rejection method, so the mapping from counter to value
has no data-dependent control flow and replays identically everywhere
IEEE-754 doubles behave identically.

Functions here never mutate an :class:`RngState`. Two calls with the same
state and arguments return the same values; callers that need fresh
randomness derive a child stream with :meth:`RngState.derive`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_STREAM_SALT = 0x6A09E667F3BCC909  # frac(sqrt(2)), keeps stream 0 distinct from seed reuse
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a 64-bit integer (Python ints, masked)."""
    z &= _MASK
    z ^= z >> 30
    z = (z * _MIX_A) & _MASK
    z ^= z >> 27
    z = (z * _MIX_B) & _MASK
    return z ^ (z >> 31)


def _fold(h: int, v: int) -> int:
    return mix64((h ^ mix64((v + GOLDEN) & _MASK)) & _MASK)


def _hash_tag(tag) -> int:
    if isinstance(tag, (bool, float)):
        raise TypeError(f"stream tags must be int or str, got {tag!r}")
    if isinstance(tag, (int, np.integer)):
        return int(tag) & _MASK
    if isinstance(tag, str):
        h = _FNV_OFFSET
        for byte in tag.encode("utf-8"):
            h = ((h ^ byte) * _FNV_PRIME) & _MASK
        return h
    raise TypeError(f"stream tags must be int or str, got {type(tag).__name__}")


@dataclass(frozen=True)
class RngState:
    """Immutable stream identity: (seed, stream-id).

    Identical states reproduce identical value sequences. Independent
    substreams are derived by hashing tags into the stream id; the seed is
    never changed by derivation, so all streams of one experiment share it.
    """

    seed: int
    stream: int = 0

    def derive(self, *tags) -> "RngState":
        """Child stream obtained by folding tags into the stream id."""
        s = self.stream & _MASK
        for tag in tags:
            s = _fold(s, _hash_tag(tag))
        return RngState(self.seed & _MASK, s)

    @property
    def key(self) -> int:
        """64-bit generator key combining seed and stream id."""
        return _fold(_fold(0, self.seed & _MASK), (self.stream ^ _STREAM_SALT) & _MASK)


def _words(key: int, count: int) -> np.ndarray:
    """First ``count`` uint64 words of the stream with the given key."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    idx = np.arange(1, count + 1, dtype=np.uint64)
    z = np.uint64(key) + idx * np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
    return z ^ (z >> np.uint64(31))


def uniform01(rng: RngState, count: int) -> np.ndarray:
    """``count`` doubles in [0, 1) with 53-bit resolution."""
    w = _words(rng.key, count)
    return (w >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def standard_normals(rng: RngState, count: int) -> np.ndarray:
    """``count`` N(0, 1) draws via Box-Muller on consecutive word pairs."""
    pairs = (count + 1) // 2
    w = _words(rng.key, 2 * pairs)
    # u1 in (0, 1] so the log is finite; u2 in [0, 1).
    u1 = ((w[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)
    u2 = (w[1::2] >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
    radius = np.sqrt(-2.0 * np.log(u1))
    theta = (2.0 * np.pi) * u2
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(theta)
    z[1::2] = radius * np.sin(theta)
    return z[:count]


def normal_matrix(rng: RngState, n: int, p: int) -> np.ndarray:
    """(n, p) matrix of independent standard normals."""
    return standard_normals(rng, n * p).reshape(n, p)


def permutation(rng: RngState, n: int) -> np.ndarray:
    """Deterministic permutation of range(n) (argsort of stream words)."""
    return np.argsort(_words(rng.key, n), kind="stable")


def randint(rng: RngState, n: int) -> int:
    """One integer uniform on range(n). Modulo bias is ~n / 2**64."""
    if n <= 0:
        raise ValueError("n must be positive")
    return int(_words(rng.key, 1)[0] % np.uint64(n))
