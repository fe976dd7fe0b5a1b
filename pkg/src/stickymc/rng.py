"""Counter-based random streams.

Every random quantity in this package is a pure function of a 64-bit key
and a 64-bit counter.  Keys are derived from a master seed plus an integer
path (replica id, walker id, purpose tag, ...), so any worker can generate
any stream value on demand without coordination, and results do not depend
on scheduling order.

The generator is the SplitMix64 finalizer applied to ``key + (counter+1)
* GOLDEN``, i.e. random access into a SplitMix64 sequence seeded at
``key``.  The same integer arithmetic is replicated in the compiled
backend, so both lanes produce bit-identical draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64(0xFFFFFFFFFFFFFFFF)

# purpose tags for stream paths
TAG_ENV = 1
TAG_WALK = 2
TAG_WIENER = 3
TAG_SUM = 4
TAG_SIGN = 5
TAG_BRIDGE = 6
TAG_LOCALTIME = 7


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on uint64 arrays (wraparound is intentional)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def derive_key(master_seed: int, path: tuple[int, ...]) -> int:
    """Derive the 64-bit stream key for (master_seed, path)."""
    with np.errstate(over="ignore"):
        key = mix64(np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF) * GOLDEN + np.uint64(1))
        for p in path:
            key = mix64(key ^ (np.uint64(p & 0xFFFFFFFFFFFFFFFF) * GOLDEN + _MIX2))
    return int(key)


def raw_at(key: int, counters) -> np.ndarray:
    """Raw uint64 draws at the given counters."""
    ctr = np.asarray(counters, dtype=np.uint64)
    return mix64(np.uint64(key) + (ctr + np.uint64(1)) * GOLDEN)


def uniforms_at(key: int, counters) -> np.ndarray:
    """Uniform draws in (0, 1), one per counter.

    ((raw >> 11) + 0.5) * 2**-53 is exact in double precision, so the
    compiled backend reproduces it bit-for-bit.
    """
    z = raw_at(key, counters)
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals_at(key: int, counters) -> np.ndarray:
    """Standard normal draws via the inverse CDF (deterministic per counter)."""
    return ndtri(uniforms_at(key, counters))


@dataclass(frozen=True)
class RngStream:
    """Descriptor of one deterministic stream: master seed + integer path."""

    master_seed: int
    stream_path: tuple[int, ...] = field(default_factory=tuple)

    @property
    def key(self) -> int:
        return derive_key(self.master_seed, self.stream_path)

    def child(self, *path: int) -> "RngStream":
        return RngStream(self.master_seed, self.stream_path + tuple(path))

    def uniforms(self, n: int, start: int = 0) -> np.ndarray:
        return uniforms_at(self.key, np.arange(start, start + n, dtype=np.uint64))

    def normals(self, n: int, start: int = 0) -> np.ndarray:
        return normals_at(self.key, np.arange(start, start + n, dtype=np.uint64))

    def describe(self) -> str:
        return f"{self.master_seed}:" + "/".join(str(p) for p in self.stream_path)


def derive_stream(master: int, path) -> RngStream:
    """Public constructor mirroring the stream-derivation contract."""
    return RngStream(int(master), tuple(int(p) for p in path))


def child_keys(stream: "RngStream", ids) -> np.ndarray:
    """Vectorized keys of stream.child(i) for an array of ids (same chain
    rule as derive_key, applied to the last path element in bulk)."""
    base = np.uint64(stream.key)
    ids = np.asarray(ids, dtype=np.uint64)
    return mix64(base ^ (ids * GOLDEN + _MIX2))


def env_counter(n, x) -> np.ndarray:
    """Counter for the environment value at lattice site (n, x).

    Injective for 0 <= n < 2**32 and |x| < 2**31 (x is stored as its
    32-bit two's complement).
    """
    n_arr = np.asarray(n, dtype=np.uint64)
    x_arr = np.asarray(x)
    x_bits = (x_arr.astype(np.int64) & np.int64(0xFFFFFFFF)).astype(np.uint64)
    return (n_arr << np.uint64(32)) ^ x_bits
