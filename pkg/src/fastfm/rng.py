"""Seedable, serialisable random generator shared by every solver.

A thin object wrapper around the xoshiro256** kernels in ``_kernels``; the
four 64-bit state words are the entire state, which makes warm starts and
state files exact. Seeding expands the user seed through splitmix64
(constants 0x9E3779B97F4A7C15, 0xBF58476D1CE4E5B9, 0x94D049BB133111EB).
"""

import numpy as np

from . import _kernels as _k

_MASK64 = (1 << 64) - 1


def _splitmix64(state: int):
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, (z ^ (z >> 31)) & _MASK64


def spawn_seeds(seed: int, n: int) -> list[int]:
    """Derive n independent child seeds: the splitmix64 output stream."""
    state = int(seed) & _MASK64
    out = []
    for _ in range(n):
        state, value = _splitmix64(state)
        out.append(value)
    return out


class Rng:
    """xoshiro256** stream with normal/gamma/truncated-normal samplers."""

    def __init__(self, seed: int = 0):
        state = int(seed) & _MASK64
        words = []
        for _ in range(4):
            state, value = _splitmix64(state)
            words.append(value)
        if not any(words):
            words[0] = 1
        self._s = np.array(words, dtype=np.uint64)

    @classmethod
    def from_state(cls, words) -> "Rng":
        rng = cls.__new__(cls)
        arr = np.asarray([int(x) & _MASK64 for x in words], dtype=np.uint64)
        if arr.shape != (4,):
            raise ValueError("rng state must be 4 words")
        rng._s = arr
        return rng

    @property
    def state(self) -> tuple[int, int, int, int]:
        return tuple(int(x) for x in self._s)

    def copy(self) -> "Rng":
        return Rng.from_state(self.state)

    # raw access for kernels operating on the stream directly
    @property
    def state_array(self) -> np.ndarray:
        return self._s

    def next_u64(self) -> int:
        return int(_k.rng_next_u64(self._s))

    def uniform(self) -> float:
        return float(_k.rng_uniform(self._s))

    def normal(self) -> float:
        return float(_k.rng_normal(self._s))

    def gamma(self, shape: float) -> float:
        if shape <= 0.0:
            raise ValueError("gamma shape must be positive")
        return float(_k.rng_gamma(self._s, shape))

    def trunc_norm_lower(self, a: float) -> float:
        return float(_k.rng_trunc_norm_lower(self._s, a))

    def uniforms(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        _k.rng_uniform_fill(self._s, out)
        return out

    def normals(self, shape) -> np.ndarray:
        out = np.empty(shape, dtype=np.float64)
        _k.rng_normal_fill(self._s, out.reshape(-1))
        return out

    def shuffled_indices(self, n: int) -> np.ndarray:
        order = np.arange(n, dtype=np.int64)
        _k.rng_shuffle(self._s, order)
        return order
