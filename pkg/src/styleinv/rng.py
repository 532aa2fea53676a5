"""Counter-based deterministic random numbers.

Every stochastic ingredient of the pipeline (anchor noise, per-video
synthesis noise, dataset specs) is a pure function of integer keys, so any
sample can be regenerated in isolation: random access needs no sequential
generator state.

The construction is documented here so an independent implementation can
reproduce the exact bit stream:

1. fold the key integers into a 64-bit stream id with
   ``k_{j+1} = fmix64(k_j * GOLDEN + key_j)`` starting from ``k_0 = 0``,
   where ``fmix64`` is the MurmurHash3 64-bit finalizer and
   ``GOLDEN = 0x9E3779B97F4A7C15``;
2. word ``i`` of the stream is ``fmix64(k + (i+1) * GOLDEN)``;
3. a uniform in (0, 1] is ``((word >> 11) + 1) * 2**-53``;
4. normals come from Box-Muller on word pairs ``(2i, 2i+1)``:
   ``z_i = sqrt(-2 ln u_{2i}) * cos(2 pi u_{2i+1})``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xFF51AFD7ED558CCD)
_MIX2 = np.uint64(0xC4CEB9FE1A85EC53)
_SHIFT = np.uint64(33)


def _fmix64(x: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    # uint64 arithmetic wraps mod 2**64 by design
    with np.errstate(over="ignore"):
        x = x ^ (x >> _SHIFT)
        x = x * _MIX1
        x = x ^ (x >> _SHIFT)
        x = x * _MIX2
        x = x ^ (x >> _SHIFT)
    return x


def fold_key(key: Sequence[int]) -> int:
    """Fold a tuple of integers into a 64-bit stream id."""
    k = np.uint64(0)
    with np.errstate(over="ignore"):
        for part in key:
            k = _fmix64(k * GOLDEN + np.uint64(int(part) & 0xFFFFFFFFFFFFFFFF))
    return int(k)


def raw_words(key: Sequence[int], count: int) -> np.ndarray:
    """``count`` 64-bit words of the stream identified by ``key``."""
    k = np.uint64(fold_key(key))
    idx = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _fmix64(k + idx * GOLDEN)


def uniform(key: Sequence[int], count: int) -> np.ndarray:
    """Uniform float64 samples in (0, 1]."""
    words = raw_words(key, count)
    return ((words >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53


def normal(key: Sequence[int], count: int) -> np.ndarray:
    """Standard-normal float64 samples via Box-Muller."""
    u = uniform(key, 2 * count)
    u1, u2 = u[0::2], u[1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


# Domain tags keep independent consumers of the same seed on disjoint
# streams.  Values are arbitrary but frozen: changing them changes every
# generated video.
TAG_ANCHOR = 0x414E4348  # anchor noise of the time encoder
TAG_SYNTH_NOISE = 0x4E4F4953  # per-video synthesis noise maps
TAG_DATASET = 0x44415441  # synthetic dataset video specs
TAG_LATENT = 0x4C41544E  # per-video initial latent noise
