"""Deterministic, splittable randomness for all stochastic components.

Streams are built on the counter-based Philox generator keyed through
``numpy.random.SeedSequence(seed, spawn_key=path)``, so a stream is fully
identified by its ``(seed, path)`` pair and distinct paths are statistically
independent.  Normal variates are produced by inverting the standard normal
CDF on 53-bit uniforms (``scipy.special.ndtri``); the method is part of the
reproducibility contract and must not change without bumping GENERATOR_ID.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.special import ndtri

GENERATOR_ID = "philox-seedseq+invcdf/v1"

_U64_MASK = (1 << 64) - 1


@dataclass
class RandomStream:
    """Single-owner random stream identified by (seed, path).

    Drawing advances internal state; hand substreams, not the stream itself,
    to concurrent workers.
    """

    seed: int
    path: Tuple[int, ...] = ()
    _bitgen: np.random.Philox = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.path = tuple(int(p) & _U64_MASK for p in self.path)
        ss = np.random.SeedSequence(int(self.seed) & _U64_MASK, spawn_key=self.path)
        self._bitgen = np.random.Philox(ss)

    def raw_uniform(self, n: int) -> np.ndarray:
        """n uniforms in the open interval (0, 1) with 53-bit resolution."""
        raw = self._bitgen.random_raw(n)
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normal_vector(stream: RandomStream, d: int) -> np.ndarray:
    """d independent standard normal variates; advances the stream."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return ndtri(stream.raw_uniform(d))


def normal_matrix(stream: RandomStream, rows: int, d: int) -> np.ndarray:
    """(rows, d) standard normals, bit-identical to `rows` stacked
    ``normal_vector`` calls on the same stream."""
    return ndtri(stream.raw_uniform(rows * d)).reshape(rows, d)


def substream(stream: RandomStream, label: int) -> RandomStream:
    """Independent stream derived deterministically from (seed, path, label)."""
    return RandomStream(stream.seed, stream.path + (int(label),))


def random_rotation(stream: RandomStream, d: int) -> np.ndarray:
    """Haar-distributed orthogonal matrix.

    QR of a Gaussian matrix with the signs of diag(R) folded into Q, the
    standard construction for uniform orthogonal sampling.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    g = normal_matrix(stream, d, d)
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs
