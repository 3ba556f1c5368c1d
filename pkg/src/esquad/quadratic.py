"""Convex quadratic objectives with monotone transforms and optional rotation.

A problem is ``f(x) = g(h(x))`` where the core is ``h(x) = 0.5 (x - x*)^T H (x - x*)``
and ``g`` is a strictly increasing transform.  ``H`` is represented by its
eigenvalues plus an optional orthogonal rotation, so the diagonal case stays the
fast path.  The factor 1/2 belongs to the core everywhere in this package; a
plain quadratic form without it is just another monotone transform of the core.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateDirection,
    DimensionMismatch,
    DomainError,
    InvalidSpectrum,
)

ORTHOGONALITY_TOL = 1e-10

_TRANSFORM_NAMES = ("identity", "affine", "sqrt", "log1p", "cube")


@dataclass(frozen=True)
class MonotoneTransform:
    """Strictly increasing map applied to the nonnegative quadratic core.

    The set is a closed enumeration (no user callbacks) so problems serialize
    losslessly and runs stay reproducible.  ``affine`` is ``a*y + b`` with
    ``a > 0``; the other tags take no parameters.
    """

    name: str
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.name not in _TRANSFORM_NAMES:
            raise DomainError(f"unknown transform {self.name!r}")
        if self.name == "affine" and not self.a > 0:
            raise DomainError("affine transform requires a > 0")

    def apply(self, y: float) -> float:
        if self.name == "identity":
            return y
        if self.name == "affine":
            return self.a * y + self.b
        if self.name == "sqrt":
            return math.sqrt(y)
        if self.name == "log1p":
            return math.log1p(y)
        return y * y * y  # cube

    def to_json(self):
        if self.name == "affine":
            return {"name": "affine", "a": self.a, "b": self.b}
        return self.name

    @staticmethod
    def from_json(obj) -> "MonotoneTransform":
        if isinstance(obj, str):
            return MonotoneTransform(obj)
        if isinstance(obj, dict) and obj.get("name") == "affine":
            return MonotoneTransform("affine", float(obj["a"]), float(obj["b"]))
        raise DomainError(f"cannot parse transform {obj!r}")


IDENTITY = MonotoneTransform("identity")
SQRT = MonotoneTransform("sqrt")
LOG1P = MonotoneTransform("log1p")
CUBE = MonotoneTransform("cube")


@dataclass(frozen=True)
class Spectrum:
    """Positive eigenvalues of the Hessian, sorted descending."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise InvalidSpectrum("spectrum must be a nonempty 1-d array")
        if not np.all(np.isfinite(vals)) or not np.all(vals > 0):
            raise InvalidSpectrum("all eigenvalues must be finite and > 0")
        vals = np.sort(vals)[::-1].copy()
        vals.setflags(write=False)
        object.__setattr__(self, "eigenvalues", vals)

    @property
    def d(self) -> int:
        return int(self.eigenvalues.size)


@dataclass(frozen=True)
class SpectrumStats:
    """Scalar summaries of a spectrum used by every closed-form bound."""

    d: int
    L: float          # smallest eigenvalue
    U: float          # greatest eigenvalue
    trace: float      # sum of eigenvalues
    trace_sq: float   # sum of squared eigenvalues
    cond: float       # U / L
    ratio: float      # trace_sq / trace**2, the Gaussianity parameter of z^T H z


@dataclass(frozen=True)
class QuadraticProblem:
    """A member of the convex quadratic family, immutable after construction."""

    spectrum: Spectrum
    optimum: np.ndarray
    transform: MonotoneTransform = IDENTITY
    rotation: Optional[np.ndarray] = None
    rotation_seed: Optional[int] = None

    def __post_init__(self):
        opt = np.asarray(self.optimum, dtype=float)
        if opt.shape != (self.spectrum.d,):
            raise DimensionMismatch(
                f"optimum has shape {opt.shape}, expected ({self.spectrum.d},)"
            )
        opt = opt.copy()
        opt.setflags(write=False)
        object.__setattr__(self, "optimum", opt)
        if self.rotation is not None:
            rot = np.asarray(self.rotation, dtype=float)
            d = self.spectrum.d
            if rot.shape != (d, d):
                raise DimensionMismatch("rotation must be d x d")
            if np.max(np.abs(rot.T @ rot - np.eye(d))) > ORTHOGONALITY_TOL:
                raise InvalidSpectrum("rotation is not orthogonal within 1e-10")
            rot = rot.copy()
            rot.setflags(write=False)
            object.__setattr__(self, "rotation", rot)

    @property
    def d(self) -> int:
        return self.spectrum.d

    def _check_dim(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise DimensionMismatch(f"x has shape {x.shape}, expected ({self.d},)")
        return x

    def eigen_frame(self, y: np.ndarray) -> np.ndarray:
        """Coordinates of a centered vector in the eigenbasis of H."""
        if self.rotation is None:
            return y
        return self.rotation.T @ y

    def core(self, x) -> float:
        """Untransformed core 0.5 (x - x*)^T H (x - x*)."""
        u = self.eigen_frame(self._check_dim(x) - self.optimum)
        return 0.5 * float(np.dot(self.spectrum.eigenvalues * u, u))

    def core_centered(self, y: np.ndarray) -> float:
        """Core of an already-centered vector, no dimension check."""
        u = self.eigen_frame(y)
        return 0.5 * float(np.dot(self.spectrum.eigenvalues * u, u))

    def core_centered_batch(self, Y: np.ndarray) -> np.ndarray:
        """Cores of a batch of centered row vectors."""
        U = Y if self.rotation is None else Y @ self.rotation
        return 0.5 * np.einsum("ij,ij->i", U * self.spectrum.eigenvalues, U)

    def log_core_centered(self, y: np.ndarray) -> float:
        """log of the core, stable when the core would under- or overflow.

        Factors out the largest component of sqrt(lambda) * u before squaring,
        so the result is finite whenever y itself is representable.
        Returns -inf for y = 0.
        """
        u = self.eigen_frame(y)
        w = np.sqrt(self.spectrum.eigenvalues) * u
        mx = float(np.max(np.abs(w)))
        if mx == 0.0:
            return -math.inf
        s = w / mx
        return math.log(0.5) + 2.0 * math.log(mx) + math.log(float(np.dot(s, s)))

    def evaluate(self, x) -> float:
        """Objective value g(core(x)) with the problem's transform."""
        return self.transform.apply(self.core(x))

    def gradient_core(self, x) -> np.ndarray:
        """Gradient H (x - x*) of the untransformed core."""
        u = self.eigen_frame(self._check_dim(x) - self.optimum)
        g = self.spectrum.eigenvalues * u
        if self.rotation is None:
            return g
        return self.rotation @ g

    def grad_norm_centered(self, y: np.ndarray) -> float:
        """Euclidean norm of the core gradient at a centered point."""
        u = self.eigen_frame(y)
        return float(np.linalg.norm(self.spectrum.eigenvalues * u))

    def log_grad_norm_centered(self, y: np.ndarray) -> float:
        """log of the core gradient norm, stable for tiny or huge y."""
        u = self.eigen_frame(y)
        g = self.spectrum.eigenvalues * u
        mx = float(np.max(np.abs(g)))
        if mx == 0.0:
            return -math.inf
        s = g / mx
        return math.log(mx) + 0.5 * math.log(float(np.dot(s, s)))

    def stats(self) -> SpectrumStats:
        return spectrum_stats(self)

    def to_json(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.spectrum.eigenvalues],
            "optimum": [float(v) for v in self.optimum],
            "transform": self.transform.to_json(),
            "rotation_seed": self.rotation_seed,
        }


def make_problem(
    eigenvalues: Sequence[float],
    optimum,
    transform: MonotoneTransform = IDENTITY,
    rotation_seed: Optional[int] = None,
) -> QuadraticProblem:
    """Build a problem from eigenvalues, optimum, transform and optional rotation.

    ``optimum`` may be a vector of length d or the scalar 0 as shorthand for the
    origin.  When ``rotation_seed`` is given the Hessian eigenbasis is a seeded
    Haar-random orthogonal matrix; statistics and the sampling law of the ES do
    not depend on it, which is exactly what the rotation tests exercise.
    """
    spectrum = Spectrum(np.asarray(eigenvalues, dtype=float))
    if np.isscalar(optimum) and optimum == 0:
        optimum = np.zeros(spectrum.d)
    rotation = None
    if rotation_seed is not None:
        from .stochastic import RandomStream, random_rotation

        rotation = random_rotation(
            RandomStream(int(rotation_seed), path=(0x726F74,)), spectrum.d
        )
    return QuadraticProblem(
        spectrum=spectrum,
        optimum=np.asarray(optimum, dtype=float),
        transform=transform,
        rotation=rotation,
        rotation_seed=None if rotation_seed is None else int(rotation_seed),
    )


def problem_from_json(obj) -> QuadraticProblem:
    """Inverse of ``QuadraticProblem.to_json`` (accepts a dict or a JSON string)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    return make_problem(
        obj["eigenvalues"],
        np.asarray(obj["optimum"], dtype=float),
        MonotoneTransform.from_json(obj.get("transform", "identity")),
        obj.get("rotation_seed"),
    )


def spectrum_stats(p: QuadraticProblem) -> SpectrumStats:
    """Exact eigenvalue sums; unaffected by any rotation."""
    lam = p.spectrum.eigenvalues
    trace = float(np.sum(lam))
    trace_sq = float(np.sum(lam * lam))
    L = float(lam[-1])
    U = float(lam[0])
    return SpectrumStats(
        d=p.d,
        L=L,
        U=U,
        trace=trace,
        trace_sq=trace_sq,
        cond=U / L,
        ratio=trace_sq / (trace * trace),
    )


def directional_min_scale(p: QuadraticProblem, m, z) -> float:
    """Nonnegative step along z that minimizes the core from m.

    Returns 0 when the ray initially ascends (m^T H z >= 0 with m taken
    relative to the optimum) and -(m^T H z)/(z^T H z) otherwise.
    """
    m = p._check_dim(m)
    z = p._check_dim(z)
    if not np.any(z):
        raise DegenerateDirection("z must be nonzero")
    um = p.eigen_frame(m - p.optimum)
    uz = p.eigen_frame(z)
    lam = p.spectrum.eigenvalues
    a = float(np.dot(lam * um, uz))  # m^T H z
    b = float(np.dot(lam * uz, uz))  # z^T H z > 0 for nonzero z
    if a >= 0.0:
        return 0.0
    return -a / b


def sphere(d: int) -> list:
    """Eigenvalues of the unit sphere problem."""
    return [1.0] * d


def cigar(d: int, xi: float) -> list:
    """d-1 eigenvalues xi and one eigenvalue 1."""
    return [float(xi)] * (d - 1) + [1.0]


def discus(d: int, xi: float) -> list:
    """One eigenvalue xi and d-1 eigenvalues 1."""
    return [float(xi)] + [1.0] * (d - 1)


def ellipsoid(d: int, xi: float) -> list:
    """Log-uniform eigenvalues from xi down to 1."""
    if d == 1:
        return [float(xi)]
    return [float(xi) ** ((d - 1 - i) / (d - 1)) for i in range(d)]
