"""Shared domain constants, scalings, and statistics accumulators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import RngStream, derive_stream  # noqa: F401  (re-exported)


@dataclass(frozen=True)
class CharacteristicMeasure:
    """Total mass nu_total of the sticky characteristic measure, with the
    derived stickiness rate lambda = 4*nu_total and noise coefficient
    sigma = 1/(2*nu_total).  lam*sigma == 2 exactly.
    """

    nu_total: float
    lam: float
    sigma: float

    def __post_init__(self):
        if not self.nu_total > 0:
            raise ValueError("nu_total must be positive (degenerate measure)")


def derive_constants(nu_total: float) -> CharacteristicMeasure:
    """Build a CharacteristicMeasure from the total mass nu_total."""
    if not nu_total > 0:
        raise ValueError("nu_total must be positive (degenerate measure)")
    return CharacteristicMeasure(
        nu_total=float(nu_total),
        lam=4.0 * float(nu_total),
        sigma=1.0 / (2.0 * float(nu_total)),
    )


@dataclass(frozen=True)
class ModerateDeviationScaling:
    """Moderate-deviation window: n = round(N*t) lattice steps, lattice
    location u(x) = N^{3/4} t + N^{1/2} x, tilt exponent theta = N^{-1/4}.
    """

    N: int
    t: float

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be a positive integer")
        if not self.t > 0:
            raise ValueError("t must be positive")
        if self.n < 1:
            raise ValueError("round(N*t) must be at least 1")

    @property
    def n(self) -> int:
        return int(round(self.N * self.t))

    @property
    def theta(self) -> float:
        return float(self.N) ** -0.25

    def u_of_x(self, x) -> np.ndarray:
        return float(self.N) ** 0.75 * self.t + np.sqrt(float(self.N)) * np.asarray(x, dtype=np.float64)

    def x_of_u(self, u) -> np.ndarray:
        return (np.asarray(u, dtype=np.float64) - float(self.N) ** 0.75 * self.t) / np.sqrt(float(self.N))


@dataclass(frozen=True)
class MomentEstimate:
    """Monte Carlo mean with standard error and seed provenance."""

    mean: float
    stderr: float
    n_replicas: int
    seed: str

    def z_against(self, oracle: float) -> float:
        if self.stderr == 0.0:
            return 0.0 if self.mean == oracle else np.inf
        return (self.mean - oracle) / self.stderr


@dataclass
class RunningMoments:
    """Associative (sum, sum of squares, count) accumulator; merging is
    order-independent so map-reduce over replicas is schedule-independent.
    """

    total: float = 0.0
    total_sq: float = 0.0
    count: int = 0

    def add(self, samples) -> None:
        s = np.asarray(samples, dtype=np.float64).ravel()
        self.total += float(np.sum(s))
        self.total_sq += float(np.sum(s * s))
        self.count += s.size

    def merge(self, other: "RunningMoments") -> None:
        self.total += other.total
        self.total_sq += other.total_sq
        self.count += other.count

    def estimate(self, seed: str = "") -> MomentEstimate:
        if self.count < 1:
            raise ValueError("no samples accumulated")
        mean = self.total / self.count
        if self.count == 1:
            var = 0.0
        else:
            var = max(0.0, (self.total_sq - self.count * mean * mean) / (self.count - 1))
        return MomentEstimate(
            mean=mean,
            stderr=float(np.sqrt(var / self.count)),
            n_replicas=self.count,
            seed=seed,
        )


def estimate_from_samples(samples, stream: RngStream | None = None) -> MomentEstimate:
    acc = RunningMoments()
    acc.add(samples)
    return acc.estimate(stream.describe() if stream is not None else "")
