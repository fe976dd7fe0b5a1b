"""Discrete random environment and quenched-kernel engine.

A random environment assigns to every space-time lattice site (n, x) a
right-step probability omega(n, x) in [0, 1], i.i.d. across sites with
mean 1/2.  The quenched kernel K_{0,n}(.) is the transition law of a walk
started at 0 that steps +1 with probability omega and -1 otherwise; it is
evolved by one Chapman-Kolmogorov step per time level.

Environment values are never stored: they are regenerated on demand from
the counter stream keyed by (n, x), so memory stays O(width).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaincinv
from scipy.stats import binom

from . import backend
from .rng import RngStream, env_counter, uniforms_at

ENV_KIND_CODES = {"constant_half": 0, "two_point": 1, "beta_symmetric": 2}

# widest kernel window evolve will allocate before raising (64M sites)
MAX_KERNEL_WIDTH = 1 << 26


@dataclass(frozen=True)
class EnvModel:
    """Law of the site probabilities omega(n, x).

    kind 'two_point' draws delta or 1-delta with equal probability;
    'beta_symmetric' draws Beta(beta, beta); 'constant_half' is the free
    walk omega = 1/2.  All kinds have mean 1/2.
    """

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ENV_KIND_CODES:
            raise ValueError(f"unknown environment kind {self.kind!r}")
        if self.kind == "two_point" and not (0.0 < self.param <= 0.5):
            raise ValueError("two_point delta must lie in (0, 1/2]")
        if self.kind == "beta_symmetric" and not self.param > 0.0:
            raise ValueError("beta_symmetric parameter must be positive")

    @classmethod
    def two_point(cls, delta: float) -> "EnvModel":
        return cls("two_point", float(delta))

    @classmethod
    def beta_symmetric(cls, beta_param: float) -> "EnvModel":
        return cls("beta_symmetric", float(beta_param))

    @classmethod
    def constant_half(cls) -> "EnvModel":
        return cls("constant_half", 0.0)

    @classmethod
    def for_target(cls, nu_total: float) -> "EnvModel":
        """Two-point environment whose effective characteristic mass is
        nu_total, solving delta(1-delta)/(1-2delta)^2 = nu_total.  The mass
        does not depend on the horizon: the environment law is fixed and
        only the observation window scales with N."""
        if not nu_total > 0:
            raise ValueError("nu_total must be positive")
        q = float(nu_total) / (1.0 + 4.0 * float(nu_total))
        delta = 0.5 * (1.0 - np.sqrt(1.0 - 4.0 * q))
        return cls.two_point(float(delta))

    def mean_omega_one_minus(self) -> float:
        """E[omega(1-omega)] for this law."""
        if self.kind == "constant_half":
            return 0.25
        if self.kind == "two_point":
            return self.param * (1.0 - self.param)
        b = self.param
        return b / (2.0 * (2.0 * b + 1.0))

    def nu_eff(self) -> float:
        """Effective characteristic mass nu0 = q/(1-4q), q = E[omega(1-omega)].

        This is the mass under which the moderate-deviation fields of this
        environment converge to heat-equation oracles with noise coefficient
        sigma = 1/(2*nu0) = (1-2s)/s, s = 2q: verified by extrapolating the
        exact annealed second moment of the tilted field (a deterministic
        transfer-matrix sum over the pair-difference walk) across N; the
        extrapolated coupling matches (1-2s)/s to 4 digits for s in
        [0.2, 0.45].  Consistency checks: constant_half (q = 1/4) gives
        sigma = 0, the free-walk limit; Beta(beta, beta) gives
        nu0 = beta/2 exactly.
        """
        q = self.mean_omega_one_minus()
        if q >= 0.25:
            return np.inf
        return q / (1.0 - 4.0 * q)


def env_prob(model: EnvModel, stream: RngStream, n, x) -> np.ndarray:
    """Right-step probability omega(n, x); deterministic in (stream, n, x)."""
    if model.kind == "constant_half":
        return np.full(np.broadcast(np.asarray(n), np.asarray(x)).shape, 0.5)
    u = uniforms_at(stream.key, env_counter(n, x))
    if model.kind == "two_point":
        return np.where(u < 0.5, model.param, 1.0 - model.param)
    return betaincinv(model.param, model.param, u)


@dataclass(frozen=True)
class QuenchedKernel:
    """Probability vector of the walk position after n steps, stored over
    the full parity window: probs[i] is the mass at site offset + 2*i.
    """

    n: int
    offset: int
    probs: np.ndarray

    @property
    def sites(self) -> np.ndarray:
        return self.offset + 2 * np.arange(self.probs.size, dtype=np.int64)

    def mass(self) -> float:
        return float(np.sum(self.probs))

    @classmethod
    def delta0(cls) -> "QuenchedKernel":
        return cls(n=0, offset=0, probs=np.array([1.0]))


def step_kernel(K: QuenchedKernel, model: EnvModel, stream: RngStream) -> QuenchedKernel:
    """One Chapman-Kolmogorov step: mass at x splits right with omega(n, x)."""
    omega = np.asarray(env_prob(model, stream, K.n, K.sites), dtype=np.float64)
    down = K.probs * (1.0 - omega)
    up = K.probs * omega
    new = np.empty(K.probs.size + 1)
    new[0] = down[0]
    new[-1] = up[-1]
    new[1:-1] = down[1:] + up[:-1]
    return QuenchedKernel(n=K.n + 1, offset=K.offset - 1, probs=new)


def evolve(model: EnvModel, stream: RngStream, n_steps: int) -> QuenchedKernel:
    """Kernel after n_steps from a point mass at 0.  O(n^2) time, O(n) memory."""
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    if n_steps + 1 > MAX_KERNEL_WIDTH:
        raise MemoryError(
            f"kernel window {n_steps + 1} exceeds cap {MAX_KERNEL_WIDTH}"
        )
    if model.kind == "beta_symmetric":
        K = QuenchedKernel.delta0()
        for _ in range(n_steps):
            K = step_kernel(K, model, stream)
        return K
    probs = backend.evolve_kernel(
        stream.key, n_steps, ENV_KIND_CODES[model.kind], model.param
    )
    return QuenchedKernel(n=n_steps, offset=-n_steps, probs=probs)


def kernel_tail(K: QuenchedKernel, u: int) -> float:
    """Mass of K on [u, infinity) (inclusive ray)."""
    if u <= K.offset:
        return 1.0
    i0 = int(np.ceil((u - K.offset) / 2.0))
    if i0 >= K.probs.size:
        return 0.0
    return float(np.sum(K.probs[i0:]))


def binomial_kernel(n: int) -> QuenchedKernel:
    """Annealed (environment-averaged) kernel: simple random walk binomial."""
    k = np.arange(n + 1)
    return QuenchedKernel(n=n, offset=-n, probs=binom.pmf(k, n, 0.5))
