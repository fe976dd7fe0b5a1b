"""Exact Brownian-bridge local-time law, exponential moments, samplers,
and occupation-time estimators.

For a standard Brownian bridge Y on [0,1] from a to a+b, the local time
at 0 has the explicit tail

    P(L > v) = exp(b^2/2 - (|a| + |a+b| + v)^2 / 2),   v >= 0,

with an atom at 0 of mass 1 - P(L > 0) (the bridge may never touch 0).
Local time is normalized against quadratic variation d<X,X>; the
conversion between horizons/diffusion rates is centralized in
rescale_bridge_lt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .rng import RngStream


@dataclass(frozen=True)
class BridgeSpec:
    """Standard (rate-1, horizon-1) bridge from a to a+b, with an optional
    exponential-moment parameter theta."""

    a: float
    b: float
    theta: float = 0.0

    @property
    def corner(self) -> float:
        return abs(self.a) + abs(self.a + self.b)


def bridge_lt_tail(spec: BridgeSpec, v) -> np.ndarray:
    """P(L > v), clamped to [0, 1]; nonincreasing and continuous in v."""
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0):
        raise ValueError("v must be nonnegative")
    val = np.exp(spec.b**2 / 2.0 - (spec.corner + v) ** 2 / 2.0)
    return np.minimum(val, 1.0)


def bridge_lt_atom(spec: BridgeSpec) -> float:
    """P(L = 0): the bridge never reaches 0."""
    return float(1.0 - bridge_lt_tail(spec, 0.0))


def sample_bridge_local_time(spec: BridgeSpec, stream: RngStream, size: int = 1) -> np.ndarray:
    """Inverse-CDF samples of L (mixed law: atom at 0 plus continuous tail).

    For uniform U: L = 0 when U >= P(L > 0), else L solves P(L > v) = U,
    i.e. v = sqrt(b^2 - 2 log U) - corner.
    """
    u = stream.uniforms(size)
    s0 = float(bridge_lt_tail(spec, 0.0))
    v = np.sqrt(np.maximum(spec.b**2 - 2.0 * np.log(u), 0.0)) - spec.corner
    return np.where(u < s0, np.maximum(v, 0.0), 0.0)


def bridge_exp_moment(spec: BridgeSpec) -> float:
    """E[exp(theta * L)] = 1 + theta * Integral_0^inf e^{theta v} P(L > v) dv
    by adaptive quadrature (converges for all theta: Gaussian beats
    exponential)."""
    th = spec.theta
    if th == 0.0:
        return 1.0
    c = spec.corner

    def integrand(v):
        return np.exp(th * v) * float(bridge_lt_tail(spec, v))

    # integrand peaks at v* = max(0, theta - c); 12 std widths beyond it
    # the Gaussian factor is below 3e-32 of the peak
    v_hi = max(0.0, th - c) + 12.0
    val, err = quad(integrand, 0.0, v_hi, limit=200, epsabs=1e-13, epsrel=1e-12)
    result = 1.0 + th * val
    if err > 1e-8 * max(abs(val), 1.0):
        raise ArithmeticError(
            f"quadrature did not converge: value={val}, abserr={err}, spec={spec}"
        )
    return float(result)


def bridge_exp_moment_bound(theta: float) -> float:
    """Envelope 1 + theta*sqrt(2*pi)*exp(theta^2/2) for theta > 0."""
    return 1.0 + theta * np.sqrt(2.0 * np.pi) * np.exp(theta**2 / 2.0)


def rescale_bridge_lt(t: float, rate: float, z: float) -> tuple[BridgeSpec, float]:
    """Reduce the rate-`rate` bridge 0 -> z on [0, t] to the standard spec.

    Its local time at 0 (against d<X,X>) equals scale * L(standard spec)
    in law, with spec = BridgeSpec(a=0, b=z/sqrt(rate*t)) and
    scale = sqrt(rate*t).
    """
    if not (t > 0 and rate > 0):
        raise ValueError("t and rate must be positive")
    s = np.sqrt(rate * t)
    return BridgeSpec(a=0.0, b=float(z) / s), float(s)


@dataclass(frozen=True)
class OccupationEstimate:
    """Occupation-time local-time path with a grid-adequacy flag."""

    values: np.ndarray
    eps_ok: bool


def occupation_local_time(path: np.ndarray, dt: float, quad_var_rate: float,
                          eps: float) -> OccupationEstimate:
    """Occupation estimator L(t_j) = (rate / 2 eps) * sum dt * 1{|path| < eps}.

    eps_ok is False when eps is under ~3 path grid increments
    (sqrt(rate*dt)), where the estimator is unreliable.
    """
    if not (eps > 0 and dt > 0 and quad_var_rate > 0):
        raise ValueError("dt, eps, quad_var_rate must be positive")
    path = np.asarray(path, dtype=np.float64)
    hits = (np.abs(path[:-1]) < eps).astype(np.float64)
    values = np.concatenate(
        [[0.0], np.cumsum(hits) * dt * quad_var_rate / (2.0 * eps)]
    )
    return OccupationEstimate(values=values, eps_ok=bool(eps >= 3.0 * np.sqrt(quad_var_rate * dt)))
