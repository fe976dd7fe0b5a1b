"""Exact (grid-discretized) two-point sticky Brownian motion.

The difference D = X - Y is sqrt(2) times a reflected Brownian path run
through the inverse of the local-time clock T(u) = u + (sqrt(2)/lam) L(u),
with i.i.d. fair signs per excursion; the coincidence time is
V(t) = t - T^{-1}(t), exactly the flat intervals inserted by the clock
(so the sticky set needs no floating-point equality test).  The sum
S = X + Y is an independent Brownian motion at clock 2t + 2V(t).

The clock constant sqrt(2)/lam makes lam * V(t) = sqrt(2) * L(T^{-1}(t))
with L the local time of the standard reflected path, which is the
normalization (local time against quadratic variation of the rate-2
difference) under which |D_t| - lam * V_t is a martingale; this is
verified statistically by the tests rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from . import backend
from .core import CharacteristicMeasure, MomentEstimate, RngStream, RunningMoments
from .rng import TAG_SIGN, TAG_SUM, TAG_WALK, TAG_WIENER, child_keys, normals_at, uniforms_at

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class ReflectedPathWithLocalTime:
    """(|B|, L) realized as (M - W, M) for a Brownian path W with running
    max M (Levy identity), plus one fair sign per excursion from zero."""

    grid: np.ndarray
    b_abs: np.ndarray
    ell: np.ndarray
    excursion_signs: np.ndarray


@dataclass(frozen=True)
class TwoPointSbmPath:
    grid: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray
    g: np.ndarray
    meta: CharacteristicMeasure


def sample_reflected_with_local_time(t_max: float, dt: float,
                                     stream: RngStream) -> ReflectedPathWithLocalTime:
    """One reflected path with its local time on a uniform grid."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = int(round(t_max / dt))
    w = np.empty(n + 1)
    w[0] = 0.0
    np.cumsum(stream.child(TAG_WIENER).normals(n) * np.sqrt(dt), out=w[1:])
    m = np.maximum.accumulate(w)
    b_abs = m - w
    n_exc = int(np.sum(b_abs == 0.0))
    signs = np.where(stream.child(TAG_SIGN).uniforms(n_exc) < 0.5, -1.0, 1.0)
    return ReflectedPathWithLocalTime(
        grid=dt * np.arange(n + 1), b_abs=b_abs, ell=m, excursion_signs=signs
    )


def reflected_local_time_batch(t_max: float, dt: float, stream: RngStream,
                               reps: int) -> np.ndarray:
    """Final-time local times L(t_max) for `reps` reflected paths (equal in
    law to the running max of a Brownian path, computed as such)."""
    from scipy.special import ndtri

    from .rng import GOLDEN, mix64

    n = int(round(t_max / dt))
    out = np.empty(reps)
    keys = child_keys(stream.child(TAG_WIENER), np.arange(reps, dtype=np.uint64))
    ctr = np.arange(n, dtype=np.uint64)
    sq = np.sqrt(dt)
    chunk = max(1, 4_000_000 // n)
    for r0 in range(0, reps, chunk):
        r1 = min(reps, r0 + chunk)
        raw = mix64(keys[r0:r1, None] + (ctr[None, :] + np.uint64(1)) * GOLDEN)
        u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        w = np.cumsum(ndtri(u) * sq, axis=1)
        out[r0:r1] = np.maximum(np.max(w, axis=1), 0.0)
    return out


def sample_two_point_sbm(measure: CharacteristicMeasure, t_max: float, dt: float,
                         stream: RngStream) -> TwoPointSbmPath:
    """Full gridded two-point sticky pair (X, Y) with coincidence time V."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = int(round(t_max / dt))
    ids = np.arange(1, dtype=np.uint64)
    x, y, v, g = backend.two_point_batch(
        child_keys(stream.child(TAG_WALK), ids),
        child_keys(stream.child(TAG_SUM), ids),
        child_keys(stream.child(TAG_SIGN), ids),
        n, dt, measure.lam, np.arange(n + 1, dtype=np.int64),
    )
    return TwoPointSbmPath(
        grid=dt * np.arange(n + 1),
        x=x[:, 0], y=y[:, 0], v=v[:, 0], g=g[:, 0], meta=measure,
    )


def two_point_endpoints(measure: CharacteristicMeasure, times, dt: float,
                        reps: int, stream: RngStream):
    """(x, y, v, g) arrays of shape (len(times), reps) for a replica batch,
    evaluated at the grid points nearest the requested times."""
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    t_max = float(times.max())
    n = int(round(t_max / dt))
    idx = np.round(times / dt).astype(np.int64)
    ids = np.arange(reps, dtype=np.uint64)
    return backend.two_point_batch(
        child_keys(stream.child(TAG_WALK), ids),
        child_keys(stream.child(TAG_SUM), ids),
        child_keys(stream.child(TAG_SIGN), ids),
        n, dt, measure.lam, idx,
    )


def girsanov_two_point_check(measure: CharacteristicMeasure, lam_drift: float,
                             t: float, f, dt: float, reps: int,
                             stream: RngStream) -> tuple[MomentEstimate, MomentEstimate]:
    """Both sides of the two-point drift-tilt identity on one path ensemble:

    LHS = E[exp(h(X_t+Y_t) - h^2 t) f(X_t - ht, Y_t - ht)]
    RHS = E[exp(h G_t + (h^2/2) V_t) f(X_t, Y_t)]

    with h = lam_drift and G the coincidence martingale (half the sticky
    part of the sum process, quadratic variation V).  The RHS combines the
    exponential martingale e^{hG - (h^2/2)V} with the extra factor
    e^{h^2 V} from the conditional law.
    """
    x, y, v, g = two_point_endpoints(measure, [t], dt, reps, stream)
    x, y, v, g = x[0], y[0], v[0], g[0]
    h = lam_drift
    lhs_samples = np.exp(h * (x + y) - h * h * t) * f(x - h * t, y - h * t)
    rhs_samples = np.exp(h * g + 0.5 * h * h * v) * f(x, y)
    seed = stream.describe()
    lhs_acc, rhs_acc = RunningMoments(), RunningMoments()
    lhs_acc.add(lhs_samples)
    rhs_acc.add(rhs_samples)
    return lhs_acc.estimate(seed), rhs_acc.estimate(seed)


def halfnormal_moment_bound(p: float) -> float:
    """E[(sqrt(2) M_1)^p] = 2^p Gamma((p+1)/2) / sqrt(pi) for the running
    max M of a standard Brownian motion at time 1."""
    return float(2.0**p * gamma((p + 1.0) / 2.0) / np.sqrt(np.pi))


def intersection_moment_bounds(measure: CharacteristicMeasure, p: float,
                               s: float, t: float, dt: float, reps: int,
                               stream: RngStream) -> tuple[MomentEstimate, float]:
    """MC estimate of E[(lam (V_t - V_s))^p] together with the dominating
    half-normal bound C_p |t - s|^{p/2}."""
    if not (0.0 <= s < t):
        raise ValueError("need 0 <= s < t")
    _, _, v, _ = two_point_endpoints(measure, [s, t], dt, reps, stream)
    samples = (measure.lam * np.maximum(v[1] - v[0], 0.0)) ** p
    acc = RunningMoments()
    acc.add(samples)
    bound = halfnormal_moment_bound(p) * (t - s) ** (p / 2.0)
    return acc.estimate(stream.describe()), bound
