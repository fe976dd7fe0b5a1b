"""Moment oracles for the stochastic heat equation with delta initial data.

Three independent routes to E[Z_t(x) Z_t(y)]:

  * bridge: p_t(x) p_t(y) E[exp((sigma/2) L)] where L is the local time at
    0 of the rate-2 bridge 0 -> x-y on [0, t], via the exact bridge law;
  * contour: double contour integral over vertical lines with the ratio
    (z2 - z1)/(z2 - z1 - sigma), by trapezoid quadrature;
  * Monte Carlo: simulated bridge ensembles with occupation local times
    (also the only route for k >= 3).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .bridge import bridge_exp_moment, rescale_bridge_lt
from .core import MomentEstimate, RngStream, RunningMoments
from .rng import TAG_BRIDGE, normals_at


def heat_kernel(t: float, x) -> np.ndarray:
    """Gaussian heat kernel p_t(x) = (2 pi t)^{-1/2} exp(-x^2 / 2t)."""
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-x * x / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)


def she_moment2_bridge(t: float, x: float, y: float, sigma: float) -> float:
    """Second moment via the exact bridge local-time law."""
    if not (t > 0 and sigma > 0):
        raise ValueError("t and sigma must be positive")
    spec, scale = rescale_bridge_lt(t, 2.0, x - y)
    exp_moment = bridge_exp_moment(replace(spec, theta=0.5 * sigma * scale))
    return float(heat_kernel(t, x) * heat_kernel(t, y) * exp_moment)


@dataclass(frozen=True)
class ContourSpec:
    """Vertical-line contours at abscissas r1 < r2 - sigma, truncated at
    |Im z| <= z_max with n_nodes trapezoid nodes per line."""

    r1: float
    r2: float
    z_max: float
    n_nodes: int

    @classmethod
    def default(cls, t: float, sigma: float) -> "ContourSpec":
        z_max = max(8.0, np.sqrt(40.0 / t))
        n_nodes = 2 * int(np.ceil(z_max / (z_max / 2000.0) / 2.0)) + 1
        return cls(r1=0.0, r2=sigma + 1.0, z_max=float(z_max), n_nodes=n_nodes)


def she_moment2_contour(t: float, x: float, y: float, sigma: float,
                        contour: ContourSpec | None = None) -> float:
    """Second moment via the double contour integral

        I = (2 pi i)^{-2} Int Int (z2-z1)/(z2-z1-sigma)
              exp((t/2)(z1^2+z2^2) + hi*z1 + lo*z2) dz1 dz2

    over z1 on r1 + iR and z2 on r2 + iR with r2 > r1 + sigma, where
    (lo, hi) = (min(x,y), max(x,y)): the larger point rides the inner
    contour.  Reducing the pole term with 1/(z2-z1-sigma) =
    int_0^inf e^{-s(z2-z1-sigma)} ds factorizes the correction into
    sigma * int_0^inf e^{s sigma} p_t(hi+s) p_t(lo-s) ds, which matches
    the bridge route exactly for hi >= lo.
    """
    if not (t > 0 and sigma > 0):
        raise ValueError("t and sigma must be positive")
    if contour is None:
        contour = ContourSpec.default(t, sigma)
    if not contour.r2 > contour.r1 + sigma:
        raise ValueError(
            f"contour crosses the pole: r2={contour.r2} <= r1+sigma={contour.r1 + sigma}"
        )
    lo, hi = (x, y) if x <= y else (y, x)
    w = np.linspace(-contour.z_max, contour.z_max, contour.n_nodes)
    dw = w[1] - w[0]
    z1 = contour.r1 + 1j * w
    z2 = contour.r2 + 1j * w
    f1 = np.exp(0.5 * t * z1 * z1 + hi * z1)
    f2 = np.exp(0.5 * t * z2 * z2 + lo * z2)
    total = 0.0 + 0.0j
    chunk = 256
    for i in range(0, z1.size, chunk):
        za = z1[i : i + chunk, None]
        ratio = (z2[None, :] - za) / (z2[None, :] - za - sigma)
        total += np.sum(f1[i : i + chunk, None] * f2[None, :] * ratio)
    # dz = i dw on each line, so dz1 dz2 / (2 pi i)^2 = -dw1 dw2 / (-4 pi^2)
    val = total * (dw * dw) / (4.0 * np.pi**2)
    if abs(val.imag) > 1e-10 * max(abs(val.real), 1e-300):
        raise ArithmeticError(f"contour quadrature imaginary residue too large: {val}")
    return float(val.real)


def she_moment_k_mc(t: float, points, sigma: float, dt: float, eps: float,
                    reps: int, stream: RngStream) -> MomentEstimate:
    """Monte Carlo k-th joint moment E[prod_i Z_t(x_i)] via bridge ensembles:
    prod_i p_t(x_i) * E[exp((sigma/2) sum_{i<j} L^{ij})] with occupation
    local-time estimates on the pairwise differences (rate-2 paths).
    All pairs come from one joint ensemble per replica."""
    pts = np.asarray(points, dtype=np.float64)
    prefactor = float(np.prod(heat_kernel(t, pts)))
    seed = stream.describe()
    if pts.size == 1:
        return MomentEstimate(mean=prefactor, stderr=0.0, n_replicas=1, seed=seed)
    weights = _pairwise_lt_weights(t, pts, sigma, dt, eps, reps, stream, bridges=True)
    acc = RunningMoments()
    acc.add(prefactor * weights)
    return acc.estimate(seed)


def x_moment_k_mc(t: float, phi, k: int, sigma: float, dt: float, eps: float,
                  reps: int, stream: RngStream) -> MomentEstimate:
    """Monte Carlo oracle for the k-th moment of the density field paired
    with a test function: E[prod_j phi(B^j_t) exp((sigma/2) sum_{i<j} L^{ij})]
    over k independent free Brownian motions."""
    endpoints, weights = _free_ensemble(t, k, sigma, dt, eps, reps, stream)
    vals = np.prod(phi.evaluate(endpoints), axis=1) * weights
    acc = RunningMoments()
    acc.add(vals)
    return acc.estimate(stream.describe())


def _bm_increments(stream: RngStream, rep0: int, reps: int, k: int, n: int,
                   dt: float) -> np.ndarray:
    """Deterministic (reps, k, n) increment block; keys per (replica, walker)."""
    out = np.empty((reps, k, n))
    ctr = np.arange(n, dtype=np.uint64)
    sq = np.sqrt(dt)
    for r in range(reps):
        for j in range(k):
            key = stream.child(TAG_BRIDGE, rep0 + r, j).key
            out[r, j, :] = normals_at(key, ctr) * sq
    return out


def _pair_weights_from_paths(paths: np.ndarray, dt: float, eps: float,
                             sigma: float) -> np.ndarray:
    """exp((sigma/2) sum_{i<j} L^{ij}) per replica from (reps, k, n+1) paths;
    pairwise differences have quadratic-variation rate 2."""
    reps, k, _ = paths.shape
    total_lt = np.zeros(reps)
    for i in range(k):
        for j in range(i + 1, k):
            diff = paths[:, i, :] - paths[:, j, :]
            hits = np.sum(np.abs(diff[:, :-1]) < eps, axis=1)
            total_lt += hits * dt * 2.0 / (2.0 * eps)
    return np.exp(0.5 * sigma * total_lt)


def _pairwise_lt_weights(t, pts, sigma, dt, eps, reps, stream, bridges):
    k = pts.size
    n = max(1, int(round(t / dt)))
    dt_eff = t / n
    weights = np.empty(reps)
    chunk = max(1, int(4_000_000 // (k * n)))
    s_over_t = np.arange(n + 1) * dt_eff / t
    for r0 in range(0, reps, chunk):
        r1 = min(reps, r0 + chunk)
        inc = _bm_increments(stream, r0, r1 - r0, k, n, dt_eff)
        w = np.concatenate(
            [np.zeros((r1 - r0, k, 1)), np.cumsum(inc, axis=2)], axis=2
        )
        if bridges:
            # pin W to the bridge endpoints x_i
            w = w + (pts[None, :, None] - w[:, :, -1:]) * s_over_t[None, None, :]
        weights[r0:r1] = _pair_weights_from_paths(w, dt_eff, eps, sigma)
    return weights


def _free_ensemble(t, k, sigma, dt, eps, reps, stream):
    n = max(1, int(round(t / dt)))
    dt_eff = t / n
    weights = np.empty(reps)
    endpoints = np.empty((reps, k))
    chunk = max(1, int(4_000_000 // (k * n)))
    for r0 in range(0, reps, chunk):
        r1 = min(reps, r0 + chunk)
        inc = _bm_increments(stream, r0, r1 - r0, k, n, dt_eff)
        w = np.concatenate(
            [np.zeros((r1 - r0, k, 1)), np.cumsum(inc, axis=2)], axis=2
        )
        weights[r0:r1] = _pair_weights_from_paths(w, dt_eff, eps, sigma)
        endpoints[r0:r1] = w[:, :, -1]
    return endpoints, weights
