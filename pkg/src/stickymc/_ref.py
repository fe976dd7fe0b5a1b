"""Pure-numpy reference implementations of the hot kernels.

The compiled extension (_ext) implements the same two entry points with
identical arithmetic, operation by operation, so both lanes return
bit-identical arrays.  This module is the fallback when the extension is
not built, and the reference in backend-equivalence tests.
"""

from __future__ import annotations

import numpy as np

from .rng import env_counter, normals_at, uniforms_at

SQRT2 = np.sqrt(2.0)


def evolve_kernel(key: int, n_steps: int, kind_code: int, param: float) -> np.ndarray:
    """Kernel probabilities after n_steps from delta_0.

    kind_code 0: constant_half (omega = 1/2, no draws); 1: two_point
    (omega = param or 1-param on a fair coin).  Returns the length
    n_steps+1 vector over sites -n, -n+2, ..., n.
    """
    probs = np.array([1.0])
    for m in range(n_steps):
        sites = np.arange(-m, m + 1, 2, dtype=np.int64)
        if kind_code == 0:
            omega = np.full(sites.size, 0.5)
        else:
            u = uniforms_at(key, env_counter(m, sites))
            omega = np.where(u < 0.5, param, 1.0 - param)
        down = probs * (1.0 - omega)
        up = probs * omega
        new = np.empty(probs.size + 1)
        new[0] = down[0]
        new[-1] = up[-1]
        new[1:-1] = down[1:] + up[:-1]
        probs = new
    return probs


def two_point_batch(
    keys_w: np.ndarray,
    keys_s: np.ndarray,
    keys_sign: np.ndarray,
    n_steps: int,
    dt: float,
    lam: float,
    idx_out: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Batch of two-point sticky pairs; returns (x, y, v, g) sampled at the
    grid indices idx_out, each of shape (len(idx_out), n_paths).

    Per path: the difference D = X - Y is sqrt(2) times a reflected
    Brownian path run through the inverse of the local-time clock
    T(u) = u + (sqrt(2)/lam) * L(u), with i.i.d. signs per excursion;
    V(t) = t - T^{-1}(t) is the coincidence time.  The sum S = X + Y is an
    independent Brownian motion at clock 2t + 2V(t), accumulated per step
    from a sticky part (variance 4 dV) and a free part (variance
    2(dt - dV)); G is half the sticky part, the k=2 coincidence
    martingale.
    """
    n_paths = len(keys_w)
    n = int(n_steps)
    idx_out = np.asarray(idx_out, dtype=np.int64)
    n_out = idx_out.size
    x_out = np.empty((n_out, n_paths))
    y_out = np.empty((n_out, n_paths))
    v_out = np.empty((n_out, n_paths))
    g_out = np.empty((n_out, n_paths))

    sqdt = np.sqrt(dt)
    grid = dt * np.arange(n + 1)
    steps = np.arange(n, dtype=np.uint64)
    c = SQRT2 / lam

    for p in range(n_paths):
        b = np.empty(n + 1)
        b[0] = 0.0
        np.cumsum(normals_at(int(keys_w[p]), steps) * sqdt, out=b[1:])
        m_run = np.maximum.accumulate(b)
        babs = m_run - b
        exc = np.cumsum(babs == 0.0)
        signs = np.where(
            uniforms_at(int(keys_sign[p]), np.arange(n + 1, dtype=np.uint64)) < 0.5,
            -1.0,
            1.0,
        )

        t_clock = grid + c * m_run
        i = np.searchsorted(t_clock, grid, side="right") - 1
        i = np.minimum(i, n - 1)
        frac = (grid - t_clock[i]) / (t_clock[i + 1] - t_clock[i])
        ustar = grid[i] + frac * dt
        v = np.maximum(grid - ustar, 0.0)
        babs_star = babs[i] + frac * (babs[i + 1] - babs[i])
        d = SQRT2 * signs[exc[i]] * babs_star

        dv = np.minimum(np.maximum(v[1:] - v[:-1], 0.0), dt)
        zs = normals_at(int(keys_s[p]), np.arange(2 * n, dtype=np.uint64))
        ds_sticky = np.sqrt(4.0 * dv) * zs[0::2]
        ds_free = np.sqrt(2.0 * (dt - dv)) * zs[1::2]
        s = np.empty(n + 1)
        s[0] = 0.0
        np.cumsum(ds_sticky + ds_free, out=s[1:])
        g = np.empty(n + 1)
        g[0] = 0.0
        np.cumsum(0.5 * ds_sticky, out=g[1:])

        x_out[:, p] = 0.5 * (s[idx_out] + d[idx_out])
        y_out[:, p] = 0.5 * (s[idx_out] - d[idx_out])
        v_out[:, p] = v[idx_out]
        g_out[:, p] = g[idx_out]

    return x_out, y_out, v_out, g_out
