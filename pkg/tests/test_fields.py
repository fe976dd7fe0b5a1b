"""Moderate-deviation observables: density field, quadratic field, tail
field, and the quenched max CDF."""

import numpy as np
import pytest
from scipy.stats import binom

from stickymc.core import ModerateDeviationScaling
from stickymc.env import EnvModel, QuenchedKernel, evolve, kernel_tail, step_kernel
from stickymc.fields import (
    TestFunction,
    annealed_x_field,
    log_centering,
    max_cdf,
    q_field_accumulate,
    ray_start,
    tail_field,
    tail_first_moment_continuum,
    tail_first_moment_lattice,
    x_field,
)
from stickymc.rng import derive_stream


def test_test_function_support_clipping():
    phi = TestFunction.indicator(-1.0, 1.0)
    assert np.array_equal(phi.evaluate([-2.0, 0.0, 2.0]), [0.0, 1.0, 0.0])
    bump = TestFunction.gaussian_bump(0.0, 1.0)
    assert bump.evaluate(0.0) == 1.0
    assert bump.evaluate(100.0) == 0.0


def test_constant_phi_normalizes_exactly():
    # cosh centering makes the annealed tilted sum exactly 1
    phi = TestFunction.constant(1.0)
    for N in (16, 256, 1024):
        s = ModerateDeviationScaling(N=N, t=1.0)
        assert annealed_x_field(s, phi) == pytest.approx(1.0, abs=1e-12)


def test_x_field_free_walk_matches_enumeration():
    # constant_half kernel is the binomial; enumerate the tilted sum directly
    N, t = 16, 1.0
    s = ModerateDeviationScaling(N=N, t=t)
    phi = TestFunction.indicator(-1.0, 1.0)
    K = evolve(EnvModel.constant_half(), derive_stream(0, [1]), s.n)
    expected = 0.0
    c = s.n * np.log(np.cosh(s.theta))
    for j in range(s.n + 1):
        u = -s.n + 2 * j
        xv = (u - N**0.75 * t) / np.sqrt(N)
        if -1.0 <= xv <= 1.0:
            expected += np.exp(u * s.theta - c) * binom.pmf(j, s.n, 0.5)
    assert x_field(K, s, phi) == pytest.approx(expected, rel=1e-12)


def test_x_field_env_mc_matches_annealed():
    N, reps = 256, 200
    s = ModerateDeviationScaling(N=N, t=1.0)
    phi = TestFunction.gaussian_bump(0.0, 1.0)
    model = EnvModel.for_target(0.5)
    root = derive_stream(77, [])
    vals = np.array([
        x_field(evolve(model, root.child(r), s.n), s, phi) for r in range(reps)
    ])
    det = annealed_x_field(s, phi)
    stderr = vals.std(ddof=1) / np.sqrt(reps)
    assert abs(vals.mean() - det) <= 4.0 * stderr


def test_x_field_rejects_mismatched_kernel():
    s = ModerateDeviationScaling(N=16, t=1.0)
    K = evolve(EnvModel.constant_half(), derive_stream(0, [1]), 8)
    with pytest.raises(ValueError):
        x_field(K, s, TestFunction.constant())


def test_x_field_nonnegative_for_nonnegative_phi():
    s = ModerateDeviationScaling(N=64, t=1.0)
    model = EnvModel.for_target(0.5)
    phi = TestFunction.gaussian_bump(0.3, 0.5)
    for r in range(5):
        K = evolve(model, derive_stream(13, [r]), s.n)
        assert x_field(K, s, phi) >= 0.0


def test_centering_variants():
    s = ModerateDeviationScaling(N=256, t=1.0)
    assert log_centering(s, "cosh") == pytest.approx(s.n * np.log(np.cosh(s.theta)))
    assert log_centering(s, "continuum") == pytest.approx(0.5 * np.sqrt(256.0))
    with pytest.raises(ValueError):
        log_centering(s, "nonsense")


def test_q_field_single_atom_enumeration():
    # deterministic trajectory of point masses: the quadratic field reduces
    # to an explicit tilted sum computed here by hand
    N, t = 16, 1.0
    s = ModerateDeviationScaling(N=N, t=t)
    n = s.n
    kernels = [QuenchedKernel(n=m, offset=m, probs=np.array([1.0])) for m in range(n + 1)]
    psi = TestFunction.constant(1.0)
    expected = 0.0
    for m in range(n + 1):
        c = m * np.log(np.cosh(s.theta))
        expected += (1.0 / np.sqrt(N)) * np.exp(2.0 * (m * s.theta - c))
    got = q_field_accumulate(kernels, s, psi)
    assert got == pytest.approx(expected, rel=1e-12)


def test_q_field_requires_full_trajectory():
    s = ModerateDeviationScaling(N=4, t=1.0)
    with pytest.raises(ValueError):
        q_field_accumulate([QuenchedKernel.delta0()], s, TestFunction.constant())


def test_q_field_nondecreasing_in_time():
    # longer trajectories accumulate more nonnegative mass
    model = EnvModel.for_target(0.5)
    stream = derive_stream(19, [3])
    psi = TestFunction.constant(1.0)
    K = QuenchedKernel.delta0()
    kernels = [K]
    vals = []
    for m in range(1, 9):
        K = step_kernel(K, model, stream)
        kernels.append(K)
        s = ModerateDeviationScaling(N=8, t=m / 8.0)
        vals.append(q_field_accumulate(kernels[: s.n + 1], s, psi))
    assert np.all(np.diff(vals) >= 0.0)


def test_tail_field_detilted_monotone_in_x():
    s = ModerateDeviationScaling(N=256, t=1.0)
    model = EnvModel.for_target(0.5)
    a = 256.0**0.25
    for r in range(5):
        K = evolve(model, derive_stream(23, [r]), s.n)
        xs = np.linspace(-1.0, 1.0, 21)
        detilted = np.array([tail_field(K, s, x) * np.exp(-a * x) for x in xs])
        # ties (equal ray starts) may differ by rounding of exp(a x) e^{-a x}
        assert np.all(np.diff(detilted) <= 1e-12 * np.maximum(detilted[:-1], 1.0))


def test_tail_field_matches_kernel_tail():
    s = ModerateDeviationScaling(N=64, t=1.0)
    K = evolve(EnvModel.for_target(0.5), derive_stream(29, [0]), s.n)
    x = 0.25
    a = 64.0**0.25
    c = log_centering(s)
    manual = a * np.exp(c + a * x) * kernel_tail(K, ray_start(s, x))
    assert tail_field(K, s, x) == pytest.approx(manual, rel=1e-14)


def test_tail_first_moment_lattice_is_annealed_mean():
    # annealed kernel is binomial, so the lattice oracle is a direct
    # binomial survival value
    s = ModerateDeviationScaling(N=64, t=1.0)
    x = 0.0
    u0 = ray_start(s, x)
    kmin = int(np.ceil((u0 + s.n) / 2.0))
    sf = float(binom.sf(kmin - 1, s.n, 0.5))
    c = log_centering(s)
    a = 64.0**0.25
    assert tail_first_moment_lattice(s, x) == pytest.approx(a * np.exp(c + a * x) * sf)


def test_tail_first_moment_continuum_bounded():
    for N in (256, 1024, 4096):
        for x in (-0.5, 0.0, 0.5):
            v = tail_first_moment_continuum(N, 1.0, x)
            assert 0.0 < v <= 1.0 / np.sqrt(2.0 * np.pi) + 1e-9


def test_max_cdf_identity_and_edges():
    K = evolve(EnvModel.for_target(0.5), derive_stream(37, [0]), 50)
    for m in (-60, -10, 0, 10, 60):
        for k in (1, 5, 1000):
            assert max_cdf(K, k, m) == (1.0 - kernel_tail(K, m + 1)) ** k
    assert max_cdf(K, 1, 5) == pytest.approx(1.0 - kernel_tail(K, 6))
    assert max_cdf(K, 17, 100) == 1.0  # level above support
    with pytest.raises(ValueError):
        max_cdf(K, 0, 0)
