"""Stochastic-heat-equation moment oracles: heat kernel, bridge and
contour second moments, and the Monte Carlo k-point estimators."""

import numpy as np
import pytest
from scipy.integrate import quad

from stickymc import she
from stickymc.bridge import bridge_lt_tail, BridgeSpec, rescale_bridge_lt
from stickymc.rng import derive_stream

# cross-validated value of E[Z_1(0)^2] at sigma = 1 (bridge and contour
# routes agree to 1e-9); pinned as a regression anchor
GOLDEN_M2 = 0.4345303059236455


def test_heat_kernel_values():
    assert float(she.heat_kernel(1.0, 0.0)) == pytest.approx(1.0 / np.sqrt(2 * np.pi))
    assert float(she.heat_kernel(2.0, 0.5)) == float(she.heat_kernel(2.0, -0.5))
    with pytest.raises(ValueError):
        she.heat_kernel(0.0, 1.0)


def test_heat_kernel_integrates_to_one():
    val, _ = quad(lambda x: float(she.heat_kernel(0.7, x)), -30, 30, limit=200)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_bridge_moment_golden_value():
    assert she.she_moment2_bridge(1.0, 0.0, 0.0, 1.0) == pytest.approx(GOLDEN_M2, abs=1e-12)


def test_contour_matches_golden_value():
    assert she.she_moment2_contour(1.0, 0.0, 0.0, 1.0) == pytest.approx(GOLDEN_M2, abs=1e-9)


def test_bridge_contour_agreement_off_diagonal():
    for t in (0.5, 2.0):
        for d in (0.3, 1.0):
            b = she.she_moment2_bridge(t, 0.0, d, 1.0)
            c = she.she_moment2_contour(t, 0.0, d, 1.0)
            assert abs(c - b) / b <= 1e-5


def test_symmetry_in_x_y():
    assert she.she_moment2_bridge(1.0, 0.2, -0.4, 1.5) == pytest.approx(
        she.she_moment2_bridge(1.0, -0.4, 0.2, 1.5)
    )
    assert she.she_moment2_contour(1.0, 0.2, -0.4, 1.5) == pytest.approx(
        she.she_moment2_contour(1.0, -0.4, 0.2, 1.5), rel=1e-9
    )


def test_small_sigma_limit_and_positivity():
    pp = float(she.heat_kernel(1.0, 0.0) * she.heat_kernel(1.0, 0.5))
    small = she.she_moment2_bridge(1.0, 0.0, 0.5, 1e-6)
    assert small == pytest.approx(pp, rel=1e-4)
    # local-time exponential >= 1: second moment dominates the product
    for sig in (0.5, 1.0, 2.0):
        assert she.she_moment2_bridge(1.0, 0.0, 0.5, sig) >= pp


def test_monotone_in_sigma_and_t_at_origin():
    vals_s = [she.she_moment2_bridge(1.0, 0.0, 0.0, s) for s in (0.5, 1.0, 2.0, 3.0)]
    assert np.all(np.diff(vals_s) > 0.0)
    # the local-time exponential moment grows with t
    em = []
    for t in (0.5, 1.0, 2.0, 4.0):
        em.append(she.she_moment2_bridge(t, 0.0, 0.0, 1.0) / float(she.heat_kernel(t, 0.0)) ** 2)
    assert np.all(np.diff(em) > 0.0)


def test_contour_rejects_pole_crossing():
    with pytest.raises(ValueError):
        she.she_moment2_contour(1.0, 0.0, 0.0, 1.0, she.ContourSpec(0.0, 0.5, 8.0, 1001))


def test_contour_refinement_plateau():
    base = she.she_moment2_contour(1.0, 0.0, 0.0, 1.0)
    fine = she.she_moment2_contour(
        1.0, 0.0, 0.0, 1.0, she.ContourSpec(0.0, 2.0, 16.0, 8001)
    )
    assert abs(fine - base) / base <= 1e-8


def test_mc_k1_is_exact_prefactor():
    est = she.she_moment_k_mc(1.0, [0.3], 1.0, 1e-2, 0.05, 10, derive_stream(0, [1]))
    assert est.mean == pytest.approx(float(she.heat_kernel(1.0, 0.3)))
    assert est.stderr == 0.0


def test_mc_k2_matches_bridge_oracle():
    t, sigma = 1.0, 1.0
    est = she.she_moment_k_mc(t, [0.0, 0.0], sigma, 2e-3, 0.03, 5000, derive_stream(1, [7]))
    oracle = she.she_moment2_bridge(t, 0.0, 0.0, sigma)
    # 4 stderr plus 3% occupation-estimator bias allowance
    assert abs(est.mean - oracle) <= 4.0 * est.stderr + 0.03 * oracle


def test_mc_k3_small_sigma_perturbation():
    # first-order expansion: prod p * (1 + (sigma/2) sum E[L_ij]); for three
    # points at 0 each pairwise difference is a rate-2 bridge 0 -> 0 on [0,1]
    # with E[L] = sqrt(2) * E[L_std] = sqrt(2) * sqrt(pi/2) = sqrt(pi)
    sigma = 0.1
    spec, scale = rescale_bridge_lt(1.0, 2.0, 0.0)
    mean_lt, _ = quad(lambda v: float(bridge_lt_tail(spec, v)), 0.0, 12.0)
    assert scale * mean_lt == pytest.approx(np.sqrt(np.pi), rel=1e-6)
    p = float(she.heat_kernel(1.0, 0.0))
    first_order = p**3 * (1.0 + 0.5 * sigma * 3.0 * scale * mean_lt)
    est = she.she_moment_k_mc(1.0, [0.0, 0.0, 0.0], sigma, 2e-3, 0.03, 4000,
                              derive_stream(2, [9]))
    # remainder of the expansion is O((sigma/2)^2 E[(sum L)^2]) ~ 4% here
    assert abs(est.mean - first_order) <= 4.0 * est.stderr + 0.04 * first_order


def test_x_moment_k_mc_deterministic():
    from stickymc.fields import TestFunction

    phi = TestFunction.gaussian_bump(0.0, 1.0)
    s = derive_stream(3, [4])
    a = she.x_moment_k_mc(1.0, phi, 2, 1.0, 5e-3, 0.05, 500, s)
    b = she.x_moment_k_mc(1.0, phi, 2, 1.0, 5e-3, 0.05, 500, s)
    assert a.mean == b.mean and a.stderr == b.stderr
