import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from blowup_lab import profiles as pr
from blowup_lab import radial_eigen as re_
from blowup_lab.exponent_calculus import rho


def bessel_log_phi(n, lam, r):
    """log of r**-(n-2)/2 I_{(n-2)/2}(lam r), the free radial eigenfunction."""
    nu = 0.5 * (n - 2)
    x = lam * np.asarray(r, dtype=float)
    return np.log(special.ive(nu, x)) + x - nu * np.log(r)


@pytest.mark.parametrize("v", [0.5, 2.0, 6.0])
def test_euler_oracle(v):
    prof = pr.scale_invariant(0.0, v, n=3)
    f = re_.solve_phi(prof, 0.0, 1e4)
    r = f.grid[f.grid <= 30]
    rel = np.abs(np.expm1(f.log_phi(r) - rho(v, 3) * np.log(r)))
    assert rel.max() < 1e-8


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("lam", [1.0, 0.2])
def test_free_matches_modified_bessel(n, lam):
    f = re_.solve_phi(pr.free(n), lam, 60.0 / lam)
    r = np.geomspace(f.r_min, 30.0 / lam, 200)
    ref = bessel_log_phi(n, lam, r) - bessel_log_phi(n, lam, 1.0 / lam)
    assert np.max(np.abs(np.expm1(f.log_phi(r) - ref))) < 1e-7


def test_sinh_oracle_and_normalization():
    f = re_.solve_phi(pr.free(3), 1.0, 30.0)
    assert float(f.phi(1.0)) == pytest.approx(1.0, abs=1e-10)
    r = f.grid
    ref = np.log(np.sinh(r) / r) - math.log(math.sinh(1.0))
    assert np.max(np.abs(np.expm1(f.logvals - ref))) < 1e-6


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 4.0), st.integers(2, 5), st.floats(0.05, 1.0))
def test_invariants_positive_monotone(v, n, lam):
    prof = pr.inverse_square_tail(v, n=n)
    f = re_.solve_phi(prof, lam, 12.0 / lam)
    inv = re_.check_invariants(f, prof)
    assert inv["positive"] and inv["monotone"]
    assert inv["ode_residual"] < 1e-2


def test_frobenius_seed_euler_exact():
    prof = pr.scale_invariant(0.0, 2.0, n=3)
    phi, dphi = re_.frobenius_seed(prof, 0.0, 1e-3)
    assert phi == pytest.approx(1e-3, rel=1e-14)
    assert dphi == pytest.approx(1.0, rel=1e-14)


def test_frobenius_seed_rejects_large_delta():
    with pytest.raises(ValueError):
        re_.frobenius_seed(pr.free(3), 1.0, 5.0)


def test_range_precondition():
    with pytest.raises(ValueError):
        re_.solve_phi(pr.free(3), 0.5, 5.0)
    with pytest.raises(ValueError):
        re_.solve_phi(pr.free(3), 0.0, 100.0)
    with pytest.raises(ValueError):
        re_.solve_phi(pr.free(3), -1.0, 100.0)


def test_too_singular_origin_rejected():
    prof = pr.CoefficientProfile(n=3, D=pr._zero, V=lambda r: 1.0 / np.asarray(r) ** 3,
                                 v_inf=0.0)
    with pytest.raises(pr.ProfileError):
        re_.solve_phi(prof, 1.0, 20.0)


def test_log_phi_outside_range():
    f = re_.solve_phi(pr.free(3), 1.0, 20.0)
    with pytest.raises(ValueError):
        f.log_phi(25.0)
    # below the seed radius the leading power is used (rho0 = 0 here)
    assert float(f.log_phi(0.0)) == pytest.approx(float(f.logvals[0]))


def test_csv_round_trip():
    f = re_.solve_phi(pr.gkw(), 1.0, 40.0)
    text = f.to_csv()
    g = re_.RadialFunction.from_csv(text, lam=1.0, n=3, rho0=f.rho0)
    assert np.allclose(g.logvals, f.logvals, rtol=0, atol=1e-14)
    assert np.array_equal(g.grid, f.grid)
    assert text == g.to_csv()


def test_csv_handles_huge_values():
    f = re_.solve_phi(pr.free(3), 1.0, 2000.0)
    assert f.logvals[-1] > 1000  # phi itself overflows a double
    g = re_.RadialFunction.from_csv(f.to_csv(), lam=1.0, n=3)
    assert g.logvals[-1] == pytest.approx(f.logvals[-1], rel=1e-15)


@pytest.mark.parametrize("prof, target", [
    (pr.free(3), 0.0), (pr.gkw(), 1.0), (pr.scattering(1.0, 2.0), 0.0),
    (pr.inverse_square_tail(2.0), 1.0)])
def test_power_tail_exponent(prof, target):
    f = re_.solve_phi(prof, 0.0, 1e4)
    fit = re_.fit_asymptotics(f, "power")
    assert abs(fit.exponent_estimate - target) <= 0.02 * max(1.0, target)


@pytest.mark.parametrize("prof", [pr.free(3), pr.scattering(1.0, 2.0), pr.free(2)])
def test_exp_power_tail_exponent(prof):
    f = re_.solve_phi(prof, 1.0, 600.0)
    fit = re_.fit_asymptotics(f, "exp_power")
    target = -(prof.n - 1 - prof.d_inf) / 2
    assert abs(fit.exponent_estimate - target) <= 0.05 * abs(target)


def test_fit_window_too_short():
    f = re_.solve_phi(pr.free(3), 1.0, 20.0)
    with pytest.raises(ValueError):
        re_.fit_asymptotics(f, "exp_power")
    with pytest.raises(ValueError):
        re_.fit_asymptotics(f, "spline")


def test_integral_identity():
    prof = pr.gkw()
    f = re_.solve_phi(prof, 0.0, 1e4)
    assert re_.integral_identity_residual(f, prof, 50.0) < 1e-8
    with pytest.raises(ValueError):
        re_.integral_identity_residual(re_.solve_phi(prof, 1.0, 20.0), prof, 5.0)


def test_log_growth_in_two_dimensions():
    prof = pr.critical_damping(0.0, 1.0, 4.0, n=2)
    f = re_.solve_phi(prof, 0.0, 1e4)
    assert re_.log_growth_ratio(f) < 3.0


def test_uniform_bound_small():
    rep = re_.uniform_bound_check(pr.free(3), [1.0, 0.1])
    assert rep.passed and rep.spread <= 10
    with pytest.raises(ValueError):
        re_.uniform_bound_check(pr.free(3), [2.0])
