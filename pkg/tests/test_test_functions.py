import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from blowup_lab import profiles as pr
from blowup_lab import test_functions as tf
from blowup_lab import wave_sim as ws


def bq_free_oracle(t, r, q):
    """b_q for D = V = 0, n = 3: phi_lam(r) = sinh(lam r) / (lam r sinh 1)."""
    if r == 0:
        return special.gammainc(q, t) * special.gamma(q) / t**q / math.sinh(1.0)

    def f(lam):
        return math.exp(-lam * t) * math.sinh(lam * r) / (lam * r) * lam ** (q - 1)

    val, _ = integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-12, limit=200)
    return val / math.sinh(1.0)


@given(st.floats(0.01, 0.99))
def test_eta_derivatives_match_differences(x):
    T, h = 10.0, 1e-5
    t = x * T
    d1 = (tf.eta(t + h, T) - tf.eta(t - h, T)) / (2 * h)
    d2 = (tf.eta(t + h, T) - 2 * tf.eta(t, T) + tf.eta(t - h, T)) / h**2
    assert tf.eta(t, T, 1) == pytest.approx(d1, abs=1e-7)
    assert tf.eta(t, T, 2) == pytest.approx(d2, abs=1e-3)


@given(st.floats(0.01, 0.99), st.floats(2.0, 8.0))
def test_eta_power_derivative(x, k):
    T, h = 4.0, 1e-6
    t = x * T
    d1 = (tf.eta_power(t + h, T, k) - tf.eta_power(t - h, T, k)) / (2 * h)
    assert tf.eta_power(t, T, k, 1) == pytest.approx(d1, abs=1e-6)


def test_eta_support():
    T = 8.0
    assert tf.eta(np.array([0.0, 4.0]), T).tolist() == [1.0, 1.0]
    assert tf.eta(8.0, T) == 0.0 and tf.eta(9.0, T) == 0.0
    with pytest.raises(ValueError):
        tf.eta(1.0, 0.0)


def test_sphere_area():
    assert tf.sphere_area(2) == pytest.approx(2 * math.pi)
    assert tf.sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("t, r", [(10.0, 0.0), (100.0, 0.0), (1000.0, 0.0), (10.0, 5.0),
                                  (100.0, 60.0), (50.0, 51.0)])
@pytest.mark.parametrize("q", [0.5, 1.0, 1.7])
def test_bq_free_oracle(free_field, t, r, q):
    assert tf.bq(t, r, free_field, q) == pytest.approx(bq_free_oracle(t, r, q), rel=1e-6)


def test_bq_large_t_limit(free_field):
    for q in (0.5, 1.0, 2.0):
        t = 1e3
        val = t**q * tf.bq(t, 0.0, free_field, q) * math.sinh(1.0) / tf.gamma_limit(q)
        assert val == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("t, r", [(10.0, 0.0), (30.0, 20.0), (200.0, 100.0)])
def test_bq_time_identity(free_field, t, r):
    assert tf.bq_time_identity(t, r, free_field) < 1e-5


def test_bq_rejects_bad_q(free_field):
    with pytest.raises(ValueError):
        tf.bq(10.0, 0.0, free_field, q=0.0)


def test_bq_upper_check_free(free_field):
    below = tf.bq_upper_check(free_field, 0.5)
    above = tf.bq_upper_check(free_field, 1.5)
    assert below.passed and below.regime == "below"
    assert above.passed and above.regime == "above"
    with pytest.raises(ValueError):
        tf.bq_upper_check(free_field, 1.0)


@pytest.mark.parametrize("beta", [0.5, 1.0, 3.0])
def test_key_inequality_closed_form(beta):
    t, R = 20.0, 1.0
    exact = (math.exp(beta * R) - math.exp(-beta * t)) / beta
    assert tf.key_inequality_integral(0.0, beta, 0.0, R, t) == pytest.approx(exact, rel=1e-9)


def test_key_inequality_check():
    rep = tf.key_inequality_check(1.5, 1.0, 0.5, 1.0, np.geomspace(10, 1e4, 12))
    assert rep.passed
    with pytest.raises(ValueError):
        tf.key_inequality_check(1.0, 1.0, -1.0, 1.0, [10.0])
    with pytest.raises(ValueError):
        tf.key_inequality_check(1.0, 0.0, 0.0, 1.0, [10.0])


@given(st.floats(-3, 3), st.floats(-2, 2))
def test_fit_slope_recovers_power_law(a, c):
    T = np.geomspace(1e3, 1e4, 7)
    fit = tf.fit_slope(T, math.exp(c) * T**a)
    assert fit.slope == pytest.approx(a, abs=1e-9)
    assert not fit.log_flag


def test_fit_slope_detects_log_factor():
    T = np.geomspace(1e4, 1e5, 7)
    fit = tf.fit_slope(T, T**-0.5 * np.log(T) ** 2, expected=-0.5)
    assert fit.log_flag and fit.log_power == pytest.approx(2.0, abs=1e-6)
    assert fit.slope == pytest.approx(-0.5, abs=1e-6)
    with pytest.raises(ValueError):
        tf.fit_slope([1.0, 2.0], [1.0, 2.0])


def test_expected_exponents():
    gkw = pr.gkw()
    assert tf.expected_F0(gkw, 4 / 3) == (pytest.approx(1 - 4.0), 1)
    assert tf.expected_F0(gkw, 1.6)[0] == pytest.approx(-2 * 1.6 / 0.6 + 1 + 4)
    assert tf.expected_F0(gkw, 1.2)[0] == pytest.approx(1 - 6.0)
    assert tf.expected_F1(pr.free(3), 2.0) == pytest.approx(-2 + 3)
    crit = pr.critical_damping(0.0, 1.0, 4.0, n=2)
    assert tf.expected_F0(crit, 2.0) == (pytest.approx(-1.0), 2)


def test_F_divergence_guards():
    prof = pr.singular_demo(d0=0.5, v0=0.0, d_inf=0.0, v_inf=0.0)
    es = tf.thresholds(prof)
    with pytest.raises(tf.IntegralDivergence):
        tf.F1_estimate(prof, 0.5 * (1 + es.p1), [10, 20, 30])


def test_F1_slope_free():
    fit = tf.F1_estimate(pr.free(3), 2.0, np.geomspace(100, 1000, 5))
    assert fit.slope == pytest.approx(1.0, rel=0.01)


def test_data_functionals_free():
    prof = pr.free(3)
    g = ws.default_g(1.0)
    out = tf.data_functionals(prof, ws.zero_data, lambda r: float(g(np.array([r]))[0]))
    exact = 4 * math.pi * 0.5 * special.beta(1.5, 5)
    assert out.C1 == pytest.approx(exact, rel=1e-9)
    assert out.C2 > 0


def test_duality_residual_linear_free():
    prof = pr.free(3)
    fld = tf.TestFunctionField(prof, T=4.0, p=2.0)
    run = ws.evolve(ws.CauchyProblem(prof, 2.0, 1.0, nonlinear=False), ws.Grid(dr=0.05), 4.0,
                    record=True)
    rep = tf.duality_terms(run.trajectory, fld, 1.0)
    assert rep.residual < 1e-3 and rep.lhs > 0
    short = ws.evolve(ws.CauchyProblem(prof, 2.0, 1.0, nonlinear=False), ws.Grid(dr=0.05), 2.0,
                      record=True)
    with pytest.raises(ValueError):
        tf.duality_residual(short.trajectory, fld, 1.0)
