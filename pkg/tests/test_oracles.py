import numpy as np
import pytest

from lowfreq import InvalidInputError, NumericalError, SecondOrderSystem, low_order_algebraic
from lowfreq.models import BeamConfig, StringConfig, string_fem
from lowfreq.oracles import (beam_analytic, extrapolate_low_order, numeric_transfer,
                             string_analytic, string_transfer)

VARYING = StringConfig(rho=[1.0, 1.0], T=[2.0, -1.0], d=[0.02, -0.01])


def test_constant_string_closed_form():
    x = np.linspace(0, 1, 5)
    w2, w1, w0 = string_analytic(x, StringConfig(d=0.01))
    assert w2 == 1.0 and w1 == pytest.approx(0.01)
    np.testing.assert_allclose(w0, (3 * x**2 - 1) / 6)


def test_string_w0_has_zero_mass_weighted_mean():
    x = np.linspace(0, 1, 2001)
    _, _, w0 = string_analytic(x, VARYING)
    rho = 1 + x
    assert np.trapezoid(rho * w0, x) == pytest.approx(0.0, abs=1e-7)


def test_quadrature_rules_agree():
    x = np.linspace(0, 1, 7)
    a = string_analytic(x, VARYING, method="quad")
    b = string_analytic(x, VARYING, method="gauss")
    np.testing.assert_allclose(a[2], b[2], rtol=1e-13, atol=1e-15)


def test_varying_coefficients_reduce_to_constant_case():
    x = np.linspace(0, 1, 9)
    poly = StringConfig(rho=[1.0, 0.0], T=[1.0, 0.0], d=[0.01, 0.0])
    np.testing.assert_allclose(string_analytic(x, poly)[2], string_analytic(x, StringConfig())[2],
                               atol=1e-13)


def test_string_transfer_laurent_terms():
    x = np.array([0.0, 0.5, 1.0])
    cfg = StringConfig()
    w2, w1, w0 = string_analytic(x, cfg)
    s = 1e-3
    g = string_transfer(x, s, cfg)
    np.testing.assert_allclose(g, w2 / s**2 + w1 / s + w0, rtol=1e-5)


def test_string_transfer_large_s_is_finite():
    g = string_transfer(np.array([0.0, 1.0]), 50.0)
    assert np.all(np.isfinite(g)) and abs(g[0]) < abs(g[1])


def test_beam_closed_form_values():
    cfg = BeamConfig(d=10.0)
    w2, w1, w0 = beam_analytic(np.array([0.0, 1.0]), cfg)
    np.testing.assert_allclose(w1, [-0.05, 0.1])
    np.testing.assert_allclose(w0, [1 / 800, -1 / 400])
    with pytest.raises(InvalidInputError):
        beam_analytic(1.0, BeamConfig(d=0.0))


def test_numeric_transfer_solves_resolvent():
    sys = string_fem(StringConfig(n_elem=10))
    s = 0.3 + 0.2j
    g = numeric_transfer(sys, s)
    A = s * s * sys.M + s * sys.D + sys.K
    np.testing.assert_allclose(A @ g, sys.b0[:, 0] + s * sys.b1[:, 0], atol=1e-12)


def test_extended_precision_matches_double_away_from_zero():
    sys = string_fem(StringConfig(n_elem=10))
    np.testing.assert_allclose(numeric_transfer(sys, 0.5, dps=30), numeric_transfer(sys, 0.5),
                               rtol=1e-12)
    with pytest.raises(InvalidInputError):
        numeric_transfer(sys, 0.5j, dps=30)


def test_transfer_singular_at_zero():
    sys = string_fem(StringConfig(n_elem=4))
    with pytest.raises(NumericalError):
        numeric_transfer(sys, 0.0)


def test_extrapolation_exact_for_laurent_polynomial():
    c = np.array([2.0, -1.0, 0.5])

    def G(s):
        return np.array([c[0] / s**2 + c[1] / s + c[2] + 0.1 * s**2])

    g2, g1, g0 = extrapolate_low_order(G, (0.1, 0.05, 0.025))
    np.testing.assert_allclose([g2[0], g1[0], g0[0]], c, rtol=1e-9)


def test_extrapolation_of_small_string():
    sys = string_fem(StringConfig(n_elem=20))
    lom = low_order_algebraic(sys)
    g2, g1, g0 = extrapolate_low_order(lambda s: numeric_transfer(sys, s, dps=40))
    for g, w in ((g2, lom.w2), (g1, lom.w1), (g0, lom.w0)):
        assert np.linalg.norm(g - w[:, 0]) <= 1e-8 * np.linalg.norm(w)


def test_extrapolation_rejects_bad_points():
    with pytest.raises(InvalidInputError):
        extrapolate_low_order(lambda s: np.zeros(1), (0.1, 0.1, 0.2))
