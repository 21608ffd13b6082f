import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, special

from slseng.channel import PathLossParams
from slseng.specfun import (DomainError, PoleError, QuadratureError, QuadratureSpec, SeriesError,
                            adaptive_quad, alternating_blockage_series, integrate_batch, lower_inc_gamma, n1,
                            n2, psi, scaled_lower_gamma, tricomi_u)


def test_n1_matches_csc():
    for k in (0.2, 0.4761904761904762, 0.8333333333333334, 1.5):
        assert_allclose(n1(k), math.pi / math.sin(math.pi * k), rtol=1e-14)


@pytest.mark.parametrize("k", [0.0, -0.5, 1.0, 2.0])
def test_n1_poles_raise(k):
    with pytest.raises(DomainError):
        n1(k)


def test_n1_integer_is_pole_error():
    with pytest.raises(PoleError):
        n1(3.0)


@pytest.mark.parametrize("k,nu", [(0.8333, 1.0), (0.4762, 0.01), (0.4762, 5.0), (1.3, 30.0)])
def test_n2_matches_shifted_integral(k, nu):
    # independent form: int_nu^inf (s - nu)^k e^-s / s ds
    ref = integrate.quad(lambda s: (s - nu) ** k * math.exp(-s) / s, nu, np.inf, epsabs=0, epsrel=1e-12,
                         limit=200)[0]
    assert_allclose(n2(k, nu), ref, rtol=1e-9)


def test_n2_at_zero_shift_is_gamma():
    assert_allclose(n2(1.0, 0.0), 1.0, rtol=1e-13)
    assert_allclose(n2(0.8333, 0.0), special.gamma(0.8333), rtol=1e-11)


def test_n2_huge_shift_underflows_to_zero():
    assert n2(0.5, 800.0) == 0.0


@pytest.mark.parametrize("a,b,z", [(0.4762, 0.4762, 0.3), (0.8333, 0.8333, 2.0), (1.0, 1.0, 1.0),
                                   (0.4762, 0.4762, 40.0), (2.5, 1.2, 0.7)])
def test_tricomi_u_matches_scipy(a, b, z):
    assert_allclose(tricomi_u(a, b, z), special.hyperu(a, b, z), rtol=1e-9)


def test_tricomi_u_identities():
    assert_allclose(tricomi_u(1.0, 1.0, 1.0), math.e * special.exp1(1.0), rtol=1e-12)
    for a, z in ((0.3, 0.5), (1.7, 4.0)):
        assert_allclose(tricomi_u(a, a + 1.0, z), z ** -a, rtol=1e-10)


@pytest.mark.parametrize("a,b", [(0.4, 1e-6), (0.8333, 0.5), (1.75, 3.0), (0.4762, 250.0)])
def test_lower_inc_gamma_matches_mpmath(a, b):
    ref = float(mpmath.gammainc(a, 0, b))
    assert_allclose(lower_inc_gamma(a, b), ref, rtol=1e-12)


@pytest.mark.parametrize("a,b", [(0.4, 1e-9), (0.8333, 0.5), (1.75, 3.0), (0.4762, 1e4), (3.0, 1e-3)])
def test_scaled_lower_gamma_matches_mpmath(a, b):
    ref = float(mpmath.gammainc(a, 0, b) * mpmath.mpf(b) ** (-a))
    assert_allclose(scaled_lower_gamma(a, b), ref, rtol=1e-12)


def test_scaled_lower_gamma_limits():
    assert_allclose(scaled_lower_gamma(0.5, 0.0), 2.0)
    assert scaled_lower_gamma(0.5, np.inf) == 0.0


@given(st.floats(0.05, 5.0), st.floats(1e-8, 1e4))
@settings(max_examples=200, deadline=None)
def test_scaled_lower_gamma_bounded_by_one_over_a(a, b):
    v = scaled_lower_gamma(a, b)
    assert 0.0 < v <= 1.0 / a * (1 + 1e-13)


def test_psi_unbounded_radius():
    plp = PathLossParams()
    a = 2.0 / plp.alpha_l
    assert_allclose(psi("L", 2, 3.0, np.inf, plp), 3.0 ** -a * special.gamma(a), rtol=1e-13)
    # NLOS variant carries a minus sign
    assert psi("N", 2, 3.0, 100.0, plp) < 0


def test_adaptive_quad_finite_and_breakpoints():
    v, err = adaptive_quad(np.sin, 0.0, math.pi)
    assert_allclose(v, 2.0, rtol=1e-13)
    step = lambda x: np.where(x < 0.3, 1.0, 2.0)  # noqa: E731
    v, _ = adaptive_quad(step, 0.0, 1.0, breakpoints=[0.3])
    assert_allclose(v, 0.3 + 1.4, rtol=1e-13)


def test_adaptive_quad_power_tail():
    # slow algebraic decay needs the power map
    v, _ = adaptive_quad(lambda x: x ** -1.4, 1.0, np.inf, tail_power=1 / 0.4)
    assert_allclose(v, 2.5, rtol=1e-9)


def test_integrate_batch_vector_valued_owners():
    lo = np.array([0.0, 0.0, 1.0])
    hi = np.array([1.0, 2.0, np.inf])
    powers = np.array([2.0, 3.0])

    def f(x, own):
        # integrand x^p e^-x per component; owner only changes the limits
        return x[None, :] ** powers[:, None] * np.exp(-x)[None, :]

    res = integrate_batch(f, lo, hi, rel_tol=1e-12, abs_tol=1e-15)
    for j, p in enumerate(powers):
        ref = [float(mpmath.gammainc(p + 1, a, b)) for a, b in zip(lo, hi)]
        assert_allclose(res.value[j], ref, rtol=1e-10)
    assert np.all(res.converged)


def test_integrate_batch_is_deterministic():
    f = lambda x, own: np.exp(-x) * np.cos(3 * x * (1 + own))  # noqa: E731
    r1 = integrate_batch(f, np.zeros(4), np.full(4, 10.0))
    r2 = integrate_batch(f, np.zeros(4), np.full(4, 10.0))
    assert np.array_equal(r1.value, r2.value)


def test_integrate_batch_reports_failure():
    with pytest.raises(QuadratureError):
        integrate_batch(lambda x, own: 1.0 / np.sqrt(np.abs(x - 0.37)) + np.sin(1e4 * x), [0.0], [1.0],
                        rel_tol=1e-14, abs_tol=0.0, max_subdivisions=20)


def test_alternating_series_exponential():
    res = alternating_blockage_series(lambda n: 1.0, 2.0)
    assert_allclose(res.value, math.exp(-2.0), rtol=1e-13)


def test_alternating_series_flags_cancellation():
    # e^-40 from terms of size 40^40/40! loses every digit
    with pytest.raises(SeriesError) as exc:
        alternating_blockage_series(lambda n: 1.0, 40.0, QuadratureSpec(series_max_terms=200))
    assert exc.value.reason in ("cancellation", "nonconvergence")


def test_alternating_series_flags_nonconvergence():
    with pytest.raises(SeriesError) as exc:
        alternating_blockage_series(lambda n: 1.0, 30.0, QuadratureSpec(series_max_terms=10))
    assert exc.value.reason == "nonconvergence"
