import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evidential.specfun import digamma, ln_gamma, trigamma

EULER_MASCHERONI = 0.57721566490153286060651209008240


def test_ln_gamma_at_one_is_zero():
    assert ln_gamma(1.0) == pytest.approx(0.0, abs=1e-14)


def test_ln_gamma_half():
    # Gamma(1/2) = sqrt(pi)
    assert ln_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), abs=1e-13)


def test_ln_gamma_six_is_log_120():
    assert ln_gamma(6.0) == pytest.approx(math.log(120.0), abs=1e-12)


def test_ln_gamma_factorial_chain():
    # Gamma(n+1) = n! for a run of small integers
    fact = 1.0
    for n in range(1, 15):
        fact *= n
        assert ln_gamma(n + 1.0) == pytest.approx(math.log(fact), rel=1e-14)


def test_digamma_at_one_is_minus_euler():
    assert digamma(1.0) == pytest.approx(-EULER_MASCHERONI, abs=1e-12)


def test_digamma_half():
    # psi(1/2) = -gamma - 2 ln 2
    expected = -EULER_MASCHERONI - 2.0 * math.log(2.0)
    assert digamma(0.5) == pytest.approx(expected, abs=1e-12)


def test_digamma_recurrence_unit_step():
    assert digamma(2.0) - digamma(1.0) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("x", np.geomspace(0.01, 100, 40).tolist())
def test_digamma_recurrence_grid(x):
    assert digamma(x + 1.0) - digamma(x) == pytest.approx(1.0 / x, abs=1e-10)


@pytest.mark.parametrize("x", np.linspace(1e-3, 1.0 - 1e-3, 30).tolist())
def test_ln_gamma_reflection(x):
    lhs = ln_gamma(x) + ln_gamma(1.0 - x)
    rhs = math.log(math.pi / math.sin(math.pi * x))
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_digamma_monotone_increasing():
    grid = np.geomspace(1e-3, 1e4, 300)
    values = digamma(grid)
    assert np.all(np.diff(values) > 0)


def test_against_high_precision_oracle():
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 30
    for x in np.geomspace(1e-3, 1e6, 60):
        lg_true = float(mpmath.loggamma(x))
        dg_true = float(mpmath.digamma(x))
        tg_true = float(mpmath.polygamma(1, x))
        # absolute tolerance where the magnitude allows it, relative
        # beyond (f64 cannot hold 1e-12 absolute once ln-gamma ~ 1e7)
        assert abs(ln_gamma(x) - lg_true) <= 1e-12 * max(1.0, abs(lg_true))
        assert abs(digamma(x) - dg_true) <= 1e-10 * max(1.0, abs(dg_true))
        assert abs(trigamma(x) - tg_true) <= 1e-10 * max(1.0, abs(tg_true))


def test_domain_errors():
    for bad in (0.0, -1.0, float("nan")):
        with pytest.raises(ValueError):
            ln_gamma(bad)
        with pytest.raises(ValueError):
            digamma(bad)
        with pytest.raises(ValueError):
            trigamma(bad)


def test_vectorized_matches_scalar():
    xs = np.array([0.002, 0.7, 3.0, 42.0])
    assert np.allclose(ln_gamma(xs), [ln_gamma(float(x)) for x in xs], rtol=0, atol=0)
    assert np.allclose(digamma(xs), [digamma(float(x)) for x in xs], rtol=0, atol=0)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.01, max_value=1000.0))
def test_ln_gamma_recurrence_property(x):
    # ln Gamma(x+1) = ln Gamma(x) + ln x
    assert ln_gamma(x + 1.0) - ln_gamma(x) == pytest.approx(
        math.log(x), abs=1e-10 * max(1.0, abs(math.log(x)))
    )


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.01, max_value=1000.0))
def test_trigamma_recurrence_property(x):
    assert trigamma(x) - trigamma(x + 1.0) == pytest.approx(1.0 / (x * x), rel=1e-9)
