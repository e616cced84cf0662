"""Hypothesis property tests for identities that must hold on whole parameter ranges."""
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from levy_atm import levy_core as L
from levy_atm import pricing, regvar, verify
from levy_atm.cli import RunConfig
from levy_atm.stable import StableLaw, expected_positive_part, expected_positive_part_quad

alphas = st.floats(1.05, 1.95)
fast = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])


@fast
@given(sigma=st.floats(0.01, 3.0), t=st.floats(1e-8, 2.0))
def test_implied_vol_round_trip(sigma, t):
    assert pricing.implied_vol(pricing.bs_atm_price(sigma, t), t) == pytest.approx(sigma, rel=1e-10)


@fast
@given(logy=st.floats(-3.0, 12.0))
def test_lambert_identity(logy):
    y = 10.0 ** logy
    w = regvar.lambert_w(y)
    assert abs(w * math.exp(w) - y) <= 1e-12 * y


@fast
@given(alpha=alphas, p=st.floats(0.0, 1.0), c=st.floats(0.1, 10.0))
def test_positive_part_closed_form_vs_quadrature(alpha, p, c):
    law = StableLaw(alpha, c, p)
    assert expected_positive_part(law) == pytest.approx(expected_positive_part_quad(law), rel=1e-7)


@fast
@given(alpha=alphas, p=st.floats(0.0, 1.0), k=st.floats(0.01, 100.0))
def test_positive_part_scales_like_c_to_one_over_alpha(alpha, p, k):
    base = expected_positive_part(StableLaw(alpha, 1.0, p))
    assert expected_positive_part(StableLaw(alpha, k, p)) == pytest.approx(base * k ** (1 / alpha), rel=1e-12)


@fast
@given(alpha=alphas, lam=st.floats(0.1, 10.0), logt=st.floats(-12.0, -3.0))
def test_debruijn_solves_its_equation(alpha, lam, logt):
    t = 10.0 ** logt
    ell = lambda y: 2.0 + math.log(y)  # noqa: E731
    beta = regvar.debruijn_solve(ell, alpha, lam, t)
    assert t * beta ** alpha * ell(beta) == pytest.approx(lam, rel=1e-10)


@fast
@given(alpha=alphas, logt=st.floats(-12.0, -3.0))
def test_solved_log_rate_inverts_relation(alpha, logt):
    # t beta^alpha log(beta) = Lambda with k = 1, Lambda = 1
    t = 10.0 ** logt
    beta = 1.0 / regvar.log_rate_solved(alpha)(t)
    assert t * beta ** alpha * math.log(beta) == pytest.approx(1.0, rel=1e-10)


@fast
@given(alpha=alphas)
def test_rv_index_recovers_power(alpha):
    fit = regvar.rv_index_at_zero(lambda x: 3.0 * np.asarray(x) ** -alpha, (1e-6, 1e-2))
    assert fit.alpha_hat == pytest.approx(alpha, abs=1e-6)


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(u=st.floats(0.05, 200.0))
def test_esscher_identity(toy, u):
    share = toy.share
    lhs = complex(L.char_exponent(share, u))
    rhs = complex(L.char_exponent(toy, complex(u, -1.0))) - complex(L.char_exponent(toy, -1j))
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


@fast
@given(lo=st.integers(-12, -3), span=st.integers(1, 6), ppd=st.integers(1, 8))
def test_run_config_grid(lo, span, ppd):
    rc = RunConfig("price", {"preset": "toy_log"}, t_lo=10.0 ** lo, t_hi=10.0 ** (lo + span), ppd=ppd)
    ts = rc.t_grid()
    assert len(ts) == span * ppd + 1
    assert ts[0] == pytest.approx(10.0 ** lo) and ts[-1] == pytest.approx(10.0 ** (lo + span))
    assert np.allclose(np.diff(np.log10(ts)), 1.0 / ppd)


@fast
@given(v=st.floats(-10, 10, allow_nan=False), bound=st.floats(-10, 10))
def test_report_pass_is_pure_function(v, bound):
    r = verify.VerificationReport("p", {}, {"v": v}, {"v": ["<=", bound]})
    assert r.passed == (v <= bound)
    assert verify.VerificationReport.from_dict(r.to_dict()).passed == r.passed
