import math

import numpy as np
import pytest
from scipy.special import lambertw

from levy_atm import levy_core as L
from levy_atm import presets
from levy_atm import regvar as R
from levy_atm.errors import AlphaDomain, BracketFailure, DegenerateRange, DomainError, NonMonotoneTail


def toy_tail(x):
    return float(presets.toy_gamma_star(x, 1.5))


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.9])
def test_index_of_exact_power(alpha):
    fit = R.rv_index_at_zero(lambda x: 3.0 * x ** -alpha, (1e-6, 1e-2))
    assert fit.alpha_hat == pytest.approx(alpha, abs=1e-9)
    assert abs(fit.diagnostics["loglog_coef"]) < 1e-8


def test_toy_index_needs_log_correction():
    fit = R.rv_index_at_zero(toy_tail, (1e-6, 1e-2))
    assert 1.45 <= fit.alpha_hat <= 1.55
    # a straight log-log slope is biased by the log(1/x) factor
    assert fit.diagnostics["plain_slope"] == pytest.approx(1.625, abs=2e-3)
    plain = R.rv_index_at_zero(toy_tail, (1e-6, 1e-2), log_correction=False)
    assert plain.alpha_hat == pytest.approx(fit.diagnostics["plain_slope"], rel=1e-12)


def test_index_tail_split_one_sided():
    jd = presets.piecewise_density([presets.Piece(0.0, 1.0, 1.0, -2.5)])
    m = L.LevyModel.calibrated(0.0, jd)
    fit = R.fit_model_tail(L.tail_functionals(m, [1.0]), (1e-6, 1e-3))
    assert fit.p_plus_hat == 1.0
    assert fit.alpha_hat == pytest.approx(1.5, abs=0.01)


def test_index_rejects_bad_input():
    with pytest.raises(DegenerateRange):
        R.rv_index_at_zero(toy_tail, (1e-2, 1e-6))
    with pytest.raises(NonMonotoneTail):
        R.rv_index_at_zero(lambda x: x, (1e-6, 1e-2))


def test_maller_mason_pure_power():
    tf = L.tail_functionals(presets.pure_power_law(1.5), [1.0])
    # x^{-2} U(x) = (16/3) x^{-1.5} = 1/t  at  t = 0.01
    b = R.scaling_maller_mason(tf, 0.01)
    assert b == pytest.approx((16 * 0.01 / 3) ** (2 / 3), rel=1e-10)
    assert b == pytest.approx(0.141688, abs=1e-6)
    assert R.scaling_maller_mason(tf, 0.01 * 2 ** 1.5) / b == pytest.approx(2.0, rel=1e-10)


def test_maller_mason_clamps_at_one():
    tf = L.tail_functionals(presets.pure_power_law(1.5), [1.0])
    assert R.scaling_maller_mason(tf, 10.0) == 1.0


def test_maller_mason_toy_ratio_matches_log_rate(toy):
    tf = L.tail_functionals(toy.share, [1.0])
    r = R.scaling_maller_mason(tf, 1e-4) / R.scaling_maller_mason(tf, 1e-6)
    f = R.log_rate_solved(1.5, 1.0, k=2 / 1.5)
    assert r == pytest.approx(16.223, abs=1e-3)
    assert r == pytest.approx(f(1e-4) / f(1e-6), rel=0.02)


@pytest.mark.parametrize("t", [1e-3, 1e-6, 1e-9])
@pytest.mark.parametrize("lam", [0.5, 1.0, 4.0])
def test_debruijn_constant_ell(t, lam):
    beta = R.debruijn_solve(lambda y: 2.0, 1.5, lam, t)
    assert beta == pytest.approx((lam / (2.0 * t)) ** (1 / 1.5), rel=1e-12)


def test_debruijn_toy_against_lambert_form():
    sc = R.debruijn(R.ell_from_tail(toy_tail, 1.5), 1.5, 1.0)
    f = R.log_rate_solved(1.5, 1.0, k=2 / 1.5)
    ratios = [sc(t) / f(t) for t in (1e-4, 1e-6, 1e-8, 1e-10)]
    assert ratios == pytest.approx([0.91904, 0.94608, 0.95994, 0.96825], abs=1e-4)
    assert np.all(np.diff(ratios) > 0)


def test_quoted_rate_is_off_by_growing_factor():
    sc = R.debruijn(R.ell_from_tail(toy_tail, 1.5), 1.5, 1.0)
    q = R.log_rate_quoted(1.5)
    ratios = [sc(t) / q(t) for t in (1e-4, 1e-6, 1e-8, 1e-10)]
    assert ratios == pytest.approx([11.069, 19.951, 30.152, 41.407], abs=1e-3)


def test_debruijn_errors():
    with pytest.raises(BracketFailure):
        R.debruijn_solve(lambda y: 1.0, 1.5, 1.0, 1e-40)
    with pytest.raises(AlphaDomain):
        R.debruijn_solve(lambda y: 1.0, 2.5, 1.0, 1e-4)
    with pytest.raises(DomainError):
        R.debruijn_solve(lambda y: 1.0, 1.5, -1.0, 1e-4)


def test_scaling_function_validation():
    sc = R.closed_form(lambda t: t ** 0.5, 2.0)
    assert sc(np.array([1e-4, 1e-2])).tolist() == pytest.approx([1e-2, 1e-1])
    with pytest.raises(DomainError):
        sc(0.0)
    with pytest.raises(ValueError):
        R.ScalingFunction(lambda t: t, "bogus", 1.5)


@pytest.mark.parametrize("y", np.geomspace(1e-3, 1e12, 31).tolist())
def test_lambert_w(y):
    w = R.lambert_w(y)
    assert abs(w * math.exp(w) - y) <= 1e-12 * y
    assert w == pytest.approx(lambertw(y).real, rel=1e-14)


def test_karamata_log_factor():
    res = R.karamata_check(math.log, 1.5, np.geomspace(10, 1e8, 8), x0=2.0)
    assert res["pass"]
    assert res["r"][-1] == pytest.approx(0.4, rel=0.05)
    assert np.all(np.diff(res["r"]) > 0)


def test_monotone_density_toy(toy):
    dens = lambda x: toy.share.jumps(x) + toy.share.jumps(-x)  # noqa: E731
    res = R.monotone_density_check(toy_tail, dens, 1.5, np.geomspace(1e-6, 1e-2, 5))
    assert res["pass"]
    assert abs(res["ratio"][0] - 1) < 0.1


def test_potter_and_monotone_scan():
    fit = R.rv_index_at_zero(toy_tail, (1e-6, 1e-2))
    assert R.potter_check(fit.ell_probe, 1.5, 0.2)["pass"]
    with pytest.raises(ValueError):
        R.potter_check(fit.ell_probe, 0.5, 0.2)
    assert R.monotone_scan(lambda x: x ** -0.5, 1e-8, 0.5)["monotone"]
    assert not R.monotone_scan(lambda x: np.sin(np.log(x)), 1e-8, 0.5)["monotone"]
