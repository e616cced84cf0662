import json
import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import expn

from levy_atm import presets, pricing
from levy_atm import verify as V
from levy_atm.errors import ConfigHashMismatch, DomainError, GridError, PreconditionViolation, TailVanished
from levy_atm.presets import Piece


@pytest.fixture(scope="module")
def one_sided():
    return presets.custom([{"lo": 0.0, "hi": 1.0, "coef": 1.0, "power": -2.5}], alpha=1.5)


def _by_name(reports):
    return {r.check_name: r for r in reports}


# ---------------------------------------------------------------------------
# report plumbing


def test_judge_ops():
    assert V.judge({"a": 1.0}, {"a": ["<=", 1.0]})
    assert not V.judge({"a": 1.0}, {"a": ["<", 1.0]})
    assert V.judge({"a": 0.5}, {"a": ["in", [0.0, 1.0]]})
    assert not V.judge({"a": math.nan}, {"a": ["in", [0.0, 1.0]]})
    assert not V.judge({}, {"a": ["==", True]})


def test_report_pass_rederivable_after_round_trip():
    r = V.VerificationReport("x", {"model": "m"}, {"v": 0.3, "ok": True}, {"v": ["<", 0.5], "ok": ["==", True]})
    d = json.loads(json.dumps(r.to_dict()))
    assert d["pass"] is True
    back = V.VerificationReport.from_dict(d)
    assert back.passed and back.measured == r.measured
    d["measured"]["v"] = 0.7
    assert not V.VerificationReport.from_dict(d).passed


# ---------------------------------------------------------------------------
# assumptions


def test_toy_passes_all_assumptions(toy):
    reps = V.check_assumptions(toy)
    assert len(reps) == 4 and all(r.passed for r in reps), V.format_table(reps)


def test_symmetric_model_mu_bar(stable_model):
    reps = _by_name(V.check_assumptions(stable_model))
    assert all(r.passed for r in reps.values())
    assert reps["mu_bar_finite"].measured["finite"]


def test_bump_fails_exactly_a3():
    reps = V.check_assumptions(presets.bump())
    failed = [r.check_name for r in reps if not r.passed]
    assert failed == ["A3_monotone_density"]


def test_oscillatory_fails_a3_and_regular_variation():
    reps = V.check_assumptions(presets.oscillatory())
    failed = sorted(r.check_name for r in reps if not r.passed)
    assert failed == ["A1_regular_variation", "A3_monotone_density"]


def test_black_scholes_assumptions_vacuous(bs):
    reps = V.check_assumptions(bs)
    assert all(r.passed and "vacuous" in r.notes for r in reps)


# ---------------------------------------------------------------------------
# variance ratio


def test_vratio_pure_power_is_three():
    r = V.check_vratio(presets.pure_power_law(1.5), 0.01, 10.0)
    assert r.passed
    assert r.measured["sup"] == pytest.approx(3.0, rel=1e-8)
    assert r.measured["grid_variance"] < 1e-10


def test_vratio_toy(toy):
    r = V.check_vratio(toy, 0.01, 0.99)
    assert r.passed and math.isfinite(r.measured["sup"])


def test_vratio_bad_range(toy):
    with pytest.raises(DomainError):
        V.check_vratio(toy, 1.0, 0.5)


def test_vratio_vanishing_tail(one_sided):
    # no jumps beyond 1, so gamma is 0 there
    with pytest.raises(TailVanished):
        V.check_vratio(one_sided, 0.5, 2.0)


# ---------------------------------------------------------------------------
# share-tail integrability


def test_integrability_toy(toy):
    r = V.check_gamma_star_integrability(toy, 1.0)
    assert r.passed
    # int_1^inf (1/a) x^-a (ln x + 1/a) dx at a = 1.5
    assert r.measured["value"] == pytest.approx(32 / 9, rel=1e-8)


def test_integrability_tempered_incomplete_gamma_oracle():
    m = presets.tempered_inverse_square()
    for r0 in (0.5, 1.0, 3.0):
        r = V.check_gamma_star_integrability(m, r0)
        assert r.passed
        assert abs(r.measured["value"] - (expn(1, r0) - expn(2, r0))) < 1e-8


def test_integrability_black_scholes(bs):
    r = V.check_gamma_star_integrability(bs, 1.0)
    assert r.passed and r.measured["value"] == 0.0


def test_integrability_bad_r0(toy):
    with pytest.raises(DomainError):
        V.check_gamma_star_integrability(toy, 0.0)


# ---------------------------------------------------------------------------
# Esscher invariance


@pytest.mark.parametrize("name", ["toy_log", "symmetric_stable", "bump"])
def test_esscher_invariance_presets(name):
    r = V.check_esscher_invariance(presets.model_from_config({"preset": name}))
    assert r.passed, r.measured


def test_esscher_symmetric_near_zero(stable_model):
    m = V.check_esscher_invariance(stable_model).measured
    assert m["p_plus_P"] == pytest.approx(0.5, abs=0.01)
    assert m["p_plus_S"] == pytest.approx(0.5, abs=0.01)


def test_esscher_one_sided(one_sided):
    r = V.check_esscher_invariance(one_sided)
    assert r.passed
    assert r.measured["p_plus_P"] == pytest.approx(1.0, abs=1e-12)
    assert r.measured["p_plus_S"] == pytest.approx(1.0, abs=1e-12)


def test_esscher_needs_jumps(bs):
    with pytest.raises(DomainError):
        V.check_esscher_invariance(bs)


# ---------------------------------------------------------------------------
# concentration


def test_concentration_stable_example(stable_model):
    r = V.check_concentration(stable_model, [(1.0, 1e-3)], n_mc=20_000, seed=1)
    assert r.passed
    y, t, est, se, bound = r.measured["rows"][0]
    C = r.measured["C"]
    # physical density |x|^-2.5 e^-x on [-1, inf)
    f = lambda x: abs(x) ** -2.5 * math.exp(-x)  # noqa: E731
    gamma_quarter = quad(f, 0.25, np.inf)[0] + quad(f, -1.0, -0.25)[0]
    assert bound == pytest.approx((1 + C * math.e ** 2) * 1e-3 * gamma_quarter, rel=1e-6)
    assert est < bound


def test_concentration_vanishing_example(stable_model):
    r = V.check_concentration(stable_model, [(10.0, 1e-6)], n_mc=20_000, seed=2)
    y, t, est, se, bound = r.measured["rows"][0]
    assert r.passed and est == 0.0 and bound < 1e-5


def test_concentration_toy_sweep(toy):
    r = V.check_concentration(toy, V.admissible_pairs(toy, 100, seed=0), n_mc=20_000, seed=0)
    assert r.measured["n_pass"] == 100 and r.passed


def test_concentration_precondition(toy):
    with pytest.raises(PreconditionViolation):
        V.check_concentration(toy, [(1.0, -1e-3)])


def test_admissible_pairs_seed_pinned(toy):
    assert V.admissible_pairs(toy, 10, 5) == V.admissible_pairs(toy, 10, 5)
    assert V.admissible_pairs(toy, 10, 5) != V.admissible_pairs(toy, 10, 6)


# ---------------------------------------------------------------------------
# convergence and drift


def test_convergence_black_scholes_flat(bs):
    ts = 10.0 ** -np.arange(2.0, 8.5, 1.0)
    curve, rep = V.convergence_study(bs, ts)
    assert rep.passed
    assert np.all(np.abs(curve.local_slopes() - 0.5) < 1e-3)


def test_convergence_stable_slopes(stable_model):
    setup = pricing.first_order_setup(stable_model)
    ts = 10.0 ** -np.arange(2.0, 8.5, 1.0)
    curve, rep = V.convergence_study(stable_model, ts, setup.scaling, setup.law)
    slopes = curve.local_slopes()
    assert rep.passed
    assert abs(slopes[0] - 2 / 3) < 0.01  # smallest maturities first
    assert np.all(np.diff(np.abs(slopes - 2 / 3)) >= 0)


def test_convergence_grid_too_short(bs):
    with pytest.raises(GridError):
        V.convergence_study(bs, [1e-2, 1e-3, 1e-4])


def test_drift_scaling_toy(toy):
    sc = pricing.first_order_setup(toy).scaling
    assert not V.check_drift_scaling(toy, sc).passed  # t^{1/3} is still 1.7e-3 at k=8
    assert V.check_drift_scaling(toy, sc, ks=range(2, 10)).passed


# ---------------------------------------------------------------------------
# curves and the check registry


def test_compare_curves(bs):
    ts = [1e-2, 1e-3]
    a = pricing.price_curve(bs, ts, config_hash="aaa")
    b = pricing.price_curve(bs, ts, config_hash="aaa")
    assert V.compare_curves(a, b).passed
    with pytest.raises(ConfigHashMismatch):
        V.compare_curves(a, pricing.price_curve(bs, ts, config_hash="bbb"))
    with pytest.raises(GridError):
        V.compare_curves(a, pricing.price_curve(bs, [1e-2, 1e-4], config_hash="aaa"))


def test_run_checks_unknown(toy):
    with pytest.raises(KeyError):
        V.run_checks(toy, ["nope"])


def test_run_checks_vacuous_for_black_scholes(bs):
    reps = V.run_checks(bs, ["vratio", "esscher_invariance", "concentration"])
    assert all(r.passed for r in reps)


def test_custom_piece_density_is_one_sided(one_sided):
    assert one_sided.jumps(np.array([-0.5]))[0] == 0.0
    assert Piece(0.0, 1.0).power == -2.5
