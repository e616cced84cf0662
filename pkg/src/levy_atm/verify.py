"""Numerical checks of the hypotheses and auxiliary bounds behind the first-order results.

Every check returns a :class:`VerificationReport`.  ``threshold`` maps a key
of ``measured`` to ``[op, bound]`` and ``passed`` is recomputed from those two
alone, so a report read back from JSON can be re-judged without rerunning it.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate as sp_integrate

from . import montecarlo as mc
from . import pricing
from .errors import (ConfigHashMismatch, DegenerateRange, DivergenceDetected, DomainError, GridError,
                     LevyAtmError, NonMonotoneTail, PreconditionViolation, TailVanished)
from .levy_core import LevyModel, mu_bar, tail_functionals, truncated_drift
from .regvar import ScalingFunction, monotone_scan, rv_index_at_zero
from .stable import StableLaw

_OPS = {
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
    "==": lambda a, b: a == b,
    "in": lambda a, b: b[0] < a < b[1],
}


def judge(measured: dict, threshold: dict) -> bool:
    for key, (op, bound) in threshold.items():
        v = measured.get(key)
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return False
        if not _OPS[op](v, bound):
            return False
    return True


@dataclass
class VerificationReport:
    check_name: str
    inputs: dict
    measured: dict
    threshold: dict
    passed: bool = field(init=False)
    notes: str = ""

    def __post_init__(self):
        self.passed = judge(self.measured, self.threshold)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return _jsonable(d)

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        return cls(d["check_name"], d["inputs"], d["measured"], d["threshold"], d.get("notes", ""))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def reports_to_json(reports: Sequence[VerificationReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)


def format_table(reports: Sequence[VerificationReport]) -> str:
    lines = [f"{'check':<28} {'result':<6} notes"]
    for r in reports:
        lines.append(f"{r.check_name:<28} {'PASS' if r.passed else 'FAIL':<6} {r.notes}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# assumptions


A1_RANGE = (1e-6, 1e-2)
A1_RESIDUAL = 0.02
A2_RANGE = (1.0, 50.0)
A3_RANGE = (1e-8, 0.5)


def _tails(model: LevyModel):
    return tail_functionals(model, [1.0], mu_points=8)


def _check_a1(model: LevyModel) -> VerificationReport:
    inputs = {"model": model.name, "x_range": list(A1_RANGE)}
    thr = {"alpha_hat": ["in", [1.0, 2.0]], "residual_rms": ["<=", A1_RESIDUAL]}
    tails = _tails(model)
    try:
        fit = rv_index_at_zero(tails.gamma, A1_RANGE, tail_plus=tails.gamma_plus)
    except (NonMonotoneTail, DegenerateRange) as exc:
        return VerificationReport("A1_regular_variation", inputs, {"alpha_hat": math.nan}, thr, str(exc))
    meas = {"alpha_hat": fit.alpha_hat, "residual_rms": fit.diagnostics["residual_rms"],
            "p_plus_hat": fit.p_plus_hat, "plain_slope": fit.diagnostics["plain_slope"],
            "loglog_coef": fit.diagnostics["loglog_coef"]}
    note = "" if fit.diagnostics["residual_rms"] <= A1_RESIDUAL else \
        "log gamma is not a power times a log-type factor on the range (oscillating slowly varying part)"
    return VerificationReport("A1_regular_variation", inputs, meas, thr, note)


def _check_a2(model: LevyModel, n: int = 60) -> VerificationReport:
    # V*(x) <= C x^2 gamma*(x) on [x1, 50]; C is the sup of the ratio, and a ratio
    # still climbing steeply at the right end means no finite C works
    inputs = {"model": model.name, "x_range": list(A2_RANGE), "n": n}
    thr = {"gamma_positive": ["==", True], "growth_25_50": ["<=", 1.5]}
    tails = _tails(model.share)
    xs = np.geomspace(*A2_RANGE, n)
    g = tails.gamma(xs)
    if np.any(g <= 0):
        return VerificationReport("A2_variance_ratio", inputs, {"gamma_positive": False}, thr,
                                  "share tail vanishes inside the range")
    r = tails.V(xs) / (xs ** 2 * g)
    r25 = float(np.interp(math.log(25.0), np.log(xs), r))
    meas = {"gamma_positive": True, "C": float(r.max()), "x1": A2_RANGE[0], "ratio_25": r25,
            "ratio_50": float(r[-1]), "growth_25_50": float(r[-1] / r25)}
    return VerificationReport("A2_variance_ratio", inputs, meas, thr)


def _check_a3(model: LevyModel, n: int = 400) -> VerificationReport:
    inputs = {"model": model.name, "x_range": list(A3_RANGE), "n": n}
    jd = model.share.jumps
    scan = monotone_scan(lambda x: x * x * (jd(x) + jd(-x)), *A3_RANGE, n=n)
    meas = {"monotone": scan["monotone"], "increasing_steps": scan["increasing_steps"],
            "decreasing_steps": scan["decreasing_steps"]}
    return VerificationReport("A3_monotone_density", inputs, meas, {"monotone": ["==", True]})


def _check_mu_bar(model: LevyModel) -> VerificationReport:
    mb = mu_bar(model)
    meas = {"finite": mb.finite, "mu_bar0": mb.mu_bar0, "mu_bar": mb.mu_bar, "tail_bound": mb.tail_bound}
    return VerificationReport("mu_bar_finite", {"model": model.name, "eta_range": [1e-8, 1.0]}, meas,
                              {"finite": ["==", True]}, mb.criterion)


def check_assumptions(model: LevyModel) -> list:
    """Reports for regular variation of the tail, the variance-ratio bound, monotonicity
    of ``x^2 xi*_S`` and finiteness of ``mu_bar``."""
    if not model.has_jumps:
        names = ("A1_regular_variation", "A2_variance_ratio", "A3_monotone_density", "mu_bar_finite")
        return [VerificationReport(n, {"model": model.name}, {"has_jumps": False},
                                   {"has_jumps": ["==", False]}, "vacuous: no jumps") for n in names]
    return [_check_a1(model), _check_a2(model), _check_a3(model), _check_mu_bar(model)]


# ---------------------------------------------------------------------------
# variance ratio and concentration


def _ratio_grid(tails, x, y, n):
    rs = np.geomspace(x, y, n)
    g = tails.gamma(rs)
    if np.any(g <= 0):
        raise TailVanished(f"gamma vanishes inside [{x:g}, {y:g}]")
    return tails.V(rs) / (rs ** 2 * g)


def check_vratio(model: LevyModel, x: float, y: float) -> VerificationReport:
    """``sup V(R) / (R^2 gamma(R))`` over ``R`` in ``[x, y]`` (physical measure)."""
    if not 0 < x < y:
        raise DomainError(f"need 0 < x < y, got x={x}, y={y}")
    tails = _tails(model)
    r200 = _ratio_grid(tails, x, y, 200)
    r400 = _ratio_grid(tails, x, y, 400)
    s200, s400 = float(r200.max()), float(r400.max())
    meas = {"sup": s200, "sup_refined": s400, "refinement_change": abs(s400 - s200) / s200,
            "grid_variance": float(np.var(r200)), "finite": bool(math.isfinite(s200))}
    return VerificationReport("vratio", {"model": model.name, "x": x, "y": y}, meas,
                              {"finite": ["==", True], "refinement_change": ["<", 0.01]})


def concentration_constant(model: LevyModel, y_max: float, lo: float = 1e-6, n: int = 200) -> float:
    """``C = sup V(R) / (R^2 gamma(R))`` over ``R`` in ``[lo, y_max/4]``."""
    return float(_ratio_grid(_tails(model), lo, y_max / 4.0, n).max())


def admissible_pairs(model: LevyModel, n: int, seed: int, y_range=(0.05, 2.0), t_range=(1e-5, 1e-2)):
    """``n`` seed-pinned pairs ``(y, t)``, log-uniform, with ``t < y / (4 (mu_{y/4})_+)``."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        y = float(math.exp(rng.uniform(*np.log(y_range))))
        t = float(math.exp(rng.uniform(*np.log(t_range))))
        mu = truncated_drift(model, y / 4.0)
        if mu <= 0 or t < y / (4.0 * mu):
            out.append((y, t))
    return out


def check_concentration(model: LevyModel, y_t_pairs, C: Optional[float] = None, n_mc: int = 20_000,
                        seed: int = 0) -> VerificationReport:
    """Monte Carlo ``P(X_t >= y)`` against ``(1 + C e^2) t gamma(y/4)`` for each pair."""
    pairs = [(float(y), float(t)) for y, t in y_t_pairs]
    bad = []
    for y, t in pairs:
        mu = truncated_drift(model, y / 4.0)
        if y <= 0 or t <= 0 or (mu > 0 and t >= y / (4.0 * mu)):
            bad.append((y, t))
    if bad:
        raise PreconditionViolation(f"pairs violating t < y/(4 mu_(y/4)+): {bad}")
    if C is None:
        C = concentration_constant(model, max(y for y, _ in pairs))
    tails = _tails(model)
    rows, worst = [], -math.inf
    eps_cache = {}
    for i, (y, t) in enumerate(pairs):
        key = round(math.log10(t) * 8)
        if key not in eps_cache:
            eps_cache[key] = mc.choose_eps(model, 10.0 ** (key / 8.0) * 1.0001) if model.has_jumps else None
        est, se = mc.mc_mean(lambda x, y=y: (x >= y).astype(float), model, t, n_mc, seed + i,
                             eps=eps_cache[key])
        bound = (1.0 + C * math.e ** 2) * t * float(tails.gamma(y / 4.0))
        worst = max(worst, (est - 3.0 * se) - bound)
        rows.append([y, t, est, se, bound])
    n_ok = sum(r[2] - 3.0 * r[3] <= r[4] for r in rows)
    meas = {"C": C, "n_pairs": len(rows), "n_pass": n_ok, "worst_excess": worst, "rows": rows}
    return VerificationReport("concentration", {"model": model.name, "n_mc": n_mc, "seed": seed}, meas,
                              {"n_pass": ["==", len(rows)]})


# ---------------------------------------------------------------------------
# integrability of the share tail


def check_gamma_star_integrability(model: LevyModel, R0: float, tol: float = 1e-12,
                                   r_max: float = 1e40) -> VerificationReport:
    """``int_{R0}^inf gamma*(y) dy`` by doubling panels until an increment drops below ``tol``."""
    if R0 <= 0:
        raise DomainError("R0 must be positive")
    inputs = {"model": model.name, "R0": R0, "tol": tol}
    thr = {"converged": ["==", True]}
    if not model.has_jumps:
        return VerificationReport("gamma_star_integrability", inputs,
                                  {"value": 0.0, "converged": True, "R_max": R0}, thr, "no jumps")
    g = pricing.share_tail_function(model)
    total, r, stalled, incs = 0.0, R0, 0, []
    while True:
        # in log coordinates the panel integrand y gamma*(y) is smooth
        inc = sp_integrate.quad(lambda s: math.exp(s) * g(math.exp(s)), math.log(r), math.log(2 * r),
                                epsabs=tol * 1e-3, epsrel=1e-12, limit=100)[0]
        total += inc
        incs.append(inc)
        r *= 2.0
        if inc < tol:
            break
        if len(incs) > 1 and inc >= 0.999 * incs[-2]:
            stalled += 1
        else:
            stalled = 0
        if stalled >= 8 or r > r_max:
            raise DivergenceDetected(f"increments not shrinking (last {inc:.3g} at R={r:.3g})")
    meas = {"value": total, "converged": True, "R_max": r, "panels": len(incs)}
    return VerificationReport("gamma_star_integrability", inputs, meas, thr)


# ---------------------------------------------------------------------------
# convergence of the price ratio


def convergence_study(model: LevyModel, t_grid, scaling: Optional[ScalingFunction] = None,
                      law: Optional[StableLaw] = None, from_above: Optional[float] = None, **kw):
    """Price curve plus a report on the ratio ``c / B_t`` and local slopes.

    (i) the relative steps ``|r_{k+1}/r_k - 1|`` of the ratio are nonincreasing
    over the smaller-maturity half of the grid.  (ii) with ``from_above = 1/alpha`` the
    smallest-maturity slope must lie in ``(1/alpha, 1/alpha + 0.05)`` and the
    last three slopes must decrease.  (ii) is an empirical signature of a log
    correction, not a theorem.
    """
    ts = np.sort(np.asarray(t_grid, dtype=float))[::-1]
    if ts[0] > 1e-2 * (1 + 1e-12) or math.log10(ts[0] / ts[-1]) < 4 - 1e-9:
        raise GridError("t_grid must lie below 1e-2 and span at least 4 decades")
    curve = pricing.price_curve(model, ts, scaling, law, **kw)
    ratio = np.asarray(curve.ratio)[::-1]  # largest t first
    steps = np.abs(np.diff(ratio) / ratio[:-1])
    tail = steps[len(steps) // 2:]
    slopes = curve.local_slopes()[::-1]
    meas = {"ratio": ratio.tolist(), "steps": steps.tolist(), "slopes": slopes.tolist(),
            "spread_shrinks": bool(np.all(np.diff(tail) <= 1e-12))}
    thr = {"spread_shrinks": ["==", True]}
    if from_above is not None:
        meas["last_slope"] = float(slopes[-1])
        meas["slopes_decreasing"] = bool(np.all(np.diff(slopes[-3:]) < 0))
        thr["last_slope"] = ["in", [from_above, from_above + 0.05]]
        thr["slopes_decreasing"] = ["==", True]
    rep = VerificationReport("convergence_study", {"model": model.name, "t_grid": ts.tolist(),
                                                   "from_above": from_above}, meas, thr)
    return curve, rep


def check_drift_scaling(model: LevyModel, scaling: ScalingFunction, ks=range(2, 9)) -> VerificationReport:
    """``t mu_bar beta_t`` at ``t = 10^-k`` decreases and ends below 1e-3."""
    mb = mu_bar(model)
    vals = [10.0 ** -k * mb.mu_bar / float(scaling(10.0 ** -k)) for k in ks]
    meas = {"values": vals, "last": vals[-1], "decreasing": bool(np.all(np.diff(vals) < 0)),
            "mu_bar_finite": mb.finite}
    return VerificationReport("drift_scaling", {"model": model.name, "k": list(ks)}, meas,
                              {"mu_bar_finite": ["==", True], "decreasing": ["==", True],
                               "last": ["<", 1e-3]})


# ---------------------------------------------------------------------------
# Esscher invariance


def _fit_side(model, x_range):
    tails = _tails(model)
    fit = rv_index_at_zero(tails.gamma, x_range, tail_plus=tails.gamma_plus)
    return fit, mu_bar(model)


def check_esscher_invariance(model: LevyModel, x_range=A1_RANGE) -> VerificationReport:
    """Index, tail split and ``mu_bar`` finiteness agree under ``P`` and ``P*``."""
    if not model.has_jumps:
        raise DomainError("Esscher invariance needs jumps")
    fp, mp = _fit_side(model, x_range)
    fs, ms = _fit_side(model.share, x_range)
    meas = {"alpha_P": fp.alpha_hat, "alpha_S": fs.alpha_hat, "d_alpha": abs(fp.alpha_hat - fs.alpha_hat),
            "p_plus_P": fp.p_plus_hat, "p_plus_S": fs.p_plus_hat,
            "d_p": abs(fp.p_plus_hat - fs.p_plus_hat),
            "finite_P": mp.finite, "finite_S": ms.finite, "flags_agree": mp.finite == ms.finite}
    return VerificationReport("esscher_invariance", {"model": model.name, "x_range": list(x_range)}, meas,
                              {"d_alpha": ["<=", 0.02], "d_p": ["<=", 0.01], "flags_agree": ["==", True]})


# ---------------------------------------------------------------------------
# curve comparison


def compare_curves(a: pricing.PriceCurve, b: pricing.PriceCurve, rtol: float = 1e-12) -> VerificationReport:
    """Exact prices of two curves agree to ``rtol``; curves from different configs refuse to compare."""
    if a.config_hash != b.config_hash:
        raise ConfigHashMismatch(f"{a.config_hash!r} != {b.config_hash!r}")
    if tuple(a.maturities) != tuple(b.maturities):
        raise GridError("curves are on different maturity grids")
    ea, eb = np.asarray(a.exact), np.asarray(b.exact)
    diff = float(np.max(np.abs(ea - eb) / np.abs(eb))) if ea.size else 0.0
    return VerificationReport("compare_curves", {"config_hash": a.config_hash, "rtol": rtol},
                              {"max_rel_diff": diff}, {"max_rel_diff": ["<=", rtol]})


CHECKS: dict = {}


DEFAULT_CHECKS = ("assumptions", "vratio", "gamma_star_integrability", "esscher_invariance", "concentration",
                  "convergence")


def run_checks(model: LevyModel, names: Sequence[str], params: Optional[dict] = None) -> list:
    """Run the named checks with default arguments (overridable per check in ``params``)."""
    params = params or {}
    out = []
    for name in names:
        if name not in CHECKS:
            raise KeyError(f"unknown check {name!r}; expected one of {sorted(CHECKS)}")
        if not model.has_jumps and name in _JUMP_ONLY:
            out.append(VerificationReport(name, {"model": model.name}, {"has_jumps": False},
                                          {"has_jumps": ["==", False]}, "vacuous: no jumps"))
            continue
        res = CHECKS[name](model, **params.get(name, {}))
        out.extend(res if isinstance(res, list) else [res])
    return out


def _assumptions(model):
    return check_assumptions(model)


def _vratio(model, x=0.01, y=0.99):
    return check_vratio(model, x, y)


def _integrability(model, R0=1.0):
    return check_gamma_star_integrability(model, R0)


_JUMP_ONLY = ("vratio", "esscher_invariance", "concentration")


def _esscher(model):
    return check_esscher_invariance(model)


def _concentration(model, n_pairs=100, seed=0, n_mc=20_000):
    return check_concentration(model, admissible_pairs(model, n_pairs, seed), n_mc=n_mc, seed=seed)


def _convergence(model, t_grid=None, scaling="debruijn_numeric", from_above=None):
    ts = np.asarray(t_grid if t_grid is not None else 10.0 ** -np.arange(2.0, 8.25, 0.5))
    if model.sigma > 0:
        return convergence_study(model, ts, from_above=from_above)[1]
    setup = pricing.first_order_setup(model, scaling, t_ref=float(ts.min()))
    return convergence_study(model, ts, setup.scaling, setup.law, from_above=from_above)[1]


def _drift(model, scaling="debruijn_numeric"):
    if model.sigma > 0 or not model.has_jumps:
        sc = ScalingFunction(math.sqrt, "closed_form", 2.0)
    else:
        sc = pricing.first_order_setup(model, scaling).scaling
    return check_drift_scaling(model, sc)


CHECKS.update({"assumptions": _assumptions, "vratio": _vratio, "gamma_star_integrability": _integrability,
               "esscher_invariance": _esscher, "concentration": _concentration, "convergence": _convergence,
               "drift_scaling": _drift})

__all__ = ["VerificationReport", "judge", "check_assumptions", "check_vratio", "check_concentration",
           "admissible_pairs", "concentration_constant", "check_gamma_star_integrability",
           "convergence_study", "check_drift_scaling", "check_esscher_invariance", "compare_curves",
           "run_checks", "reports_to_json", "format_table", "CHECKS", "LevyAtmError"]
