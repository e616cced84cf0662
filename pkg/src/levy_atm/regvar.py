"""Regular variation at the origin: index fits, small-time scalings, and diagnostics.

A tail ``gamma`` regularly varying of index ``-alpha`` at 0 is written
``gamma(x) = x^{-alpha} ell(1/x)`` with ``ell`` slowly varying at infinity, so
``ell(y) = y^{-alpha} gamma(1/y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize

from . import quadrature as quad
from .errors import (AlphaDomain, BracketFailure, DegenerateRange, DomainError, NonMonotoneTail,
                     TailDegenerate)
from .levy_core import TailFunctionals

KINDS = ("maller_mason_inf", "debruijn_numeric", "closed_form")


def _vec(fn, x):
    arr = np.asarray(x, dtype=float)
    try:
        out = np.asarray(fn(arr), dtype=float)
        if out.shape == arr.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(float(v))) for v in arr.ravel()]).reshape(arr.shape)


# ---------------------------------------------------------------------------
# index estimation


@dataclass(frozen=True)
class RVFit:
    alpha_hat: float
    ell_probe: tuple
    p_plus_hat: float
    p_minus_hat: float
    diagnostics: dict = field(default_factory=dict)

    def ell(self, y):
        """Interpolated slowly varying factor (log-linear in ``log y``) from the probes."""
        xs = np.array([p[0] for p in self.ell_probe])
        ls = np.array([p[1] for p in self.ell_probe])
        ys = 1.0 / xs[::-1]
        return np.interp(np.log(y), np.log(ys), ls[::-1])


def rv_index_at_zero(tail: Callable, x_range, tail_plus: Optional[Callable] = None,
                     tail_minus: Optional[Callable] = None, n: int = 40,
                     log_correction: Optional[bool] = None) -> RVFit:
    """Least-squares estimate of the index ``alpha`` of ``tail(x) ~ x^{-alpha} ell(1/x)`` as ``x -> 0``.

    With ``log_correction`` the regression also carries a ``k log log(1/x)``
    term, which absorbs logarithmic slowly varying factors that would
    otherwise bias a finite-range slope.  The default switches it on when
    the whole range lies below 1.
    """
    lo, hi = map(float, x_range)
    if not 0 < lo < hi:
        raise DegenerateRange(f"need 0 < lo < hi, got ({lo}, {hi})")
    xs = np.geomspace(lo, hi, n)
    g = _vec(tail, xs)
    if np.any(~np.isfinite(g)) or np.any(g <= 0):
        raise NonMonotoneTail("tail must be positive and finite on the range")
    if np.any(np.diff(g) > 1e-12 * g[:-1]):
        raise NonMonotoneTail("tail increases somewhere on the range")
    if log_correction is None:
        log_correction = hi < 1.0
    log_correction = bool(log_correction and hi < 1.0)
    lx = np.log(xs)
    cols = [np.ones_like(lx), -lx]
    if log_correction:
        cols.append(np.log(-lx))
    design = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(design, np.log(g), rcond=None)
    resid = np.log(g) - design @ coef
    alpha_hat = float(coef[1])
    if alpha_hat <= 0:
        raise NonMonotoneTail(f"fitted index {alpha_hat:.4g} is not positive")
    ell = tuple((float(x), float(x ** alpha_hat * gx)) for x, gx in zip(xs, g))
    p_plus = 0.5
    if tail_plus is not None or tail_minus is not None:
        x_small = xs[xs <= lo * 10.0]
        if tail_plus is not None:
            gp = _vec(tail_plus, x_small)
        else:
            gp = _vec(tail, x_small) - _vec(tail_minus, x_small)
        p_plus = float(np.clip(np.mean(gp / _vec(tail, x_small)), 0.0, 1.0))
    diag = {"residual_rms": float(np.sqrt(np.mean(resid ** 2))), "log_correction": log_correction,
            "loglog_coef": float(coef[2]) if log_correction else 0.0, "plain_slope":
            float(-np.polyfit(lx, np.log(g), 1)[0])}
    return RVFit(alpha_hat, ell, p_plus, 1.0 - p_plus, diag)


def fit_model_tail(tails: TailFunctionals, x_range=(1e-6, 1e-2), **kw) -> RVFit:
    """:func:`rv_index_at_zero` applied to the two-sided tail of a model."""
    return rv_index_at_zero(tails.gamma, x_range, tail_plus=tails.gamma_plus, **kw)


# ---------------------------------------------------------------------------
# scaling functions


@dataclass(frozen=True)
class ScalingFunction:
    """Small-time normalisation ``t -> B_t``.

    ``tail`` (optional) is the two-sided share tail, used to report the
    effective constant ``Lambda_eff(t) = t gamma*(B_t)``.
    """

    fn: Callable[[float], float]
    kind: str
    alpha: float
    lambda_const: Optional[float] = None
    tail: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scaling kind {self.kind!r}")
        if not 1.0 < self.alpha <= 2.0:
            raise AlphaDomain(f"alpha must lie in (1, 2], got {self.alpha}")

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        if np.any(arr <= 0):
            raise DomainError("t must be positive")
        if arr.ndim == 0:
            return float(self.fn(float(arr)))
        return np.array([float(self.fn(float(v))) for v in arr.ravel()]).reshape(arr.shape)

    eval = __call__

    def lambda_eff(self, t: float) -> float:
        """``t beta^alpha ell(beta)`` at ``beta = 1/B_t``, i.e. ``t gamma(B_t)``."""
        if self.kind == "debruijn_numeric" and self.lambda_const is not None:
            return self.lambda_const
        if self.tail is None:
            if self.lambda_const is None:
                raise ValueError("no tail attached and no constant known")
            return self.lambda_const
        return float(t * self.tail(self(t)))


def scaling_maller_mason(tails: TailFunctionals, t: float) -> float:
    """``B_t = inf{0 < x <= 1 : x^{-2} U(x) <= 1/t}`` by root finding in ``log x``."""
    if t <= 0:
        raise DomainError("t must be positive")
    u1 = float(tails.U(1.0))
    if u1 <= 0:
        raise TailDegenerate("U vanishes on (0, 1]; use the sqrt(t) scaling")
    if u1 >= 1.0 / t:
        # x^-2 U(x) is nonincreasing, so the set is empty or starts at x = 1
        return 1.0
    h = lambda lx: math.log(float(tails.U(math.exp(lx)))) - 2.0 * lx + math.log(t)  # noqa: E731
    lo = math.log(1e-16)
    if h(lo) < 0:
        raise BracketFailure("x^-2 U(x) <= 1/t already at x = 1e-16")
    root = optimize.brentq(h, lo, 0.0, xtol=1e-12, rtol=1e-13, maxiter=200)
    return math.exp(root)


def maller_mason(tails: TailFunctionals, alpha: float, share_tail: Optional[Callable] = None) -> ScalingFunction:
    return ScalingFunction(lambda t: scaling_maller_mason(tails, t), "maller_mason_inf", alpha,
                           tail=share_tail)


def debruijn_solve(ell: Callable[[float], float], alpha: float, lambda_const: float, t: float) -> float:
    """``beta_t`` solving ``t beta^alpha ell(beta) = Lambda`` (so ``B_t = 1/beta_t``)."""
    if lambda_const <= 0 or t <= 0:
        raise DomainError("Lambda and t must be positive")
    if not 1.0 < alpha < 2.0:
        raise AlphaDomain(f"alpha must lie in (1, 2), got {alpha}")

    def h(lb):
        return math.log(t) + alpha * lb + math.log(float(ell(math.exp(lb)))) - math.log(lambda_const)

    lo, hi = 0.0, math.log(1e16)
    try:
        hlo, hhi = h(lo), h(hi)
    except (ValueError, ZeroDivisionError):
        raise BracketFailure("ell is not positive on the bracket [1, 1e16]") from None
    if not (hlo <= 0.0 <= hhi):
        raise BracketFailure(f"no sign change of t beta^alpha ell(beta) - Lambda on [1, 1e16] (t={t:g})")
    if hlo == 0.0:
        return 1.0
    root = optimize.brentq(h, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=300)
    return math.exp(root)


def ell_from_tail(tail: Callable[[float], float], alpha: float) -> Callable[[float], float]:
    """``ell(y) = y^{-alpha} gamma(1/y)``."""
    return lambda y: float(y ** (-alpha) * tail(1.0 / y))


def debruijn(ell: Callable[[float], float], alpha: float, lambda_const: float = 1.0,
             share_tail: Optional[Callable] = None) -> ScalingFunction:
    return ScalingFunction(lambda t: 1.0 / debruijn_solve(ell, alpha, lambda_const, t), "debruijn_numeric",
                           alpha, lambda_const, tail=share_tail)


def closed_form(fn: Callable[[float], float], alpha: float, lambda_const: Optional[float] = None,
                share_tail: Optional[Callable] = None) -> ScalingFunction:
    return ScalingFunction(fn, "closed_form", alpha, lambda_const, tail=share_tail)


def log_rate_quoted(alpha: float, lam: float = 1.0) -> Callable[[float], float]:
    """``(alpha Lambda t / log(alpha Lambda / t))^{1/alpha}``, the textbook form of the log-corrected rate."""
    return lambda t: (alpha * lam * t / math.log(alpha * lam / t)) ** (1.0 / alpha)


def log_rate_solved(alpha: float, lam: float = 1.0, k: float = 1.0) -> Callable[[float], float]:
    """Exact inverse of ``t beta^alpha k log(beta) = Lambda`` via Lambert W.

    With ``y = alpha Lambda / (k t)``: ``beta^alpha = y / W(y)``, so
    ``B_t = (k t W(y) / (alpha Lambda))^{1/alpha} ~ (k t log(1/t) / (alpha Lambda))^{1/alpha}``.
    """
    def fn(t):
        y = alpha * lam / (k * t)
        return (k * t * lambert_w(y) / (alpha * lam)) ** (1.0 / alpha)
    return fn


# ---------------------------------------------------------------------------
# Lambert W


def lambert_w(y: float, tol: float = 1e-15, maxiter: int = 100) -> float:
    """Principal branch of ``W`` by Halley iteration."""
    y = float(y)
    if y < -1.0 / math.e:
        if y > -1.0 / math.e - 1e-15:
            return -1.0
        raise DomainError(f"lambert_w needs y >= -1/e, got {y}")
    if y == 0.0:
        return 0.0
    if y == math.inf:
        return math.inf
    if y > 0:
        w = math.log1p(y)
        if y > 3.0:
            lw = math.log(y)
            w = lw - math.log(lw)
    else:
        p = math.sqrt(max(2.0 * (math.e * y + 1.0), 0.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    for _ in range(maxiter):
        ew = math.exp(w)
        f = w * ew - y
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= tol * (1.0 + abs(w)):
            break
    return w


# ---------------------------------------------------------------------------
# appendix-style diagnostics


def potter_check(ell_probes: Sequence, A: float, delta: float) -> dict:
    """Smallest probe ``x0`` beyond which Potter's bound holds for every probe pair."""
    if A <= 1 or delta <= 0:
        raise ValueError("need A > 1 and delta > 0")
    pts = sorted((float(x), float(v)) for x, v in ell_probes)
    xs = np.array([p[0] for p in pts])
    ls = np.array([p[1] for p in pts])
    if xs[-1] / xs[0] < 1e3:
        raise DegenerateRange("probes must span at least 3 decades")
    ratio = ls[None, :] / ls[:, None]
    q = xs[None, :] / xs[:, None]
    bound = A * np.maximum(q ** delta, q ** (-delta))
    bad = ratio > bound
    x0 = None
    for i in range(len(xs)):
        if not bad[i:, i:].any():
            x0 = float(xs[i])
            break
    return {"check": "potter", "A": A, "delta": delta, "x0": x0, "pass": x0 is not None,
            "n_probes": len(xs), "span": [float(xs[0]), float(xs[-1])]}


def _log_integral(f, lo, hi):
    # int_lo^hi f(u) du = int f(e^s) e^s ds on log panels of width log(1.5)
    n = max(1, int(math.ceil(math.log(hi / lo) / math.log(1.5))))
    edges = np.linspace(math.log(lo), math.log(hi), n + 1)
    return float(quad.gl_panels(lambda s: f(np.exp(s)) * np.exp(s), edges).sum())


def karamata_check(ell: Callable, alpha: float, x_probes: Sequence[float], x0: Optional[float] = None,
                   tol: float = 0.05) -> dict:
    """Direct half of Karamata's theorem: ``int_{x0}^x u^alpha ell(u) du ~ x^{alpha+1} ell(x) / (alpha+1)``."""
    if alpha <= -1:
        raise ValueError("need alpha > -1")
    xs = np.asarray(x_probes, dtype=float)
    if np.any(np.diff(xs) <= 0) or xs[-1] / xs[0] < 1e3:
        raise DegenerateRange("probes must increase and span at least 3 decades")
    start = float(xs[0]) if x0 is None else float(x0)
    ellv = lambda u: _vec(ell, u)  # noqa: E731
    r = []
    for x in xs:
        if x <= start:
            r.append(0.0)
            continue
        num = _log_integral(lambda u: u ** alpha * ellv(u), start, x)
        r.append(num / (x ** (alpha + 1) * float(ellv(x))))
    r = np.array(r)
    target = 1.0 / (alpha + 1.0)
    err = np.abs(r - target) / target
    return {"check": "karamata", "alpha": alpha, "target": target, "x": xs.tolist(), "r": r.tolist(),
            "final_rel_err": float(err[-1]), "pass": bool(err[-1] <= tol)}


def monotone_density_check(tail: Callable, density: Callable, alpha: float, x_probes: Sequence[float],
                           eps: float = 0.1) -> dict:
    """Ratio ``xi_S(x) / (alpha x^{-alpha-1} ell(1/x)) = x xi_S(x) / (alpha gamma(x))`` near 0."""
    xs = np.sort(np.asarray(x_probes, dtype=float))
    ratio = xs * _vec(density, xs) / (alpha * _vec(tail, xs))
    small = xs <= xs[0] * 10.0
    sup, inf = float(ratio[small].max()), float(ratio[small].min())
    return {"check": "monotone_density", "alpha": alpha, "x": xs.tolist(), "ratio": ratio.tolist(),
            "sup": sup, "inf": inf, "eps": eps, "pass": bool(1 - eps <= inf and sup <= 1 + eps)}


def monotone_scan(f: Callable, lo: float, hi: float, n: int = 400) -> dict:
    """Sign scan of finite differences of ``f`` on a log grid; monotone iff one sign."""
    xs = np.geomspace(lo, hi, n)
    d = np.diff(_vec(f, xs))
    scale = np.max(np.abs(d)) if d.size else 0.0
    sig = np.sign(np.where(np.abs(d) <= 1e-13 * scale, 0.0, d))
    pos, neg = int(np.sum(sig > 0)), int(np.sum(sig < 0))
    return {"increasing_steps": pos, "decreasing_steps": neg, "monotone": pos == 0 or neg == 0,
            "range": [lo, hi], "n": n}
