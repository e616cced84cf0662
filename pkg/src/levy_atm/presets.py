"""Named model presets and JSON configuration loading.

A density is a sum of pieces, each of the form

    coef * |x|**power * exp(exp_rate * x) * |log|x|| ** log_power * (1 + osc * sin(log(1/|x|)))

on ``lo <= x <= hi``; the oscillating factor only acts on ``|x| < 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError
from .levy_core import ZERO_DENSITY, JumpDensity, LevyModel
from .quadrature import DEFAULT_TOL, Tolerances

PRESETS = ("black_scholes", "toy_log", "symmetric_stable", "pure_power_law", "oscillatory", "bump",
           "custom")


@dataclass(frozen=True)
class Piece:
    lo: float
    hi: float
    coef: float = 1.0
    power: float = -2.5
    exp_rate: float = 0.0
    log_power: float = 0.0
    osc: float = 0.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigError(f"piece needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.coef <= 0:
            raise ConfigError("piece coefficient must be positive")
        if abs(self.osc) > 1:
            raise ConfigError("oscillation amplitude must lie in [-1, 1]")

    def log_vec(self, x):
        ax = np.abs(x)
        la = np.log(ax)
        out = math.log(self.coef) + self.power * la + self.exp_rate * x
        if self.log_power:
            out = out + self.log_power * np.log(np.abs(la))
        if self.osc:
            out = out + np.where(ax < 1, np.log1p(self.osc * np.sin(-la)), 0.0)
        inside = (x >= self.lo) & (x <= self.hi)
        return np.where(inside, out, -np.inf)

    def log_scalar(self, x: float) -> float:
        if x < self.lo or x > self.hi:
            return -math.inf
        ax = abs(x)
        la = math.log(ax)
        out = math.log(self.coef) + self.power * la + self.exp_rate * x
        if self.log_power:
            if la == 0.0:
                return -math.inf
            out += self.log_power * math.log(abs(la))
        if self.osc and ax < 1:
            out += math.log1p(self.osc * math.sin(-la))
        return out


def piecewise_density(pieces: Sequence[Piece], name: str = "custom", **extra) -> JumpDensity:
    pieces = tuple(pieces)
    if not pieces:
        return ZERO_DENSITY
    lo = min(p.lo for p in pieces)
    hi = max(p.hi for p in pieces)
    breaks = tuple(sorted({e for p in pieces for e in (p.lo, p.hi) if np.isfinite(e)}))

    def log_func(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            vals = [p.log_vec(x) for p in pieces]
        return vals[0] if len(vals) == 1 else np.logaddexp.reduce(vals, axis=0)

    if len(pieces) == 1:
        log_scalar = pieces[0].log_scalar
    else:
        def log_scalar(x):
            vals = [p.log_scalar(x) for p in pieces]
            m = max(vals)
            if m == -math.inf:
                return m
            return m + math.log(sum(math.exp(v - m) for v in vals))

    def func(x):
        return np.exp(log_func(x))

    def tilter(theta):
        return piecewise_density([replace(p, exp_rate=p.exp_rate + theta) for p in pieces], name)

    return JumpDensity(func=func, support_lo=lo, support_hi=hi, breaks=breaks, name=name,
                       log_func=log_func, log_scalar=log_scalar, tilter=tilter, **extra)


# ---------------------------------------------------------------------------
# analytic tails of the share-measure densities


def _toy_share_tail(alpha):
    a = alpha

    def tail(x):
        x = np.asarray(x, dtype=float)
        xa = x ** (-a)
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = 1 / a ** 2 + xa * (np.log(1 / x) / a - 1 / a ** 2)
            gp = np.where(x < 1, 1 / a ** 2 + inner, xa * (np.log(x) / a + 1 / a ** 2))
            gm = np.where(x < 1, inner, 0.0)
        return gp, gm

    return tail


def toy_gamma_star(x, alpha: float):
    """Closed-form two-sided share tail of the log-modulated toy measure."""
    gp, gm = _toy_share_tail(alpha)(x)
    return gp + gm


def _stable_share_tail(alpha):
    def tail(x):
        x = np.asarray(x, dtype=float)
        xa = x ** (-alpha)
        return xa / alpha, np.where(x < 1, (xa - 1) / alpha, 0.0)

    return tail


def _power_tail(alpha):
    def tail(x):
        xa = np.asarray(x, dtype=float) ** (-alpha)
        return xa / alpha, xa / alpha

    return tail


# ---------------------------------------------------------------------------
# presets


def _check_alpha(alpha):
    if not 1.0 < alpha < 2.0:
        raise ConfigError(f"alpha must lie in (1, 2), got {alpha}")


def black_scholes(sigma: float = 0.2, tol: Tolerances = DEFAULT_TOL) -> LevyModel:
    if sigma <= 0:
        raise ConfigError("black_scholes needs sigma > 0")
    return LevyModel.calibrated(sigma, ZERO_DENSITY, tol=tol, name=f"black_scholes(sigma={sigma:g})", alpha=2.0)


def toy_log(alpha: float = 1.5, sigma: float = 0.0, tol: Tolerances = DEFAULT_TOL) -> LevyModel:
    """``xi(x) = |x|^{-alpha-1} e^{-x} |log|x||`` on ``x >= -1``."""
    _check_alpha(alpha)
    jd = piecewise_density([Piece(-1.0, math.inf, 1.0, -alpha - 1, -1.0, 1.0)], name="toy_log",
                           share_tail=_toy_share_tail(alpha))
    return LevyModel.calibrated(sigma, jd, tol=tol, name=f"toy_log(alpha={alpha:g},sigma={sigma:g})", alpha=alpha)


def symmetric_stable(alpha: float = 1.5, sigma: float = 0.0, tol: Tolerances = DEFAULT_TOL) -> LevyModel:
    """Jumps whose share-measure density is exactly ``|x|^{-alpha-1}`` on ``[-1, inf)``.

    Near the origin this is the symmetric stable density; the physical
    density ``|x|^{-alpha-1} e^{-x}`` has the moments an exponential model needs.
    """
    _check_alpha(alpha)
    jd = piecewise_density([Piece(-1.0, math.inf, 1.0, -alpha - 1, -1.0)], name="symmetric_stable",
                           share_tail=_stable_share_tail(alpha))
    return LevyModel.calibrated(sigma, jd, tol=tol, name=f"symmetric_stable(alpha={alpha:g})", alpha=alpha)


def pure_power_law(alpha: float = 1.5, tol: Tolerances = DEFAULT_TOL) -> LevyModel:
    """Untruncated ``|x|^{-alpha-1}`` on the real line; only for tail-functional work."""
    _check_alpha(alpha)
    jd = piecewise_density([Piece(-math.inf, math.inf, 1.0, -alpha - 1)], name="pure_power_law",
                           analytic_tail=_power_tail(alpha))
    return LevyModel(b=0.0, sigma=0.0, jumps=jd, tol=tol, validate=False,
                     name=f"pure_power_law(alpha={alpha:g})", alpha=alpha)


def oscillatory(alpha: float = 1.5, amp: float = 0.5, tol: Tolerances = DEFAULT_TOL) -> LevyModel:
    """Stable-like jumps times ``1 + amp*sin(log(1/|x|))`` near 0.

    ``x^2 xi_S`` is not monotone, and the tail is a power times a log-periodic
    factor, so it is not regularly varying either.
    """
    _check_alpha(alpha)
    jd = piecewise_density([Piece(-1.0, math.inf, 1.0, -alpha - 1, -1.0, 0.0, amp)], name="oscillatory")
    return LevyModel.calibrated(0.0, jd, tol=tol, name=f"oscillatory(alpha={alpha:g},amp={amp:g})", alpha=alpha)


def bump(alpha: float = 1.5, height: float = 2000.0, lo: float = 0.05, hi: float = 0.1,
         tol: Tolerances = DEFAULT_TOL) -> LevyModel:
    """Stable-like jumps plus a flat block of extra jumps on ``[lo, hi]``.

    The block makes ``x^2 xi_S`` increase at ``lo`` while leaving the index at 0,
    the moment conditions and the truncated drifts untouched.
    """
    _check_alpha(alpha)
    jd = piecewise_density([Piece(-1.0, math.inf, 1.0, -alpha - 1, -1.0), Piece(lo, hi, height, 0.0)],
                           name="bump")
    return LevyModel.calibrated(0.0, jd, tol=tol, name=f"bump(alpha={alpha:g})", alpha=alpha)


def tempered_inverse_square(tol: Tolerances = DEFAULT_TOL) -> LevyModel:
    """One-sided ``x^{-2} e^{-2x}`` on ``x > 0``; its share density is ``x^{-2} e^{-x}``."""
    jd = piecewise_density([Piece(0.0, math.inf, 1.0, -2.0, -2.0)], name="tempered_inverse_square")
    return LevyModel.calibrated(0.0, jd, tol=tol, name="tempered_inverse_square", alpha=None)


def custom(pieces: Sequence[dict], sigma: float = 0.0, alpha: Optional[float] = None,
           tol: Tolerances = DEFAULT_TOL) -> LevyModel:
    try:
        ps = [Piece(**{k: float(v) for k, v in d.items()}) for d in pieces]
    except TypeError as exc:
        raise ConfigError(f"bad density piece: {exc}") from None
    jd = piecewise_density(ps)
    return LevyModel.calibrated(sigma, jd, tol=tol, name="custom", alpha=alpha)


# ---------------------------------------------------------------------------
# configuration


def _num(cfg, key, default):
    v = cfg.get(key, default)
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise ConfigError(f"field {key!r} must be a finite number")
    return float(v)


def tolerances_from(cfg: Optional[dict]) -> Tolerances:
    if not cfg:
        return DEFAULT_TOL
    known = {"epsabs", "epsrel", "near_zero_cutoff", "max_panels"}
    bad = set(cfg) - known
    if bad:
        raise ConfigError(f"unknown tolerance fields: {sorted(bad)}")
    try:
        return Tolerances(**cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def model_from_config(cfg: dict) -> LevyModel:
    """Build a model from ``{"preset", "sigma", "alpha", "density", "tolerances"}``."""
    if not isinstance(cfg, dict):
        raise ConfigError("model config must be a JSON object")
    name = cfg.get("preset")
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {PRESETS}")
    tol = tolerances_from(cfg.get("tolerances"))
    if name == "black_scholes":
        return black_scholes(_num(cfg, "sigma", 0.2), tol)
    if name == "toy_log":
        return toy_log(_num(cfg, "alpha", 1.5), _num(cfg, "sigma", 0.0), tol)
    if name == "symmetric_stable":
        return symmetric_stable(_num(cfg, "alpha", 1.5), _num(cfg, "sigma", 0.0), tol)
    if name == "pure_power_law":
        return pure_power_law(_num(cfg, "alpha", 1.5), tol)
    if name == "oscillatory":
        return oscillatory(_num(cfg, "alpha", 1.5), _num(cfg, "amp", 0.5), tol)
    if name == "bump":
        return bump(_num(cfg, "alpha", 1.5), tol=tol)
    density = cfg.get("density")
    if not isinstance(density, dict) or not isinstance(density.get("pieces"), list):
        raise ConfigError("custom preset needs density.pieces (a list of piece objects)")
    alpha = cfg.get("alpha")
    return custom(density["pieces"], _num(cfg, "sigma", 0.0), None if alpha is None else float(alpha), tol)


def load_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
