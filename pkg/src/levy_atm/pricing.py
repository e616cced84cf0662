"""At-the-money call prices, implied volatilities and first-order predictions.

Prices are normalised (``S0 = K = 1``, zero rates), so ``c(t) = E[(e^{X_t} - 1)_+]``.
Under the share measure ``c(t) = int_0^inf e^{-x} P*(X_t >= x) dx``.  Plugging
the Gil-Pelaez formula for ``P*`` in and doing the ``x`` integral in closed form
gives the single Fourier integral used by default::

    c(t) = (1/pi) int_0^inf [1 - Re phi(u) + Im phi(u) / u] / (1 + u^2) du,   phi = exp(t psi*).
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import erf, erfinv

from . import montecarlo as mc
from . import quadrature as quad
from .errors import (AssumptionViolation, DomainError, MeasureTagError, PreconditionViolation,
                     PriceOutOfRange, QuadratureFailure)
from .levy_core import PHYSICAL, SHARE, LevyModel, char_exponent
from . import regvar
from .levy_core import tail_functionals
from .regvar import ScalingFunction
from .stable import StableLaw, expected_positive_part

PANELS_PER_DECADE = 4
DECAY = 40.0  # |phi| <= e^-40 beyond the last node
CSV_HEADER = ("t", "exact", "mc", "mc_se", "prediction", "B_t", "ratio", "ivol", "ivol_prediction")


# ---------------------------------------------------------------------------
# Black-Scholes


def bs_atm_price(sigma: float, t: float) -> float:
    """``2 Phi(sigma sqrt(t) / 2) - 1``, written as ``erf(sigma sqrt(t) / (2 sqrt 2))``."""
    if t < 0 or sigma < 0:
        raise DomainError("sigma and t must be nonnegative")
    return float(erf(sigma * math.sqrt(t) / (2.0 * math.sqrt(2.0))))


def implied_vol(price: float, t: float) -> float:
    """Inverse of :func:`bs_atm_price` in ``sigma``."""
    if t <= 0:
        raise DomainError("t must be positive")
    if not 0.0 <= price < 1.0 or not math.isfinite(price):
        raise PriceOutOfRange(f"ATM price must lie in [0, 1), got {price}")
    return float(2.0 * math.sqrt(2.0) * erfinv(price) / math.sqrt(t))


# ---------------------------------------------------------------------------
# Fourier machinery


def _grid_point(k: int) -> float:
    return 10.0 ** (k / PANELS_PER_DECADE)


def _t_re_psi(share: LevyModel, t: float, k: int) -> float:
    return -t * char_exponent(share, _grid_point(k)).real


def _u_bounds(share: LevyModel, t: float):
    """Grid indices (k_lo, k_hi): ``t |Re psi*|`` is ~1e-6 at the first, >= DECAY at the last."""
    k = -3 * PANELS_PER_DECADE
    while _t_re_psi(share, t, k) > 1e-6 and k > -60 * PANELS_PER_DECADE:
        k -= 1
    k_lo = k
    while _t_re_psi(share, t, k) < DECAY:
        k += 1
        if k > 40 * PANELS_PER_DECADE:
            raise QuadratureFailure(f"characteristic function does not decay (t={t:g})")
    return k_lo, k


def _fourier_nodes(k_lo: int, k_hi: int):
    u_lo = _grid_point(k_lo)
    edges = np.concatenate([[0.0], [_grid_point(k) for k in range(k_lo, k_hi + 1)]])
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    u = (mid[:, None] + half[:, None] * quad._GL_X[None, :]).ravel()
    w = (half[:, None] * quad._GL_W[None, :]).ravel()
    return u, w, u_lo


def _phi_parts(share: LevyModel, t: float, u: np.ndarray):
    tpsi = t * char_exponent(share, u)
    x, y = tpsi.real, tpsi.imag
    one_minus_re = -np.expm1(x) * np.cos(y) + 2.0 * np.sin(0.5 * y) ** 2
    im = np.exp(x) * np.sin(y)
    return one_minus_re, im


def _require_share(model: LevyModel):
    if model.measure_tag != SHARE:
        raise MeasureTagError("expected a share-measure model (use model.share)")


def _require_martingale(model: LevyModel):
    if model.measure_tag != PHYSICAL:
        raise MeasureTagError("atm_call_price takes the physical-measure model")
    r = abs(char_exponent(model, -1j))
    if r > 1e-8:
        raise PreconditionViolation(f"model is not a martingale: |psi(-i)| = {r:.3g}")


def _degenerate(model: LevyModel) -> bool:
    return model.sigma == 0.0 and not model.has_jumps


def atm_call_price(model: LevyModel, t: float, method: str = "fourier") -> float:
    """Normalised ATM call price ``E[(e^{X_t} - 1)_+]``.

    ``method="fourier"`` uses the single-integral form in the module docstring;
    ``method="tail"`` integrates ``e^{-x} P*(X_t >= x)`` over ``x`` with the tail
    from :func:`share_tail_prob` (much slower, kept as a cross-check).
    """
    if t <= 0:
        raise DomainError("t must be positive")
    _require_martingale(model)
    if _degenerate(model):
        return 0.0
    share = model.share
    if method == "tail":
        return _price_by_tail(share, t)
    if method != "fourier":
        raise ValueError(f"unknown method {method!r}")
    k_lo, k_hi = _u_bounds(share, t)
    u, w, _ = _fourier_nodes(k_lo, k_hi)
    omr, im = _phi_parts(share, t, u)
    f = (omr + im / u) / (1.0 + u * u)
    u_hi = _grid_point(k_hi)
    val = float(f @ w) + math.atan(1.0 / u_hi)
    return val / math.pi


def share_tail_prob(share_model: LevyModel, t: float, x, max_nodes: int = 200_000):
    """``P*(X_t >= x)`` by Gil-Pelaez inversion of ``exp(t psi*(u))``.

    Panels are subdivided so that ``e^{-iux}`` turns by at most pi/2 per panel.
    """
    _require_share(share_model)
    if t <= 0:
        raise DomainError("t must be positive")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if _degenerate(share_model):
        out = (share_model.b * t >= xs).astype(float)
        return out if np.ndim(x) else float(out[0])
    k_lo, k_hi = _u_bounds(share_model, t)
    edges = [0.0] + [_grid_point(k) for k in range(k_lo, k_hi + 1)]
    xm = float(np.max(np.abs(xs)))
    hmax = math.pi / (2.0 * xm) if xm > 0 else math.inf
    fine = [0.0]
    for a, b in zip(edges[:-1], edges[1:]):
        m = max(1, int(math.ceil((b - a) / hmax)))
        fine.extend(np.linspace(a, b, m + 1)[1:].tolist())
    fine = np.array(fine)
    if 16 * (len(fine) - 1) > max_nodes:
        raise QuadratureFailure(f"Gil-Pelaez grid needs {16 * (len(fine) - 1)} nodes (> {max_nodes})")
    mid = 0.5 * (fine[1:] + fine[:-1])
    half = 0.5 * (fine[1:] - fine[:-1])
    u = (mid[:, None] + half[:, None] * quad._GL_X[None, :]).ravel()
    w = (half[:, None] * quad._GL_W[None, :]).ravel()
    tpsi = t * _psi_on_nodes(share_model, u, _grid_point(k_lo), _grid_point(k_hi))
    out = np.empty_like(xs)
    for i, xi in enumerate(xs):
        val = np.exp(tpsi.real) * np.sin(tpsi.imag - u * xi) / u
        out[i] = 0.5 + float(val @ w) / math.pi
    out = np.clip(out, 0.0, 1.0)
    return out if np.ndim(x) else float(out[0])


PSI_SPLINE_PER_DECADE = 32


def _psi_on_nodes(share: LevyModel, u: np.ndarray, u_lo: float, u_hi: float) -> np.ndarray:
    # exact psi below u_lo (few nodes); above it, cubic splines in log u of
    # log(-Re psi) and Im psi / (-Re psi), both smooth and slowly varying
    out = np.empty(u.shape, dtype=complex)
    low = u < u_lo
    if low.any():
        out[low] = char_exponent(share, u[low])
    if (~low).any():
        n = max(4, int(math.ceil(PSI_SPLINE_PER_DECADE * math.log10(u_hi / u_lo))) + 1)
        g = np.geomspace(u_lo, u_hi * (1 + 1e-12), n)
        pg = char_exponent(share, g)
        neg_re = -pg.real
        if np.any(neg_re <= 0):
            out[~low] = char_exponent(share, u[~low])
            return out
        lg = np.log(g)
        s_re = CubicSpline(lg, np.log(neg_re))
        s_ratio = CubicSpline(lg, pg.imag / neg_re)
        lu = np.log(u[~low])
        re = np.exp(s_re(lu))
        out[~low] = -re + 1j * re * s_ratio(lu)
    return out


def _price_by_tail(share: LevyModel, t: float, x_max: float = 40.0) -> float:
    k_lo, _ = _u_bounds(share, t)
    scale = 1.0 / _grid_point(k_lo + 6 * PANELS_PER_DECADE)
    edges = np.concatenate([[0.0], np.geomspace(1e-3 * scale, x_max, 60)])
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = (mid[:, None] + half[:, None] * quad._GL_X[None, :]).ravel()
    w = (half[:, None] * quad._GL_W[None, :]).ravel()
    p = share_tail_prob(share, t, x)
    return float((np.exp(-x) * p) @ w)


# ---------------------------------------------------------------------------
# Monte Carlo


def atm_call_mc(model: LevyModel, t: float, n: int, seed: int, eps: Optional[float] = None,
                measure: str = SHARE):
    """Monte Carlo ATM call price and its standard error.

    ``measure="share"`` simulates ``X_t`` under the share measure and averages the
    bounded payoff ``(1 - e^{-X_t})_+``; ``measure="physical"`` averages
    ``(e^{X_t} - 1)_+`` directly.  Both estimate the same price, but the physical
    payoff can have infinite variance (whenever ``int_{x>1} e^{2x} xi`` diverges),
    in which case its standard error is not meaningful.
    """
    if n < 1000:
        raise DomainError("need at least 1000 paths")
    if model.measure_tag != PHYSICAL:
        raise MeasureTagError("atm_call_mc takes the physical-measure model")
    if _degenerate(model):
        return 0.0, 0.0
    if measure == SHARE:
        return mc.mc_mean(lambda x: -np.minimum(np.expm1(-x), 0.0), model.share, t, n, seed, eps=eps)
    if measure == PHYSICAL:
        return mc.mc_mean(lambda x: np.maximum(np.expm1(x), 0.0), model, t, n, seed, eps=eps)
    raise ValueError(f"unknown measure {measure!r}")


def share_tail_mc(share_model: LevyModel, t: float, x: float, n: int, seed: int):
    _require_share(share_model)
    return mc.mc_mean(lambda v: (v >= x).astype(float), share_model, t, n, seed)


# ---------------------------------------------------------------------------
# first-order predictions

PURE_JUMP = "pure_jump"
WITH_BROWNIAN = "with_brownian"


def _class_check(model_class):
    if model_class not in (PURE_JUMP, WITH_BROWNIAN):
        raise ValueError(f"model_class must be {PURE_JUMP!r} or {WITH_BROWNIAN!r}")


def _gate(model, force):
    # returns the assumption summary; raises when a pure-jump prediction is not backed
    if model is None:
        return None
    from .verify import check_assumptions

    reports = check_assumptions(model)
    summary = {r.check_name: r.passed for r in reports}
    failed = [r for r in reports if not r.passed]
    if failed and not force:
        raise AssumptionViolation(failed[0].check_name, failed[0].notes)
    return summary


def predict_first_order(model_class: str, t_grid, scaling: Optional[ScalingFunction] = None,
                        law: Optional[StableLaw] = None, sigma: Optional[float] = None,
                        model: Optional[LevyModel] = None, force: bool = False):
    """``E*[Z_+] B_t`` (pure jump) or ``sigma sqrt(t) / sqrt(2 pi)`` (with a Brownian part).

    Returns ``(values, summary)``; ``summary`` holds the assumption checks when
    ``model`` is given for a pure-jump prediction.
    """
    _class_check(model_class)
    ts = np.asarray(t_grid, dtype=float)
    if model_class == WITH_BROWNIAN:
        if sigma is None or sigma <= 0:
            raise AssumptionViolation("sigma", "Brownian prediction needs sigma > 0")
        return sigma * np.sqrt(ts) / math.sqrt(2.0 * math.pi), None
    if scaling is None or law is None:
        raise ValueError("pure-jump prediction needs a ScalingFunction and a StableLaw")
    summary = _gate(model, force)
    return expected_positive_part(law) * scaling(ts), summary


def predict_implied_vol(model_class: str, t_grid, scaling: Optional[ScalingFunction] = None,
                        law: Optional[StableLaw] = None, sigma: Optional[float] = None,
                        model: Optional[LevyModel] = None, force: bool = False):
    """``sqrt(2 pi) E*[Z_+] B_t / sqrt(t)`` (pure jump) or the constant ``sigma``."""
    _class_check(model_class)
    ts = np.asarray(t_grid, dtype=float)
    if model_class == WITH_BROWNIAN:
        if sigma is None or sigma <= 0:
            raise AssumptionViolation("sigma", "Brownian prediction needs sigma > 0")
        return np.full_like(ts, float(sigma)), None
    pred, summary = predict_first_order(model_class, ts, scaling, law, model=model, force=force)
    return math.sqrt(2.0 * math.pi) * pred / np.sqrt(ts), summary


@dataclass(frozen=True)
class FirstOrderSetup:
    alpha: float
    p_plus: float
    scaling: ScalingFunction
    law: StableLaw
    share_tail: object = field(compare=False)


def share_tail_function(model: LevyModel):
    """Two-sided share tail ``gamma*(x)``: closed form when the density carries one, else quadrature."""
    share = model.share
    analytic = share.jumps.analytic_tail
    if analytic is not None:
        return lambda x: float(np.sum(analytic(x)))
    tails = tail_functionals(share, [1.0], mu_points=8)
    return lambda x: float(tails.gamma(x))


def first_order_setup(model: LevyModel, kind: str = "debruijn_numeric", lambda_const: float = 1.0,
                      closed=None, t_ref: float = 1e-8, fit_range=(1e-8, 1e-6)) -> FirstOrderSetup:
    """Scaling function and limit law for a pure-jump model.

    ``alpha`` is the model's nominal index when it has one, else the fitted
    one; ``p_plus`` is the share-measure tail split at the small end of
    ``fit_range``.  The stable scale follows ``Lambda_eff = t gamma*(B_t)``,
    evaluated at ``t_ref`` for scalings that do not pin it.
    """
    if kind not in regvar.KINDS:
        raise ValueError(f"unknown scaling kind {kind!r}")
    if not model.has_jumps:
        raise DomainError("first-order stable setup needs jumps")
    tail = share_tail_function(model)
    share = model.share
    analytic = share.jumps.analytic_tail
    if analytic is not None:
        plus = lambda x: float(analytic(x)[0])  # noqa: E731
    else:
        tails = tail_functionals(share, [1.0], mu_points=8)
        plus = lambda x: float(tails.gamma_plus(x))  # noqa: E731
    fit = regvar.rv_index_at_zero(tail, fit_range, tail_plus=plus, n=12)
    alpha = model.alpha if model.alpha is not None else fit.alpha_hat
    if kind == "debruijn_numeric":
        sc = regvar.debruijn(regvar.ell_from_tail(tail, alpha), alpha, lambda_const, share_tail=tail)
    elif kind == "maller_mason_inf":
        sc = regvar.maller_mason(tail_functionals(share, [1.0], mu_points=8), alpha, share_tail=tail)
    else:
        if closed is None:
            raise ValueError("closed_form scaling needs a function t -> B_t")
        sc = regvar.closed_form(closed, alpha, share_tail=tail)
    lam = sc.lambda_eff(t_ref)
    return FirstOrderSetup(alpha, fit.p_plus_hat, sc, StableLaw.from_tail(alpha, lam, fit.p_plus_hat), tail)


# ---------------------------------------------------------------------------
# price curves


@dataclass(frozen=True)
class PriceCurve:
    maturities: tuple
    exact: tuple
    prediction: tuple
    B_t: tuple
    ratio: tuple
    ivol: tuple
    ivol_prediction: tuple
    mc: tuple = ()
    mc_se: tuple = ()
    config_hash: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def rows(self):
        n = len(self.maturities)
        mcv = self.mc or (math.nan,) * n
        mcs = self.mc_se or (math.nan,) * n
        return list(zip(self.maturities, self.exact, mcv, mcs, self.prediction, self.B_t, self.ratio,
                        self.ivol, self.ivol_prediction))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        if self.config_hash:
            buf.write(f"# config_hash: {self.config_hash}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in self.rows():
            w.writerow(["%.17g" % v for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def local_slopes(self):
        """``d log c / d log t`` between adjacent maturities."""
        t = np.log(np.asarray(self.maturities))
        c = np.log(np.asarray(self.exact))
        return np.diff(c) / np.diff(t)


def read_curve_csv(path) -> PriceCurve:
    text = open(path).read().splitlines()
    h = ""
    if text and text[0].startswith("# config_hash:"):
        h = text[0].split(":", 1)[1].strip()
        text = text[1:]
    rows = list(csv.reader(text))
    if tuple(rows[0]) != CSV_HEADER:
        raise ValueError("unexpected CSV header")
    cols = list(zip(*[[float(v) for v in r] for r in rows[1:]]))
    return PriceCurve(maturities=cols[0], exact=cols[1], mc=cols[2], mc_se=cols[3], prediction=cols[4],
                      B_t=cols[5], ratio=cols[6], ivol=cols[7], ivol_prediction=cols[8], config_hash=h)


def price_curve(model: LevyModel, t_grid: Sequence[float], scaling: Optional[ScalingFunction] = None,
                law: Optional[StableLaw] = None, mc_n: int = 0, seed: int = 0, workers: int = 1,
                config_hash: str = "") -> PriceCurve:
    """Exact prices, optional Monte Carlo, and first-order predictions on a maturity grid.

    With a Brownian part the normalisation is ``B_t = sqrt(t)`` and the limit law
    ``N(0, sigma^2)``; otherwise ``scaling`` and ``law`` are required.
    Maturities are evaluated independently (optionally on ``workers`` threads)
    and merged in grid order.
    """
    ts = sorted(float(t) for t in t_grid)
    if model.sigma > 0:
        scaling_fn = np.sqrt
        law = StableLaw.gaussian(model.sigma ** 2)
    else:
        if scaling is None or law is None:
            raise ValueError("pure-jump curves need a ScalingFunction and a StableLaw")
        scaling_fn = scaling
    ez = expected_positive_part(law)

    def one(i_t):
        i, t = i_t
        c = atm_call_price(model, t)
        m = s = math.nan
        if mc_n:
            m, s = atm_call_mc(model, t, mc_n, seed + i)
        b = float(scaling_fn(t))
        return t, c, m, s, b

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            res = list(ex.map(one, enumerate(ts)))
    else:
        res = [one(x) for x in enumerate(ts)]
    exact = tuple(r[1] for r in res)
    bt = tuple(r[4] for r in res)
    pred = tuple(ez * b for b in bt)
    return PriceCurve(
        maturities=tuple(ts), exact=exact, prediction=pred, B_t=bt,
        ratio=tuple(c / b for c, b in zip(exact, bt)),
        ivol=tuple(implied_vol(c, t) for c, t in zip(exact, ts)),
        ivol_prediction=tuple(math.sqrt(2 * math.pi) * p / math.sqrt(t) for p, t in zip(pred, ts)),
        mc=tuple(r[2] for r in res) if mc_n else (), mc_se=tuple(r[3] for r in res) if mc_n else (),
        config_hash=config_hash, meta={"E_Zplus": ez, "law": [law.alpha, law.c, law.p_plus]})
