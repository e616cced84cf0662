"""Exponential Lévy models given by a characteristic triplet with a jump density.

Conventions: truncation function ``x 1{|x| <= 1}``, characteristic exponent

    psi(u) = i u b - sigma**2 u**2 / 2 + int (e^{iux} - 1 - iux 1{|x|<=1}) xi(x) dx,

and ``E[exp(i u X_t)] = exp(t psi(u))``.  Under the share measure (Esscher
tilt with theta = 1) the jump density becomes ``e^x xi(x)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property, lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate as sp_integrate

from . import quadrature as quad
from .errors import (DivergentIntegral, GridError, MomentFailure, QuadratureFailure,
                     StripViolation)
from .quadrature import DEFAULT_TOL, Tolerances

PHYSICAL = "physical"
SHARE = "share"

TailPair = Callable[[np.ndarray], tuple]


def _sin_minus_id(z):
    """``sin(z) - z`` without cancellation for small ``z``."""
    z = np.asarray(z, dtype=float)
    z2 = z * z
    series = -z * z2 / 6.0 * (1 - z2 / 20.0 * (1 - z2 / 42.0 * (1 - z2 / 72.0 * (1 - z2 / 110.0))))
    return np.where(np.abs(z) < 0.1, series, np.sin(z) - z)


@dataclass(frozen=True)
class JumpDensity:
    """Lévy density ``xi`` with support ``[support_lo, support_hi]``.

    ``func`` must be numpy-vectorised.  ``breaks`` lists points where ``xi``
    is not smooth (support ends are added automatically).  ``analytic_tail``
    optionally maps ``x > 0`` to ``(gamma_plus(x), gamma_minus(x))``;
    ``share_tail`` does the same for the density tilted by ``e^x``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    support_lo: float = -math.inf
    support_hi: float = math.inf
    breaks: tuple = ()
    analytic_tail: Optional[TailPair] = None
    share_tail: Optional[TailPair] = None
    name: str = "custom"
    zero: bool = False
    log_func: Optional[Callable[[np.ndarray], np.ndarray]] = None
    log_scalar: Optional[Callable[[float], float]] = None
    # exact tilt (e.g. folded into an exponential rate); avoids cancelling theta*x
    # against a large negative log density far out in the tail
    tilter: Optional[Callable[[float], "JumpDensity"]] = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.zero:
            return np.zeros_like(x)
        inside = (x >= self.support_lo) & (x <= self.support_hi) & (x != 0.0)
        with np.errstate(all="ignore"):
            vals = np.where(inside, self.func(np.where(inside, x, 1.0)), 0.0)
        return vals

    eval = __call__

    def scalar(self, x: float) -> float:
        """Fast scalar evaluation for adaptive routines."""
        if self.zero or x == 0.0 or x < self.support_lo or x > self.support_hi:
            return 0.0
        if self.log_scalar is not None:
            lv = self.log_scalar(x)
            return math.exp(lv) if lv > -745.0 else 0.0
        with np.errstate(all="ignore"):
            v = float(self.func(x))
        return v if v == v else 0.0

    def scalar_sym(self, x: float) -> float:
        return self.scalar(x) + self.scalar(-x)

    def scalar_antisym(self, x: float) -> float:
        return self.scalar(x) - self.scalar(-x)

    def sym(self, x):
        """``xi(x) + xi(-x)`` for ``x > 0``."""
        return self(x) + self(-np.asarray(x, dtype=float))

    def antisym(self, x):
        """``xi(x) - xi(-x)`` for ``x > 0``."""
        return self(x) - self(-np.asarray(x, dtype=float))

    @property
    def points(self) -> list:
        pts = [p for p in (self.support_lo, self.support_hi, *self.breaks) if np.isfinite(p)]
        return sorted(set(pts))

    @property
    def abs_points(self) -> list:
        """Positive kink locations of the symmetrised density (always includes 1)."""
        pts = {abs(p) for p in self.points if p != 0.0}
        pts.add(1.0)
        return sorted(pts)

    @property
    def reach(self) -> float:
        return max(abs(self.support_lo), abs(self.support_hi))

    def log_eval(self, x):
        """``log xi(x)`` (``-inf`` off the support)."""
        x = np.asarray(x, dtype=float)
        if self.log_func is None:
            with np.errstate(divide="ignore"):
                return np.log(self(x))
        inside = (x >= self.support_lo) & (x <= self.support_hi) & (x != 0.0)
        with np.errstate(all="ignore"):
            return np.where(inside, self.log_func(np.where(inside, x, 1.0)), -np.inf)

    def tilt(self, theta: float) -> "JumpDensity":
        if theta == 0.0:
            return self
        tail = self.share_tail if theta == 1.0 else None
        if self.tilter is not None:
            return replace(self.tilter(theta), analytic_tail=tail, share_tail=None,
                           name=f"{self.name}*e^({theta:g}x)")
        if self.log_func is not None:
            lf = self.log_func
            new_log = lambda x: theta * x + lf(x)  # noqa: E731
            func = lambda x: np.exp(new_log(x))  # noqa: E731
        else:
            base = self.func
            new_log = None
            func = lambda x: np.exp(theta * x) * base(x)  # noqa: E731
        ls = None
        if self.log_scalar is not None:
            base_ls = self.log_scalar
            ls = lambda x: theta * x + base_ls(x)  # noqa: E731
        return replace(self, func=func, log_func=new_log, log_scalar=ls, analytic_tail=tail,
                       share_tail=None, name=f"{self.name}*e^({theta:g}x)")

    def integrate(self, weight: Callable, lo: float, hi: float, tol: Tolerances = DEFAULT_TOL,
                  extra_points: Sequence[float] = ()) -> float:
        """``int_lo^hi weight(x) xi(x) dx`` respecting support and kinks."""
        if self.zero:
            return 0.0
        lo = max(lo, self.support_lo)
        hi = min(hi, self.support_hi)
        if hi <= lo:
            return 0.0
        pts = list(self.points) + [1.0, -1.0] + list(extra_points)

        def f(x):
            d = self(x)
            with np.errstate(all="ignore"):
                v = weight(x) * d
            return np.where(d == 0.0, 0.0, v)

        return quad.integrate(f, lo, hi, pts, tol)


ZERO_DENSITY = JumpDensity(func=lambda x: np.zeros_like(x), name="none", zero=True)


def _one(x):
    return np.ones_like(x)


@dataclass(frozen=True)
class LevyModel:
    """Characteristic triplet ``(b, sigma, xi)`` plus the measure it lives under."""

    b: float
    sigma: float
    jumps: JumpDensity = ZERO_DENSITY
    measure_tag: str = PHYSICAL
    martingale: bool = False
    tol: Tolerances = DEFAULT_TOL
    validate: bool = True
    name: str = "model"
    alpha: Optional[float] = None  # nominal index at 0 when known
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.measure_tag not in (PHYSICAL, SHARE):
            raise ValueError(f"unknown measure tag {self.measure_tag!r}")
        if self.validate:
            report = validate_model(self)
            failed = [c["check"] for c in report["checks"] if not c["pass"]]
            if failed:
                raise MomentFailure(f"{self.name}: failed {', '.join(failed)}")
            if self.martingale:
                r = abs(char_exponent(self, -1j))
                if r > 1e-10:
                    raise MomentFailure(f"{self.name}: |psi(-i)| = {r:.3g} > 1e-10")

    @classmethod
    def calibrated(cls, sigma: float, jumps: JumpDensity = ZERO_DENSITY, **kw) -> "LevyModel":
        """Martingale-calibrated model: drift fixed by ``psi(-i) = 0``."""
        b = martingale_drift(sigma, jumps, kw.get("tol", DEFAULT_TOL))
        return cls(b=b, sigma=sigma, jumps=jumps, martingale=True, **kw)

    @property
    def has_jumps(self) -> bool:
        return not self.jumps.zero

    @cached_property
    def share(self) -> "LevyModel":
        return esscher_transform(self, 1.0)

    def psi(self, u):
        return char_exponent(self, u)


# ---------------------------------------------------------------------------
# characteristic exponent


def char_exponent(model: LevyModel, u):
    """Lévy-Khintchine exponent on the strip ``-1 <= Im(u) <= 0``.

    Accepts scalars or arrays.  Real arguments use an oscillation-aware
    quadrature; complex arguments are reduced to a real argument of the
    tilted density.
    """
    arr = np.asarray(u)
    scalar = arr.ndim == 0
    flat = np.atleast_1d(arr).astype(complex).ravel()
    out = np.empty(flat.shape, dtype=complex)
    for i, ui in enumerate(flat):
        out[i] = _psi_scalar(model, complex(ui))
    out = out.reshape(np.atleast_1d(arr).shape)
    return complex(out[0]) if scalar else out


def _psi_scalar(model: LevyModel, u: complex) -> complex:
    z = -u.imag
    if z < -1e-15 or z > 1 + 1e-15:
        raise StripViolation(f"Im(u) = {u.imag} outside [-1, 0]")
    v = u.real
    if z == 0.0:
        return _psi_real(model.b, model.sigma, model.jumps, v, model.tol)
    jd = model.jumps
    gauss = 1j * u * model.b - 0.5 * model.sigma ** 2 * u * u
    if jd.zero:
        return gauss
    tilted = jd.tilt(z)
    core = _psi_real(0.0, 0.0, tilted, v, model.tol)
    comp = _compensator(jd, z, model.tol)
    shift = jd.integrate(lambda x: x * np.expm1(z * x) * (np.abs(x) <= 1), -1.0, 1.0, model.tol)
    return gauss + core + comp + 1j * v * shift


@lru_cache(maxsize=200_000)
def _psi_jump_cached(jd: JumpDensity, v: float, tol: Tolerances) -> complex:
    return _psi_jump(jd, v, tol)


def _psi_real(b: float, sigma: float, jd: JumpDensity, v: float, tol: Tolerances) -> complex:
    gauss = 1j * v * b - 0.5 * sigma ** 2 * v * v
    if jd.zero or v == 0.0:
        return complex(gauss)
    w = _psi_jump_cached(jd, abs(v), tol)
    if v < 0:
        w = w.conjugate()
    return complex(gauss + w)


def _qawo(g, lo, hi, kind, u, epsabs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if np.isinf(hi):
            val, err, *rest = sp_integrate.quad(g, lo, np.inf, weight=kind, wvar=u, epsabs=epsabs,
                                                limlst=200, limit=400, full_output=1)
        else:
            val, err, *rest = sp_integrate.quad(g, lo, hi, weight=kind, wvar=u, epsabs=epsabs,
                                                epsrel=1e-12, limit=400, full_output=1)
    if not np.isfinite(val) or err > max(100 * epsabs, 1e-8 * abs(val)):
        raise QuadratureFailure(f"oscillatory quadrature on [{lo}, {hi}] for u={u}: err={err:.3g}")
    return val


def _psi_jump(jd: JumpDensity, u: float, tol: Tolerances) -> complex:
    # jump part of psi for real u > 0, split into symmetric / antisymmetric halves
    pts = jd.abs_points
    p1 = pts[0]
    a = min(math.pi / u, p1)
    re = quad.near_zero(lambda x: -2.0 * np.sin(0.5 * u * x) ** 2 * jd.sym(x), a, tol)
    im = quad.near_zero(lambda x: _sin_minus_id(u * x) * jd.antisym(x), a, tol)
    scale = max(abs(re), 1e-300)
    epsabs = max(1e-14, 1e-13 * scale)
    reach = jd.reach
    half_period = math.pi / u
    edges = [a]
    # dyadic (ratio 4) refinement of the first oscillatory stretch keeps QAWO cheap
    x = 4 * a
    while x < p1:
        edges.append(x)
        x *= 4
    edges += [p for p in pts if p > a]
    if half_period > a:
        edges.append(half_period)
    if np.isinf(reach):
        edges.append(np.inf)
    edges = sorted(set(e for e in edges if e <= reach or np.isinf(e)))
    if edges[-1] != reach and np.isfinite(reach) and reach > edges[-1]:
        edges.append(reach)

    def re_slow(y):
        return -2.0 * np.sin(0.5 * u * y) ** 2 * jd.sym(y)

    def im_slow(y):
        comp = np.where(y <= 1.0, _sin_minus_id(u * y), np.sin(u * y))
        return comp * jd.antisym(y)

    for lo, hi in zip(edges[:-1], edges[1:]):
        probe = np.geomspace(lo, hi if np.isfinite(hi) else lo * 64, 24)
        has_s = bool(np.any(jd.sym(probe) != 0.0))
        has_a = bool(np.any(jd.antisym(probe) != 0.0))
        if hi <= half_period:
            # less than half a period inside: not oscillatory, plain panels
            if has_s:
                re += quad.finite(re_slow, lo, hi)
            if has_a:
                im += quad.finite(im_slow, lo, hi)
            continue
        if has_s:
            re += _qawo(jd.scalar_sym, lo, hi, "cos", u, epsabs)
            re -= _plain(jd.sym, lo, hi, tol)
        if has_a:
            im += _qawo(jd.scalar_antisym, lo, hi, "sin", u, epsabs)
            if lo < 1.0:
                im -= u * _plain(lambda y: y * jd.antisym(y), lo, min(hi, 1.0), tol)
    return complex(re, im)


def _plain(f, lo, hi, tol):
    if np.isinf(hi):
        return quad.to_infinity(f, lo, tol)
    return quad.finite(f, lo, hi)


# ---------------------------------------------------------------------------
# drift, Esscher, validation


def martingale_drift(sigma: float, jumps: JumpDensity, tol: Tolerances = DEFAULT_TOL) -> float:
    """Drift making ``exp(X)`` a martingale: ``b = -sigma^2/2 - int (e^y - 1 - y 1{|y|<=1}) xi``."""
    if jumps.zero:
        return -0.5 * sigma ** 2
    return -0.5 * sigma ** 2 - _compensator(jumps, 1.0, tol)


def _compensator(jd: JumpDensity, z: float, tol: Tolerances) -> float:
    # int (e^{zy} - 1 - z y 1{|y|<=1}) xi(y) dy, with e^{zy} xi evaluated in log space
    tilted = jd.tilt(z)
    inner = jd.integrate(lambda y: np.expm1(z * y) - z * y, -1.0, 1.0, tol)
    outer = (tilted.integrate(_one, 1.0, np.inf, tol) + tilted.integrate(_one, -np.inf, -1.0, tol)
             - jd.integrate(_one, 1.0, np.inf, tol) - jd.integrate(_one, -np.inf, -1.0, tol))
    return inner + outer


def esscher_transform(model: LevyModel, theta: float) -> LevyModel:
    """Exponential tilt by ``e^{theta x}``; ``theta = 1`` gives the share measure."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    if theta == 0.0:
        return model
    jd = model.jumps
    shift = 0.0
    if not jd.zero:
        shift = jd.integrate(lambda x: x * np.expm1(theta * x), -1.0, 1.0, model.tol)
    b_new = model.b + model.sigma ** 2 * theta + shift
    # an intermediate tilt is not a pricing model; the e^x moment check does not apply to it
    share = theta == 1.0
    tag = SHARE if share else model.measure_tag
    return replace(model, b=b_new, jumps=jd.tilt(theta), measure_tag=tag, martingale=False,
                   validate=model.validate and share, name=f"{model.name}[theta={theta:g}]")


def _safe_integral(jd, weight, lo, hi, tol):
    try:
        val = jd.integrate(weight, lo, hi, tol)
    except (DivergentIntegral, QuadratureFailure):
        return math.inf
    return val if np.isfinite(val) else math.inf


def validate_model(model: LevyModel) -> dict:
    """Integrability checks on the jump density, with the computed integrals."""
    jd, tol = model.jumps, model.tol
    checks = []

    def add(name, value):
        checks.append({"check": name, "value": value, "pass": bool(np.isfinite(value))})

    if jd.zero:
        for name in ("levy_integrability", "exponential_moment", "ex_moment"):
            add(name, 0.0)
        return {"model": model.name, "checks": checks}
    probe = np.concatenate([-np.geomspace(1e-6, 50, 40), np.geomspace(1e-6, 50, 40)])
    neg = bool(np.any(jd(probe) < 0))
    checks.append({"check": "nonnegative", "value": float(np.min(jd(probe))), "pass": not neg})
    add("levy_integrability", _safe_integral(jd, lambda x: np.minimum(1.0, x * x), -np.inf, np.inf, tol))
    big = lambda x: (np.abs(x) > 1)  # noqa: E731
    if model.measure_tag == PHYSICAL:
        tilted = jd.tilt(1.0)
        add("exponential_moment", _safe_integral(tilted, big, -np.inf, np.inf, tol))
        add("ex_moment", _safe_integral(tilted, lambda x: np.abs(x) * big(x), -np.inf, np.inf, tol))
    else:
        add("first_moment", _safe_integral(jd, lambda x: np.abs(x) * big(x), -np.inf, np.inf, tol))
    return {"model": model.name, "checks": checks}


# ---------------------------------------------------------------------------
# tail functionals


def gamma_plus(jd: JumpDensity, x: float, tol: Tolerances = DEFAULT_TOL) -> float:
    return jd.integrate(_one, x, np.inf, tol, extra_points=(x,))


def gamma_minus(jd: JumpDensity, x: float, tol: Tolerances = DEFAULT_TOL) -> float:
    return jd.integrate(_one, -np.inf, -x, tol, extra_points=(-x,))


def truncated_variance(jd: JumpDensity, x: float, tol: Tolerances = DEFAULT_TOL) -> float:
    return jd.integrate(lambda y: y * y, -x, x, tol, extra_points=(x, -x))


def truncated_drift(model: LevyModel, eta: float) -> float:
    """``mu_eta = b - int_{eta <= |y| <= 1} y xi(y) dy`` (reversed region for eta > 1)."""
    jd = model.jumps
    if jd.zero or eta == 1.0:
        return model.b
    lo, hi = sorted((eta, 1.0))
    part = (jd.integrate(lambda y: y, lo, hi, model.tol, extra_points=(lo, hi))
            + jd.integrate(lambda y: y, -hi, -lo, model.tol, extra_points=(-lo, -hi)))
    return model.b - part if eta < 1.0 else model.b + part


@dataclass(frozen=True)
class MuBar:
    mu_bar0: float
    mu_bar: float
    finite: bool
    eta_grid: tuple
    mu_values: tuple
    tail_bound: float
    criterion: str


def mu_bar(model: LevyModel, n_eta: int = 60, eta_lo: float = 1e-8) -> MuBar:
    """Numerical ``sup |mu_eta|`` with a stabilisation test as ``eta -> 0``.

    Finite when the last decade moves the running sup by less than 1e-6
    (relative) or when decade-to-decade increments shrink geometrically.
    """
    etas = np.geomspace(1.0, eta_lo, n_eta)
    mus = np.array([truncated_drift(model, e) for e in etas])
    running = np.maximum.accumulate(np.abs(mus))
    per_dec = (n_eta - 1) / math.log10(1.0 / eta_lo)
    k = int(round(per_dec))
    sup = running[-1]
    last = running[-1] - running[-1 - k]
    prev = running[-1 - k] - running[-1 - 2 * k]
    if sup == 0.0 or last <= 1e-6 * sup:
        finite, crit = True, "last decade change < 1e-6 relative"
    elif prev > 0 and last / prev < 0.9:
        finite, crit = True, f"decade increments shrinking (ratio {last / prev:.3f})"
    else:
        finite, crit = False, "running sup not stabilising"
    jd = model.jumps
    tail = abs(model.b)
    if not jd.zero:
        tail += _safe_integral(jd, lambda x: np.abs(x) * (np.abs(x) >= 1), -np.inf, np.inf, model.tol)
    mb0 = float(sup) if finite else math.inf
    return MuBar(mu_bar0=mb0, mu_bar=max(mb0, tail) if finite else math.inf, finite=finite,
                 eta_grid=tuple(etas), mu_values=tuple(mus), tail_bound=float(tail), criterion=crit)


@dataclass(frozen=True)
class TailFunctionals:
    """Tail functionals ``gamma, gamma_plus, gamma_minus, V, U, mu`` of one model.

    Values at the probe grid are tabulated at construction; other points are
    computed by quadrature on demand (memoised).
    """

    model: LevyModel
    grid: tuple
    table: dict
    mu_bar: MuBar

    def gamma_plus(self, x):
        return self._vec(self._gp, x)

    def gamma_minus(self, x):
        return self._vec(self._gm, x)

    def gamma(self, x):
        return self.gamma_plus(x) + self.gamma_minus(x)

    def V(self, x):
        return self._vec(self._v, x)

    def U(self, x):
        x_arr = np.asarray(x, dtype=float)
        return self.V(x_arr) + x_arr ** 2 * self.gamma(x_arr)

    def mu(self, eta):
        return self._vec(lambda e: truncated_drift(self.model, e), eta)

    @staticmethod
    def _vec(fn, x):
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            return fn(float(arr))
        return np.array([fn(float(v)) for v in arr.ravel()]).reshape(arr.shape)

    def _gp(self, x):
        if x in self.table:
            return self.table[x][0]
        return _cached_tail(self.model.jumps, x, self.model.tol)[0]

    def _gm(self, x):
        if x in self.table:
            return self.table[x][1]
        return _cached_tail(self.model.jumps, x, self.model.tol)[1]

    def _v(self, x):
        if x in self.table:
            return self.table[x][2]
        return _cached_tail(self.model.jumps, x, self.model.tol)[2]


@lru_cache(maxsize=100_000)
def _cached_tail(jd: JumpDensity, x: float, tol: Tolerances):
    if x <= 0:
        raise GridError("tail functionals need x > 0")
    return (gamma_plus(jd, x, tol), gamma_minus(jd, x, tol), truncated_variance(jd, x, tol))


def tail_functionals(model: LevyModel, probe_grid: Sequence[float], mu_points: int = 60) -> TailFunctionals:
    grid = np.asarray(list(probe_grid), dtype=float)
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise GridError("probe grid must be nonempty, strictly increasing and positive")
    table = {float(x): _cached_tail(model.jumps, float(x), model.tol) for x in grid}
    return TailFunctionals(model=model, grid=tuple(float(x) for x in grid), table=table,
                           mu_bar=mu_bar(model, n_eta=mu_points))
