"""Strictly stable laws with index ``alpha`` in (1, 2].

Parametrisation::

    E[exp(i s Z)] = exp(-c |s|^alpha (1 - i beta sgn(s) tan(pi alpha / 2))),  beta = p_plus - p_minus.

This is the ``S(alpha, beta, c**(1/alpha), 0)`` law of the usual
``S1`` convention.  With ``alpha = 2`` and ``c = 1/2`` it is the standard normal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as sp_integrate
from scipy.special import gamma as gamma_fn

from .errors import AlphaDomain, DomainError


def varsigma(alpha: float) -> float:
    """``int_0^inf (1 - cos w) w^{-alpha-1} dw = pi / (2 Gamma(1+alpha) sin(pi alpha/2))``."""
    return math.pi / (2.0 * math.gamma(1.0 + alpha) * math.sin(math.pi * alpha / 2.0))


@dataclass(frozen=True)
class StableLaw:
    alpha: float
    c: float
    p_plus: float = 0.5

    def __post_init__(self):
        if not 1.0 < self.alpha <= 2.0:
            raise AlphaDomain(f"alpha must lie in (1, 2], got {self.alpha}")
        if self.c <= 0:
            raise DomainError("scale c must be positive")
        if not 0.0 <= self.p_plus <= 1.0:
            raise DomainError("p_plus must lie in [0, 1]")

    @property
    def p_minus(self) -> float:
        return 1.0 - self.p_plus

    @property
    def beta(self) -> float:
        return 0.0 if self.alpha == 2.0 else self.p_plus - self.p_minus

    @property
    def scale(self) -> float:
        return self.c ** (1.0 / self.alpha)

    @classmethod
    def from_tail(cls, alpha: float, lam: float, p_plus: float = 0.5) -> "StableLaw":
        """Law whose Lévy measure has two-sided tail ``lam * x^{-alpha}`` split ``p_plus : p_minus``."""
        if alpha == 2.0:
            raise AlphaDomain("tail constant is meaningless for alpha = 2")
        return cls(alpha, alpha * varsigma(alpha) * lam, p_plus)

    @classmethod
    def gaussian(cls, variance: float = 1.0) -> "StableLaw":
        return cls(2.0, 0.5 * variance, 0.5)


def _log_cf(law: StableLaw, s):
    s = np.asarray(s, dtype=float)
    skew = law.beta * math.tan(math.pi * law.alpha / 2.0)
    return -law.c * np.abs(s) ** law.alpha * (1.0 - 1j * skew * np.sign(s))


def stable_cf(law: StableLaw, s):
    return np.exp(_log_cf(law, s))


def expected_positive_part(law: StableLaw) -> float:
    """``E[Z_+]`` in closed form: ``Gamma(1 - 1/alpha) |a|^{1/alpha} cos(arg(a)/alpha) / pi``.

    Here ``a = c (1 - i beta tan(pi alpha / 2))`` is the coefficient of ``|s|^alpha``
    in ``-log cf`` for ``s > 0``.
    """
    a = law.c * complex(1.0, -law.beta * math.tan(math.pi * law.alpha / 2.0))
    r = abs(a) ** (1.0 / law.alpha) * math.cos(math.atan2(a.imag, a.real) / law.alpha)
    return float(gamma_fn(1.0 - 1.0 / law.alpha) * r / math.pi)


def expected_positive_part_quad(law: StableLaw) -> float:
    """Independent check of :func:`expected_positive_part` via ``(1/pi) int (1 - Re cf(s)) / s^2 ds``.

    For a centred law ``E[Z_+] = E|Z|/2`` and ``E|Z| = (2/pi) int (1 - Re cf) s^-2 ds``.
    """
    def f(s):
        z = complex(_log_cf(law, s))
        # 1 - Re e^z without cancellation near s = 0
        return (-math.expm1(z.real) * math.cos(z.imag) + 2.0 * math.sin(0.5 * z.imag) ** 2) / (s * s)

    head = sp_integrate.quad(f, 0.0, 1.0, epsabs=1e-13, epsrel=1e-11, limit=400)[0]
    tail = sp_integrate.quad(f, 1.0, np.inf, epsabs=1e-13, epsrel=1e-11, limit=400)[0]
    return (head + tail) / math.pi


def stable_tail(law: StableLaw, x):
    """``P(Z >= x)`` by Gil-Pelaez inversion."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xs)
    for i, xi in enumerate(xs):
        def f(s, xi=xi):
            return float(np.imag(np.exp(-1j * s * xi + _log_cf(law, s))) / s)
        cut = 40.0 ** (1.0 / law.alpha) / law.scale
        val = sp_integrate.quad(f, 0.0, cut, epsabs=1e-13, limit=400)[0]
        out[i] = 0.5 + val / math.pi
    return out if np.ndim(x) else float(out[0])


def stable_pdf(law: StableLaw, x):
    """Density by Fourier inversion (modest accuracy, for plotting and sanity checks)."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    cut = 40.0 ** (1.0 / law.alpha) / law.scale
    out = np.array([sp_integrate.quad(lambda s, xi=xi: float(np.real(np.exp(-1j * s * xi + _log_cf(law, s)))),
                                      0.0, cut, limit=400)[0] / math.pi for xi in xs])
    return out if np.ndim(x) else float(out[0])


def _cms(law: StableLaw, v, w, cos_v=None):
    a = law.alpha
    zeta = law.beta * math.tan(math.pi * a / 2.0)
    b0 = math.atan(zeta) / a
    s0 = (1.0 + zeta * zeta) ** (1.0 / (2.0 * a))
    av = a * (v + b0)
    if cos_v is None:
        cos_v = np.cos(v)
    # the second cosine is >= 0 on the open interval; clip boundary rounding
    c2 = np.maximum(np.cos(v - av), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = s0 * np.sin(av) / cos_v ** (1.0 / a) * (c2 / w) ** ((1.0 - a) / a)
    return law.scale * x


def sample_stable(law: StableLaw, n: int, rng: np.random.Generator) -> np.ndarray:
    """Chambers-Mallows-Stuck sampler (Weron's form for ``alpha != 1``)."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    if law.alpha == 2.0:
        return rng.standard_normal(n) * math.sqrt(2.0 * law.c)
    v = rng.uniform(-math.pi / 2.0, math.pi / 2.0, n)
    w = rng.standard_exponential(n)
    return _cms(law, v, w)


def _weighted_draws(law: StableLaw, m: int, rng: np.random.Generator):
    # For alpha > 1 the CMS map sends Z to +inf only as the angle -> +pi/2,
    # like eps^{-1/alpha}.  The right half of the angle range is drawn with
    # density ~ eps^{-1/alpha} and reweighted, which gives Z_+ finite variance;
    # the left half stays uniform.
    if law.alpha == 2.0:
        return sample_stable(law, m, rng), np.ones(m)
    kappa = 1.0 / law.alpha
    u = rng.uniform(size=m)
    right = rng.uniform(size=m) < 0.5
    w = rng.standard_exponential(m)
    eps = np.where(right, u ** (1.0 / (1.0 - kappa)), u)
    half = math.pi / 2.0
    v = np.where(right, half * (1.0 - eps), -half * eps)
    cos_v = np.where(right, np.sin(half * eps), np.cos(v))
    weight = np.where(right, eps ** kappa / (1.0 - kappa), 1.0)
    return _cms(law, v, w, cos_v), weight


def mc_positive_part(law: StableLaw, n: int, seed: int, chunk: int = 1_000_000,
                     importance: bool = True):
    """Monte Carlo ``E[Z_+]`` with its standard error.

    With ``importance=False`` this is the plain CMS average, whose standard
    error is not meaningful for ``alpha < 2`` (``Z_+`` has infinite variance).
    """
    rng = np.random.default_rng(seed)
    s1 = s2 = 0.0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        if importance and law.p_plus > 0.0:
            z, wt = _weighted_draws(law, m, rng)
            zp = np.maximum(z, 0.0) * wt
        else:
            zp = np.maximum(sample_stable(law, m, rng), 0.0)
        s1 += zp.sum()
        s2 += (zp * zp).sum()
        done += m
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n)
