"""Deterministic quadrature helpers for Lévy-density integrals.

Integrands with an algebraic singularity at the origin (``x**(-alpha-1)``
times something that vanishes like ``x**2``) are summed over dyadic panels
``[2**-(k+1) a, 2**-k a]`` with a fixed Gauss-Legendre rule per panel; the
same machinery walks outward to infinity on ``[a 2**k, a 2**(k+1)]``.  Once
panel contributions become geometric the remainder is added in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import DivergentIntegral, QuadratureFailure

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)

Func = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Tolerances:
    """Quadrature tolerances; ``near_zero_cutoff`` stops the dyadic sums."""

    epsabs: float = 1e-10
    epsrel: float = 1e-8
    near_zero_cutoff: float = 1e-14
    max_panels: int = 2400

    def __post_init__(self):
        if min(self.epsabs, self.epsrel, self.near_zero_cutoff) <= 0:
            raise ValueError("tolerances must be positive")


DEFAULT_TOL = Tolerances()
INWARD_FLOOR = 1e-100
OUTWARD_CEIL = 1e100


def gl_panels(f: Func, edges: np.ndarray) -> np.ndarray:
    """Gauss-Legendre integral of ``f`` over each panel ``[edges[i], edges[i+1]]``."""
    edges = np.asarray(edges, dtype=float)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = np.asarray(f(x), dtype=float).reshape(x.shape)
    return half * (vals @ _GL_W)


def _dyadic_series(f: Func, start: float, outward: bool, tol: Tolerances) -> float:
    # panels shrink toward 0 (outward=False) or grow toward +inf (outward=True)
    total = 0.0
    prev = None
    r_prev = None
    chunk = 32
    k0 = 0
    n = 0
    while k0 < tol.max_panels:
        ks = np.arange(k0, k0 + chunk + 1, dtype=float)
        with np.errstate(over="ignore"):
            edges = start * np.power(2.0, ks if outward else -ks)
        if (edges[-1] > OUTWARD_CEIL) if outward else (edges[-1] < INWARD_FLOOR):
            # stop before powers of x overflow; what is left is summed as a
            # geometric series with the last panel ratio
            if prev not in (None, 0.0) and r_prev is not None and 0.0 < r_prev < 0.999:
                return float(total + prev * r_prev / (1.0 - r_prev))
            raise DivergentIntegral("dyadic walk reached its limit without decaying panels")
        contrib = gl_panels(f, edges if outward else edges[::-1])
        if not outward:
            contrib = contrib[::-1]
        for c in contrib:
            if not np.isfinite(c):
                raise DivergentIntegral("non-finite panel contribution")
            total += c
            n += 1
            if n >= 4 and abs(c) <= tol.near_zero_cutoff * abs(total):
                if prev not in (None, 0.0):
                    r = c / prev
                    if 0.0 < r < 1.0:
                        total += c * r / (1.0 - r)
                return float(total)
            if prev not in (None, 0.0):
                r = c / prev
                if r_prev is not None and 0.0 < r < 0.999 and abs(r - r_prev) < 1e-4:
                    remainder = c * r / (1.0 - r)
                    if abs(remainder) <= tol.near_zero_cutoff * 100 * abs(total):
                        return float(total + remainder)
                    # ratios fixed to working precision: the rest is a geometric series
                    # (slowly decaying power laws would otherwise walk into overflow)
                    if abs(r - r_prev) < 1e-10 * r:
                        return float(total + remainder)
                r_prev = r
            prev = c
        k0 += chunk
    if r_prev is not None and r_prev >= 0.999:
        raise DivergentIntegral("panel contributions do not decay")
    raise QuadratureFailure("dyadic series did not converge within panel budget")


def near_zero(f: Func, a: float, tol: Tolerances = DEFAULT_TOL) -> float:
    """Integral of ``f`` over ``(0, a]`` for integrands singular at the origin."""
    if a <= 0:
        return 0.0
    return _dyadic_series(f, a, outward=False, tol=tol)


def to_infinity(f: Func, a: float, tol: Tolerances = DEFAULT_TOL) -> float:
    """Integral of ``f`` over ``[a, inf)`` with ``a > 0``."""
    if a <= 0:
        raise ValueError("to_infinity needs a > 0")
    return _dyadic_series(f, a, outward=True, tol=tol)


def finite(f: Func, lo: float, hi: float, ratio: float = 1.5) -> float:
    """Integral over ``[lo, hi]`` bounded away from 0, geometric panels of ratio <= ``ratio``."""
    if hi <= lo:
        return 0.0
    if lo > 0:
        n = max(1, int(np.ceil(np.log(hi / lo) / np.log(ratio))))
        edges = np.geomspace(lo, hi, n + 1)
    elif hi < 0:
        return finite(lambda x: f(-x), -hi, -lo, ratio)
    else:
        raise ValueError("finite() cannot straddle the origin")
    # a fixed geometric mesh is coarse on long stretches away from 0; add at most
    # 256 linear panels there
    widths = np.diff(edges)
    step = max(0.25, (hi - lo) / 256.0)
    if widths.max() > step:
        extra = np.arange(lo, hi, step)
        edges = np.unique(np.concatenate([edges, extra, [hi]]))
    return float(gl_panels(f, edges).sum())


def integrate(f: Func, lo: float, hi: float, points: Iterable[float] = (),
              tol: Tolerances = DEFAULT_TOL) -> float:
    """Integrate a vectorised ``f`` over ``[lo, hi]`` (either end may be infinite).

    The origin is always treated as a potential integrable singularity and
    every value in ``points`` as a kink.
    """
    if hi <= lo:
        return 0.0
    cuts = sorted({p for p in list(points) + [0.0] if lo < p < hi})
    nodes = [lo] + cuts + [hi]
    total = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        total += _piece(f, a, b, tol)
    return float(total)


def _piece(f: Func, a: float, b: float, tol: Tolerances) -> float:
    if a >= 0:
        if a == 0:
            if np.isinf(b):
                return near_zero(f, 1.0, tol) + to_infinity(f, 1.0, tol)
            return near_zero(f, b, tol)
        if np.isinf(b):
            return to_infinity(f, a, tol)
        return finite(f, a, b)
    # b <= 0: reflect
    g = lambda x: f(-x)  # noqa: E731
    return _piece(g, -b, -a, tol)
