"""Exact-in-law simulation of ``X_t`` up to a Gaussian small-jump substitution.

``X_t = t mu_eps + sigma W_t + G + sum of jumps with |x| > eps``, where the
compensated jumps below ``eps`` are replaced by a centred Gaussian ``G`` with
variance ``t V(eps)`` and ``mu_eps`` is the truncated drift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature as quad
from .errors import DomainError, SimulationBudgetExceeded
from .levy_core import LevyModel, truncated_drift

MAX_JUMPS = 5e8


@dataclass(frozen=True)
class JumpSampler:
    eps: float
    rate_pos: float
    rate_neg: float
    # inverse-CDF tables per side: cumulative mass (increasing) and log|x|
    cdf_pos: np.ndarray
    logx_pos: np.ndarray
    cdf_neg: np.ndarray
    logx_neg: np.ndarray

    @property
    def rate(self) -> float:
        return self.rate_pos + self.rate_neg

    def draw(self, m: int, rng: np.random.Generator) -> np.ndarray:
        if m == 0:
            return np.empty(0)
        pos = rng.uniform(size=m) < self.rate_pos / self.rate
        u = rng.uniform(size=m)
        out = np.empty(m)
        if pos.any():
            out[pos] = np.exp(np.interp(u[pos] * self.cdf_pos[-1], self.cdf_pos, self.logx_pos))
        if (~pos).any():
            out[~pos] = -np.exp(np.interp(u[~pos] * self.cdf_neg[-1], self.cdf_neg, self.logx_neg))
        return out


def _side_table(f, eps, reach, per_decade=400):
    # cumulative mass of f on [eps, reach] tabulated on a log grid, cut where the rest is negligible
    if reach <= eps:
        return np.array([0.0, 0.0]), np.log(np.array([eps, eps * (1 + 1e-12)]))
    hi = min(reach, 1e6)
    n = max(16, int(per_decade * math.log10(hi / eps)))
    edges = np.geomspace(eps, hi, n + 1)
    cells = quad.gl_panels(f, edges)
    cdf = np.concatenate([[0.0], np.cumsum(np.maximum(cells, 0.0))])
    return cdf, np.log(edges)


def jump_sampler(model: LevyModel, eps: float) -> JumpSampler:
    jd = model.jumps
    cp, lp = _side_table(jd, eps, jd.support_hi)
    cn, ln = _side_table(lambda x: jd(-x), eps, -jd.support_lo)
    return JumpSampler(eps, float(cp[-1]), float(cn[-1]), cp, lp, cn, ln)


def small_jump_moments(model: LevyModel, eps: float) -> dict:
    jd, tol = model.jumps, model.tol
    pts = (eps, -eps)
    return {k: jd.integrate(w, -eps, eps, tol, extra_points=pts) for k, w in
            (("m2", lambda x: x * x), ("m3", lambda x: x ** 3), ("m4", lambda x: x ** 4))}


def choose_eps(model: LevyModel, t: float, skew_max: float = 0.01, kurt_max: float = 0.01) -> float:
    """Largest ``eps`` (on a 1/8-decade grid below 1) with small-jump skewness
    ``|t m3| / (t m2)^{3/2} < skew_max`` and excess kurtosis ``t m4 / (t m2)^2 < kurt_max``."""
    for k in range(0, 8 * 16):
        eps = 10.0 ** (-k / 8.0)
        m = small_jump_moments(model, eps)
        if m["m2"] <= 0:
            return eps
        var = t * m["m2"]
        skew = abs(t * m["m3"]) / var ** 1.5
        kurt = t * m["m4"] / var ** 2
        if skew < skew_max and kurt < kurt_max:
            return eps
    raise SimulationBudgetExceeded("no admissible small-jump threshold above 1e-16")


@dataclass(frozen=True)
class IncrementSimulator:
    model: LevyModel
    t: float
    eps: float
    drift: float
    gauss_sd: float
    sampler: JumpSampler | None

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        x = np.full(n, self.drift * self.t)
        if self.gauss_sd > 0:
            x += self.gauss_sd * rng.standard_normal(n)
        if self.sampler is not None and self.sampler.rate > 0:
            counts = rng.poisson(self.sampler.rate * self.t, n)
            total = int(counts.sum())
            if total:
                jumps = self.sampler.draw(total, rng)
                idx = np.repeat(np.arange(n), counts)
                x += np.bincount(idx, weights=jumps, minlength=n)
        return x


def simulator(model: LevyModel, t: float, n: int, eps: float | None = None) -> IncrementSimulator:
    if t <= 0:
        raise DomainError("t must be positive")
    if not model.has_jumps:
        return IncrementSimulator(model, t, 0.0, model.b, model.sigma * math.sqrt(t), None)
    if eps is None:
        eps = choose_eps(model, t)
    sampler = jump_sampler(model, eps)
    if n * sampler.rate * t > MAX_JUMPS:
        raise SimulationBudgetExceeded(
            f"{n} paths x {sampler.rate * t:.3g} jumps per path exceeds the {MAX_JUMPS:.0e} budget")
    v_eps = small_jump_moments(model, eps)["m2"]
    sd = math.sqrt(model.sigma ** 2 * t + v_eps * t)
    return IncrementSimulator(model, t, eps, truncated_drift(model, eps), sd, sampler)


def mc_mean(fn, model: LevyModel, t: float, n: int, seed: int, chunk: int = 200_000,
            eps: float | None = None):
    """Mean and standard error of ``fn(X_t)`` over ``n`` simulated increments."""
    sim = simulator(model, t, n, eps)
    rng = np.random.default_rng(seed)
    s1 = s2 = 0.0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        v = fn(sim.sample(m, rng))
        s1 += float(v.sum())
        s2 += float((v * v).sum())
        done += m
    mean = s1 / n
    return mean, math.sqrt(max(s2 / n - mean * mean, 0.0) / n)
