"""Exact expected symmetric volume difference of the random slab polytope.

For N/2 independent slabs of half-width t the Fubini identity gives

    E|D_n \\ P| = |dD_n| int_t^1 r^(n-1) (1 - (1 - alpha(r))^(N/2)) dr
    E|P \\ D_n| = |dD_n| int_1^inf r^(n-1) (1 - alpha(r))^(N/2) dr

for any even N and any t in (0, 1).  Both integrals are computed on the
natural scale N^{-2/(n-1)} |D_n| so tolerances are dimension free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import geometry
from .geometry import LN2, ApproxParams, BallGeometry
from .quadrature import integrate

ABS_TOL = 1e-10        # on the normalized scale
REL_TOL = 1e-10
FLAG_REL = 1e-8        # error/total above this marks the result unconverged
MAX_PANELS = 6000


class UnconvergedError(RuntimeError):
    pass


class TailNotCertifiedError(UnconvergedError):
    pass


@dataclass(frozen=True)
class ExpectationBreakdown:
    inner_deficit: float
    outer_excess: float
    total: float
    normalized: float
    quadrature_error_bound: float
    converged: bool = True
    relative: float = math.nan   # total / |D_n|, finite even when |D_n| underflows

    @classmethod
    def from_normalized(cls, params: ApproxParams, inner: float, outer: float,
                        err: float, converged: bool) -> "ExpectationBreakdown":
        scale = params.geometry.vol * params.rate_scale
        inner_v = inner * scale
        outer_v = outer * scale
        total_n = inner + outer
        ok = converged and err <= FLAG_REL * max(total_n, 1e-300)
        return cls(inner_v, outer_v, inner_v + outer_v, total_n, err * scale, ok,
                   total_n * params.rate_scale)


def _log_weight(params: ApproxParams) -> float:
    # |dD_n| / (|D_n| N^{-2/(n-1)}) = n N^{2/(n-1)}
    return math.log(params.n) + 2.0 * params.log_N / (params.n - 1)


def _geometric_points(start: float, stop: float, step: float) -> list[float]:
    """start, start +- step, start +- 2 step, start +- 4 step, ... strictly before stop."""
    pts = [start]
    sign = 1.0 if stop > start else -1.0
    k = max(step, 4.0 * np.finfo(float).eps * abs(start))
    while sign * (start + sign * k - stop) < 0.0 and len(pts) < 200:
        pts.append(start + sign * k)
        k *= 2.0
    pts.append(stop)
    return pts


def inner_integrand(params: ApproxParams):
    g = params.geometry
    lw = _log_weight(params)

    def f(r: np.ndarray) -> np.ndarray:
        mlp = geometry.membership_log_prob(g, params, r)
        return np.exp(lw + (g.n - 1) * np.log(r)) * -np.expm1(mlp)

    return f


def outer_log_integrand(params: ApproxParams, r: np.ndarray) -> np.ndarray:
    g = params.geometry
    return _log_weight(params) + (g.n - 1) * np.log(r) + geometry.membership_log_prob(g, params, r)


def _normalized_inner(params: ApproxParams) -> tuple[float, float, bool]:
    t = params.t
    if t >= 1.0:
        return 0.0, 0.0, True
    pts = _geometric_points(1.0, t, params.delta)
    res = integrate(inner_integrand(params), pts, abs_tol=ABS_TOL, rel_tol=REL_TOL,
                    max_panels=MAX_PANELS)
    return res.value, res.error, res.converged


def _log_tail_bound(params: ApproxParams, R: float) -> float:
    """log of a certified upper bound on the normalized outer integrand over [R, inf)."""
    n = params.n
    lw = _log_weight(params)
    L = max(R, float(n * n))
    half_N = math.exp(params.log_half_N) if params.log_half_N < 700 else math.inf
    # [R, L]: alpha is non-decreasing in r, so (1-alpha(r))^(N/2) <= (1-alpha(R))^(N/2)
    mlp_R = float(geometry.membership_log_prob(params.geometry, params, R))
    parts = [lw + mlp_R + n * math.log(L) - math.log(n)] if L > R else []
    # [L, inf): 1 - alpha <= C sqrt(n) / r
    q = geometry.TAIL_CONSTANT * math.sqrt(n) / L
    if half_N <= n or q >= 1.0:
        return math.inf
    if math.isinf(half_N):
        parts.append(-math.inf)
    else:
        parts.append(lw + half_N * math.log(q) + n * math.log(L) - math.log(half_N - n))
    return float(np.logaddexp.reduce(parts))


def _normalized_outer(params: ApproxParams) -> tuple[float, float, bool]:
    log_cut = math.log(ABS_TOL) - 40.0
    log_tail_tol = math.log(ABS_TOL * 1e-2)
    n = params.n
    # steps below the float spacing at 1 would not move R
    step = max(params.delta, 4.0 * np.finfo(float).eps)
    R = 1.0 + step
    for _ in range(400):
        if (R > 1.0 + 2.0 / n
                and float(outer_log_integrand(params, np.array([R]))[0]) < log_cut
                and _log_tail_bound(params, R) < log_tail_tol):
            break
        step *= 2.0
        R = 1.0 + step
    else:
        raise TailNotCertifiedError(f"could not certify the outer tail for {params}")

    pts = _geometric_points(1.0, R, params.delta)
    for extra in (1.0 + 2.0 * params.rate_scale, 1.0 + 2.0 / n, float(n * n)):
        if 1.0 < extra < R:
            pts.append(extra)

    def f(r: np.ndarray) -> np.ndarray:
        return np.exp(outer_log_integrand(params, r))

    res = integrate(f, pts, abs_tol=ABS_TOL, rel_tol=REL_TOL, max_panels=MAX_PANELS)
    return res.value, res.error, res.converged


def expected_inner_deficit(params: ApproxParams) -> float:
    """E|D_n \\ P| in volume units."""
    v, _, ok = _normalized_inner(params)
    if not ok:
        raise UnconvergedError(f"inner integral unconverged for {params}")
    return v * params.geometry.vol * params.rate_scale


def expected_outer_excess(params: ApproxParams) -> float:
    """E|P \\ D_n| in volume units."""
    v, _, ok = _normalized_outer(params)
    if not ok:
        raise UnconvergedError(f"outer integral unconverged for {params}")
    return v * params.geometry.vol * params.rate_scale


def expected_sym_diff(params: ApproxParams) -> ExpectationBreakdown:
    """Both parts of E[Delta_v] with the accumulated quadrature error."""
    inner, e_in, ok_in = _normalized_inner(params)
    outer, e_out, ok_out = _normalized_outer(params)
    return ExpectationBreakdown.from_normalized(params, inner, outer, e_in + e_out, ok_in and ok_out)


# ---------------------------------------------------------------------------
# limit constants


def inner_constant(gamma: float) -> float:
    """int_0^1 (1 - e^{-gamma s}) / s ds."""
    res = integrate(lambda s: -np.expm1(-gamma * s) / s, [0.0, 0.5, 1.0], rel_tol=1e-14, strict=True)
    return res.value


def outer_constant(gamma: float) -> float:
    """int_0^inf exp(-gamma e^s) ds, computed as int_1^inf e^{-gamma u} / u du."""
    upper = 1.0
    while math.exp(-gamma * upper) / (gamma * upper) > 1e-18:
        upper *= 2.0
    pts = _geometric_points(1.0, upper, 1.0)
    res = integrate(lambda u: np.exp(-gamma * u) / u, pts, rel_tol=1e-14, strict=True)
    return res.value


@dataclass(frozen=True)
class RateConstants:
    I: float
    II: float
    gamma_star: float
    ldiv_upper: float
    ldiv_lower: float

    @property
    def I_plus_II(self) -> float:
        return self.I + self.II

    @property
    def surface_constant(self) -> float:
        """2 I + II + 1/2."""
        return 2.0 * self.I + self.II + 0.5


_RATE_CONSTANTS: RateConstants | None = None


def rate_constants() -> RateConstants:
    global _RATE_CONSTANTS
    if _RATE_CONSTANTS is None:
        # d/dgamma (I + II) = (1 - 2 e^{-gamma}) / gamma
        gamma_star = optimize.brentq(lambda g: 1.0 - 2.0 * math.exp(-g), 0.1, 2.0,
                                     xtol=1e-15, rtol=4 * np.finfo(float).eps)
        I = inner_constant(LN2)
        II = outer_constant(LN2)
        pe = math.pi * math.e
        _RATE_CONSTANTS = RateConstants(I, II, gamma_star, (I + II) / pe, 1.0 / (4.0 * pe))
    return _RATE_CONSTANTS


# ---------------------------------------------------------------------------
# width optimization


@dataclass(frozen=True)
class WidthOptimum:
    t_opt: float
    value: ExpectationBreakdown
    converged: bool


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo: float, hi: float, tol: float = 1e-6, max_iter: int = 200):
    """Minimize a unimodal ``f`` on [lo, hi]; returns (x, f(x), converged)."""
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x, fx = (c, fc) if fc < fd else (d, fd)
    return x, fx, b - a <= tol


def optimize_width(n: int, log_N: float, tol: float = 1e-6,
                   lo: float = 1e-3, hi: float = 1.0 - 1e-9) -> WidthOptimum:
    """Numerically minimize the expected symmetric difference over the slab width."""
    cache: dict[float, ExpectationBreakdown] = {}

    def objective(t: float) -> float:
        b = expected_sym_diff(ApproxParams(n, log_N, LN2, t))
        cache[t] = b
        return b.normalized

    t_opt, _, ok = golden_section(objective, lo, hi, tol)
    best = cache[t_opt]
    return WidthOptimum(t_opt, best, ok and best.converged)


def analytic_breakdown(n: int, log_N: float, gamma: float = LN2) -> ExpectationBreakdown:
    return expected_sym_diff(ApproxParams.analytic(n, log_N, gamma))


__all__ = [
    "ExpectationBreakdown", "RateConstants", "WidthOptimum", "UnconvergedError",
    "TailNotCertifiedError", "expected_inner_deficit", "expected_outer_excess",
    "expected_sym_diff", "rate_constants", "optimize_width", "inner_constant",
    "outer_constant", "analytic_breakdown", "BallGeometry",
]
