"""Ball volumes, spherical cap integrals and the slab exit probability.

A slab of half-width ``t`` with unit normal ``y`` is the two-sided set
``{x : |<x, y>| <= t}``.  For a point at distance ``r`` from the origin the
exit probability over a uniformly random normal is

    alpha(r) = (2 |D_{n-1}| / |D_n|) * (cap(t/r) + (t/(n r)) (1 - t^2/r^2)^((n-1)/2))

where ``cap(a) = int_a^1 (1 - x^2)^((n-1)/2) dx``.  Everything that can
underflow is carried as a logarithm.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import special

from .quadrature import integrate

LN2 = math.log(2.0)

# Absolute constants left unspecified in the asymptotic lemmas.
TAIL_CONSTANT = 3.0
DOMINANCE_CONSTANT = 10.0

# Rounding slack tolerated before clamping alpha into [0, 1].
CLAMP_TOL = 1e-12
TINY = 1e-300


class GeometryError(ValueError):
    pass


class NTooSmallError(GeometryError):
    """The facet budget is too small for the requested slab width."""


def ball_log_volume(n: int) -> float:
    """log |D_n| = (n/2) log(pi) - log Gamma(n/2 + 1)."""
    if n < 1 or int(n) != n:
        raise GeometryError(f"dimension must be a positive integer, got {n!r}")
    return 0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n + 1.0)


@dataclass(frozen=True)
class BallGeometry:
    n: int
    log_vol_n: float
    log_vol_n_minus_1: float
    log_surf_n: float

    @classmethod
    def of(cls, n: int) -> "BallGeometry":
        return _geometry(int(n))

    @property
    def vol(self) -> float:
        return math.exp(self.log_vol_n)

    @property
    def surf(self) -> float:
        return math.exp(self.log_surf_n)

    @property
    def log_alpha_prefactor(self) -> float:
        """log(2 |D_{n-1}| / |D_n|)."""
        return LN2 + self.log_vol_n_minus_1 - self.log_vol_n


@lru_cache(maxsize=None)
def _geometry(n: int) -> BallGeometry:
    if n < 2:
        raise GeometryError(f"ball geometry needs n >= 2, got {n}")
    log_vol = ball_log_volume(n)
    return BallGeometry(n, log_vol, ball_log_volume(n - 1), math.log(n) + log_vol)


def _geom(g: BallGeometry | int) -> BallGeometry:
    return g if isinstance(g, BallGeometry) else BallGeometry.of(g)


@dataclass(frozen=True)
class ApproxParams:
    """One slab-construction experiment: dimension, log facet budget, rate, width."""

    n: int
    log_N: float
    gamma: float
    t: float

    def __post_init__(self) -> None:
        if self.n < 2:
            raise GeometryError("n must be >= 2")
        if not 0.0 < self.t < 1.0:
            raise GeometryError(f"t must lie in (0, 1), got {self.t!r}")
        if not self.gamma > 0.0:
            raise GeometryError(f"gamma must be positive, got {self.gamma!r}")
        if self.log_N < math.log(2 * self.n) - 1e-12:
            raise GeometryError(f"need N >= 2n slabs' worth of facets, got log N = {self.log_N}")

    @classmethod
    def analytic(cls, n: int, log_N: float, gamma: float = LN2) -> "ApproxParams":
        return cls(n, float(log_N), float(gamma), slab_width(n, log_N, gamma))

    @property
    def geometry(self) -> BallGeometry:
        return BallGeometry.of(self.n)

    @property
    def N(self) -> float:
        return math.exp(self.log_N) if self.log_N < 709.0 else math.inf

    @property
    def log_half_N(self) -> float:
        return self.log_N - LN2

    @property
    def rate_scale(self) -> float:
        """N^{-2/(n-1)}."""
        return math.exp(-2.0 * self.log_N / (self.n - 1))

    @property
    def delta(self) -> float:
        """Half-width (n-1)^{-1/2} N^{-2/(n-1)} of the window around r = 1."""
        return self.rate_scale / math.sqrt(self.n - 1)


# ---------------------------------------------------------------------------
# spherical cap integral


def _check_unit(a: float) -> None:
    if not 0.0 <= a <= 1.0:
        raise GeometryError(f"cap lower limit must lie in [0, 1], got {a!r}")


def _log_cap_quadrature(n: int, a: float) -> tuple[float, float]:
    """log of int_a^1 (1-x^2)^((n-1)/2) dx and its relative error estimate.

    Uses x = cos(theta), giving int_0^{theta_a} sin(theta)^n dtheta, scaled by
    sin(theta_a)^n so the integrand stays in [0, 1].
    """
    if a >= 1.0:
        return -math.inf, 0.0
    theta_a = math.atan2(math.sqrt((1.0 - a) * (1.0 + a)), a)
    log_sin_a = math.log(math.sin(theta_a))

    def f(theta: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.exp(n * (np.log(np.sin(theta)) - log_sin_a))

    res = integrate(f, [0.0, theta_a], rel_tol=1e-14, max_panels=2000)
    if res.value <= 0.0:
        return -math.inf, 0.0
    return n * log_sin_a + math.log(res.value), res.error / res.value


def _log_beta_tail_series(p: np.ndarray, x: np.ndarray) -> np.ndarray:
    """log of int_0^x u^(p-1) (1-u)^(-1/2) du for x <= 1/2 (power series)."""
    # sum_k (1/2)_k / k! * x^k / (p + k), ratio-recursive
    term = 1.0 / p
    total = term.copy()
    coef = np.ones_like(x)
    for k in range(80):
        coef = coef * (0.5 + k) / (k + 1.0) * x
        total = total + coef / (p + k + 1.0)
    return p * np.log(x) + np.log(total)


def log_cap_values(n: int, a: np.ndarray, one_minus_a2: np.ndarray) -> np.ndarray:
    """Vectorized log cap integral; ``1 - a^2`` is passed separately to avoid cancellation.

    cap(a) = (1/2) int_0^{1-a^2} v^((n-1)/2) (1-v)^(-1/2) dv
           = (1/2) B((n+1)/2, 1/2) I_{1-a^2}((n+1)/2, 1/2)
           = (1/2) B((n+1)/2, 1/2) (1 - I_{a^2}(1/2, (n+1)/2)).
    """
    a = np.asarray(a, dtype=float)
    x = np.asarray(one_minus_a2, dtype=float)
    p = 0.5 * (n + 1)
    out = np.full(x.shape, -np.inf)
    small = (x > 0.0) & (x <= 0.5)
    big = x > 0.5
    if np.any(small):
        out[small] = _log_beta_tail_series(np.full(np.count_nonzero(small), p), x[small]) - LN2
    if np.any(big):
        # complementary form keeps full precision when a is tiny
        reg = special.betaincc(0.5, p, a[big] * a[big])
        out[big] = np.log(reg) + special.betaln(p, 0.5) - LN2
    return out


def cap_integral(n: int, a: float, method: str = "beta", log: bool = False) -> float:
    """int_a^1 (1 - x^2)^((n-1)/2) dx.

    ``method="beta"`` uses the regularized incomplete beta identity,
    ``method="quadrature"`` adaptive Gauss-Kronrod in the angle variable.
    The two are independent and should agree to ~1e-12 relative.
    """
    _check_unit(a)
    if n < 1:
        raise GeometryError("n must be >= 1")
    if method == "quadrature":
        value, _ = _log_cap_quadrature(n, a)
    elif method == "beta":
        p = 0.5 * (n + 1)
        x = (1.0 - a) * (1.0 + a)
        if x <= 0.0:
            value = -math.inf
        else:
            reg = float(special.betainc(p, 0.5, x) if x <= 0.5 else special.betaincc(0.5, p, a * a))
            if reg > TINY:
                value = math.log(reg) + float(special.betaln(p, 0.5)) - LN2
            else:
                value = float(log_cap_values(n, np.array([a]), np.array([x]))[0])
    else:
        raise ValueError(f"unknown method {method!r}")
    return value if log else math.exp(value)


# ---------------------------------------------------------------------------
# exit probability


def _one_minus_s2(r: np.ndarray, t: float) -> np.ndarray:
    return (r - t) * (r + t) / (r * r)


def log_alpha(geom: BallGeometry | int, r, t: float) -> np.ndarray:
    """Vectorized log of the exit probability; -inf where r <= t."""
    g = _geom(geom)
    n = g.n
    r = np.asarray(r, dtype=float)
    out = np.full(r.shape, -np.inf)
    mask = r > t
    if np.any(mask):
        rr = r[mask]
        x = _one_minus_s2(rr, t)
        log_cone = np.log(t / (n * rr)) + 0.5 * (n - 1) * np.log(x)
        log_cap = log_cap_values(n, t / rr, x)
        out[mask] = np.minimum(g.log_alpha_prefactor + np.logaddexp(log_cap, log_cone), 0.0)
    return out


def log_survival(geom: BallGeometry | int, r, t: float) -> np.ndarray:
    """Vectorized log(1 - alpha): probability a point at radius r stays in one slab."""
    g = _geom(geom)
    r = np.asarray(r, dtype=float)
    la = log_alpha(g, r, t)
    out = np.zeros(r.shape)
    lo = la < math.log(0.5)
    out[lo] = np.log1p(-np.exp(la[lo]))
    hi = ~lo
    if np.any(hi):
        # 1 - alpha = P(|y_1| < t/r) = I_{(t/r)^2}(1/2, (n-1)/2), no cancellation
        s2 = (t / r[hi]) ** 2
        with np.errstate(divide="ignore"):
            out[hi] = np.log(special.betainc(0.5, 0.5 * (g.n - 1), s2))
    return out


def alpha(geom: BallGeometry | int, r: float, t: float) -> float:
    """Probability that a point at radius ``r`` lies outside one random slab of half-width ``t``."""
    g = _geom(geom)
    if not 0.0 < t < 1.0:
        raise GeometryError(f"t must lie in (0, 1), got {t!r}")
    if not r > 0.0:
        raise GeometryError(f"r must be positive, got {r!r}")
    if r <= t:
        return 0.0
    x = float(_one_minus_s2(np.array(r), t))
    log_cone = math.log(t / (g.n * r)) + 0.5 * (g.n - 1) * math.log(x)
    log_cap = cap_integral(g.n, t / r, log=True)
    value_log = g.log_alpha_prefactor + float(np.logaddexp(log_cap, log_cone))
    value = math.exp(value_log)
    if value > 1.0 + CLAMP_TOL:
        raise GeometryError(f"alpha evaluated to {value!r} > 1 beyond rounding tolerance")
    return min(max(value, 0.0), 1.0)


def slab_width(geom: BallGeometry | int, log_N: float, gamma: float = LN2) -> float:
    """Slab half-width t_{n,N} = sqrt(1 - (gamma |dD_n| / (N |D_{n-1}|))^(2/(n-1)))."""
    g = _geom(geom)
    if not gamma > 0.0:
        raise GeometryError("gamma must be positive")
    log_eps = (2.0 / (g.n - 1)) * (math.log(gamma) + g.log_surf_n - log_N - g.log_vol_n_minus_1)
    if log_eps >= 0.0:
        raise NTooSmallError(f"N too small: exp(log N)={math.exp(min(log_N, 700))!r} for n={g.n}")
    return math.sqrt(-math.expm1(log_eps))


def membership_log_prob(geom: BallGeometry | int, params: ApproxParams, r) -> np.ndarray | float:
    """log Pr(x in P) = (N/2) log(1 - alpha) for |x| = r; exactly 0 for r <= t."""
    g = _geom(geom)
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0.0):
        raise GeometryError("r must be positive")
    t = params.t
    la = log_alpha(g, r, t)
    out = np.zeros(r.shape)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        small = la < math.log(1e-8)
        # (N/2) log1p(-a) = -(N/2) a (1 + a/2 + ...), kept in log form for huge N
        a = np.exp(la[small])
        corr = np.where(a > TINY, -np.log1p(-a) / np.where(a > TINY, a, 1.0), 1.0)
        out[small] = -np.exp(params.log_half_N + la[small]) * corr
        big = ~small
        if np.any(big):
            ls = log_survival(g, r[big], t)
            out[big] = np.where(ls < 0.0, -np.exp(params.log_half_N + np.log(-ls)), 0.0)
    out[r <= t] = 0.0
    return float(out[0]) if scalar else out


def alpha_asymptotic(geom: BallGeometry | int, params: ApproxParams, r: float) -> float:
    """Leading-order exit probability (2 gamma / N) exp((n-1)(r-1) N^{2/(n-1)}) near r = 1."""
    g = _geom(geom)
    if abs(r - 1.0) > params.delta * (1.0 + 1e-12):
        warnings.warn(
            f"r={r} lies outside the window [1-delta, 1+delta], delta={params.delta:.3g}",
            stacklevel=2)
    log_val = (LN2 + math.log(params.gamma) - params.log_N
               + (g.n - 1) * (r - 1.0) * math.exp(2.0 * params.log_N / (g.n - 1)))
    return math.exp(log_val) if log_val < 709.0 else math.inf


def alpha_tail_lower_bound(geom: BallGeometry | int, r: float, t: float) -> float:
    """Lower bound 1 - C sqrt(n) / r on the exit probability, valid for r >= n^2."""
    g = _geom(geom)
    if r < g.n ** 2:
        raise GeometryError(f"tail bound needs r >= n^2 = {g.n ** 2}, got {r}")
    if not 0.0 < t < 1.0:
        raise GeometryError("t must lie in (0, 1)")
    return max(0.0, 1.0 - TAIL_CONSTANT * math.sqrt(g.n) / r)


class CapApprox(NamedTuple):
    value: float
    relative_error: float


def cap_leading_term(n: int, a: float) -> CapApprox:
    """Leading Laplace term (1 - a^2)^((n+1)/2) / (a (n-1)) for the cap integral.

    ``relative_error`` is measured against the exact cap integral.
    """
    if not 2.0 / 3.0 < a < 1.0:
        raise GeometryError(f"leading-term approximation needs a in (2/3, 1), got {a!r}")
    log_x = math.log((1.0 - a) * (1.0 + a))
    log_lead = 0.5 * (n + 1) * log_x - math.log(a * (n - 1))
    log_exact = cap_integral(n, a, log=True)
    return CapApprox(math.exp(log_lead), abs(math.expm1(log_lead - log_exact)))
