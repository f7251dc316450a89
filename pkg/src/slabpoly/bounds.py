"""Closed-form volume and surface bounds, and regime sweeps of the expectation."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from .expectation import analytic_breakdown, optimize_width, rate_constants
from .geometry import LN2, BallGeometry, GeometryError, NTooSmallError, slab_width

# Width of the reported O(n^{-1/2}) band: K / sqrt(n).
BAND_K = 5.0
# Inflation of the outer constant when only N >= 10^n is assumed.
EXTENDED_OUTER_FACTOR = 1.0 / (1.0 - 1.0 / 20.0)


class RegimeWarning(UserWarning):
    pass


def theorem_regime(n: int, log_N: float, constants: str = "standard") -> bool:
    """N >= n^n for the standard constants, N >= 10^n for the extended set."""
    floor = n * (math.log(10.0) if constants == "extended" else math.log(n))
    return log_N >= floor - 1e-12


def _flag(n: int, log_N: float, constants: str) -> None:
    if not theorem_regime(n, log_N, constants):
        warnings.warn(f"(n={n}, log N={log_N:.4g}) is outside the {constants} regime",
                      RegimeWarning, stacklevel=3)


def _rate_scale(n: int, log_N: float) -> float:
    return math.exp(-2.0 * log_N / (n - 1))


def volume_constant(constants: str = "standard") -> float:
    rc = rate_constants()
    if constants == "standard":
        return rc.I + rc.II
    if constants == "extended":
        return rc.I + rc.II * EXTENDED_OUTER_FACTOR
    raise ValueError(f"unknown constant set {constants!r}")


def upper_bound_volume(n: int, log_N: float, constants: str = "standard") -> float:
    """(I + II) N^{-2/(n-1)} |D_n|."""
    _flag(n, log_N, constants)
    return volume_constant(constants) * _rate_scale(n, log_N) * BallGeometry.of(n).vol


def band(n: int) -> float:
    """Relative uncertainty K n^{-1/2} attached to the upper bounds."""
    return BAND_K / math.sqrt(n)


def lower_bound_volume(n: int, log_N: float, log_surf_P: float | None = None) -> float:
    """Lower bound on Delta_v for any polytope with N facets.

    With ``log_surf_P`` (log of the polytope's surface area) the exact
    equal-facet minimizer ``(|dP|/(2n)) (1 - sqrt(1 - (|dP|/(|D_{n-1}| N))^{2/(n-1)}))``
    is returned; otherwise the asymptotic ``N^{-2/(n-1)} |D_n| / 4``.
    """
    g = BallGeometry.of(n)
    if log_surf_P is None:
        if log_N < n * math.log(n) - 1e-12:
            warnings.warn("asymptotic lower bound used below N = n^n", RegimeWarning, stacklevel=2)
        return 0.25 * _rate_scale(n, log_N) * g.vol
    log_ratio = log_surf_P - g.log_vol_n_minus_1 - log_N
    x = math.exp(2.0 * log_ratio / (n - 1))
    if x >= 1.0:
        raise GeometryError("surface/facet budget inconsistent: facet radius exceeds 1")
    return math.exp(log_surf_P) / (2 * n) * (1.0 - math.sqrt(1.0 - x))


def lagrange_objective(n: int, radii) -> float:
    """Sum over facets of |D_{n-1}| r_i^{n-1} (1 - sqrt(1 - r_i^2)) / (2n).

    Minimized, for a fixed total facet area, at equal radii; the minimum is
    :func:`lower_bound_volume` with ``log_surf_P`` given.
    """
    r = np.asarray(radii, dtype=float)
    if np.any((r <= 0.0) | (r >= 1.0)):
        raise GeometryError("facet radii must lie in (0, 1)")
    g = BallGeometry.of(n)
    terms = np.exp(g.log_vol_n_minus_1 + (n - 1) * np.log(r)) * -np.expm1(0.5 * np.log1p(-r * r))
    return math.fsum(terms.tolist()) / (2 * n)


def upper_bound_surface(n: int, log_N: float) -> float:
    """(2 I + II + 1/2) N^{-2/(n-1)} |dD_n|."""
    _flag(n, log_N, "standard")
    return rate_constants().surface_constant * _rate_scale(n, log_N) * BallGeometry.of(n).surf


@dataclass(frozen=True)
class BoundsReport:
    n: int
    log_N: float
    constants: str
    in_regime: bool
    upper_volume: float
    upper_surface: float
    lower_volume: float
    ldiv_upper: float
    ldiv_lower: float
    upper_volume_normalized: float      # / (N^{-2/(n-1)} |D_n|)
    upper_surface_normalized: float     # / (N^{-2/(n-1)} |dD_n|)
    lower_volume_normalized: float
    band: float

    def as_dict(self) -> dict:
        return asdict(self)


def bounds_report(n: int, log_N: float, constants: str = "standard") -> BoundsReport:
    rc = rate_constants()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        up_v = upper_bound_volume(n, log_N, constants)
        up_s = upper_bound_surface(n, log_N)
        lo_v = lower_bound_volume(n, log_N)
    ldiv_upper = volume_constant(constants) / (math.pi * math.e)
    return BoundsReport(
        n=n, log_N=log_N, constants=constants, in_regime=theorem_regime(n, log_N, constants),
        upper_volume=up_v, upper_surface=up_s, lower_volume=lo_v,
        ldiv_upper=ldiv_upper, ldiv_lower=rc.ldiv_lower,
        upper_volume_normalized=volume_constant(constants),
        upper_surface_normalized=rc.surface_constant,
        lower_volume_normalized=0.25,
        band=band(n),
    )


# ---------------------------------------------------------------------------
# sweeps


def schedule_log_N(rule: str, n: int) -> float:
    """log N for a named schedule.

    ``"nn"``: N = n^n;  ``"sqrt2"``: N = 2^{sqrt n};  ``"A=<value>"``: N = A^n.
    """
    if rule == "nn":
        return n * math.log(n)
    if rule == "sqrt2":
        return math.sqrt(n) * LN2
    if rule.startswith("A="):
        return n * math.log(float(rule[2:]))
    raise ValueError(f"unknown schedule {rule!r}")


@dataclass(frozen=True)
class SweepRow:
    n: int
    log_N: float
    t_analytic: float
    ratio_analytic: float       # E[Delta_v] / |D_n| at the analytic width
    normalized_analytic: float  # E[Delta_v] / (N^{-2/(n-1)} |D_n|)
    t_opt: float
    ratio_opt: float            # same at the numerically optimal width


def regime_sweep(n_values: Iterable[int], rule: str, optimize: bool = True) -> list[SweepRow]:
    """Expected symmetric difference along a facet schedule, one row per n (in input order)."""
    rows = []
    for n in n_values:
        log_N = schedule_log_N(rule, n)
        try:
            b = analytic_breakdown(n, log_N)
            t_a, ratio_a, norm_a = slab_width(n, log_N), b.relative, b.normalized
        except (NTooSmallError, GeometryError):
            t_a = ratio_a = norm_a = math.nan
        t_o = ratio_o = math.nan
        if optimize and log_N >= math.log(2 * n):
            w = optimize_width(n, log_N)
            t_o, ratio_o = w.t_opt, w.value.relative
        rows.append(SweepRow(n, log_N, t_a, ratio_a, norm_a, t_o, ratio_o))
    return rows
