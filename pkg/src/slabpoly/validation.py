"""Quick invariant suite behind ``slabpoly validate``."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .bounds import RegimeWarning, lower_bound_volume, upper_bound_volume
from .expectation import analytic_breakdown, expected_sym_diff, rate_constants
from .geometry import LN2, ApproxParams, alpha, cap_integral
from .montecarlo import mean_sym_diff


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def check_constants() -> Check:
    rc = rate_constants()
    errs = (abs(rc.gamma_star - LN2), abs(rc.I_plus_II - 0.96784),
            abs(rc.ldiv_lower - 1.0 / (4.0 * math.pi * math.e)))
    ok = errs[0] <= 1e-10 and errs[1] <= 1e-3 and errs[2] <= 1e-9
    return Check("constants", ok, f"gamma*={rc.gamma_star:.12f} I+II={rc.I_plus_II:.8f}")


def alpha_grid() -> list[tuple[float, float]]:
    ts = np.linspace(0.05, 0.95, 10)
    ks = np.linspace(1.02, 6.0, 10)
    return [(float(t * k), float(t)) for t in ts for k in ks]


def check_closed_form_alpha() -> Check:
    worst = 0.0
    for r, t in alpha_grid():
        worst = max(worst,
                    abs(alpha(2, r, t) - 2.0 * math.acos(t / r) / math.pi),
                    abs(alpha(3, r, t) - (1.0 - t / r)))
    return Check("closed_form_alpha", worst <= 1e-12, f"max abs error {worst:.3e}")


def check_cap_two_path(ns=(2, 3, 5, 10, 30, 50, 100, 200)) -> Check:
    worst = 0.0
    for n in ns:
        for a in np.append(np.arange(0.0, 0.95, 0.1), 0.99):
            q = cap_integral(n, float(a), method="quadrature")
            b = cap_integral(n, float(a), method="beta")
            worst = max(worst, abs(q - b) / b)
    return Check("cap_two_path", worst <= 1e-11, f"max rel diff {worst:.3e}")


def check_mc_identity(seed: int, realizations: int = 200, samples: int = 5000) -> Check:
    p = ApproxParams(4, math.log(64), LN2, 0.8)
    exact = expected_sym_diff(p).total
    est = mean_sym_diff(p, realizations, samples, seed)
    ok = est.within(exact, 3.0)
    return Check("mc_vs_quadrature", ok,
                 f"mc={est.value:.6f}±{est.std_error:.6f} exact={exact:.6f}")


def check_bound_ordering(ns=range(4, 17)) -> Check:
    bad = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        for n in ns:
            log_N = n * math.log(10.0)
            e = analytic_breakdown(n, log_N).total
            if not lower_bound_volume(n, log_N) <= e <= 3.0 * upper_bound_volume(n, log_N):
                bad.append(n)
    return Check("bound_ordering", not bad, f"violations at n={bad}" if bad else "n=4..16 ok")


def run_checks(seed: int = 0) -> list[Check]:
    return [check_constants(), check_closed_form_alpha(), check_cap_two_path(),
            check_mc_identity(seed), check_bound_ordering()]
