"""Command-line front end.

Every run writes one table (CSV) or one JSON object holding the resolved
configuration, the results and a provenance block.  Exit codes: 0 success,
1 validation failure, 2 bad configuration, 3 unconverged numerics.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from typing import Any, Sequence

from . import __version__
from .bounds import RegimeWarning, bounds_report, regime_sweep
from .expectation import UnconvergedError, expected_sym_diff, rate_constants
from .geometry import LN2, ApproxParams, GeometryError
from .montecarlo import mean_sym_diff, mean_surface_deviation

SCHEMA_VERSION = 1
COMMANDS = ("constants", "expectation", "montecarlo", "bounds", "sweep", "validate")

EXPECTATION_COLUMNS = ["n", "N", "gamma", "t", "inner_deficit", "outer_excess", "total",
                       "normalized", "err_bound"]

DEFAULTS: dict[str, Any] = {
    "n": None, "N": None, "log_N": None, "gamma": LN2, "t": None, "seed": 0,
    "samples": 20000, "realizations": 200, "format": "csv", "out": None,
    "constants": "standard", "rule": "nn", "n_values": None, "surface": False,
    "optimize": False, "workers": 1,
}

# settings that never change results stay out of the run record
_UNRECORDED = ("out", "workers")


class ConfigError(ValueError):
    pass


def _cell(x: Any) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _json_safe(x: Any) -> Any:
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


# ---------------------------------------------------------------------------
# configuration


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value or JSON file; flags override it")
    common.add_argument("--n", type=int)
    common.add_argument("--N", type=float, help="facet budget")
    common.add_argument("--log-N", dest="log_N", type=float, help="natural log of the facet budget")
    common.add_argument("--gamma", type=float)
    common.add_argument("--t", type=float, help="slab half-width (default: analytic)")
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int, help="directions per realization (M)")
    common.add_argument("--realizations", type=int, help="independent polytopes (K)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--out")
    common.add_argument("--constants", choices=("standard", "extended"))
    common.add_argument("--rule", help="sweep schedule: nn, sqrt2 or A=<value>")
    common.add_argument("--n-values", dest="n_values", help="comma-separated dimensions")
    common.add_argument("--surface", action="store_const", const=True)
    common.add_argument("--optimize", action="store_const", const=True)
    common.add_argument("--workers", type=int)

    parser = argparse.ArgumentParser(prog="slabpoly", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def load_config_file(path: str) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return json.loads(text)
    cfg: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg


_TYPES = {"n": int, "N": float, "log_N": float, "gamma": float, "t": float, "seed": int,
          "samples": int, "realizations": int, "workers": int}


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        return None
    if key in _TYPES:
        return _TYPES[key](value)
    if key in ("surface", "optimize") and isinstance(value, str):
        return value.lower() in ("1", "true", "yes")
    return value


def resolve_config(argv: Sequence[str] | None) -> dict[str, Any]:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            raise
        raise ConfigError("could not parse arguments") from exc
    flags = {k: v for k, v in vars(ns).items() if v is not None}
    file_cfg = load_config_file(flags["config"]) if "config" in flags else {}
    cfg = dict(DEFAULTS)
    cfg["command"] = None
    for source in (file_cfg, flags):
        for key, value in source.items():
            if key == "config":
                continue
            if key not in cfg:
                raise ConfigError(f"unknown configuration key {key!r}")
            try:
                cfg[key] = _coerce(key, value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
    if cfg["command"] not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}")
    if cfg["N"] is not None and cfg["log_N"] is None:
        if cfg["N"] <= 0:
            raise ConfigError("N must be positive")
        cfg["log_N"] = math.log(cfg["N"])
    return cfg


def _params(cfg: dict[str, Any]) -> ApproxParams:
    if cfg["n"] is None or cfg["log_N"] is None:
        raise ConfigError(f"{cfg['command']} needs --n and --N (or --log-N)")
    try:
        if cfg["t"] is None:
            return ApproxParams.analytic(cfg["n"], cfg["log_N"], cfg["gamma"])
        return ApproxParams(cfg["n"], cfg["log_N"], cfg["gamma"], cfg["t"])
    except GeometryError as exc:
        raise ConfigError(str(exc)) from exc


def _N_value(cfg: dict[str, Any]) -> float:
    if cfg["N"] is not None:
        return cfg["N"]
    return math.exp(cfg["log_N"]) if cfg["log_N"] < 709.0 else math.inf


# ---------------------------------------------------------------------------
# commands


def cmd_constants(cfg: dict[str, Any]) -> list[dict[str, Any]]:
    rc = rate_constants()
    return [{"I": rc.I, "II": rc.II, "I_plus_II": rc.I_plus_II, "gamma_star": rc.gamma_star,
             "ldiv_upper": rc.ldiv_upper, "ldiv_lower": rc.ldiv_lower,
             "surface_constant": rc.surface_constant}]


def cmd_expectation(cfg: dict[str, Any]) -> list[dict[str, Any]]:
    p = _params(cfg)
    b = expected_sym_diff(p)
    if not b.converged:
        raise UnconvergedError(f"quadrature error {b.quadrature_error_bound!r} too large")
    return [dict(zip(EXPECTATION_COLUMNS, [
        p.n, _N_value(cfg), p.gamma, p.t, b.inner_deficit, b.outer_excess, b.total,
        b.normalized, b.quadrature_error_bound]))]


def cmd_montecarlo(cfg: dict[str, Any]) -> list[dict[str, Any]]:
    p = _params(cfg)
    N = _N_value(cfg)
    if not (math.isfinite(N) and abs(N - round(N)) < 1e-6 * N and round(N) % 2 == 0):
        raise ConfigError("montecarlo needs an even integer N")
    K, M, seed, w = cfg["realizations"], cfg["samples"], cfg["seed"], cfg["workers"]
    if K < 1 or M < 1 or round(N) // 2 < p.n:
        raise ConfigError("montecarlo needs realizations >= 1, samples >= 1 and N/2 >= n")
    est = mean_sym_diff(p, K, M, seed, workers=w)
    exact = expected_sym_diff(p)
    row: dict[str, Any] = {
        "n": p.n, "N": N, "t": p.t, "realizations": K, "samples": M, "seed": seed,
        "sym_diff": est.value, "sym_diff_se": est.std_error, "expected_sym_diff": exact.total,
    }
    if cfg["surface"]:
        s = mean_surface_deviation(p, K, M, seed, workers=w)
        row.update({"delta_s": s.delta_s.value, "delta_s_se": s.delta_s.std_error,
                    "unbounded": s.unbounded})
    return [row]


def cmd_bounds(cfg: dict[str, Any]) -> list[dict[str, Any]]:
    if cfg["n"] is None or cfg["log_N"] is None:
        raise ConfigError("bounds needs --n and --N (or --log-N)")
    return [bounds_report(cfg["n"], cfg["log_N"], cfg["constants"]).as_dict()]


def _n_values(cfg: dict[str, Any]) -> list[int]:
    raw = cfg["n_values"]
    if raw is None:
        if cfg["n"] is None:
            raise ConfigError("sweep needs --n-values or --n")
        return [cfg["n"]]
    try:
        if isinstance(raw, (list, tuple)):
            return [int(v) for v in raw]
        return [int(v) for v in str(raw).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --n-values {raw!r}") from exc


def cmd_sweep(cfg: dict[str, Any]) -> list[dict[str, Any]]:
    try:
        rows = regime_sweep(_n_values(cfg), cfg["rule"], optimize=bool(cfg["optimize"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return [vars(r).copy() for r in rows]


def cmd_validate(cfg: dict[str, Any]) -> list[dict[str, Any]]:
    from .validation import run_checks
    return [{"check": c.name, "passed": c.passed, "detail": c.detail} for c in run_checks(cfg["seed"])]


HANDLERS = {
    "constants": cmd_constants, "expectation": cmd_expectation, "montecarlo": cmd_montecarlo,
    "bounds": cmd_bounds, "sweep": cmd_sweep, "validate": cmd_validate,
}


# ---------------------------------------------------------------------------
# output


def _provenance(cfg: dict[str, Any]) -> dict[str, Any]:
    # wall-clock time would break byte-identical reruns; honour SOURCE_DATE_EPOCH instead
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    return {"seed": cfg["seed"], "timestamp": int(epoch) if epoch else None,
            "version": __version__, "schema": SCHEMA_VERSION}


def render(cfg: dict[str, Any], rows: list[dict[str, Any]]) -> str:
    if cfg["format"] == "json":
        config = {k: v for k, v in sorted(cfg.items()) if k not in _UNRECORDED}
        results: Any = rows[0] if len(rows) == 1 else rows
        doc = {"config": config, "results": results, "provenance": _provenance(cfg)}
        return json.dumps(_json_safe(doc), indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0].keys()) if rows else []
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(row[k]) for k in header])
    return buf.getvalue()


def run(cfg: dict[str, Any]) -> int:
    """Execute one resolved configuration; returns the process exit code."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        rows = HANDLERS[cfg["command"]](cfg)
    text = render(cfg, rows)
    if cfg["out"]:
        with open(cfg["out"], "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg["command"] == "validate" and not all(r["passed"] for r in rows):
        return 1
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = resolve_config(argv)
        return run(cfg)
    except (ConfigError, GeometryError) as exc:
        print(f"slabpoly: configuration error: {exc}", file=sys.stderr)
        return 2
    except UnconvergedError as exc:
        print(f"slabpoly: unconverged: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
