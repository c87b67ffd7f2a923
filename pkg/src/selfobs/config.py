"""Strict JSON run configuration.

Every kind has a fixed key set; unknown keys, missing required keys and
out-of-range numbers are rejected before any computation starts. Validated
values are stored in a normalized JSON form (complex numbers as ``[re, im]``,
grids as ``{"n", "x_min", "x_max"}``, defaults filled in) so a config echoed
into a manifest reloads to an equal ``RunConfig``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

KINDS = (
    "toy-run",
    "toy-scan",
    "coupled-run",
    "molecule-bo",
    "molecule-scf",
    "molecule-exact",
    "measure-sample",
)
FORMATS = ("csv", "json")

# baseline grids; see README for the convergence check behind them
DEFAULT_ELECTRON_GRID = {"n": 241, "x_min": -24.0, "x_max": 24.0}
DEFAULT_NUCLEAR_GRID = {"n": 121, "x_min": 0.4, "x_max": 6.4}


def _number(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key!r} must be a number, got {v!r}", key)
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{key!r} must be finite", key)
    return v


def _real(key, v):
    return _number(key, v)


def _positive(key, v):
    v = _number(key, v)
    if not v > 0:
        raise ConfigError(f"{key!r} must be > 0, got {v}", key)
    return v


def _count(key, v, minimum=1):
    if isinstance(v, bool) or not isinstance(v, int):
        if isinstance(v, float) and v.is_integer():
            v = int(v)
        else:
            raise ConfigError(f"{key!r} must be an integer, got {v!r}", key)
    if v < minimum:
        raise ConfigError(f"{key!r} must be >= {minimum}, got {v}", key)
    return v


def _steps(key, v):
    return _count(key, v, 1)


def _seed(key, v):
    v = _count(key, v, 0)
    if v >= 2**64:
        raise ConfigError(f"{key!r} must be < 2**64, got {v}", key)
    return v


def _complex(key, v):
    """A real number or a ``[re, im]`` pair, normalized to ``[re, im]``."""
    if isinstance(v, list):
        if len(v) != 2:
            raise ConfigError(f"{key!r} must be a number or a [re, im] pair", key)
        return [_number(key, v[0]), _number(key, v[1])]
    return [_number(key, v), 0.0]


def _complex_list(key, v):
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{key!r} must be a non-empty list", key)
    return [_complex(f"{key}[{i}]", x) for i, x in enumerate(v)]


def _positive_list(key, v):
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{key!r} must be a non-empty list", key)
    return [_positive(f"{key}[{i}]", x) for i, x in enumerate(v)]


def _matrix(key, v):
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ConfigError(f"{key!r} must be a non-empty list of rows", key)
    n = len(v)
    if any(len(r) != n for r in v):
        raise ConfigError(f"{key!r} must be square ({n} rows)", key)
    return [[_complex(f"{key}[{i}][{j}]", x) for j, x in enumerate(r)] for i, r in enumerate(v)]


def _grid(key, v):
    if not isinstance(v, dict):
        raise ConfigError(f"{key!r} must be an object with n, x_min, x_max", key)
    extra = set(v) - {"n", "x_min", "x_max"}
    if extra:
        name = sorted(extra)[0]
        raise ConfigError(f"unknown key {key}.{name}", f"{key}.{name}")
    for sub in ("n", "x_min", "x_max"):
        if sub not in v:
            raise ConfigError(f"missing key {key}.{sub}", f"{key}.{sub}")
    n = _count(f"{key}.n", v["n"], 3)
    lo, hi = _real(f"{key}.x_min", v["x_min"]), _real(f"{key}.x_max", v["x_max"])
    if lo >= hi:
        raise ConfigError(f"{key}: x_min must be < x_max", f"{key}.x_min")
    return {"n": n, "x_min": lo, "x_max": hi}


def _mixing(key, v):
    v = _number(key, v)
    if not 0 < v <= 1:
        raise ConfigError(f"{key!r} must lie in (0, 1], got {v}", key)
    return v


def _enum(*choices):
    def check(key, v):
        if v not in choices:
            raise ConfigError(f"{key!r} must be one of {list(choices)}, got {v!r}", key)
        return v

    return check


def _output(key, v):
    if not isinstance(v, str) or not v:
        raise ConfigError(f"{key!r} must be a non-empty path string", key)
    return v


REQUIRED = object()

_MOLECULE = {
    "electron_grid": (_grid, DEFAULT_ELECTRON_GRID),
    "nuclear_grid": (_grid, DEFAULT_NUCLEAR_GRID),
    "M": (_positive, 100.0),
    "s_e": (_positive, 1.0),
    "s_n": (_positive, 1.0),
}

SCHEMAS = {
    "toy-run": {
        "a": (_complex, REQUIRED),
        "b": (_complex, REQUIRED),
        "psi0": (_complex, REQUIRED),
        "phi0": (_complex, REQUIRED),
        "dt": (_positive, REQUIRED),
        "steps": (_steps, REQUIRED),
    },
    "toy-scan": {
        "a": (_complex, REQUIRED),
        "b_values": (_complex_list, REQUIRED),
        "psi0": (_complex, REQUIRED),
        "phi0": (_complex, REQUIRED),
        "dt": (_positive, REQUIRED),
        "steps": (_steps, REQUIRED),
    },
    "coupled-run": {
        "coupling": (_enum("pointwise", "expectation"), "pointwise"),
        "psi0": (_complex_list, REQUIRED),
        "phi0": (_complex_list, REQUIRED),
        "g_sm": (_complex, REQUIRED),
        "g_ms": (_complex, REQUIRED),
        "A_S": (_matrix, None),
        "B_M": (_matrix, None),
        "A_M": (_matrix, None),
        "B_S": (_matrix, None),
        "dt": (_positive, REQUIRED),
        "steps": (_steps, REQUIRED),
    },
    "molecule-bo": {**_MOLECULE, "r_values": (_positive_list, None)},
    "molecule-scf": {
        **_MOLECULE,
        "tol": (_positive, 1e-8),
        "max_iter": (_steps, 100),
        "mixing": (_mixing, 0.5),
    },
    "molecule-exact": dict(_MOLECULE),
    "measure-sample": {
        "observable": (_matrix, REQUIRED),
        "state": (_complex_list, REQUIRED),
        "draws": (_steps, 1),
        "group_tol": (_positive, 1e-8),
    },
}

COMMON = {
    "output": (_output, None),
    "output_format": (_enum(*FORMATS), "csv"),
    "seed": (_seed, None),
}


@dataclass(frozen=True)
class RunConfig:
    kind: str
    params: dict = field(default_factory=dict)
    output: str | None = None
    output_format: str = "csv"
    seed: int | None = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind, **self.params, "output_format": self.output_format}
        if self.output is not None:
            out["output"] = self.output
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def parse_config(raw) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "kind" not in raw:
        raise ConfigError("missing key 'kind'", "kind")
    kind = raw["kind"]
    if kind not in KINDS:
        raise ConfigError(f"'kind' must be one of {list(KINDS)}, got {kind!r}", "kind")
    schema = SCHEMAS[kind]
    for key in raw:
        if key != "kind" and key not in schema and key not in COMMON:
            raise ConfigError(f"unknown key {key!r} for kind {kind!r}", key)

    values = {}
    for key, (check, default) in {**schema, **COMMON}.items():
        if key in raw and raw[key] is not None:
            values[key] = check(key, raw[key])
        elif default is REQUIRED:
            raise ConfigError(f"missing key {key!r} for kind {kind!r}", key)
        elif default is not None:
            values[key] = json.loads(json.dumps(default))

    _cross_check(kind, values)
    output = values.pop("output", None)
    output_format = values.pop("output_format")
    seed = values.pop("seed", None)
    return RunConfig(kind, values, output, output_format, seed)


def _cross_check(kind, v):
    if kind.startswith("molecule") and v["nuclear_grid"]["x_min"] <= 0:
        raise ConfigError("nuclear_grid.x_min must be > 0", "nuclear_grid.x_min")
    if kind == "coupled-run":
        n_s, n_m = len(v["psi0"]), len(v["phi0"])
        if v["coupling"] == "pointwise" and n_s != n_m:
            raise ConfigError("pointwise coupling needs psi0 and phi0 of equal length", "phi0")
        for key, n in (("A_S", n_s), ("B_S", n_s), ("A_M", n_m), ("B_M", n_m)):
            if key in v and len(v[key]) != n:
                raise ConfigError(f"{key!r} must be {n}x{n}", key)
    if kind == "measure-sample" and len(v["observable"]) != len(v["state"]):
        raise ConfigError("'state' length must match the observable dimension", "state")


def load_config(path) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(raw)
