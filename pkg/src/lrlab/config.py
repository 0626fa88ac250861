"""Experiment configuration: JSON schema, validation and model construction."""
from __future__ import annotations

import json

import jsonschema
import numpy as np

from . import models
from .envelope import ReproducingFunction
from .operators import SIGMA_X, SIGMA_Y, SIGMA_Z, random_hermitian

EXPERIMENTS = ("check", "lightcone", "localization", "clustering", "ultralocal")
FAMILIES = ("phi_mixture", "psi_mixture", "localization", "covariant", "clustering", "random",
            "crossed")

_number = {"type": "number"}
_site_list = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment", "model"],
    "additionalProperties": False,
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "model": {
            "type": "object",
            "required": ["family", "n_sites"],
            "additionalProperties": False,
            "properties": {
                "family": {"enum": list(FAMILIES)},
                "n_sites": {"type": "integer", "minimum": 2, "maximum": 10},
                "local_dim": {"type": "integer", "minimum": 2, "maximum": 4},
                "params": {"type": "object"},
            },
        },
        "t_grid": {
            "type": "object",
            "required": ["stop", "points"],
            "additionalProperties": False,
            "properties": {
                "start": {"type": "number", "minimum": 0},
                "stop": {"type": "number", "minimum": 0},
                "points": {"type": "integer", "minimum": 1},
                "spacing": {"enum": ["linear", "log"]},
                "log_floor": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "units": {"enum": ["absolute", "1/nu"]},
            },
        },
        "F": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "form": {"enum": ["default", "power", "exponential"]},
                "a": {"type": "number", "minimum": 0},
                "p": {"type": "number", "minimum": 0},
                "mu": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "a_op": {"type": "string"},
        "b_op": {"type": "string"},
        "a_site": {"type": "integer", "minimum": 0},
        "b_sites": _site_list,
        "gammas": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "times": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "window": {"type": "integer", "minimum": 2, "maximum": 5},
        "localization": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"xi": {"type": "number", "exclusiveMinimum": 0},
                           "c_prime": {"type": "number", "exclusiveMinimum": 0}},
        },
        "method": {"enum": ["integrate", "dense_expm"]},
        "rel_tol": {"type": "number", "exclusiveMinimum": 0},
        "abs_tol": {"type": "number", "exclusiveMinimum": 0},
        "kernel_tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 1e-6},
        "structure_tol": {"type": "number", "exclusiveMinimum": 0},
        "cb_restarts": {"type": "integer", "minimum": 1},
        "output": {"type": "string"},
    },
}

DEFAULTS = {
    "seed": 0,
    "a_site": 0,
    "method": "integrate",
    "rel_tol": 1e-9,
    "abs_tol": 1e-11,
    "kernel_tol": 1e-9,
    "structure_tol": 1e-10,
    "cb_restarts": 50,
    "window": 4,
}


class ConfigError(ValueError):
    pass


def validate(config: dict) -> dict:
    """Schema-check ``config`` and fill defaults; raises :class:`ConfigError`."""
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {exc.message}") from None
    out = dict(DEFAULTS)
    out.update(config)
    model = dict(config["model"])
    model.setdefault("local_dim", 3 if model["family"] == "covariant" else 2)
    model.setdefault("params", {})
    out["model"] = model
    default_op = "Z" if model["local_dim"] == 2 else "random"
    out.setdefault("a_op", default_op)
    out.setdefault("b_op", default_op)
    n = model["n_sites"]
    sites = [out["a_site"]] + list(out.get("b_sites", []))
    if any(s >= n for s in sites):
        raise ConfigError(f"site index outside a chain of {n} sites")
    if "t_grid" in out:
        grid = dict(out["t_grid"])
        grid.setdefault("start", 0.0)
        grid.setdefault("spacing", "linear")
        grid.setdefault("units", "absolute")
        grid.setdefault("log_floor", 1e-2)
        if grid["stop"] < grid["start"]:
            raise ConfigError("t_grid: stop precedes start")
        out["t_grid"] = grid
    return out


def load(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return validate(raw)


def time_grid(spec: dict, nu: float | None = None) -> np.ndarray:
    """Times described by a validated ``t_grid`` block.

    Log spacing starting at zero keeps ``t = 0`` and spreads the remaining
    points geometrically from ``log_floor * stop`` to ``stop``.
    """
    scale = 1.0
    if spec["units"] == "1/nu":
        if not nu or nu <= 0:
            raise ConfigError("t_grid units 1/nu need a dissipative model")
        scale = 1.0 / nu
    start, stop, points = spec["start"] * scale, spec["stop"] * scale, spec["points"]
    if points == 1:
        return np.array([start])
    if spec["spacing"] == "linear":
        return np.linspace(start, stop, points)
    if start > 0:
        return np.geomspace(start, stop, points)
    return np.concatenate([[0.0], np.geomspace(spec["log_floor"] * stop, stop, points - 1)])


def reproducing_function(config: dict, n_sites: int) -> ReproducingFunction:
    spec = dict(config.get("F", {}))
    form = spec.get("form", "default")
    mu = spec.get("mu", 0.25)
    if form == "power":
        return ReproducingFunction.power(spec.get("p", 2.0), mu, n_sites)
    if form == "exponential":
        return ReproducingFunction.exponential(spec.get("a", 1.0), mu, n_sites)
    return ReproducingFunction(spec.get("a", 0.5), spec.get("p", 2.0), mu, n_sites)


def observable(name: str, local_dim: int, rng: np.random.Generator) -> np.ndarray:
    paulis = {"X": SIGMA_X, "Y": SIGMA_Y, "Z": SIGMA_Z}
    if name in paulis:
        if local_dim != 2:
            raise ConfigError(f"observable {name} needs qubits")
        return paulis[name]
    if name == "random":
        return random_hermitian(local_dim, rng, norm=1.0)
    raise ConfigError(f"unknown observable {name!r}")


def build_model(model_spec: dict, rng: np.random.Generator, gamma: float | None = None):
    """Model described by a validated ``model`` block.

    Random ingredients are drawn from ``rng``; ``gamma`` overrides the
    depolarization rate of the localization family.
    """
    family = model_spec["family"]
    n = model_spec["n_sites"]
    d = model_spec["local_dim"]
    params = dict(model_spec.get("params", {}))
    try:
        if family == "phi_mixture":
            return models.phi_mixture_chain(n, **params)
        if family == "psi_mixture":
            return models.psi_mixture_chain(n, **params)
        if family == "clustering":
            return models.clustering_chain(n, **params)
        if family == "crossed":
            return models.crossed_dissipator_chain(n, **params)
        if family == "random":
            return models.random_chain(n, rng, d, **params)
        if family == "covariant":
            if d != 3:
                raise ConfigError("covariant family is defined for qutrits")
            return models.covariant_chain(n, rng, **params)
        if family == "localization":
            h_norm = params.pop("h_norm", 1.0)
            rate = params.pop("gamma", 1.0) if gamma is None else gamma
            if params:
                raise ConfigError(f"unknown localization parameters {sorted(params)}")
            bonds = models.random_bond_hamiltonians(n, rng, h_norm, d)
            return models.localization_chain(n, rate, bonds, d)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model params: {exc}") from None
    raise ConfigError(f"unknown family {family!r}")
