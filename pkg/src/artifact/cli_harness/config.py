"""Experiment configs: YAML files checked against a strict per-experiment schema.

Every experiment declares its parameters with defaults. A config may
override any of them; an unknown key anywhere is an error that names the
key. The config hash covers every value that can change results, so
``threads`` and ``name`` are left out of it.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

EXPERIMENTS = (
    "variance",
    "besov",
    "smoothing",
    "stability",
    "comparison",
    "scaling",
    "vclass",
    "sewing",
    "regularization",
)

# Spec names of the experiments, accepted as aliases.
ALIASES = {
    "VarianceCheck": "variance",
    "BesovMembership": "besov",
    "Smoothing": "smoothing",
    "Stability": "stability",
    "Comparison": "comparison",
    "ScalingLimit": "scaling",
    "VClassRegularity": "vclass",
    "SewingRate": "sewing",
    "RegularizationExponent": "regularization",
}

TOP_LEVEL = {"experiment": None, "name": "", "seed": 0, "replicas": None, "threads": 1, "params": {}}
NOT_HASHED = ("name", "threads")

SCHEMAS = {
    "variance": {
        "replicas": 10000,
        "scheme": "exponential",
        "free_line": {"half_width": 2.0, "nx": 1024, "dt": 2.0**-8, "times": [0.0625, 0.25], "x": 0.0},
        "bounded": {"nx": 256, "dt": 0.01, "times": [0.01, 0.04, 0.16], "x": 0.5, "replicas": 4000},
        "slope_target": 0.5,
        "slope_band": 0.05,
        "sigmas": 3.0,
    },
    "besov": {
        "replicas": 0,
        "half_width": 16.0,
        "m": 16,
        "window": 512.0,
        "j_from": 2,
        "plateau_tol": 1.2,
        "growth_min": 0.2,
        "shift": 0.25,
        "eps": [2.0**-k for k in range(4, 15, 2)],
    },
    "smoothing": {
        "replicas": 10000,
        "scheme": "exponential",
        "half_width": 2.0,
        "nx": 1024,
        "dt": 2.0**-8,
        "eps": 2.0**-12,
        "scales": [2.0**-k for k in range(8, 1, -1)],
        "x": 0.0,
        "target": -0.25,
        "band": 0.05,
        "sigmas": 3.0,
    },
    "stability": {
        "replicas": 80,
        "scheme": "explicit",
        "nx": 128,
        "cfl": 0.25,
        "horizon": 2.0,
        "ladder": [4, 8, 16, 32, 64],
        "bases": ["dirac", "two_atoms", "smooth"],
        "window": [0.0, 1.0],
        "save_every": 256,
        "contraction": 4.0,
    },
    "comparison": {
        "replicas": 100,
        "scheme": "explicit",
        "nx": 64,
        "cfl": 0.25,
        "horizon": 0.25,
        "eps": 1.0 / 16.0,
        "tol": 1e-9,
    },
    "scaling": {
        "replicas": 20,
        "lambdas": [2, 4, 8, 16],
        "p": 2.0,
        "probe_shift": 0.1,
        "half_width": 16.0,
        "m": 16,
        "field": {"nx": 128, "eps": 1.0 / 16.0, "horizon": 0.25, "cfl": 0.25, "save_every": 64},
    },
    "vclass": {
        "replicas": 4000,
        "scheme": "exponential",
        "nx": 128,
        "dt": 2.0**-12,
        "horizon": 0.5,
        "eps": 1.0 / 64.0,
        "constant": 1.0,
        "starts": [0.0, 0.125],
        "gaps": [2.0**-k for k in range(8, 0, -1)],
        "fit_gaps": [2.0**-8, 2.0**-3],
        "kappa": 0.75,
        "m": 2.0,
        "x": 0.5,
        "target": 0.75,
        "band": 0.07,
    },
    "sewing": {
        "replicas": 1000,
        "nx": 256,
        "horizon": 0.25,
        "levels": 8,
        "eps": 2.0**-10,
        "kappa": 0.0,
        "x": 0.5,
        "min_rate": 0.2,
        "riemann_band": [0.6, 0.9],
    },
    "regularization": {
        "replicas": 10000,
        "scheme": "exponential",
        "nx": 256,
        "dt": 2.0**-13,
        "eps": 2.0**-8,
        "scales": [2.0**-k for k in range(8, 2, -1)],
        "kappa": 0.0,
        "x": 0.5,
        "target": 0.75,
        "band": 0.07,
        "offsets": {"t": 0.0625, "base": 0.0, "deltas": [2.0**-10, 2.0**-9, 2.0**-8, 2.0**-7], "replicas": 500,
                    "band": 0.1},
    },
}


class ConfigError(ValueError):
    """Schema violation; the message names the offending key."""


def _merge(defaults: dict, given: dict, path: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown key '{where}'")
        ref = defaults[key]
        if isinstance(ref, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"key '{where}' must be a mapping")
            out[key] = _merge(ref, val, where)
        elif isinstance(ref, bool):
            if not isinstance(val, bool):
                raise ConfigError(f"key '{where}' must be a boolean")
            out[key] = val
        elif isinstance(ref, (int, float)) and not isinstance(ref, bool):
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"key '{where}' must be a number")
            out[key] = type(ref)(val) if isinstance(ref, float) or float(val).is_integer() else val
        elif isinstance(ref, list):
            if not isinstance(val, list):
                raise ConfigError(f"key '{where}' must be a list")
            out[key] = val
        elif isinstance(ref, str):
            if not isinstance(val, str):
                raise ConfigError(f"key '{where}' must be a string")
            out[key] = val
        else:
            out[key] = val
    return out


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    replicas: int
    params: dict
    name: str = ""
    threads: int = 1
    source: str | None = field(default=None, compare=False)

    def hashed(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, "replicas": self.replicas, "params": self.params}

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(canonical(self.hashed())).hexdigest()[:16]

    @property
    def content_hash(self) -> str:
        """Git blob hash of the canonical inputs."""
        data = canonical(self.hashed())
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "name": self.name, "seed": self.seed, "replicas": self.replicas,
                "threads": self.threads, "params": self.params}

    def with_overrides(self, seed=None, replicas=None, threads=None) -> "ExperimentConfig":
        return ExperimentConfig(
            self.experiment,
            self.seed if seed is None else int(seed),
            self.replicas if replicas is None else int(replicas),
            copy.deepcopy(self.params),
            self.name,
            self.threads if threads is None else int(threads),
            self.source,
        )


def canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def parse_config(data: dict, source: str | None = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    for key in data:
        if key not in TOP_LEVEL:
            raise ConfigError(f"unknown key '{key}'")
    exp = data.get("experiment")
    if exp is None:
        raise ConfigError("missing key 'experiment'")
    exp = ALIASES.get(exp, exp)
    if exp not in SCHEMAS:
        raise ConfigError(f"key 'experiment' has unknown value {exp!r}")
    schema = SCHEMAS[exp]
    params = _merge({k: v for k, v in schema.items() if k != "replicas"}, data.get("params") or {}, "params")
    replicas = data.get("replicas", schema["replicas"])
    seed = data.get("seed", TOP_LEVEL["seed"])
    threads = data.get("threads", 1)
    for key, val in (("replicas", replicas), ("seed", seed), ("threads", threads)):
        if isinstance(val, bool) or not isinstance(val, int) or val < 0:
            raise ConfigError(f"key '{key}' must be a nonnegative integer")
    return ExperimentConfig(exp, int(seed), int(replicas), params, str(data.get("name", "")), int(threads), source)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return parse_config(data or {}, str(path))


def default_config(experiment: str, **overrides) -> ExperimentConfig:
    data = {"experiment": experiment}
    data.update(overrides)
    return parse_config(data)


def load_manifest(path) -> list:
    """Config paths listed in a manifest (relative to the manifest's directory)."""
    path = Path(path)
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("manifest must be a mapping")
    for key in data:
        if key != "configs":
            raise ConfigError(f"unknown key '{key}' in manifest")
    entries = data.get("configs") or []
    if not isinstance(entries, list):
        raise ConfigError("key 'configs' must be a list")
    return [load_config(path.parent / e) for e in entries]
