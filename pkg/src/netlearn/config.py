"""Experiment configuration: schema, loading, hashing and presets.

Configs are YAML or JSON documents validated against :data:`SCHEMA`.
Likelihoods are in nats, horizons and windows in periods; agents are
0-based and periods 1-based.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import yaml

from .errors import ConfigError
from .network import Network, make_topology
from .signals import SignalModel, model_from_dict

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "netlearn experiment",
    "type": "object",
    "additionalProperties": False,
    "required": ["signal", "network", "T"],
    "properties": {
        "name": {"type": "string", "description": "label used in output file names"},
        "signal": {
            "description": "signal distributions under each state",
            "oneOf": [
                {
                    "type": "object", "additionalProperties": False,
                    "required": ["kind", "p"],
                    "properties": {
                        "kind": {"const": "symmetric_binary"},
                        "p": {"type": "number", "minimum": 0.5, "exclusiveMaximum": 1,
                              "description": "probability that the signal equals the state"},
                    },
                },
                {
                    "type": "object", "additionalProperties": False,
                    "required": ["kind", "alphabet", "g", "b"],
                    "properties": {
                        "kind": {"const": "table"},
                        "alphabet": {"type": "array", "minItems": 1},
                        "g": {"type": "array", "items": {"type": "number", "minimum": 0}},
                        "b": {"type": "array", "items": {"type": "number", "minimum": 0}},
                        "overrides": {
                            "type": "array",
                            "items": {
                                "type": "object", "additionalProperties": False,
                                "required": ["agent", "t", "alphabet", "g", "b"],
                                "properties": {
                                    "agent": {"type": "integer", "minimum": 0},
                                    "t": {"type": "integer", "minimum": 1},
                                    "alphabet": {"type": "array", "minItems": 1},
                                    "g": {"type": "array", "items": {"type": "number", "minimum": 0}},
                                    "b": {"type": "array", "items": {"type": "number", "minimum": 0}},
                                },
                            },
                        },
                    },
                },
            ],
        },
        "network": {
            "type": "object", "additionalProperties": False,
            "required": ["kind", "n"],
            "properties": {
                "kind": {"enum": ["complete", "star", "ring", "autarky", "custom"]},
                "n": {"type": "integer", "minimum": 1},
                "edges": {"type": "array", "items": {"type": "array", "items": {"type": "integer"},
                                                     "minItems": 2, "maxItems": 2},
                          "description": "(observer, observed) pairs"},
                "neighbors": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}},
            },
        },
        "T": {"type": "integer", "minimum": 1, "description": "horizon in periods"},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "engine": {"enum": ["auto", "generic", "factorized", "star"]},
        "mode": {"enum": ["monte_carlo", "exact_forward"]},
        "chunk_size": {"type": "integer", "minimum": 1, "description": "trials per seeded chunk"},
        "budget": {"type": ["integer", "null"], "minimum": 1,
                   "description": "enumeration steps (generic) or joint states (exact forward)"},
        "check_invariants": {"type": "boolean"},
        "collect_violations": {"type": "boolean"},
        "sample_paths": {"type": "integer", "minimum": 0, "description": "S_t/t paths stored per state"},
        "rates": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "method": {"enum": ["ols_log", "endpoint"]},
                "floor": {"type": "integer", "minimum": 1, "description": "minimum mistakes per window cell"},
                "window": {"oneOf": [{"type": "null"},
                                     {"type": "array", "items": {"type": "integer", "minimum": 1},
                                      "minItems": 2, "maxItems": 2}],
                           "description": "[t_min, t_max] in periods; null selects automatically"},
                "bootstrap": {"type": "integer", "minimum": 2},
                "pools": {"type": "object",
                          "additionalProperties": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                          "description": "named groups of exchangeable agents estimated jointly"},
            },
        },
        "delta": {"type": "number", "minimum": 0, "exclusiveMaximum": 1, "description": "discount factor"},
        "micro_mode": {"enum": ["exhaustive", "backward", "one-shot"]},
        "output": {"type": "string"},
    },
}

DEFAULTS = {
    "name": "experiment",
    "trials": 100_000,
    "seed": 0,
    "engine": "auto",
    "mode": "monte_carlo",
    "chunk_size": 20_000,
    "budget": None,
    "check_invariants": True,
    "collect_violations": False,
    "sample_paths": 4,
    "rates": {"method": "ols_log", "floor": 50, "window": None, "bootstrap": 1000, "pools": {}},
    "delta": 0.0,
    "micro_mode": "exhaustive",
    "output": "out",
}


@dataclass
class ExperimentConfig:
    """A validated experiment description with all defaults filled in."""

    data: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def model(self) -> SignalModel:
        return model_from_dict(self.data["signal"])

    @property
    def network(self) -> Network:
        net_cfg = self.data["network"]
        return make_topology(net_cfg["kind"], net_cfg["n"], edges=net_cfg.get("edges"), neighbors=net_cfg.get("neighbors"))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def with_overrides(self, **kw) -> "ExperimentConfig":
        data = self.to_dict()
        for k, v in kw.items():
            if v is not None:
                data[k] = v
        return from_dict(data)


def _merge_defaults(raw: dict) -> dict:
    data = copy.deepcopy(DEFAULTS)
    for k, v in raw.items():
        if k == "rates":
            data["rates"].update(v)
        else:
            data[k] = copy.deepcopy(v)
    return data


def from_dict(raw: dict) -> ExperimentConfig:
    """Validate a raw mapping and fill defaults; raises ConfigError."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None
    cfg = ExperimentConfig(_merge_defaults(raw))
    # build once so semantic errors (probabilities, edges) surface here
    cfg.model
    net = cfg.network
    for name, agents in cfg["rates"]["pools"].items():
        if any(a >= net.n for a in agents) or not agents:
            raise ConfigError(f"pool {name!r} names agents outside 0..{net.n - 1}")
    return cfg


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return from_dict(raw)


def dump_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.data, indent=2, sort_keys=True) + "\n")


PRESETS = {
    "paper-0.9": {
        "name": "paper-0.9",
        "signal": {"kind": "symmetric_binary", "p": 0.9},
        "network": {"kind": "complete", "n": 3},
        "T": 16, "trials": 1_000_000, "seed": 1,
    },
    "star-11": {
        "name": "star-11",
        "signal": {"kind": "symmetric_binary", "p": 0.9},
        "network": {"kind": "star", "n": 11},
        "T": 20, "trials": 1_000_000, "seed": 11,
        "rates": {"pools": {"peripheral": list(range(1, 11))}},
    },
    "complete-5-p0.75": {
        "name": "complete-5-p0.75",
        "signal": {"kind": "symmetric_binary", "p": 0.75},
        "network": {"kind": "complete", "n": 5},
        "T": 30, "trials": 1_000_000, "seed": 5,
    },
    "exact-complete-2": {
        "name": "exact-complete-2",
        "signal": {"kind": "symmetric_binary", "p": 0.9},
        "network": {"kind": "complete", "n": 2},
        "T": 12, "mode": "exact_forward",
    },
    "micro-2": {
        "name": "micro-2",
        "signal": {"kind": "symmetric_binary", "p": 0.9},
        "network": {"kind": "complete", "n": 2},
        "T": 2, "delta": 0.3,
    },
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return from_dict(copy.deepcopy(PRESETS[name]))
