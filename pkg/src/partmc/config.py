"""Experiment configuration: JSON schema (version 1) and the parsed dataclass."""

import hashlib
import json
from dataclasses import dataclass, field

import jsonschema

SCHEMA_VERSION = 1

_vector = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_pos_int = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["version", "seed", "target", "proposal", "n", "N0", "ell", "N", "T"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "target": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["gaussian_mixture", "symmetric_mixture_1d", "mixture2d", "s_shape"]},
                "means": {"type": "array", "items": _vector},
                "covariances": {"type": "array"},
                "sigmas": _vector,
                "weights": _vector,
                "mu": {"type": "number", "exclusiveMinimum": 0},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "proposal": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["uniform", "gaussian"]},
                "tau": {"type": "number", "exclusiveMinimum": 0},
                "scale": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "test_function": {
            "oneOf": [
                {"enum": ["identity", "square", "constant"]},
                {"type": "object", "required": ["kind"]},
            ]
        },
        "n": _pos_int,
        "N0": _pos_int,
        "ell": _pos_int,
        "N": {"type": "array", "items": _pos_int, "minItems": 1},
        "T": {"type": "array", "items": _pos_int, "minItems": 1},
        "burn_in": {"type": "integer", "minimum": 0},
        "explore": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "betas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "K": _pos_int,
                "beta_min": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "swap_interval": _pos_int,
                "inits": {"type": "array", "items": _vector, "minItems": 1},
                "n_inits": _pos_int,
                "box": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                                    "minItems": 2, "maxItems": 2}},
            },
        },
        "partition": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"method": {"enum": ["spectral", "kmeans"]}},
        },
        "weights": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "family": {"enum": ["gaussian", "student"]},
                "dof": {"type": "number", "exclusiveMinimum": 2},
            },
        },
        "pool_rounds": {"type": "boolean"},
    },
}


class ConfigError(ValueError):
    """Schema violation; ``field`` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"config field '{field}': {message}")


@dataclass
class ExperimentConfig:
    seed: int
    target: dict
    proposal: dict
    n: int
    N0: int
    ell: int
    N: list
    T: list
    test_function: object = "identity"
    burn_in: int = 0
    explore: dict = field(default_factory=dict)
    partition_method: str = "spectral"
    weight_family: str = "gaussian"
    weight_dof: float = 5.0
    pool_rounds: bool = False

    def __post_init__(self):
        if len(self.N) != self.ell or len(self.T) != self.ell:
            raise ConfigError("N" if len(self.N) != self.ell else "T",
                              f"must list exactly ell={self.ell} entries")
        if min(self.N) < self.n:
            raise ConfigError("N", f"subsample sizes must be >= n={self.n}")

    @classmethod
    def from_dict(cls, raw):
        validate(raw)
        return cls(
            seed=raw["seed"], target=raw["target"], proposal=raw["proposal"],
            n=raw["n"], N0=raw["N0"], ell=raw["ell"], N=list(raw["N"]), T=list(raw["T"]),
            test_function=raw.get("test_function", "identity"),
            burn_in=raw.get("burn_in", 0),
            explore=dict(raw.get("explore", {})),
            partition_method=raw.get("partition", {}).get("method", "spectral"),
            weight_family=raw.get("weights", {}).get("family", "gaussian"),
            weight_dof=raw.get("weights", {}).get("dof", 5.0),
            pool_rounds=raw.get("pool_rounds", False),
        )

    def to_dict(self):
        return {
            "version": SCHEMA_VERSION, "seed": self.seed, "target": self.target,
            "proposal": self.proposal, "test_function": self.test_function,
            "n": self.n, "N0": self.N0, "ell": self.ell, "N": list(self.N), "T": list(self.T),
            "burn_in": self.burn_in, "explore": self.explore,
            "partition": {"method": self.partition_method},
            "weights": {"family": self.weight_family, "dof": self.weight_dof},
            "pool_rounds": self.pool_rounds,
        }

    def replace(self, **changes):
        d = dict(self.__dict__)
        d.update(changes)
        return ExperimentConfig(**d)

    @property
    def per_core_budget(self):
        """Iterations per core: exploration steps plus all restricted-chain steps."""
        return self.N0 + sum(self.T)


def validate(raw):
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(raw),
                    key=lambda e: list(e.path))
    if not errors:
        return
    err = errors[0]
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        name = ".".join(str(p) for p in err.path)
        name = f"{name}.{missing[0]}" if name else missing[0]
        raise ConfigError(name, "is required")
    if err.validator == "additionalProperties":
        raise ConfigError(".".join(str(p) for p in err.path) or "<root>", err.message)
    raise ConfigError(".".join(str(p) for p in err.path) or "<root>", err.message)


def load_config(path):
    """Parse a config file; returns ``(ExperimentConfig, sha256 of the file bytes)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"not valid JSON ({exc})") from None
    return ExperimentConfig.from_dict(raw), hashlib.sha256(data).hexdigest()
