"""Experiment configuration and seed derivation."""
import copy
import hashlib
import json
from dataclasses import dataclass, field

from ..rptree import BuildParams, SplitRule

__all__ = [
    "EXPERIMENTS",
    "DEFAULTS",
    "ConfigError",
    "ExperimentConfig",
    "derive_seed",
]

EXPERIMENTS = ("size-reduction", "packing", "aspect-ratio", "loccov", "split-stats")

# per experiment: dataset, grid and tree defaults; a config overrides keys one by one
DEFAULTS = {
    "size-reduction": {
        "dataset": {"kind": "flat", "n": 20000, "extent": 1.0},
        "grid": {"d": [2], "D": [50], "s": [2, 4, 8, 16]},
        "tree": {"max_leaf_size": 3},
    },
    "packing": {
        "dataset": {"kind": "flat", "n": 5000, "extent": 1.0},
        "grid": {"d": [2], "D": [20, 100], "R_fraction": [0.1], "R_over_r": [2, 4, 8]},
        "tree": {},
    },
    "aspect-ratio": {
        "dataset": {"kind": "flat", "n": 5000, "extent": 1.0},
        "grid": {"d": [2, 4], "D": [20, 100], "R_fraction": [0.005]},
        "tree": {},
    },
    "loccov": {
        "dataset": {"kind": "sphere", "tau": 1.0},
        "grid": {"d": [2], "D": [10], "eps": [0.05, 0.1, 0.25], "points_per_patch": 200},
        "tree": {},
    },
    "split-stats": {
        "dataset": {"kind": "disk", "cell_radius": 1.0, "cell_points": 2048, "samples_per_ball": 256},
        "grid": {
            "d": [2], "D": [50], "trials": 100000, "s": [2, 4],
            "ball_ratio": [0.001, 0.01], "eta": [0.05, 0.1, 0.5],
            "alpha": [1.0], "beta": [2.0], "delta_conf": [0.05, 0.1],
        },
        "tree": {},
    },
}

_KEYS = {"experiment", "base_seed", "trees_per_condition", "dataset", "grid", "rule", "tree", "output"}
_MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def derive_seed(base_seed, *key):
    """``base_seed XOR h(key)`` with ``h`` a 64-bit BLAKE2b of the key's JSON form.

    Stable across processes and Python versions, unlike ``hash``.
    """
    blob = json.dumps(list(key), sort_keys=True, separators=(",", ":")).encode()
    h = int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")
    return (int(base_seed) ^ h) & _MASK64


@dataclass
class ExperimentConfig:
    experiment: str
    base_seed: int = 0
    trees_per_condition: int = 20
    dataset: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    rule: SplitRule = SplitRule.MAX
    tree: dict = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        try:
            rule = self.rule.value if isinstance(self.rule, SplitRule) else str(self.rule)
            self.rule = SplitRule(rule.upper())
        except ValueError:
            raise ConfigError(f"unknown split rule {self.rule!r}") from None
        if not isinstance(self.base_seed, int) or not 0 <= self.base_seed <= _MASK64:
            raise ConfigError("base_seed must be an integer in [0, 2^64)")
        if not isinstance(self.trees_per_condition, int) or self.trees_per_condition < 1:
            raise ConfigError("trees_per_condition must be an integer >= 1")
        defaults = DEFAULTS[self.experiment]
        self.dataset = {**defaults["dataset"], **self.dataset}
        self.grid = {**defaults["grid"], **self.grid}
        self.tree = {**defaults["tree"], **self.tree}
        for k, v in self.grid.items():
            if isinstance(v, list) and not v:
                raise ConfigError(f"grid {k!r} is empty")
        try:
            self.build_params()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad tree parameters: {exc}") from None

    def build_params(self):
        return BuildParams(rule=self.rule, **self.tree)

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - _KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in doc:
            raise ConfigError("config needs an 'experiment'")
        return cls(**copy.deepcopy(doc))

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
        return cls.from_dict(doc)

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "base_seed": self.base_seed,
            "trees_per_condition": self.trees_per_condition,
            "dataset": copy.deepcopy(self.dataset),
            "grid": copy.deepcopy(self.grid),
            "rule": self.rule.value,
            "tree": copy.deepcopy(self.tree),
            "output": self.output,
        }
