"""Run configuration: schema, defaults, and the key=value file parser.

The file format is line-oriented `key=value` with `#` comments. Keys are
dotted (decoder.depth, loss.lambda, ...); the bare last segment works as an
alias because every last segment is unique in the schema (so `lambda=1.5`
sets loss.lambda). A repeated key keeps its last assignment. Unknown keys
are rejected. Missing keys take the
documented defaults; two are resolved against the model size when absent:
decoder.ffn_hidden becomes 4*d and integration.kappa becomes min(70, k).

The CQL_SEED environment variable, when set, overrides the seed.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

from ..decoder import DecoderConfig
from ..errors import UnknownKey
from ..losses import LossConfig

AUTO = -1  # sentinel for size-dependent defaults, resolved before use
DENSITY_PROFILES = ("sparse", "uniform", "dense")


@dataclass
class IntegrationSettings:
    kappa: int = AUTO
    use_hard: bool = True
    use_soft: bool = True


@dataclass
class OptimizerSettings:
    lr: float = 1e-3
    steps: int = 500


@dataclass
class DatasetSettings:
    scenes: int = 100
    min_instances: int = 1
    max_instances: int = 4
    noise_std: float = 0.01
    density_profile: str = "uniform"


@dataclass
class RunConfig:
    seed: int = 0
    k: int = 4
    d: int = 16
    h: int = 4
    w: int = 4
    decoder: DecoderConfig = field(default_factory=lambda: DecoderConfig(
        ffn_hidden=AUTO))
    loss: LossConfig = field(default_factory=LossConfig)
    integration: IntegrationSettings = field(default_factory=IntegrationSettings)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    dataset: DatasetSettings = field(default_factory=DatasetSettings)
    out_dir: str = "runs"

    def resolve(self) -> "RunConfig":
        """Fill size-dependent defaults and validate cross-field constraints."""
        if self.decoder.ffn_hidden == AUTO:
            self.decoder.ffn_hidden = 4 * self.d
        if self.integration.kappa == AUTO:
            self.integration.kappa = min(70, self.k)
        for name in ("k", "d", "h", "w"):
            if getattr(self, name) < 1:
                raise TypeError(f"{name} must be >= 1, got {getattr(self, name)}")
        self.decoder.validate(self.d)
        self.loss.validate()
        if not 1 <= self.integration.kappa <= self.k:
            raise TypeError(
                f"integration.kappa must be in [1, {self.k}], "
                f"got {self.integration.kappa}")
        if self.optimizer.lr <= 0 or self.optimizer.steps < 0:
            raise TypeError("optimizer.lr must be > 0 and optimizer.steps >= 0")
        if self.dataset.scenes < 1 or self.dataset.min_instances < 1 \
                or self.dataset.max_instances < self.dataset.min_instances:
            raise TypeError("dataset instance/scene counts out of range")
        if self.dataset.noise_std < 0:
            raise TypeError("dataset.noise_std must be >= 0")
        if self.dataset.density_profile not in DENSITY_PROFILES:
            raise TypeError(
                f"dataset.density_profile must be one of {DENSITY_PROFILES}")
        return self

    # -- flat key access, used by the parser and all serializers ----------

    def get(self, key: str):
        obj, attr = self._locate(key)
        return getattr(obj, attr)

    def set(self, key: str, value) -> None:
        obj, attr = self._locate(key)
        setattr(obj, attr, value)

    def _locate(self, key: str):
        section, _, rest = key.partition(".")
        if not rest:
            return self, _FIELD_RENAMES.get(key, key)
        return getattr(self, section), _FIELD_RENAMES.get(rest, rest)

    def to_lines(self) -> list[str]:
        """Canonical key=value lines in schema order (fully resolved)."""
        out = []
        for key, (typ, _) in SCHEMA.items():
            value = self.get(key)
            if typ is bool:
                value = "true" if value else "false"
            out.append(f"{key}={value}")
        return out

    def to_dict(self) -> dict:
        """Nested plain-python form for JSON reports."""
        tree: dict = {}
        for key, (typ, _) in SCHEMA.items():
            section, _, rest = key.partition(".")
            value = self.get(key)
            if rest:
                tree.setdefault(section, {})[rest] = value
            else:
                tree[key] = value
        return tree


# canonical key -> (type, default); order here is the canonical echo order
SCHEMA: dict = {
    "seed": (int, 0),
    "k": (int, 4),
    "d": (int, 16),
    "h": (int, 4),
    "w": (int, 4),
    "decoder.depth": (int, 2),
    "decoder.order": (str, "CSF"),
    "decoder.heads": (int, 4),
    "decoder.ffn_hidden": (int, AUTO),
    "decoder.positional": (bool, False),
    "loss.kind": (str, "asl"),
    "loss.gamma_pos": (float, 0.0),
    "loss.gamma_neg": (float, 4.0),
    "loss.margin": (float, 0.05),
    "loss.lambda": (float, 1.0),
    "loss.instance_gamma": (float, 2.0),
    "integration.kappa": (int, AUTO),
    "integration.use_hard": (bool, True),
    "integration.use_soft": (bool, True),
    "optimizer.lr": (float, 1e-3),
    "optimizer.steps": (int, 500),
    "dataset.scenes": (int, 100),
    "dataset.min_instances": (int, 1),
    "dataset.max_instances": (int, 4),
    "dataset.noise_std": (float, 0.01),
    "dataset.density_profile": (str, "uniform"),
    "out_dir": (str, "runs"),
}

# dataclass field names that differ from their config key
_FIELD_RENAMES = {"lambda": "lam"}

# last-segment aliases (all unique by construction) plus upper-case sizes
_ALIASES = {key.rsplit(".", 1)[-1]: key for key in SCHEMA if "." in key}
assert len(_ALIASES) == sum(1 for key in SCHEMA if "." in key)
_ALIASES.update({name.upper(): name for name in ("k", "d", "h", "w")})

_BOOL_WORDS = {"true": True, "1": True, "yes": True,
               "false": False, "0": False, "no": False}


def _valid_order(order: str) -> bool:
    return (bool(order) and len(set(order)) == len(order)
            and all(c in "CSF" for c in order))


# value checks that must fail at the offending line, not later
_KEY_CHECKS = {
    "decoder.order": (_valid_order,
                      "a non-empty sequence over {C,S,F} without repetition"),
    "loss.kind": (lambda v: v in ("focal", "asl"), "focal or asl"),
    "dataset.density_profile": (lambda v: v in DENSITY_PROFILES,
                                f"one of {DENSITY_PROFILES}"),
}


def _parse_value(typ, raw: str, where: str):
    try:
        if typ is bool:
            return _BOOL_WORDS[raw.strip().lower()]
        return typ(raw.strip())
    except (ValueError, KeyError):
        raise TypeError(
            f"{where}: cannot read {raw.strip()!r} as {typ.__name__}") from None


def parse_config(path) -> RunConfig:
    """Read a key=value config file into a fully resolved RunConfig."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except FileNotFoundError:
        raise FileNotFoundError(f"config file not found: {path}") from None

    cfg = RunConfig()
    for lineno, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        where = f"{path}:{lineno}: {text!r}"
        key, sep, value = text.partition("=")
        if not sep:
            raise TypeError(f"{where}: expected key=value")
        key = key.strip()
        key = _ALIASES.get(key, key)
        if key not in SCHEMA:
            raise UnknownKey(f"{where}: unknown key {key!r}")
        typ, _ = SCHEMA[key]
        parsed = _parse_value(typ, value, where)
        if key in _KEY_CHECKS:
            ok, expectation = _KEY_CHECKS[key]
            if not ok(parsed):
                raise TypeError(f"{where}: {key} must be {expectation}")
        cfg.set(key, parsed)

    env_seed = os.environ.get("CQL_SEED")
    if env_seed is not None:
        cfg.seed = _parse_value(int, env_seed, "CQL_SEED")
    return cfg.resolve()
