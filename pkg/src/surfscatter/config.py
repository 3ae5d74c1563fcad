"""Run configuration: defaults < JSON config file < command-line flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .evaluation import DEFAULT_TEST_SURFACES, REFERENCE_TRAIN_SURFACES
from .features import DEFAULT_EPSILON, DEFAULT_THRESHOLD_DB
from .learners import BoostConfig, ForestConfig, MlpConfig
from .patching import DEFAULT_BIN_SIZE, DEFAULT_MIN_POINTS

MODEL_SECTIONS = {"forest": ForestConfig, "gbdt": BoostConfig, "mlp": MlpConfig}


@dataclass(frozen=True)
class RunConfig:
    manifest: str | None = None
    bin_size: float = DEFAULT_BIN_SIZE
    min_points: int = DEFAULT_MIN_POINTS
    epsilon: float = DEFAULT_EPSILON
    threshold_db: float = DEFAULT_THRESHOLD_DB
    forest: ForestConfig = field(default_factory=ForestConfig)
    gbdt: BoostConfig = field(default_factory=BoostConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)
    models: tuple[str, ...] = ("forest", "gbdt", "mlp")
    k_values: tuple[int, ...] = tuple(range(2, 12))
    repeats: int = 50
    fixed_repeats: int = 1
    test_surfaces: tuple[str, ...] = DEFAULT_TEST_SURFACES
    train_surfaces: tuple[str, ...] = REFERENCE_TRAIN_SURFACES
    master_seed: int = 0
    out_dir: str = "out"
    n_jobs: int = 1

    def __post_init__(self):
        if not self.bin_size > 0:
            raise ConfigError(f"bin_size must be positive, got {self.bin_size}")
        if self.min_points < 1:
            raise ConfigError(f"min_points must be >= 1, got {self.min_points}")
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.repeats < 1 or self.fixed_repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.n_jobs < 1:
            raise ConfigError("n_jobs must be >= 1")
        bad = [m for m in self.models if m not in MODEL_SECTIONS]
        if bad or not self.models:
            raise ConfigError(f"unknown models {bad}; choose from {sorted(MODEL_SECTIONS)}")

    def model_configs(self) -> dict:
        return {name: getattr(self, name) for name in self.models}

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("models", "k_values", "test_surfaces", "train_surfaces"):
            d[key] = list(d[key])
        d["mlp"]["hidden"] = list(d["mlp"]["hidden"])
        return d

    def echo(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


_TUPLE_FIELDS = {"models", "k_values", "test_surfaces", "train_surfaces"}


def _section(cls, base, values: dict):
    if not isinstance(values, dict):
        raise ConfigError(f"model section for {cls.__name__} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys {sorted(unknown)}")
    try:
        return replace(base, **values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from None


def merge(config: RunConfig, values: dict) -> RunConfig:
    """Overlay a (possibly partial) dict onto ``config``."""
    known = {f.name for f in fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    updates = {}
    for key, value in values.items():
        if key in MODEL_SECTIONS:
            updates[key] = _section(MODEL_SECTIONS[key], getattr(config, key), value)
        elif key in _TUPLE_FIELDS:
            updates[key] = tuple(value)
        else:
            updates[key] = value
    try:
        return replace(config, **updates)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    # output files echo the effective config under "config"; accept those directly
    if isinstance(data.get("config"), dict):
        return data["config"]
    return data


def parse_assignment(text: str) -> dict:
    """``section.key=value`` or ``key=value`` (value parsed as JSON when possible)."""
    if "=" not in text:
        raise ConfigError(f"expected KEY=VALUE, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.strip().split(".")
    if len(parts) == 1:
        return {parts[0]: value}
    if len(parts) == 2:
        return {parts[0]: {parts[1]: value}}
    raise ConfigError(f"bad key {key!r}")
