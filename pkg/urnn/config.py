"""
Run configuration: dataclass defaults, then a flat `key = value` file, then
command-line flags. File keys are the flag names (`-` and `_` interchangeable).
"""

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

from urnn.core.errors import ConfigError
from urnn.models.params import ModelDims

MODELS = ("urnn", "rnn_tanh", "irnn", "lstm")
TASKS = ("copy", "adding", "mnist", "mnist_permuted")
MNIST_DIR_ENV = "URNN_MNIST_DIR"
BASELINE_CLIP = 1.0

# input / output sizes per task
TASK_IO = {
    "copy": (10, 9),
    "adding": (2, 1),
    "mnist": (1, 10),
    "mnist_permuted": (1, 10),
}


def _optional(convert: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str):
        return None if text.strip().lower() in ("", "none") else convert(text)

    return parse


# flag / file key -> (RunConfig field, parser)
KEYS: Dict[str, Tuple[str, Callable[[str], Any]]] = {
    "model": ("model", str),
    "task": ("task", str),
    "T": ("T", int),
    "hidden": ("n_h", int),
    "lr": ("lr", float),
    "decay": ("decay", float),
    "batch": ("batch", int),
    "iters": ("iters", int),
    "seed": ("seed", int),
    "clip": ("clip", _optional(float)),
    "eval-every": ("eval_every", int),
    "eval-batch": ("eval_batch", int),
    "out": ("out_path", str),
    "checkpoint": ("checkpoint_path", _optional(str)),
    "mnist-dir": ("mnist_dir", _optional(str)),
    "train-subset": ("train_subset", _optional(int)),
    "test-subset": ("test_subset", _optional(int)),
    "rms-eps": ("rms_eps", float),
}


def _canonical_key(key: str) -> str:
    key = key.strip()
    if key.lower() == "t":
        return "T"
    return key.replace("_", "-").lower()


@dataclass(frozen=True)
class RunConfig:
    """Experiment hyperparameters"""

    model: str = "urnn"
    task: str = "copy"
    T: int = 100
    n_h: int = 128
    lr: float = 1e-3
    decay: float = 0.9
    batch: int = 20
    iters: int = 1000
    seed: int = 42
    clip: Optional[float] = None
    eval_every: int = 100
    eval_batch: int = 100
    out_path: str = "metrics.csv"
    checkpoint_path: Optional[str] = None
    mnist_dir: Optional[str] = field(default_factory=lambda: os.getenv(MNIST_DIR_ENV))
    train_subset: Optional[int] = None
    test_subset: Optional[int] = None
    rms_eps: float = 1e-8

    def validate(self) -> "RunConfig":
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {', '.join(MODELS)}, got '{self.model}'")
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {', '.join(TASKS)}, got '{self.task}'")
        if self.n_h < 1 or (self.model == "urnn" and self.n_h & (self.n_h - 1)):
            raise ConfigError(f"hidden size must be a positive power of two for urnn, got {self.n_h}")
        if self.task == "copy" and self.T < 1:
            raise ConfigError(f"copy task needs T >= 1, got {self.T}")
        if self.task == "adding" and self.T < 2:
            raise ConfigError(f"adding task needs T >= 2, got {self.T}")
        if self.lr <= 0 or not 0.0 <= self.decay < 1.0 or self.rms_eps <= 0:
            raise ConfigError("lr and rms-eps must be positive and decay must lie in [0, 1)")
        if self.batch < 1 or self.eval_batch < 1 or self.iters < 0 or self.eval_every < 1:
            raise ConfigError("batch, eval-batch and eval-every must be >= 1 and iters >= 0")
        if self.clip is not None and self.clip <= 0:
            raise ConfigError(f"clip must be positive, got {self.clip}")
        if self.task.startswith("mnist") and not self.mnist_dir:
            raise ConfigError(f"MNIST tasks need --mnist-dir or the {MNIST_DIR_ENV} environment variable")
        return self

    @property
    def effective_clip(self) -> Optional[float]:
        """Explicit clip, else none for the uRNN and 1.0 for the baselines"""
        if self.clip is not None:
            return self.clip
        return None if self.model == "urnn" else BASELINE_CLIP

    @property
    def dims(self) -> ModelDims:
        n_in, n_o = TASK_IO[self.task]
        return ModelDims(n_in, self.n_h, n_o)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def with_overrides(self, overrides: Dict[str, Any]) -> "RunConfig":
        """Apply flag-keyed overrides, skipping None values"""
        changes = {}
        for key, value in overrides.items():
            if value is None:
                continue
            canonical = _canonical_key(key)
            if canonical not in KEYS:
                raise ConfigError(f"unknown configuration key '{key}'")
            changes[KEYS[canonical][0]] = value
        return self.replace(**changes)

    def to_text(self) -> str:
        lines = []
        for key, (name, _) in KEYS.items():
            value = getattr(self, name)
            lines.append(f"{key} = {'none' if value is None else value}")
        return "\n".join(lines) + "\n"


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    """Parse `key = value` lines into flag-keyed values"""
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        canonical = _canonical_key(key)
        if canonical not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key '{key}'")
        try:
            values[canonical] = KEYS[canonical][1](value)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value '{value}' for '{key}'") from None
    return values


def config_from_text(text: str, source: str = "<config>") -> RunConfig:
    return RunConfig().with_overrides(parse_config_text(text, source))


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Defaults, then the config file at path (if any), then overrides"""
    cfg = RunConfig()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        cfg = cfg.with_overrides(parse_config_text(text, str(path)))
    if overrides:
        cfg = cfg.with_overrides(overrides)
    return cfg.validate()
