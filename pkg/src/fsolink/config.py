"""Experiment configuration: flat ``key = value`` files with ``#`` comments."""
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import parse_turbulence
from .exceptions import ConfigError, ParameterDomainError
from .modem import SUPPORTED_QAM
from .neural import ACTIVATIONS
from .pipelines import KINDS, TrainConfig, resolve_kind


@dataclass
class ExperimentConfig:
    kinds: tuple = KINDS
    M: int = 16
    regimes: tuple = ("weak", "moderate", "strong")
    es_n0_start: float = 0.0
    es_n0_stop: float = 30.0
    es_n0_step: float = 2.0
    max_symbols: int = 10 ** 6
    target_errors: int = 1000
    train: TrainConfig = field(default_factory=TrainConfig)
    hidden_layers: int = 4
    neurons: int = 40
    activation: str = "relu"
    responsivity: float = 1.0
    seed: int = 0
    output: str = None
    retrain_per_point: bool = True
    baseline: bool = True
    immunity_es_n0_db: float = 20.0
    jobs: int = 1

    def __post_init__(self):
        self.kinds = tuple(resolve_kind(k) for k in self.kinds)
        if not self.kinds:
            raise ParameterDomainError("at least one pipeline kind is required")
        if self.M not in SUPPORTED_QAM:
            raise ParameterDomainError(f"unsupported modulation order {self.M}")
        for r in self.regimes:
            parse_turbulence(r)
        if not self.regimes:
            raise ParameterDomainError("at least one regime is required")
        if not self.es_n0_step > 0:
            raise ParameterDomainError("es_n0_step must be positive")
        if self.es_n0_stop < self.es_n0_start:
            raise ParameterDomainError("es_n0_stop must not be below es_n0_start")
        if self.max_symbols < 10 ** 3:
            raise ParameterDomainError("max_symbols must be >= 1000")
        if self.target_errors < 10:
            raise ParameterDomainError("target_errors must be >= 10")
        if self.activation not in ACTIVATIONS:
            raise ParameterDomainError(f"unknown activation '{self.activation}'")
        if min(self.hidden_layers, self.neurons, self.jobs) < 1:
            raise ParameterDomainError("hidden_layers, neurons and jobs must be >= 1")
        if not self.responsivity > 0:
            raise ParameterDomainError("responsivity must be positive")

    @property
    def grid(self):
        n = int(np.floor((self.es_n0_stop - self.es_n0_start) / self.es_n0_step + 1e-9)) + 1
        return [round(self.es_n0_start + i * self.es_n0_step, 10) for i in range(n)]


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def _list(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _regime_list(text):
    # "custom:a,b" carries its own comma, so glue the beta back on.
    out = []
    for tok in _list(text):
        if out and out[-1].startswith("custom:") and "," not in out[-1]:
            out[-1] += "," + tok
        else:
            out.append(tok)
    return tuple(out)


def _loss(text):
    if text.replace(" ", "_").lower() not in ("softmax_cross_entropy", "cross_entropy"):
        raise ValueError("only softmax cross entropy is supported")
    return text


def _positive(conv):
    def check(text):
        v = conv(text)
        if not v > 0:
            raise ValueError(f"must be positive, got {text}")
        return v
    return check


_EXPERIMENT_KEYS = {
    "kinds": _list,
    "M": int,
    "regimes": _regime_list,
    "es_n0_start": float,
    "es_n0_stop": float,
    "es_n0_step": _positive(float),
    "max_symbols": int,
    "target_errors": int,
    "hidden_layers": int,
    "neurons": int,
    "activation": str,
    "responsivity": _positive(float),
    "seed": int,
    "output": str,
    "retrain_per_point": _bool,
    "baseline": _bool,
    "immunity_es_n0_db": float,
    "jobs": int,
    "loss": _loss,
}

_TRAIN_KEYS = {
    "batch_size": _positive(int),
    "dataset_batches": _positive(int),
    "iterations": _positive(int),
    "optimizer": str,
    "learning_rate": _positive(float),
    "train_es_n0_db": float,
    "regime": parse_turbulence,
    "temperature": _positive(float),
    "fresh_samples": _bool,
}
_TRAIN_FIELD = {"train_es_n0_db": "es_n0_db", "regime": "turbulence"}


def parse_config_text(text):
    """Parse config text; missing keys keep the tuned defaults."""
    exp, train, where = {}, {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key in where:
            raise ConfigError("duplicate key", key, lineno)
        if key in _EXPERIMENT_KEYS:
            conv, target = _EXPERIMENT_KEYS[key], exp
        elif key in _TRAIN_KEYS:
            conv, target = _TRAIN_KEYS[key], train
        else:
            raise ConfigError("unknown key", key, lineno)
        try:
            target[key] = conv(value)
        except (ValueError, ParameterDomainError) as exc:
            raise ConfigError(f"bad value '{value}': {exc}", key, lineno) from None
        where[key] = lineno
    exp.pop("loss", None)

    def blame(exc):
        # Name the offending key when the message mentions one.
        for key, lineno in where.items():
            if key in str(exc) or _TRAIN_FIELD.get(key, "") in str(exc):
                return ConfigError(str(exc), key, lineno)
        return ConfigError(str(exc))

    try:
        train_cfg = TrainConfig(**{_TRAIN_FIELD.get(k, k): v for k, v in train.items()})
        cfg = ExperimentConfig(train=train_cfg, **exp)
    except ParameterDomainError as exc:
        raise blame(exc) from None
    cfg.train = replace(cfg.train, seed=cfg.seed)
    return cfg


def parse_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text)
