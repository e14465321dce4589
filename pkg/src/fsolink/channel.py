"""Gamma-Gamma FSO link: y = R * I * x + n with per-symbol independent fading."""
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterDomainError
from .numerics import sample_gamma, sample_gaussian_pair

REGIMES = {
    "strong": (4.2, 1.4),
    "moderate": (4.0, 1.9),
    "weak": (11.6, 10.1),
}


@dataclass(frozen=True)
class TurbulenceParams:
    alpha: float
    beta: float
    regime_label: str = "custom"

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ParameterDomainError(
                f"alpha and beta must be positive, got ({self.alpha}, {self.beta})"
            )
        if self.regime_label in REGIMES and REGIMES[self.regime_label] != (self.alpha, self.beta):
            raise ParameterDomainError(f"'{self.regime_label}' is reserved for {REGIMES[self.regime_label]}")

    @classmethod
    def named(cls, name):
        if name not in REGIMES:
            raise ParameterDomainError(f"unknown turbulence regime '{name}'")
        return cls(*REGIMES[name], regime_label=name)

    @property
    def label(self):
        if self.regime_label == "custom":
            return f"custom:{self.alpha:g},{self.beta:g}"
        return self.regime_label


@dataclass(frozen=True)
class NoFading:
    """Degenerate channel with I = 1 for every symbol."""

    @property
    def label(self):
        return "none"


NO_FADING = NoFading()


def parse_turbulence(text):
    """Accept 'weak' | 'moderate' | 'strong' | 'custom:alpha,beta' | 'none'."""
    text = text.strip()
    if text == "none":
        return NO_FADING
    if text.startswith("custom:"):
        try:
            alpha, beta = (float(v) for v in text[len("custom:"):].split(","))
        except ValueError:
            raise ParameterDomainError(f"expected 'custom:alpha,beta', got '{text}'") from None
        return TurbulenceParams(alpha, beta)
    return TurbulenceParams.named(text)


@dataclass(frozen=True)
class LinkConfig:
    responsivity: float = 1.0
    es_n0_db: float = 20.0
    es: float = 1.0
    turbulence: object = NO_FADING

    def __post_init__(self):
        if not self.responsivity > 0:
            raise ParameterDomainError("responsivity must be positive")
        if not self.es > 0:
            raise ParameterDomainError("symbol energy must be positive")

    @property
    def noise_variance(self):
        return noise_variance_for_snr(self.es_n0_db, self.es)


def scintillation_index(params):
    """Var(I) / E[I]^2 of the unit-mean Gamma-Gamma product."""
    a, b = params.alpha, params.beta
    return 1.0 / a + 1.0 / b + 1.0 / (a * b)


def sample_intensity(rng, params, size=None):
    """I = X * Y, X ~ Gamma(a, 1/a), Y ~ Gamma(b, 1/b); E[I] = 1."""
    if isinstance(params, NoFading):
        return 1.0 if size is None else np.ones(size)
    x = sample_gamma(rng, params.alpha, 1.0 / params.alpha, size)
    y = sample_gamma(rng, params.beta, 1.0 / params.beta, size)
    return x * y


def noise_variance_for_snr(es_n0_db, es=1.0):
    """Total complex-noise variance N0 for the given Es/N0 in dB."""
    if not math.isfinite(es_n0_db):
        raise ParameterDomainError("Es/N0 must be finite")
    if not es > 0:
        raise ParameterDomainError("symbol energy must be positive")
    return es * 10.0 ** (-es_n0_db / 10.0)


def apply_link(x, intensity, cfg, rng, noise_variance=None):
    """Received sample(s) R * I * x + n.

    ``noise_variance`` overrides the value derived from ``cfg.es_n0_db``;
    pass 0 for a noiseless link.
    """
    if np.any(np.asarray(intensity) <= 0):
        raise ParameterDomainError("intensity must be positive")
    var = cfg.noise_variance if noise_variance is None else noise_variance
    shape = np.shape(x)
    n = sample_gaussian_pair(rng, var, shape if shape else None)
    return cfg.responsivity * intensity * x + n
