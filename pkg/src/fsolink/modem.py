"""Constellations, one-hot labels and the classical detectors."""
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .exceptions import DegenerateChannelError, DegenerateConstellationError, ParameterDomainError

SUPPORTED_QAM = (4, 16, 64)


@dataclass(frozen=True, eq=False)
class Constellation:
    points: np.ndarray
    source: str = "gray_qam"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        if pts.ndim != 1 or pts.size < 2:
            raise ParameterDomainError("a constellation needs at least two points")
        energy = np.mean(np.abs(pts) ** 2)
        if abs(energy - 1.0) > 1e-9:
            raise ParameterDomainError(f"constellation energy is {energy}, expected 1")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    @property
    def order(self):
        return self.points.size

    @classmethod
    def from_points(cls, points, source="learned"):
        """Normalize arbitrary points to unit mean energy."""
        pts = np.asarray(points, dtype=complex)
        energy = np.mean(np.abs(pts) ** 2)
        if energy < 1e-12:
            raise DegenerateConstellationError("all constellation points collapsed to the origin")
        return cls(pts / np.sqrt(energy), source)


def _gray_to_binary(g):
    b = g.copy()
    shift = g >> 1
    while np.any(shift):
        b ^= shift
        shift >>= 1
    return b


def gray_qam_constellation(M):
    """Square M-QAM; the high index bits Gray-code the in-phase level, the low bits the quadrature."""
    if M not in SUPPORTED_QAM:
        raise ParameterDomainError(f"unsupported QAM order {M}; choose from {SUPPORTED_QAM}")
    side = int(round(np.sqrt(M)))
    bits = side.bit_length() - 1
    k = np.arange(M)
    i_level = _gray_to_binary(k >> bits)
    q_level = _gray_to_binary(k & (side - 1))
    amp = lambda lvl: 2.0 * lvl - (side - 1)  # noqa: E731
    points = (amp(i_level) + 1j * amp(q_level)) / np.sqrt(2.0 * (M - 1) / 3.0)
    # Renormalize to cancel the last ulp of rounding.
    points = points / np.sqrt(np.mean(np.abs(points) ** 2))
    return Constellation(points, "gray_qam")


def one_hot(k, M):
    """Rows of the identity for label(s) ``k``."""
    k = np.asarray(k)
    if np.any(k < 0) or np.any(k >= M):
        raise IndexError(f"symbol index out of range for M={M}")
    return np.eye(M)[k]


def _points(c):
    return c.points if isinstance(c, Constellation) else np.asarray(c, dtype=complex)


def ml_detect(y, channel_gain, R, c):
    """argmin_u |y - R*h*x_u|^2; ties go to the lowest index."""
    h = np.asarray(channel_gain, dtype=complex)
    if np.any(np.abs(h) == 0):
        raise DegenerateChannelError("channel gain must be non-zero")
    y = np.asarray(y, dtype=complex)
    ref = R * h[..., None] * _points(c)
    idx = np.argmin(np.abs(y[..., None] - ref) ** 2, axis=-1)
    return int(idx) if idx.ndim == 0 else idx


def naive_detect(y, R, c):
    """Detection without any channel estimate, using the mean gain I = 1."""
    return ml_detect(y, np.ones(np.shape(y)), R, c)


def soft_detect(y_eq, c, temperature=1.0):
    """Softmax over -|y_eq - x_u|^2 / temperature; a differentiable stand-in for ml_detect."""
    if not temperature > 0:
        raise ParameterDomainError("temperature must be positive")
    y_eq = np.asarray(y_eq, dtype=complex)
    logits = -np.abs(y_eq[..., None] - _points(c)) ** 2 / temperature
    return softmax(logits, axis=-1)
