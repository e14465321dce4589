"""Seeded random streams and the gamma / gaussian samplers built on them.

Bits come from the Philox-4x64-10 counter-based generator (round constants
0xD2E7470EE14C6C93, 0xCA5A826395121157; Weyl keys 0x9E3779B97F4A7C15,
0xBB67AE8584CAA73B).  Everything above raw uniforms is done here so that a
seed pins down every downstream draw.
"""
import math

import numpy as np

from .exceptions import ParameterDomainError

SEED_MASK = (1 << 64) - 1


class RngStream:
    """Single-owner deterministic source of uniforms.

    Do not share one stream between workers; derive a substream per worker
    with :func:`derive_substream` instead.
    """

    def __init__(self, seed, index=None):
        seed = int(seed)
        if seed < 0 or seed > SEED_MASK:
            raise ParameterDomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.index = index
        entropy = [seed] if index is None else [seed, int(index)]
        # The extra word keeps root streams disjoint from every substream.
        entropy.append(0 if index is None else 1)
        self._bits = np.random.Philox(np.random.SeedSequence(entropy))
        self._gen = np.random.Generator(self._bits)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, index={self.index})"

    def uniform(self, size=None):
        """Uniform draws on [0, 1)."""
        return self._gen.random(size)

    def uniform_open(self, size=None):
        """Uniform draws on (0, 1]; safe as a log argument."""
        return 1.0 - self._gen.random(size)

    def integers(self, high, size=None):
        return self._gen.integers(0, high, size=size)

    def standard_normal(self, size=None):
        """Box-Muller normals; a pair of uniforms yields a pair of normals."""
        n = 1 if size is None else int(np.prod(size))
        half = (n + 1) // 2
        radius = np.sqrt(-2.0 * np.log(self.uniform_open(half)))
        angle = 2.0 * np.pi * self.uniform(half)
        z = np.empty(2 * half)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        if size is None:
            return float(z[0])
        return z[:n].reshape(size)


def rng_from_seed(seed):
    return RngStream(seed)


def derive_substream(seed, index):
    """Independent reproducible stream for job/worker ``index`` under ``seed``."""
    if int(index) < 0:
        raise ParameterDomainError("substream index must be non-negative")
    return RngStream(seed, index)


def _standard_gamma(rng, shape, n):
    # Marsaglia-Tsang squeeze/rejection, vectorized over batches of candidates.
    boost = shape < 1.0
    a = shape + 1.0 if boost else shape
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    filled = 0
    while filled < n:
        want = n - filled
        m = int(want * 1.1) + 16
        x = rng.standard_normal(m)
        u = rng.uniform_open(m)
        v = 1.0 + c * x
        ok = v > 0.0
        v = np.where(ok, v * v * v, 1.0)
        x2 = x * x
        accept = ok & (
            (u < 1.0 - 0.0331 * x2 * x2)
            | (np.log(u) < 0.5 * x2 + d * (1.0 - v + np.log(v)))
        )
        got = (d * v)[accept][:want]
        out[filled:filled + got.size] = got
        filled += got.size
    if boost:
        # Gamma(a) = Gamma(a + 1) * U^(1/a)
        out *= rng.uniform_open(n) ** (1.0 / shape)
    return out


def sample_gamma(rng, shape, scale=1.0, size=None):
    """Draw(s) from Gamma(shape, scale): mean shape*scale, variance shape*scale**2."""
    if not shape > 0 or not math.isfinite(shape):
        raise ParameterDomainError(f"gamma shape must be positive, got {shape}")
    if not scale > 0 or not math.isfinite(scale):
        raise ParameterDomainError(f"gamma scale must be positive, got {scale}")
    n = 1 if size is None else int(np.prod(size))
    g = _standard_gamma(rng, float(shape), n) * scale
    # shape < 1 can underflow to exactly 0 in double precision
    np.maximum(g, np.finfo(float).tiny, out=g)
    if size is None:
        return float(g[0])
    return g.reshape(size)


def sample_gaussian_pair(rng, total_variance, size=None):
    """Circularly symmetric complex gaussian with E|n|^2 = total_variance."""
    if not total_variance >= 0 or not math.isfinite(total_variance):
        raise ParameterDomainError(f"variance must be non-negative, got {total_variance}")
    n = 1 if size is None else int(np.prod(size))
    z = rng.standard_normal(2 * n) * math.sqrt(total_variance / 2.0)
    out = z[0::2] + 1j * z[1::2]
    if size is None:
        return complex(out[0])
    return out.reshape(size)
