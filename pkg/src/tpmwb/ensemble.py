"""Total work on N independent identical spins.

The single-spin step takes values (-b0, 0, +b0) with weights (b_-, b_0, b_+);
the total work after N spins is a lazy random walk whose site probabilities
Gamma_k, k = -N..N, follow from N-fold convolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import ndtr

from .errors import UsageError
from .spinsys import ResonanceParams
from .tpm import mean_work_spin, spin_weights, variance_work_spin

CLIP_TOL = 1e-15


@dataclass(frozen=True)
class SpinWeights:
    stay: float
    up_down: float
    down_up: float

    def __post_init__(self):
        w = (self.stay, self.up_down, self.down_up)
        if any(x < 0 or not math.isfinite(x) for x in w):
            raise UsageError(f"weights must be finite and non-negative, got {w}")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise UsageError(f"weights must sum to 1, got {math.fsum(w)!r}")

    def mean_steps(self) -> float:
        return self.up_down - self.down_up

    def var_steps(self) -> float:
        return self.up_down + self.down_up - self.mean_steps() ** 2


@dataclass(frozen=True)
class EnsembleDistribution:
    """Gamma_k stored with explicit origin: ``gammas[i]`` belongs to k = i - n."""

    n: int
    b0: float
    gammas: np.ndarray

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1)

    @property
    def works(self) -> np.ndarray:
        return self.ks * self.b0

    def gamma(self, k: int) -> float:
        return float(self.gammas[k + self.n]) if -self.n <= k <= self.n else 0.0

    def mean(self) -> float:
        return math.fsum(self.gammas * self.works)

    def variance(self) -> float:
        m = self.mean()
        return math.fsum(self.gammas * (self.works - m) ** 2)


@dataclass(frozen=True)
class GaussianApprox:
    mean: float
    variance: float

    def pdf(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return np.exp(-0.5 * (w - self.mean) ** 2 / self.variance) / math.sqrt(2 * math.pi * self.variance)

    def binned(self, ks: np.ndarray, b0: float) -> np.ndarray:
        """Gaussian mass in [(k - 1/2) b0, (k + 1/2) b0) for each k."""
        sd = math.sqrt(self.variance)
        lo = ((ks - 0.5) * b0 - self.mean) / sd
        hi = ((ks + 0.5) * b0 - self.mean) / sd
        return ndtr(hi) - ndtr(lo)


def single_spin_weights(p: ResonanceParams, f: float, t: float) -> SpinWeights:
    stay, up_down, down_up = spin_weights(p, f, t)
    return SpinWeights(stay=stay, up_down=up_down, down_up=down_up)


def _as_weights(weights) -> SpinWeights:
    return weights if isinstance(weights, SpinWeights) else SpinWeights(*weights)


def _step(g: np.ndarray, w: SpinWeights) -> np.ndarray:
    out = np.zeros(g.size + 2)
    out[2:] += w.up_down * g
    out[1:-1] += w.stay * g
    out[:-2] += w.down_up * g
    return out


def _finish(g: np.ndarray) -> np.ndarray:
    if np.any(g < -CLIP_TOL):
        raise ArithmeticError(f"convolution produced Gamma = {g.min():.3e} < 0")
    g = np.clip(g, 0.0, None)
    return g / math.fsum(g)


def iter_ensembles(weights, b0: float, n_max: int) -> Iterator[EnsembleDistribution]:
    """Yield the distributions for n = 1..n_max, one convolution each."""
    w = _as_weights(weights)
    g = np.array([1.0])
    for n in range(1, n_max + 1):
        g = _step(g, w)
        yield EnsembleDistribution(n=n, b0=b0, gammas=_finish(g))


def ensemble_distribution(weights, n: int, b0: float = 1.0) -> EnsembleDistribution:
    if n < 1:
        raise UsageError(f"n must be >= 1, got {n}")
    w = _as_weights(weights)
    g = np.array([1.0])
    for _ in range(n):
        g = _step(g, w)
    return EnsembleDistribution(n=n, b0=b0, gammas=_finish(g))


def ensemble_charfn(weights, n: int, r: complex, b0: float = 1.0) -> complex:
    """G(r)^n with G(r) = b_0 + b_+ e^{i b0 r} + b_- e^{-i b0 r}."""
    w = _as_weights(weights)
    g = w.stay + w.up_down * np.exp(1j * b0 * r) + w.down_up * np.exp(-1j * b0 * r)
    return complex(g**n)


def gaussian_approx(p: ResonanceParams, f: float, t: float, n: int) -> GaussianApprox:
    if n < 1:
        raise UsageError(f"n must be >= 1, got {n}")
    return GaussianApprox(mean=n * mean_work_spin(p, f, t), variance=n * variance_work_spin(p, f, t))


def total_variation(e: EnsembleDistribution, g: GaussianApprox) -> float:
    """TV distance between Gamma_k and the integer-binned Gaussian (mass off the lattice counted)."""
    binned = g.binned(e.ks, e.b0)
    outside = max(0.0, 1.0 - math.fsum(binned))
    return 0.5 * (math.fsum(np.abs(e.gammas - binned)) + outside)


def ensemble_violation_probability(e: EnsembleDistribution, delta_f: float) -> float:
    return math.fsum(e.gammas[e.works < delta_f])
