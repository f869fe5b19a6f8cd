"""Monte Carlo realisation of the two-point-measurement protocol.

Random numbers come from the Philox4x64-10 counter-based generator (Salmon et
al., Random123), as shipped by numpy. Only the raw 64-bit output stream is
used; doubles are formed as (x >> 11) * 2**-53, so streams are bit-identical
across platforms and numpy versions. Stream (seed, stream) uses Philox key
[seed, stream], counter starting at zero.

Each trajectory consumes exactly two uniforms: one for the initial level n,
one for the final level m.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .tpm import TPMSetup, WorkDistribution

_MASK64 = (1 << 64) - 1
_TO_UNIT = 2.0**-53
_COUNTER_START = np.full(4, _MASK64, dtype=np.uint64)  # numpy increments before the first block


class RngState:
    """Deterministic uniform stream keyed by (seed, stream)."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._bits = np.random.Philox(key=key, counter=_COUNTER_START)
        self.drawn = 0

    def raw(self, n: int) -> np.ndarray:
        self.drawn += n
        return self._bits.random_raw(n)

    def uniforms(self, n: int) -> np.ndarray:
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * _TO_UNIT

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def substream(self, index: int) -> "RngState":
        """Independent stream for worker ``index``; keyed by (seed, stream * 2**32 + index + 1)."""
        return RngState(self.seed, (self.stream << 32) + index + 1)


@dataclass(frozen=True)
class TrajectorySample:
    n_index: int
    m_index: int
    work: float


def _cdf(probs: np.ndarray) -> np.ndarray:
    c = np.cumsum(probs, axis=-1)
    c[..., -1] = 1.0
    return c


def _invert(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Smallest index i with u < cdf[i]."""
    return np.searchsorted(cdf, u, side="right")


@dataclass(frozen=True)
class _Tables:
    e_i: np.ndarray
    e_f: np.ndarray
    cdf_n: np.ndarray
    cdf_m: np.ndarray  # row n: conditional cdf of m given n


def _tables(s: TPMSetup) -> _Tables:
    trans = s.transition_matrix()
    trans = trans / trans.sum(axis=1, keepdims=True)
    return _Tables(
        e_i=s.rho0.energies,
        e_f=s.final_eig().eigenvalues,
        cdf_n=_cdf(s.rho0.populations),
        cdf_m=_cdf(trans),
    )


def sample_trajectory(s: TPMSetup, rng: RngState) -> TrajectorySample:
    tab = _tables(s)
    u_n, u_m = rng.uniforms(2)
    n = int(_invert(tab.cdf_n, u_n))
    m = int(_invert(tab.cdf_m[n], u_m))
    return TrajectorySample(n_index=n, m_index=m, work=float(tab.e_f[m] - tab.e_i[n]))


@dataclass(frozen=True)
class _Partial:
    counts: np.ndarray  # counts[n, m]
    sum_work: float
    sum_work2: float
    sum_exp: float
    sum_exp2: float


def _sample_block(tab: _Tables, beta: float, n_samples: int, rng: RngState, chunk: int) -> _Partial:
    d_i, d_f = tab.e_i.size, tab.e_f.size
    counts = np.zeros((d_i, d_f), dtype=np.int64)
    sums = [0.0, 0.0, 0.0, 0.0]
    left = n_samples
    while left > 0:
        k = min(chunk, left)
        u = rng.uniforms(2 * k)
        n = _invert(tab.cdf_n, u[0::2])
        m = np.empty(k, dtype=np.int64)
        for level in range(d_i):
            sel = n == level
            m[sel] = _invert(tab.cdf_m[level], u[1::2][sel])
        np.add.at(counts, (n, m), 1)
        w = tab.e_f[m] - tab.e_i[n]
        x = np.exp(-beta * w)
        sums[0] += math.fsum(w)
        sums[1] += math.fsum(w * w)
        sums[2] += math.fsum(x)
        sums[3] += math.fsum(x * x)
        left -= k
    return _Partial(counts, *sums)


@dataclass(frozen=True)
class SampleStats:
    count: int
    mean_work: float
    standard_error_mean: float
    jarzynski_estimate: float
    standard_error_jarzynski: float
    histogram: WorkDistribution
    beta: float
    counts: np.ndarray = field(repr=False)
    works: np.ndarray = field(repr=False)  # works[n, m] = E_m^f - E_n^i

    def atom_counts(self) -> dict[float, int]:
        """Sample counts per histogram atom."""
        out = {}
        for w in self.histogram.values:
            hit = np.abs(self.works - w) <= 1e-9 * max(1.0, abs(w))
            out[float(w)] = int(self.counts[hit].sum())
        return out


def _stats(parts: list[_Partial], tab: _Tables, beta: float) -> SampleStats:
    counts = sum(pt.counts for pt in parts)
    n = int(counts.sum())
    s_w = math.fsum(pt.sum_work for pt in parts)
    s_w2 = math.fsum(pt.sum_work2 for pt in parts)
    s_x = math.fsum(pt.sum_exp for pt in parts)
    s_x2 = math.fsum(pt.sum_exp2 for pt in parts)
    mean_w = s_w / n
    mean_x = s_x / n
    # sample standard deviation (n - 1) over sqrt(n)
    if n > 1:
        var_w = max(0.0, (s_w2 - n * mean_w**2) / (n - 1))
        var_x = max(0.0, (s_x2 - n * mean_x**2) / (n - 1))
    else:
        var_w = var_x = 0.0
    works = tab.e_f[None, :] - tab.e_i[:, None]
    hist = WorkDistribution.from_atoms(works, counts / n)
    return SampleStats(
        count=n,
        mean_work=mean_w,
        standard_error_mean=math.sqrt(var_w / n),
        jarzynski_estimate=mean_x,
        standard_error_jarzynski=math.sqrt(var_x / n),
        histogram=hist,
        beta=beta,
        counts=counts,
        works=works,
    )


def run_batch(
    s: TPMSetup,
    n_samples: int,
    rng: RngState,
    *,
    parts: int = 1,
    max_workers: int | None = None,
    chunk: int = 1 << 16,
) -> SampleStats:
    """Sample ``n_samples`` trajectories and aggregate them.

    With ``parts == 1`` the samples are drawn from ``rng`` itself. Otherwise
    the batch is split into ``parts`` near-equal pieces, piece i drawn from
    ``rng.substream(i)``; the result depends on ``parts`` but not on
    ``max_workers``.
    """
    if n_samples < 1:
        raise UsageError(f"n_samples must be >= 1, got {n_samples}")
    if parts < 1:
        raise UsageError(f"parts must be >= 1, got {parts}")
    tab = _tables(s)
    beta = s.beta
    if parts == 1:
        return _stats([_sample_block(tab, beta, n_samples, rng, chunk)], tab, beta)
    sizes = [n_samples // parts + (1 if i < n_samples % parts else 0) for i in range(parts)]
    jobs = [(size, rng.substream(i)) for i, size in enumerate(sizes) if size > 0]
    if max_workers == 1:
        results = [_sample_block(tab, beta, size, sub, chunk) for size, sub in jobs]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(lambda job: _sample_block(tab, beta, job[0], job[1], chunk), jobs))
    return _stats(results, tab, beta)


def empirical_violation_rate(stats: SampleStats, delta_f: float) -> float:
    """Fraction of sampled trajectories with work < delta_f."""
    return int(stats.counts[stats.works < delta_f].sum()) / stats.count
