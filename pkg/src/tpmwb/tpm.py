"""Two-point-measurement work statistics.

A protocol is: projective energy measurement of H_i on a Gibbs state, unitary
evolution U, projective measurement of H_f. Work is E_m^f - E_n^i. Distributions
are kept as discrete atomic measures; nothing here integrates numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import smallmat as sm
from .errors import DegenerateFrameError, InconsistentMeasurementError, SingularInputError, UsageError
from .propagator import Propagator, exact_propagator, exact_uv
from .spinsys import GibbsState, ResonanceParams, frame_params, gibbs_state, static_hamiltonian

MERGE_RTOL = 1e-9
# |<m|U|n>|^2 below this is squared roundoff of a zero amplitude (|amp| ~ 1e-14)
TRANSITION_FLOOR = 1e-28


@dataclass(frozen=True)
class WorkDistribution:
    """Atoms (w, p) with w strictly ascending. Use :meth:`from_atoms` to build one."""

    values: np.ndarray
    probs: np.ndarray

    @classmethod
    def from_atoms(cls, values, probs, *, merge_rtol: float = MERGE_RTOL) -> "WorkDistribution":
        """Sort, drop exact-zero weights and merge values closer than merge_rtol * max(1, max|w|).

        Merged atoms sit at the probability-weighted mean of their members.
        """
        w = np.asarray(values, dtype=float).ravel()
        p = np.asarray(probs, dtype=float).ravel()
        if w.shape != p.shape:
            raise UsageError("values and probs differ in length")
        if np.any(p < 0) or not np.all(np.isfinite(p)) or not np.all(np.isfinite(w)):
            raise UsageError("probabilities must be finite and non-negative")
        keep = p > 0
        w, p = w[keep], p[keep]
        if w.size == 0:
            raise UsageError("distribution has no mass")
        order = np.argsort(w, kind="stable")
        w, p = w[order], p[order]
        tol = merge_rtol * max(1.0, float(np.max(np.abs(w))))
        starts = np.concatenate(([True], np.diff(w) >= tol))
        group = np.cumsum(starts) - 1
        n_groups = int(group[-1]) + 1
        p_out = np.bincount(group, weights=p, minlength=n_groups)
        w_out = np.bincount(group, weights=p * w, minlength=n_groups) / p_out
        return cls(values=w_out, probs=p_out)

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.probs.tolist()))

    def total(self) -> float:
        return math.fsum(self.probs)

    def prob_at(self, w: float, tol: float = 1e-9) -> float:
        hit = np.abs(self.values - w) <= tol * max(1.0, abs(w))
        return float(self.probs[hit].sum())

    def expect(self, fn) -> complex | float:
        return np.sum(self.probs * fn(self.values))

    def char_fn(self, r: complex) -> complex:
        """sum_k p_k exp(i r w_k)."""
        return complex(np.sum(self.probs * np.exp(1j * r * self.values)))


@dataclass(frozen=True)
class TPMSetup:
    h_initial: np.ndarray
    h_final: np.ndarray
    u: Propagator
    rho0: GibbsState

    @classmethod
    def build(cls, h_initial, h_final, u, beta: float) -> "TPMSetup":
        """Prepare the Gibbs state of h_initial and validate the pieces."""
        h_i = sm.require_hermitian(h_initial, name="h_initial")
        h_f = sm.require_hermitian(h_final, name="h_final")
        if not isinstance(u, Propagator):
            u = Propagator(matrix=sm.as_matrix(u), t=0.0, method="external", step_count=0)
        if not (h_i.shape == h_f.shape == u.matrix.shape):
            raise UsageError(
                f"dimension mismatch: H_i {h_i.shape}, H_f {h_f.shape}, U {u.matrix.shape}"
            )
        return cls(h_initial=h_i, h_final=h_f, u=u, rho0=gibbs_state(h_i, beta))

    @property
    def beta(self) -> float:
        return self.rho0.beta

    @property
    def dim(self) -> int:
        return self.h_initial.shape[0]

    def final_eig(self) -> sm.EigenDecomposition:
        return sm.hermitian_eig(self.h_final)

    def transition_matrix(self) -> np.ndarray:
        """T[n, m] = |<m|U|n>|^2 over the eigenbases of H_i (rows) and H_f (columns)."""
        vi = self.rho0.eigenvectors
        vf = self.final_eig().eigenvectors
        amp = sm.adjoint(vf) @ self.u.matrix @ vi  # amp[m, n] = <m|U|n>
        t = np.abs(amp.T) ** 2
        t[t < TRANSITION_FLOOR] = 0.0
        return t

    def delta_f(self) -> float:
        return gibbs_state(self.h_final, self.beta).f_free - self.rho0.f_free


def spin_setup(p: ResonanceParams, t: float) -> TPMSetup:
    """Spin protocol with H0 as the work Hamiltonian at both ends."""
    h0 = static_hamiltonian(p)
    return TPMSetup.build(h0, h0, exact_propagator(p, t), p.beta)


@dataclass(frozen=True)
class WorkMoments:
    mean: float
    second: float
    variance: float
    raw: tuple[float, ...] = ()


def work_distribution_general(s: TPMSetup) -> WorkDistribution:
    res = sm.unitary_residual(s.u.matrix)
    if res > sm.UNITARY_TOL:
        raise UsageError(f"propagator is not unitary (max |U^dagger U - I| = {res:.3e})")
    e_i = s.rho0.energies
    e_f = s.final_eig().eigenvalues
    weights = s.transition_matrix() * s.rho0.populations[:, None]
    works = e_f[None, :] - e_i[:, None]
    dist = WorkDistribution.from_atoms(works, weights)
    if abs(dist.total() - 1.0) > 1e-12:
        raise UsageError(f"work distribution sums to {dist.total():.15g}")
    return dist


def spin_weights(p: ResonanceParams, f: float, t: float) -> tuple[float, float, float]:
    """(|u|^2, |v|^2 (1+f)/2, |v|^2 (1-f)/2) for no flip, up-down and down-up flips."""
    uv = exact_uv(p, t)
    v2 = uv.transition_probability
    return abs(uv.u) ** 2, v2 * (1.0 + f) / 2.0, v2 * (1.0 - f) / 2.0


def work_distribution_spin(p: ResonanceParams, f: float, t: float) -> WorkDistribution:
    if not 0.0 < f <= 1.0:
        raise UsageError(f"f must lie in (0, 1], got {f}")
    stay, up_down, down_up = spin_weights(p, f, t)
    return WorkDistribution.from_atoms([-p.b0, 0.0, p.b0], [down_up, stay, up_down])


def char_fn_general(s: TPMSetup, r: complex) -> complex:
    """tr{U^dagger exp(i r H_f) U exp(-i r H_i) rho}; r = i beta gives <exp(-beta W)>."""
    u = s.u.matrix
    fwd = sm.expm_hermitian(s.h_final, -r)
    back = sm.expm_hermitian(s.h_initial, r)
    return complex(np.trace(sm.adjoint(u) @ fwd @ u @ back @ s.rho0.rho))


def char_fn_spin(p: ResonanceParams, f: float, t: float, r: complex) -> complex:
    uv = exact_uv(p, t)
    v2 = uv.transition_probability
    bracket = 0.5 * (1 + f) * np.exp(1j * p.b0 * r) + 0.5 * (1 - f) * np.exp(-1j * p.b0 * r)
    return complex(abs(uv.u) ** 2 + v2 * bracket)


def moments(d: WorkDistribution, k_max: int = 2) -> WorkMoments:
    if k_max < 2:
        raise UsageError(f"k_max must be >= 2, got {k_max}")
    raw = tuple(math.fsum(d.probs * d.values**k) for k in range(1, k_max + 1))
    mean, second = raw[0], raw[1]
    centred = math.fsum(d.probs * (d.values - mean) ** 2)
    return WorkMoments(mean=mean, second=second, variance=centred, raw=raw)


def mean_work_spin(p: ResonanceParams, f: float, t: float) -> float:
    """f b0 (b1/Omega)^2 sin^2(Omega t / 2)."""
    try:
        fp = frame_params(p)
    except DegenerateFrameError:
        return 0.0
    return f * p.b0 * (p.b1 / fp.omega_rabi) ** 2 * math.sin(0.5 * fp.omega_rabi * t) ** 2


def variance_work_spin(p: ResonanceParams, f: float, t: float) -> float:
    v2 = exact_uv(p, t).transition_probability
    return p.b0**2 * v2 * (1.0 - f**2 * v2)


def mean_work_curve(p: ResonanceParams, f: float, t_grid: Iterable[float]) -> list[tuple[float, float]]:
    return [(float(t), mean_work_spin(p, f, float(t))) for t in t_grid]


@dataclass(frozen=True)
class JarzynskiCheck:
    lhs: float
    rhs: float
    residual: float


def jarzynski_check(d: WorkDistribution, beta: float, delta_f: float) -> JarzynskiCheck:
    if not beta > 0:
        raise UsageError(f"beta must be > 0, got {beta}")
    lhs = math.fsum(d.probs * np.exp(-beta * d.values))
    rhs = math.exp(-beta * delta_f)
    return JarzynskiCheck(lhs=lhs, rhs=rhs, residual=abs(lhs - rhs))


def violation_probability(d: WorkDistribution, delta_f: float) -> float:
    """Prob(W < delta_f), strict inequality."""
    return math.fsum(d.probs[d.values < delta_f])


def transition_probability_from_magnetization(f: float, sigma_z_measured: float) -> float:
    if f == 0:
        raise SingularInputError("f == 0: magnetization carries no information on |v|^2")
    v2 = (f - sigma_z_measured) / (2.0 * f)
    if not -1e-12 <= v2 <= 1.0 + 1e-12:
        raise InconsistentMeasurementError(
            f"<sigma_z> = {sigma_z_measured} with f = {f} implies |v|^2 = {v2:.6g}, outside [0, 1]"
        )
    return min(max(v2, 0.0), 1.0)


def distribution_from_magnetization(p: ResonanceParams, f: float, sigma_z_measured: float) -> WorkDistribution:
    v2 = transition_probability_from_magnetization(f, sigma_z_measured)
    return WorkDistribution.from_atoms(
        [-p.b0, 0.0, p.b0],
        [v2 * (1 - f) / 2, 1.0 - v2, v2 * (1 + f) / 2],
    )


def random_setup(rng: np.random.Generator, dim: int, *, beta: float | None = None, scale: float = 1.0) -> TPMSetup:
    """Random Hermitian H_i, H_f and Haar-ish unitary U (QR of a Ginibre matrix)."""

    def herm():
        x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        return scale * 0.5 * (x + x.conj().T)

    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    if beta is None:
        beta = float(rng.uniform(0.2, 2.0))
    return TPMSetup.build(herm(), herm(), q, beta)
