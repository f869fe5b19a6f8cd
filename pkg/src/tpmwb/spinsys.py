"""Spin-1/2 magnetic resonance model, Gibbs states and quasi-static bookkeeping.

Units: hbar = k_B = 1, fields in energy units. Basis order is (|+>, |->), the
eigenbasis of sigma_z, so H0 = -(b0/2) sigma_z = diag(-b0/2, +b0/2) has its
ground state first.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import smallmat as sm
from .errors import DegenerateFrameError, UsageError

WEAK_DRIVE_RATIO = 0.1


class ModelValidityWarning(UserWarning):
    """The drive is not weak compared to the static field."""


@dataclass(frozen=True)
class ResonanceParams:
    b0: float = 1.0
    b1: float = 0.1
    omega: float = 0.8
    beta: float = 2.0 * math.atanh(0.5)

    def __post_init__(self):
        for name in ("b0", "b1", "omega", "beta"):
            if not math.isfinite(getattr(self, name)):
                raise UsageError(f"{name} must be finite")
        if self.b0 <= 0:
            raise UsageError(f"b0 must be > 0, got {self.b0}")
        if self.b1 < 0:
            raise UsageError(f"b1 must be >= 0, got {self.b1}")
        if self.beta <= 0:
            raise UsageError(f"beta must be > 0, got {self.beta}")
        if self.b1 / self.b0 > WEAK_DRIVE_RATIO:
            warnings.warn(
                f"b1/b0 = {self.b1 / self.b0:.3g} > {WEAK_DRIVE_RATIO}: work is still "
                "measured against H0, which assumes a weak drive",
                ModelValidityWarning,
                stacklevel=3,
            )

    @classmethod
    def from_f(cls, b0: float, b1: float, omega: float, f: float) -> "ResonanceParams":
        return cls(b0=b0, b1=b1, omega=omega, beta=beta_from_f(b0, f))

    @property
    def f(self) -> float:
        return magnetization_f(self)


@dataclass(frozen=True)
class FrameParams:
    omega_rabi: float
    theta: float


@dataclass(frozen=True)
class GibbsState:
    rho: np.ndarray
    beta: float
    z: float
    f_free: float
    entropy: float
    energies: np.ndarray
    populations: np.ndarray
    eigenvectors: np.ndarray
    log_z: float


def static_hamiltonian(p: ResonanceParams | float) -> np.ndarray:
    b0 = p.b0 if isinstance(p, ResonanceParams) else float(p)
    return -0.5 * b0 * sm.SIGMA_Z


def driven_hamiltonian(p: ResonanceParams, t):
    """H(t) = -(b0/2) sz - (b1/2)(sx sin wt + sy cos wt); t may be an array."""
    t = np.asarray(t, dtype=float)
    s = np.sin(p.omega * t)[..., None, None]
    c = np.cos(p.omega * t)[..., None, None]
    return -0.5 * p.b0 * sm.SIGMA_Z - 0.5 * p.b1 * (sm.SIGMA_X * s + sm.SIGMA_Y * c)


def rotating_hamiltonian(p: ResonanceParams) -> np.ndarray:
    return -0.5 * (p.b0 - p.omega) * sm.SIGMA_Z - 0.5 * p.b1 * sm.SIGMA_Y


def frame_params(p: ResonanceParams) -> FrameParams:
    """Rabi frequency and mixing angle of the rotating-frame Hamiltonian.

    theta uses atan2(b1, b0 - omega), so drives above resonance give an obtuse
    angle rather than a sign flip of the Rabi frequency.
    """
    detuning = p.b0 - p.omega
    omega_rabi = math.hypot(detuning, p.b1)
    if omega_rabi == 0.0:
        raise DegenerateFrameError("b1 == 0 and omega == b0: rotating frame has no dynamics")
    return FrameParams(omega_rabi=omega_rabi, theta=math.atan2(p.b1, detuning))


def _log_partition(energies: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    shifted = energies - energies.min()
    weights = np.exp(-beta * shifted)
    total = weights.sum()
    return float(-beta * energies.min() + math.log(total)), weights / total


def gibbs_state(h, beta: float) -> GibbsState:
    """exp(-beta H)/Z with Z, F = -ln(Z)/beta and S = -sum P ln P."""
    if not beta > 0:
        raise UsageError(f"beta must be > 0, got {beta}")
    eig = sm.hermitian_eig(h)
    log_z, pops = _log_partition(eig.eigenvalues, beta)
    v = eig.eigenvectors
    rho = (v * pops) @ sm.adjoint(v)
    nz = pops > 0
    entropy = float(-np.sum(pops[nz] * np.log(pops[nz])))
    return GibbsState(
        rho=rho,
        beta=float(beta),
        z=math.exp(log_z) if log_z < 709.0 else math.inf,
        f_free=-log_z / beta,
        entropy=entropy,
        energies=eig.eigenvalues,
        populations=pops,
        eigenvectors=v,
        log_z=log_z,
    )


def magnetization_f(p: ResonanceParams) -> float:
    """Equilibrium <sigma_z> of H0 at inverse temperature beta: tanh(beta b0 / 2)."""
    return math.tanh(0.5 * p.beta * p.b0)


def beta_from_f(b0: float, f: float) -> float:
    if not 0.0 < f < 1.0:
        raise UsageError(f"f must lie in (0, 1) to map to a finite beta, got {f}")
    return 2.0 * math.atanh(f) / b0


def free_energy_change(p_i: ResonanceParams, p_f: ResonanceParams) -> float:
    """F_f - F_i with the work Hamiltonian H0 evaluated at both endpoints."""
    if p_i.beta != p_f.beta:
        raise UsageError(f"endpoints at different beta ({p_i.beta} vs {p_f.beta})")
    return (
        gibbs_state(static_hamiltonian(p_f), p_f.beta).f_free
        - gibbs_state(static_hamiltonian(p_i), p_i.beta).f_free
    )


@dataclass(frozen=True)
class QuasistaticDeltas:
    delta_w: float
    delta_q: float
    d_f: float
    t_d_s: float
    d_u: float


def _fractions(xs) -> list[Fraction]:
    return [Fraction(float(x)) for x in xs]


def quasistatic_deltas(
    h_of_lambda: Callable[[float], np.ndarray],
    lam: float,
    dlam: float | None,
    beta: float,
) -> QuasistaticDeltas:
    """Split an infinitesimal isothermal step into work and heat.

    Levels and populations are evaluated at lam -/+ dlam/2. Differences are
    weighted by the endpoint averages, which keeps the scheme centred and
    makes dU = dQ + dW hold exactly for the endpoint values. The level sums
    are accumulated in exact rational arithmetic of those float values.
    """
    if dlam is None:
        dlam = 1e-6 * max(1.0, abs(lam))
    if dlam == 0.0:
        return QuasistaticDeltas(0.0, 0.0, 0.0, 0.0, 0.0)
    lo = gibbs_state(h_of_lambda(lam - 0.5 * dlam), beta)
    hi = gibbs_state(h_of_lambda(lam + 0.5 * dlam), beta)
    e_lo, e_hi = _fractions(lo.energies), _fractions(hi.energies)
    p_lo, p_hi = _fractions(lo.populations), _fractions(hi.populations)
    delta_w = sum(((eh - el) * (ph + pl) / 2 for eh, el, ph, pl in zip(e_hi, e_lo, p_hi, p_lo)), Fraction(0))
    delta_q = sum(((eh + el) / 2 * (ph - pl) for eh, el, ph, pl in zip(e_hi, e_lo, p_hi, p_lo)), Fraction(0))
    d_u = sum((eh * ph - el * pl for eh, el, ph, pl in zip(e_hi, e_lo, p_hi, p_lo)), Fraction(0))
    return QuasistaticDeltas(
        delta_w=float(delta_w),
        delta_q=float(delta_q),
        d_f=hi.f_free - lo.f_free,
        t_d_s=(hi.entropy - lo.entropy) / beta,
        d_u=float(d_u),
    )
