"""Time-evolution operators for the driven spin and for generic H(t)."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import smallmat as sm
from .errors import DegenerateFrameError, UsageError
from .spinsys import GibbsState, ResonanceParams, frame_params

EXACT = "exact_closed_form"
STEPPED = "stepped_integrator"
DEFAULT_STEPS = 10_000


@dataclass(frozen=True)
class UVAmplitudes:
    u: complex
    v: complex
    t: float

    @property
    def transition_probability(self) -> float:
        return abs(self.v) ** 2


@dataclass(frozen=True)
class Propagator:
    matrix: np.ndarray
    t: float
    method: str = EXACT
    step_count: int = 0


def exact_uv(p: ResonanceParams, t: float) -> UVAmplitudes:
    if t < 0:
        raise UsageError(f"t must be >= 0, got {t}")
    phase = cmath.exp(0.5j * p.omega * t)
    try:
        fp = frame_params(p)
    except DegenerateFrameError:
        return UVAmplitudes(u=phase, v=0j, t=t)
    half = 0.5 * fp.omega_rabi * t
    s = math.sin(half)
    u = phase * complex(math.cos(half), math.cos(fp.theta) * s)
    v = phase * math.sin(fp.theta) * s
    return UVAmplitudes(u=u, v=v, t=t)


def exact_propagator(p: ResonanceParams, t: float) -> Propagator:
    uv = exact_uv(p, t)
    u, v = uv.u, uv.v
    mat = np.array([[u, v], [-v.conjugate(), u.conjugate()]], dtype=complex)
    return Propagator(matrix=mat, t=t, method=EXACT, step_count=0)


def rotating_frame_propagator(p: ResonanceParams, t: float) -> np.ndarray:
    """exp(-i Htilde t) from the involution identity; identity when the frame is degenerate."""
    try:
        fp = frame_params(p)
    except DegenerateFrameError:
        return np.eye(2, dtype=complex)
    axis = sm.SIGMA_Z * math.cos(fp.theta) + sm.SIGMA_Y * math.sin(fp.theta)
    # Htilde = -(Omega/2) axis, so exp(-i Htilde t) = exp(-i (-Omega t / 2) axis)
    return sm.involutory_exp(axis, -0.5 * fp.omega_rabi * t)


def _midpoint_hamiltonians(h_of_t, times: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        hs = np.asarray(h_of_t(times), dtype=complex)
        if hs.ndim != 3 or hs.shape[0] != times.size:
            raise UsageError(
                f"vectorized hamiltonian must return shape (n, d, d), got {hs.shape}"
            )
        return hs
    return np.stack([np.asarray(h_of_t(float(tk)), dtype=complex) for tk in times])


def _step_unitaries(h_of_t, t0: float, t1: float, steps: int, vectorized: bool) -> np.ndarray:
    dt = (t1 - t0) / steps
    mids = t0 + (np.arange(steps) + 0.5) * dt
    hs = sm.require_hermitian(_midpoint_hamiltonians(h_of_t, mids, vectorized), stack=True, name="H(t)")
    return sm.expm_unitary(hs, np.full(steps, dt))


def stepped_propagator(
    hamiltonian_of_t: Callable,
    t: float,
    steps: int = DEFAULT_STEPS,
    *,
    vectorized: bool = False,
) -> Propagator:
    """Exponential midpoint rule: U = prod_k exp(-i H(t_k + dt/2) dt), later times on the left.

    With ``vectorized=True`` the callable is handed the whole array of midpoint
    times and must return a stack of matrices.
    """
    return stepped_trajectory(hamiltonian_of_t, [t], steps, vectorized=vectorized)[-1]


def stepped_trajectory(
    hamiltonian_of_t: Callable,
    t_points: Sequence[float],
    steps: int = DEFAULT_STEPS,
    *,
    vectorized: bool = False,
) -> list[Propagator]:
    """Integrate once through ascending checkpoints, returning U at each one.

    ``steps`` is the budget for [0, max(t_points)]; each segment between
    consecutive checkpoints gets a share proportional to its length (at least one).
    """
    if steps < 1:
        raise UsageError(f"steps must be >= 1, got {steps}")
    pts = [float(x) for x in t_points]
    if not pts:
        return []
    if any(x < 0 for x in pts) or any(b < a for a, b in zip(pts, pts[1:])):
        raise UsageError("checkpoint times must be non-negative and ascending")
    t_max = pts[-1]
    probe = np.asarray(
        hamiltonian_of_t(np.array([0.0])) if vectorized else hamiltonian_of_t(0.0)
    )
    d = probe.shape[-1]
    u = np.eye(d, dtype=complex)
    out = []
    t_prev = 0.0
    used = 0
    for tk in pts:
        seg = tk - t_prev
        n = 0
        if seg > 0:
            n = max(1, int(round(steps * seg / t_max)))
            for step in _step_unitaries(hamiltonian_of_t, t_prev, tk, n, vectorized):
                u = step @ u
        used += n
        out.append(Propagator(matrix=u.copy(), t=tk, method=STEPPED, step_count=used))
        t_prev = tk
    return out


def evolve_observable(a, u: Propagator | np.ndarray, rho0: GibbsState | np.ndarray) -> float:
    """<A>_t = tr(U^dagger A U rho)."""
    mat = u.matrix if isinstance(u, Propagator) else np.asarray(u, dtype=complex)
    rho = rho0.rho if isinstance(rho0, GibbsState) else np.asarray(rho0, dtype=complex)
    a = sm.require_hermitian(a, name="observable")
    if not (a.shape == mat.shape == rho.shape):
        raise UsageError(f"dimension mismatch: A {a.shape}, U {mat.shape}, rho {rho.shape}")
    val = np.trace(sm.adjoint(mat) @ a @ mat @ rho)
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise UsageError(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def sigma_z_t(p: ResonanceParams, f: float, t: float) -> float:
    return f * (1.0 - 2.0 * exact_uv(p, t).transition_probability)
