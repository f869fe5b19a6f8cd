"""Dense complex linear algebra for small Hermitian problems (d <= ~16).

Matrices are plain ``numpy`` complex128 arrays. Everything that takes a single
matrix also accepts a stack of shape ``(..., d, d)`` where noted, so that the
stepped integrator can exponentiate 10^5 midpoint Hamiltonians in one call.

The eigensolver is a cyclic complex Jacobi iteration, vectorised over the
stack axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
INVOLUTION_TOL = 1e-12
JACOBI_TOL = 1e-14

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues (ascending) and the unitary whose columns are eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def as_matrix(m, *, stack: bool = False) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim < 2 or (a.ndim > 2 and not stack) or a.shape[-1] != a.shape[-2]:
        raise UsageError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[-1] < 1:
        raise UsageError("matrix dimension must be >= 1")
    if not np.all(np.isfinite(a)):
        raise UsageError("matrix has non-finite entries")
    return a


def max_norm(m) -> float:
    a = np.asarray(m)
    return float(np.max(np.abs(a))) if a.size else 0.0


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise UsageError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return a @ b


def adjoint(m) -> np.ndarray:
    return np.conj(np.swapaxes(np.asarray(m, dtype=complex), -1, -2))


def trace(m) -> complex:
    return complex(np.trace(as_matrix(m)))


def hermitian_residual(m) -> float:
    a = np.asarray(m, dtype=complex)
    return max_norm(a - adjoint(a))


def unitary_residual(m) -> float:
    a = np.asarray(m, dtype=complex)
    d = a.shape[-1]
    return max_norm(adjoint(a) @ a - np.eye(d))


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    return hermitian_residual(m) <= tol


def is_unitary(m, tol: float = UNITARY_TOL) -> bool:
    return unitary_residual(m) <= tol


def require_hermitian(m, *, stack: bool = False, name: str = "matrix") -> np.ndarray:
    a = as_matrix(m, stack=stack)
    res = hermitian_residual(a)
    if res > HERMITIAN_TOL:
        raise UsageError(f"{name} is not Hermitian (max |M - M^dagger| = {res:.3e})")
    return a


def involutory_exp(m, alpha: float) -> np.ndarray:
    """exp(-i alpha M) for M with M^2 = I, via I cos(alpha) - i M sin(alpha)."""
    a = as_matrix(m)
    eye = np.eye(a.shape[0], dtype=complex)
    res = max_norm(a @ a - eye)
    if res > INVOLUTION_TOL:
        raise UsageError(f"matrix is not involutory: max |M^2 - I| = {res:.3e}")
    return eye * np.cos(alpha) - 1j * a * np.sin(alpha)


def _offdiag_norm(a: np.ndarray) -> np.ndarray:
    d = a.shape[-1]
    mask = ~np.eye(d, dtype=bool)
    return np.sqrt(np.sum(np.abs(a[:, mask]) ** 2, axis=-1))


def _jacobi(a: np.ndarray, tol: float, max_sweeps: int):
    """Cyclic complex Jacobi on a stack (B, d, d) of Hermitian matrices."""
    a = a.copy()
    nb, d, _ = a.shape
    v = np.broadcast_to(np.eye(d, dtype=complex), a.shape).copy()
    scale = np.sqrt(np.sum(np.abs(a) ** 2, axis=(-1, -2)))
    for _ in range(max_sweeps):
        if np.all(_offdiag_norm(a) <= tol * scale):
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[:, p, q]
                r = np.abs(apq)
                nz = r > 0.0
                r_safe = np.where(nz, r, 1.0)
                phase = np.where(nz, apq / r_safe, 1.0)
                theta = (a[:, q, q].real - a[:, p, p].real) / (2.0 * r_safe)
                t = np.copysign(1.0, theta) / (np.abs(theta) + np.hypot(1.0, theta))
                t = np.where(nz, t, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                ph = np.conj(phase)
                # A <- A J, V <- V J with J = [[c, s], [-s ph, c ph]] on (p, q)
                cp = a[:, :, p].copy()
                cq = a[:, :, q]
                a[:, :, p] = c[:, None] * cp - (s * ph)[:, None] * cq
                a[:, :, q] = s[:, None] * cp + (c * ph)[:, None] * cq
                rp = a[:, p, :].copy()
                rq = a[:, q, :]
                a[:, p, :] = c[:, None] * rp - (s * phase)[:, None] * rq
                a[:, q, :] = s[:, None] * rp + (c * phase)[:, None] * rq
                a[:, p, q] = 0.0
                a[:, q, p] = 0.0
                vp = v[:, :, p].copy()
                vq = v[:, :, q]
                v[:, :, p] = c[:, None] * vp - (s * ph)[:, None] * vq
                v[:, :, q] = s[:, None] * vp + (c * ph)[:, None] * vq
    else:
        off = _offdiag_norm(a)
        if not np.all(off <= 1e3 * tol * scale):
            raise np.linalg.LinAlgError("Jacobi iteration did not converge")
    return np.real(np.diagonal(a, axis1=-2, axis2=-1)).copy(), v


def _canonical_order(w: np.ndarray, v: np.ndarray):
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    # fix each column's phase: first non-negligible component real and >= 0
    mags = np.abs(v)
    first = np.argmax(mags > 1e-10, axis=-2)
    lead = np.take_along_axis(v, first[:, None, :], axis=-2)[:, 0, :]
    lead_abs = np.abs(lead)
    phase = np.where(lead_abs > 0, np.conj(lead) / np.where(lead_abs > 0, lead_abs, 1.0), 1.0)
    return w, v * phase[:, None, :]


def hermitian_eig(m, *, tol: float = JACOBI_TOL, max_sweeps: int = 64) -> EigenDecomposition:
    """Full eigendecomposition of a Hermitian matrix (or stack of them).

    Eigenvalues come back ascending (stable for ties); each eigenvector has its
    first non-negligible component real and non-negative, so the output is
    deterministic.
    """
    a = require_hermitian(m, stack=True)
    a = 0.5 * (a + adjoint(a))
    batch_shape = a.shape[:-2]
    d = a.shape[-1]
    flat = a.reshape(-1, d, d)
    w, v = _jacobi(flat, tol, max_sweeps)
    w, v = _canonical_order(w, v)
    return EigenDecomposition(w.reshape(batch_shape + (d,)), v.reshape(batch_shape + (d, d)))


def expm_hermitian(h, z) -> np.ndarray:
    """exp(-i z H) for Hermitian H and real or complex z.

    Complex z gives the non-unitary exponentials needed by characteristic
    functions at imaginary argument, e.g. z = -i beta yields exp(-beta H).
    """
    eig = hermitian_eig(h)
    phases = np.exp(-1j * np.asarray(z)[..., None] * eig.eigenvalues)
    v = eig.eigenvectors
    return (v * phases[..., None, :]) @ adjoint(v)


def expm_unitary(h, t) -> np.ndarray:
    """exp(-i H t) for Hermitian H and real t; accepts stacks of H with matching t."""
    t = np.asarray(t, dtype=float)
    return expm_hermitian(h, t)
