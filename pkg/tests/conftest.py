import math

import numpy as np
import pytest

from tpmwb.spinsys import ResonanceParams, frame_params

# Fig. 2 parameters: B0 = 1, omega = 0.8, B1 = 0.1, f = 0.5, t = pi/Omega
FIG2_F = 0.5
FIG2_ATOMS = [(-1.0, 0.05), (0.0, 0.80), (1.0, 0.15)]

ACCEPTANCE_LINES = []


@pytest.fixture
def fig2():
    p = ResonanceParams.from_f(1.0, 0.1, 0.8, FIG2_F)
    return p, FIG2_F, math.pi / frame_params(p).omega_rabi


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_hermitian(rng, d, scale=1.0):
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * 0.5 * (x + x.conj().T)


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def atoms_close(dist, expected, tol):
    """Each expected atom matches to tol; any atom not listed carries at most tol."""
    claimed = np.zeros(dist.values.size, dtype=bool)
    for w, p in expected:
        hit = np.abs(dist.values - w) <= 1e-9 * max(1.0, abs(w))
        if abs(float(dist.probs[hit].sum()) - p) > tol:
            return False
        claimed |= hit
    return bool(np.all(dist.probs[~claimed] <= tol))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
