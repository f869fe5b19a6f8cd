import cmath
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from tpmwb import smallmat as sm
from tpmwb.errors import UsageError
from tpmwb.propagator import (
    EXACT,
    STEPPED,
    evolve_observable,
    exact_propagator,
    exact_uv,
    rotating_frame_propagator,
    sigma_z_t,
    stepped_propagator,
    stepped_trajectory,
)
from tpmwb.spinsys import (
    ResonanceParams,
    driven_hamiltonian,
    frame_params,
    gibbs_state,
    magnetization_f,
    rotating_hamiltonian,
    static_hamiltonian,
)

from conftest import random_hermitian

RES = ResonanceParams(b0=1.0, b1=0.1, omega=1.0, beta=1.0)


def test_uv_at_zero(fig2):
    p, _, _ = fig2
    uv = exact_uv(p, 0.0)
    assert uv.u == 1 and uv.v == 0


def test_uv_pi_pulse_at_resonance():
    uv = exact_uv(RES, math.pi / RES.b1)
    assert abs(uv.v) ** 2 == pytest.approx(1.0, abs=1e-15)
    assert abs(uv.u) ** 2 == pytest.approx(0.0, abs=1e-15)


def test_uv_fig2(fig2):
    p, _, t = fig2
    uv = exact_uv(p, t)
    assert abs(uv.v) ** 2 == pytest.approx(0.2, abs=1e-14)
    assert abs(uv.u) ** 2 == pytest.approx(0.8, abs=1e-14)


def test_uv_resonance_form():
    # at resonance u = e^{iwt/2} cos(B1 t/2), v = e^{iwt/2} sin(B1 t/2)
    for t in (0.7, 3.1, 40.0):
        uv = exact_uv(RES, t)
        ph = cmath.exp(0.5j * RES.omega * t)
        assert abs(uv.u - ph * math.cos(RES.b1 * t / 2)) <= 1e-15
        assert abs(uv.v - ph * math.sin(RES.b1 * t / 2)) <= 1e-15


def test_uv_degenerate_frame():
    p = ResonanceParams(b0=1.0, b1=0.0, omega=1.0, beta=1.0)
    uv = exact_uv(p, 2.0)
    assert uv.v == 0 and uv.u == pytest.approx(cmath.exp(1j))
    assert sm.max_norm(rotating_frame_propagator(p, 2.0) - np.eye(2)) == 0


def test_uv_negative_time():
    with pytest.raises(UsageError):
        exact_uv(RES, -1.0)


def test_exact_propagator_layout(fig2):
    p, _, t = fig2
    prop = exact_propagator(p, 0.37 * t)
    uv = exact_uv(p, 0.37 * t)
    assert prop.method == EXACT and prop.step_count == 0
    assert prop.matrix[1, 0] == -uv.v.conjugate()
    assert prop.matrix[1, 1] == uv.u.conjugate()
    assert np.array_equal(exact_propagator(p, 0.0).matrix, np.eye(2))


def test_exact_propagator_solves_schrodinger(fig2):
    # central difference of U(t) against -i H(t) U(t)
    p, _, _ = fig2
    h = 1e-5
    for t in (0.5, 7.0, 20.0):
        dudt = (exact_propagator(p, t + h).matrix - exact_propagator(p, t - h).matrix) / (2 * h)
        rhs = -1j * driven_hamiltonian(p, t) @ exact_propagator(p, t).matrix
        assert sm.max_norm(dudt - rhs) <= 1e-9


def test_rotating_frame_reconstruction(fig2):
    p, _, _ = fig2
    for t in np.linspace(0, 40, 17):
        frame = scipy.linalg.expm(0.5j * p.omega * t * sm.SIGMA_Z)
        rebuilt = frame @ sm.expm_unitary(rotating_hamiltonian(p), t)
        assert sm.max_norm(exact_propagator(p, t).matrix - rebuilt) <= 1e-10


def test_rotating_frame_composition(fig2):
    p, _, _ = fig2
    t1, t2 = 3.3, 11.9
    lhs = rotating_frame_propagator(p, t1 + t2)
    rhs = rotating_frame_propagator(p, t1) @ rotating_frame_propagator(p, t2)
    assert sm.max_norm(lhs - rhs) <= 1e-10


params_strategy = st.builds(
    ResonanceParams,
    b0=st.floats(0.2, 5.0),
    b1=st.floats(0.0, 0.019),
    omega=st.floats(-3.0, 8.0),
    beta=st.floats(0.1, 5.0),
)


@settings(max_examples=80, deadline=None)
@given(p=params_strategy, t=st.floats(0, 500))
def test_exact_unitary_and_amplitude_bound(p, t):
    uv = exact_uv(p, t)
    assert abs(abs(uv.u) ** 2 + abs(uv.v) ** 2 - 1) <= 1e-12
    assert sm.unitary_residual(exact_propagator(p, t).matrix) <= 1e-10
    try:
        sin2 = math.sin(frame_params(p).theta) ** 2
    except Exception:
        sin2 = 0.0
    assert abs(uv.v) ** 2 <= sin2 + 1e-15


def test_stepped_constant_hamiltonian(rng):
    h = random_hermitian(rng, 3)
    for steps in (1, 7, 50):
        prop = stepped_propagator(lambda t: h, 2.5, steps)
        assert prop.method == STEPPED and prop.step_count == steps
        assert sm.max_norm(prop.matrix - sm.expm_unitary(h, 2.5)) <= 1e-12


def test_stepped_zero_time_identity(fig2):
    p, _, _ = fig2
    prop = stepped_propagator(lambda ts: driven_hamiltonian(p, ts), 0.0, 100, vectorized=True)
    assert np.array_equal(prop.matrix, np.eye(2))


def test_stepped_vectorized_matches_scalar(fig2):
    p, _, t = fig2
    a = stepped_propagator(lambda s: driven_hamiltonian(p, s), t, 300)
    b = stepped_propagator(lambda s: driven_hamiltonian(p, s), t, 300, vectorized=True)
    assert sm.max_norm(a.matrix - b.matrix) <= 1e-14


def test_stepped_converges_to_exact(fig2):
    p, _, t = fig2
    prop = stepped_propagator(lambda s: driven_hamiltonian(p, s), t, 100_000, vectorized=True)
    assert sm.max_norm(prop.matrix - exact_propagator(p, t).matrix) <= 1e-8
    assert sm.unitary_residual(prop.matrix) <= 1e-8


def test_stepped_second_order(fig2):
    p, _, t = fig2
    exact = exact_propagator(p, t).matrix
    errs = [
        sm.max_norm(stepped_propagator(lambda s: driven_hamiltonian(p, s), t, n, vectorized=True).matrix - exact)
        for n in (200, 400, 800)
    ]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) <= 0.1)
    # halving dt cuts the error by about four
    assert 3.6 <= errs[0] / errs[1] <= 4.4


def test_trajectory_checkpoints(fig2):
    p, _, t = fig2
    pts = [0.0, 0.25 * t, 0.5 * t, t]
    traj = stepped_trajectory(lambda s: driven_hamiltonian(p, s), pts, 4000, vectorized=True)
    assert [q.t for q in traj] == pts
    assert [q.step_count for q in traj] == [0, 1000, 2000, 4000]
    single = stepped_propagator(lambda s: driven_hamiltonian(p, s), t, 4000, vectorized=True)
    assert sm.max_norm(traj[-1].matrix - single.matrix) <= 1e-13


def test_trajectory_rejects_bad_input(fig2):
    p, _, _ = fig2
    with pytest.raises(UsageError):
        stepped_trajectory(lambda s: driven_hamiltonian(p, s), [2.0, 1.0], 10)
    with pytest.raises(UsageError):
        stepped_propagator(lambda s: driven_hamiltonian(p, s), 1.0, 0)


def test_evolve_observable_identity(fig2):
    p, _, t = fig2
    rho = gibbs_state(static_hamiltonian(p), p.beta)
    assert evolve_observable(np.eye(2), exact_propagator(p, t), rho) == pytest.approx(1.0, abs=1e-15)


def test_evolve_observable_sigma_z(fig2):
    p, f, t = fig2
    rho = gibbs_state(static_hamiltonian(p), p.beta)
    assert evolve_observable(sm.SIGMA_Z, exact_propagator(p, t), rho) == pytest.approx(0.3, abs=1e-14)
    fp = frame_params(p)
    for s in np.linspace(0, 60, 31):
        closed = f * (math.cos(fp.theta) ** 2 + math.sin(fp.theta) ** 2 * math.cos(fp.omega_rabi * s))
        assert evolve_observable(sm.SIGMA_Z, exact_propagator(p, s), rho) == pytest.approx(closed, abs=1e-12)
        assert sigma_z_t(p, f, s) == pytest.approx(closed, abs=1e-12)


def test_evolve_observable_dim_mismatch(fig2):
    p, _, t = fig2
    rho = gibbs_state(static_hamiltonian(p), p.beta)
    with pytest.raises(UsageError):
        evolve_observable(np.eye(3), exact_propagator(p, t), rho)


def test_sigma_z_limits():
    f = magnetization_f(RES)
    assert sigma_z_t(RES, f, 0.0) == f
    assert sigma_z_t(RES, f, math.pi / RES.b1) == pytest.approx(-f, abs=1e-15)
