import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from tpmwb import smallmat as sm
from tpmwb.errors import InconsistentMeasurementError, SingularInputError, UsageError
from tpmwb.propagator import evolve_observable, exact_uv
from tpmwb.spinsys import ResonanceParams, frame_params
from tpmwb.tpm import (
    TPMSetup,
    WorkDistribution,
    char_fn_general,
    char_fn_spin,
    distribution_from_magnetization,
    jarzynski_check,
    mean_work_curve,
    mean_work_spin,
    moments,
    random_setup,
    spin_setup,
    spin_weights,
    transition_probability_from_magnetization,
    variance_work_spin,
    violation_probability,
    work_distribution_general,
    work_distribution_spin,
)

from conftest import FIG2_ATOMS, atoms_close, random_hermitian, random_unitary


def enumerate_oracle(h_i, h_f, u, beta):
    """Double loop over (n, m) with LAPACK eigenpairs; returns a sorted atom list."""
    e_i, v_i = np.linalg.eigh(h_i)
    e_f, v_f = np.linalg.eigh(h_f)
    pops = np.exp(-beta * (e_i - e_i.min()))
    pops /= pops.sum()
    out = {}
    for n in range(len(e_i)):
        for m in range(len(e_f)):
            p = pops[n] * abs(v_f[:, m].conj() @ u @ v_i[:, n]) ** 2
            w = round(e_f[m] - e_i[n], 9)
            out[w] = out.get(w, 0.0) + p
    return sorted(out.items())


def partition(h, beta):
    return np.trace(scipy.linalg.expm(-beta * h)).real


def test_general_matches_enumeration_oracle(rng):
    h_i, h_f = random_hermitian(rng, 3), random_hermitian(rng, 3)
    u = random_unitary(rng, 3)
    d = work_distribution_general(TPMSetup.build(h_i, h_f, u, 0.7))
    expected = enumerate_oracle(h_i, h_f, u, 0.7)
    assert len(d.values) == len(expected) == 9
    for (w, p), (we, pe) in zip(d.atoms, expected):
        assert abs(w - we) <= 1e-9
        assert abs(p - pe) <= 1e-12


def test_trivial_protocol_single_atom(rng):
    h = random_hermitian(rng, 4)
    d = work_distribution_general(TPMSetup.build(h, h, np.eye(4), 1.3))
    assert d.values.size == 1 and d.values[0] == 0.0
    assert d.probs[0] == pytest.approx(1.0, abs=1e-12)


def test_general_rejects_non_unitary():
    s = TPMSetup.build(np.eye(2), np.eye(2), np.diag([1.0, 1.1]), 1.0)
    with pytest.raises(UsageError, match="unitary"):
        work_distribution_general(s)


def test_setup_rejects_mismatch():
    with pytest.raises(UsageError):
        TPMSetup.build(np.eye(2), np.eye(3), np.eye(2), 1.0)


def test_spin_fig2(fig2):
    p, f, t = fig2
    d = work_distribution_spin(p, f, t)
    assert np.array_equal(d.values, [-1.0, 0.0, 1.0])
    assert np.allclose(d.probs, [0.05, 0.8, 0.15], atol=1e-12, rtol=0)
    general = work_distribution_general(spin_setup(p, t))
    assert atoms_close(general, FIG2_ATOMS, 1e-12)


def test_spin_weights_at_zero_time(fig2):
    p, f, _ = fig2
    assert spin_weights(p, f, 0.0) == (1.0, 0.0, 0.0)
    d = work_distribution_spin(p, f, 0.0)
    assert d.atoms == [(0.0, 1.0)]


def test_spin_pi_pulse():
    p = ResonanceParams.from_f(1.0, 0.1, 1.0, 0.5)
    t = math.pi / p.b1
    d = work_distribution_spin(p, 0.5, t)
    assert atoms_close(d, [(-1.0, 0.25), (1.0, 0.75)], 1e-12)
    assert atoms_close(work_distribution_general(spin_setup(p, t)), [(-1.0, 0.25), (1.0, 0.75)], 1e-12)


def test_spin_rejects_bad_f(fig2):
    p, _, t = fig2
    for f in (0.0, -0.2, 1.5):
        with pytest.raises(UsageError):
            work_distribution_spin(p, f, t)


def test_char_fn_normalisation_and_partition(rng):
    for d in (2, 4, 6):
        h_i, h_f = random_hermitian(rng, d), random_hermitian(rng, d)
        s = TPMSetup.build(h_i, h_f, random_unitary(rng, d), 0.9)
        assert abs(char_fn_general(s, 0.0) - 1) <= 1e-12
        ratio = partition(h_f, 0.9) / partition(h_i, 0.9)
        assert abs(char_fn_general(s, 0.9j) - ratio) <= 1e-10 * ratio


def test_char_fn_routes_agree(rng):
    s = TPMSetup.build(random_hermitian(rng, 3), random_hermitian(rng, 3), random_unitary(rng, 3), 1.1)
    d = work_distribution_general(s)
    for r in rng.uniform(-20, 20, size=100):
        g = char_fn_general(s, r)
        assert abs(g - d.char_fn(r)) <= 1e-12
        assert abs(g) <= 1 + 1e-12


def test_char_fn_spin(fig2, rng):
    p, f, t = fig2
    s = spin_setup(p, t)
    assert char_fn_spin(p, f, t, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert abs(char_fn_spin(p, f, t, 1j * p.beta) - 1) <= 1e-12
    for r in rng.uniform(-30, 30, size=100):
        assert abs(char_fn_spin(p, f, t, r) - char_fn_general(s, r)) <= 1e-12


def test_moments_fig2(fig2):
    p, f, t = fig2
    m = moments(work_distribution_spin(p, f, t))
    assert m.mean == pytest.approx(0.1, abs=1e-12)
    assert m.variance == pytest.approx(0.19, abs=1e-12)
    assert abs(m.variance - (m.second - m.mean**2)) <= 1e-12
    assert mean_work_spin(p, f, t) == pytest.approx(0.1, abs=1e-12)
    assert variance_work_spin(p, f, t) == pytest.approx(0.19, abs=1e-12)


def test_moments_single_atom():
    m = moments(WorkDistribution.from_atoms([0.0], [1.0]), k_max=4)
    assert (m.mean, m.second, m.variance) == (0.0, 0.0, 0.0)
    assert m.raw == (0.0, 0.0, 0.0, 0.0)
    with pytest.raises(UsageError):
        moments(WorkDistribution.from_atoms([0.0], [1.0]), k_max=1)


def test_mean_matches_energy_difference(rng):
    for _ in range(10):
        s = random_setup(rng, int(rng.integers(2, 7)))
        m = moments(work_distribution_general(s))
        direct = evolve_observable(s.h_final, s.u, s.rho0.rho) - sm.trace(s.h_initial @ s.rho0.rho).real
        assert abs(m.mean - direct) <= 1e-12


def test_mean_work_curve(fig2):
    p, f, _ = fig2
    period = 2 * math.pi / frame_params(p).omega_rabi
    grid = np.linspace(0, 2 * period, 81)
    curve = mean_work_curve(p, f, grid)
    assert curve[0] == (0.0, 0.0)
    vals = np.array([w for _, w in curve])
    assert np.max(np.abs(vals[:41] - vals[40:])) <= 1e-12
    res = ResonanceParams.from_f(1.0, 0.1, 1.0, f)
    assert mean_work_spin(res, f, math.pi / res.b1) == pytest.approx(f * res.b0, abs=1e-12)
    assert max(w for _, w in mean_work_curve(res, f, np.linspace(0, 100, 2001))) <= f + 1e-12


def test_jarzynski_spin(fig2):
    p, f, t = fig2
    chk = jarzynski_check(work_distribution_spin(p, f, t), p.beta, 0.0)
    assert chk.rhs == 1.0 and chk.residual <= 1e-12


def test_jarzynski_single_atom():
    chk = jarzynski_check(WorkDistribution.from_atoms([0.3], [1.0]), 2.0, 0.3)
    assert chk.residual == 0


def test_jarzynski_random_setups(rng):
    for _ in range(30):
        s = random_setup(rng, int(rng.integers(2, 7)))
        d = work_distribution_general(s)
        df = -math.log(partition(s.h_final, s.beta) / partition(s.h_initial, s.beta)) / s.beta
        assert abs(s.delta_f() - df) <= 1e-12
        assert jarzynski_check(d, s.beta, df).residual <= 1e-10
        assert moments(d).mean >= df - 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 6))
def test_jarzynski_property(seed, d):
    s = random_setup(np.random.default_rng(seed), d)
    chk = jarzynski_check(work_distribution_general(s), s.beta, s.delta_f())
    assert chk.residual <= 1e-10 * max(1.0, chk.rhs)
    assert abs(char_fn_general(s, 1j * s.beta) - chk.rhs) <= 1e-10 * max(1.0, chk.rhs)


def test_violation_probability(fig2):
    p, f, t = fig2
    assert violation_probability(work_distribution_spin(p, f, t), 0.0) == pytest.approx(0.05, abs=1e-12)
    assert violation_probability(work_distribution_spin(p, f, 0.0), 0.0) == 0.0


@settings(max_examples=60, deadline=None)
@given(
    f=st.floats(0.01, 0.99),
    omega=st.floats(0.5, 1.5),
    t=st.floats(0, 200),
)
def test_spin_flip_asymmetry(f, omega, t):
    p = ResonanceParams.from_f(1.0, 0.1, omega, f)
    d = work_distribution_spin(p, f, t)
    assert violation_probability(d, 0.0) <= (1 - f) / 2 + 1e-15
    up, down = d.prob_at(1.0), d.prob_at(-1.0)
    if down > 1e-12:
        assert up / down == pytest.approx((1 + f) / (1 - f), rel=1e-9)
    assert moments(d).mean >= -1e-15


def test_distribution_from_magnetization(fig2):
    p, f, _ = fig2
    assert atoms_close(distribution_from_magnetization(p, f, 0.3), FIG2_ATOMS, 1e-12)
    assert distribution_from_magnetization(p, f, f).atoms == [(0.0, 1.0)]
    assert atoms_close(distribution_from_magnetization(p, f, -f), [(-1.0, 0.25), (1.0, 0.75)], 1e-12)


def test_magnetization_round_trip(fig2):
    p, f, _ = fig2
    for t in np.linspace(0, 30, 11):
        sz = f * (1 - 2 * exact_uv(p, t).transition_probability)
        assert transition_probability_from_magnetization(f, sz) == pytest.approx(
            exact_uv(p, t).transition_probability, abs=1e-12
        )


def test_magnetization_errors():
    with pytest.raises(SingularInputError):
        transition_probability_from_magnetization(0.0, 0.0)
    with pytest.raises(InconsistentMeasurementError):
        transition_probability_from_magnetization(0.5, 0.7)
    with pytest.raises(InconsistentMeasurementError):
        transition_probability_from_magnetization(0.5, -0.6)


def test_work_distribution_merge_and_validation():
    d = WorkDistribution.from_atoms([1.0, 1.0 + 1e-12, -2.0, 5.0], [0.25, 0.25, 0.5, 0.0])
    assert d.values.size == 2
    assert d.probs.tolist() == [0.5, 0.5]
    assert d.values[1] == pytest.approx(1.0 + 5e-13, abs=1e-15)
    with pytest.raises(UsageError):
        WorkDistribution.from_atoms([0.0], [-0.1])
    with pytest.raises(UsageError):
        WorkDistribution.from_atoms([0.0, 1.0], [0.0, 0.0])
    with pytest.raises(UsageError):
        WorkDistribution.from_atoms([0.0, 1.0], [1.0])
