"""Truncated-basis oracle tests: operator construction, evolution,
moment extraction, bracket oracle, and Hamburger reconstruction."""

import numpy as np
import pytest

from momentflow import oracle as orc
from momentflow.errors import CapacityError, ReconstructionError, StateError
from momentflow.moment_algebra import MomentIndex, check_uncertainty_order2


def G(a, n):
    return MomentIndex.single(a, n)


def _vacuum(D):
    psi = np.zeros(D, dtype=complex)
    psi[0] = 1.0
    return psi


# -- operators --------------------------------------------------------------


def test_fock_ops_basic():
    hbar, m, w = 0.8, 1.5, 2.0
    q, p = orc.fock_ops(32, m, w, hbar)
    assert np.allclose(q, q.conj().T)
    assert np.allclose(p, p.conj().T)
    vac = _vacuum(32)
    assert abs(vac @ q @ vac) < 1e-14
    assert np.isclose((vac @ q @ q @ vac).real, hbar / (2 * m * w))
    comm = q @ p - p @ q
    inner = comm[:-2, :-2]
    assert np.allclose(inner, 1j * hbar * np.eye(30), atol=1e-12)


def test_fock_ops_min_dimension():
    with pytest.raises(CapacityError):
        orc.fock_ops(4, 1.0, 1.0, 1.0)


def test_weyl_op_symmetrization(space50):
    q, p = space50.q1, space50.p1
    assert np.allclose(space50.weyl(1, 1), (q @ p + p @ q) / 2)
    assert np.allclose(space50.weyl(2, 0), q @ q)
    assert np.allclose(space50.weyl(2, 1), (q @ q @ p + q @ p @ q + p @ q @ q) / 3)


def test_weyl_cap():
    space = orc.FockSpace(20)
    with pytest.raises(CapacityError):
        space.weyl(5, 5)


# -- evolution --------------------------------------------------------------


def test_evolve_identity_and_period():
    D, hbar = 60, 1.0
    space = orc.FockSpace(D, 1.0, 1.0, hbar)
    H = space.p1 @ space.p1 / 2 + space.q1 @ space.q1 / 2
    psi0 = orc.coherent(1.2 + 0.3j, D)
    prop = orc.Propagator(H, hbar)
    assert np.allclose(prop(psi0, 0.0), psi0)
    psiT = prop(psi0, 2 * np.pi)
    assert abs(abs(np.vdot(psi0, psiT)) - 1) < 1e-10
    assert abs(np.linalg.norm(psiT) - 1) < 1e-12


def test_evolve_energy_conserved(rng):
    D = 60
    space = orc.FockSpace(D)
    H = space.p1 @ space.p1 / 2 + space.q1 @ space.q1 / 2 \
        + 0.02 * np.linalg.matrix_power(space.q1, 4)
    psi0 = orc.random_state(rng, D)
    prop = orc.Propagator(H, 1.0)
    e0 = (psi0.conj() @ H @ psi0).real
    for t in (0.7, 3.1):
        psi = prop(psi0, t)
        assert abs((psi.conj() @ H @ psi).real - e0) < 1e-10


def test_propagator_rejects_nonhermitian():
    with pytest.raises(StateError):
        orc.Propagator(np.array([[0.0, 1.0], [0.0, 0.0]]))


# -- moments ----------------------------------------------------------------


def test_moments_ground_state():
    hbar, m, w = 0.9, 1.3, 0.7
    space = orc.FockSpace(40, m, w, hbar)
    st = orc.moments_of(_vacuum(40), space, 2)
    assert np.isclose(st.G(0, 2), hbar / (2 * m * w))
    assert abs(st.G(1, 2)) < 1e-14
    assert np.isclose(st.G(2, 2), hbar * m * w / 2)


def test_moments_coherent_displaced(space50):
    psi = orc.displacement((0.8, -0.4), space50) @ _vacuum(50)
    st = orc.moments_of(psi, space50, 4)
    assert np.isclose(st.x["q"], 0.8) and np.isclose(st.x["p"], -0.4)
    vac = orc.moments_of(_vacuum(50), space50, 4)
    for n in (2, 3, 4):
        for a in range(n + 1):
            assert abs(st.G(a, n) - vac.G(a, n)) < 1e-12


def test_moments_number_state(space50):
    psi = np.zeros(50, dtype=complex)
    psi[1] = 1.0
    st = orc.moments_of(psi, space50, 2)
    # with m = w = hbar = 1 the dimensionless and dimensionful values agree
    assert np.isclose(st.G(0, 2), 1.5)


def test_moments_pass_uncertainty(rng, space50):
    for _ in range(5):
        psi = orc.random_state(rng, 50)
        st = orc.moments_of(psi, space50, 2)
        assert check_uncertainty_order2(st) >= -1e-12


def test_moments_truncation_robust(rng):
    psi_small = orc.random_state(np.random.default_rng(5), 60, support=15)
    big = np.zeros(120, dtype=complex)
    big[:60] = psi_small
    st1 = orc.moments_of(psi_small, orc.FockSpace(60), 4)
    st2 = orc.moments_of(big, orc.FockSpace(120), 4)
    for n in (2, 3, 4):
        for a in range(n + 1):
            assert abs(st1.G(a, n) - st2.G(a, n)) < 1e-9


# -- bracket oracle ---------------------------------------------------------


def test_bracket_oracle_canonical(rng, space50):
    psi = orc.random_state(rng, 50)
    st = orc.moments_of(psi, space50, 2)
    assert np.isclose(orc.bracket_oracle(G(0, 2), G(2, 2), psi, space50), 4 * st.G(1, 2))
    assert abs(orc.bracket_oracle("q", G(0, 2), psi, space50)) < 1e-12
    assert np.isclose(orc.bracket_oracle("q", "p", psi, space50), 1.0)


def test_bracket_oracle_antisymmetric(rng, space50):
    psi = orc.random_state(rng, 50)
    for i1, i2 in [(G(0, 2), G(1, 3)), (G(2, 2), G(0, 4))]:
        a = orc.bracket_oracle(i1, i2, psi, space50)
        b = orc.bracket_oracle(i2, i1, psi, space50)
        assert abs(a + b) < 1e-9


# -- state factories --------------------------------------------------------


def test_coherent_zero_is_vacuum():
    psi = orc.coherent(0.0, 30)
    assert np.isclose(abs(psi[0]), 1.0)


def test_coherent_tail_guard():
    with pytest.raises(CapacityError):
        orc.coherent(6.0, 20)


def test_squeezed_zero_is_coherent(space50):
    psi = orc.squeezed(np.zeros((2, 2)), (0.5, 0.1), space50)
    ref = orc.displacement((0.5, 0.1), space50) @ _vacuum(50)
    assert abs(abs(np.vdot(psi, ref)) - 1) < 1e-10


# -- Hamburger reconstruction ----------------------------------------------


def _gaussian_moments(order):
    # <q^l> for the ground state, m = w = hbar = 1: (l-1)!! / 2^{l/2}
    a = []
    for l in range(order + 1):
        if l % 2:
            a.append(0.0)
        else:
            k = l // 2
            a.append(float(np.prod(np.arange(1, l, 2))) / 2**k if l else 1.0)
    return a


def test_hamburger_density_ground_state():
    order = 12
    dens = orc.hamburger_density(_gaussian_moments(order), order)
    qs = np.linspace(-3, 3, 61)
    assert np.max(np.abs(dens(qs) - np.exp(-qs**2) / np.sqrt(np.pi))) < 1e-6


def test_hamburger_density_needs_enough_moments():
    with pytest.raises(ReconstructionError):
        orc.hamburger_density([1.0, 0.0], 4)


def test_hamburger_phase_real_wave_function():
    order = 8
    a = _gaussian_moments(order)
    dens = orc.hamburger_density(a, order)
    # real Psi: b_n = <q^n p> = i (n/2) a_{n-1} exactly, so m_n = 0
    b = [0.5j * n * (a[n - 1] if n else 0.0) for n in range(order + 1)]
    grad = orc.hamburger_phase(b, a, dens, order)
    qs = np.linspace(-1.5, 1.5, 21)
    assert np.max(np.abs(grad(qs))) < 1e-10


def test_hamburger_phase_plane_wave():
    order, p0, hbar = 8, 0.7, 1.0
    a = _gaussian_moments(order)
    dens = orc.hamburger_density(a, order)
    # e^{i p0 q / hbar} factor shifts <q^n p> by p0 <q^n>
    b = [p0 * a[n] + 0.5j * hbar * n * (a[n - 1] if n else 0.0) for n in range(order + 1)]
    grad = orc.hamburger_phase(b, a, dens, order, hbar)
    qs = np.linspace(-1.2, 1.2, 13)
    assert np.max(np.abs(grad(qs) - p0 / hbar)) < 1e-6


def test_hamburger_phase_rejects_inconsistent():
    order = 4
    a = _gaussian_moments(order)
    dens = orc.hamburger_density(a, order)
    b = [1.0j] * (order + 1)  # wildly complex where it must be real
    with pytest.raises(ReconstructionError):
        orc.hamburger_phase(b, a, dens, order)


# -- characteristic-function provider ---------------------------------------


def test_oracle_dprovider_matches_gaussian(space50):
    from momentflow.moment_algebra import GaussianDProvider

    psi = _vacuum(50)
    oprov = orc.OracleDProvider(psi, space50)
    st = orc.moments_of(psi, space50, 2)
    cov = np.array([[st.G(0, 2), st.G(1, 2)], [st.G(1, 2), st.G(2, 2)]])
    gprov = GaussianDProvider(cov, 1.0)
    for alpha in ([0.3, 0.1], [-0.2, 0.4]):
        assert np.isclose(oprov.D(np.array(alpha)), gprov.D(np.array(alpha)), atol=1e-10)
