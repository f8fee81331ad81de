import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphon_sips.bifurcation import primary_threshold, solve_even_branch
from graphon_sips.graphon import ErdosRenyi, SmallWorld, discretize
from graphon_sips.pde import (
    BlowUpError,
    FixedPointError,
    MeanFieldState,
    RealizabilityError,
    evolve,
    fixed_point_residual,
    free_energy,
    gibbs_map,
    rhs,
    stationary_fixed_point,
    transport_guard,
)
from graphon_sips.potential import MultichromaticPotential
from graphon_sips.spectral import numeric_spectrum
from oracles import growth_rate_fd

BETA = 200.0
KURA = MultichromaticPotential((1.0,))
BI = MultichromaticPotential((1.0, 2.0))
ER = ErdosRenyi(0.5)


def random_state(m, M, seed, amp=0.05):
    rng = np.random.default_rng(seed)
    decay = 1.0 / np.arange(1, M + 1) ** 2
    return MeanFieldState(amp * rng.standard_normal((m, M)) * decay,
                          amp * rng.standard_normal((m, M)) * decay)


def test_uniform_is_equilibrium():
    s = MeanFieldState.uniform(16, 8)
    for theta in (0.0, 0.01, 1.0):
        dA, dB = rhs(s, theta, BETA, BI, ER)
        assert np.max(np.abs(dA)) < 1e-14 and np.max(np.abs(dB)) < 1e-14


def test_theta_zero_is_heat_equation():
    s = random_state(8, 6, 0)
    dA, dB = rhs(s, 0.0, BETA, BI, ER)
    j2 = np.arange(1, 7) ** 2 / BETA
    assert np.allclose(dA, -j2 * s.A, atol=1e-16) and np.allclose(dB, -j2 * s.B, atol=1e-16)


def test_theta_zero_exact_decay():
    s = MeanFieldState.perturbed(4, 4, mode=1, eps=0.5)
    traj = evolve(s, 0.0, BETA, KURA, ER, T=20.0, dt_pde=0.1)
    assert np.allclose(traj.final.A[:, 0], 0.5 * np.exp(-20.0 / BETA), rtol=1e-13)


def test_linearised_rate_matches_fd():
    s = MeanFieldState.perturbed(8, 8, mode=2, eps=0.0)
    theta = 0.013
    fd = growth_rate_fd(lambda st: rhs(st, theta, BETA, BI, ER), s, mode=2)
    expected = 4 * (theta * 2 * 0.5 / 2 - 1 / BETA)
    assert np.allclose(fd, expected, rtol=1e-6)


@pytest.mark.parametrize("mode,theta", [(1, 0.03), (2, 0.015), (2, 0.008)])
def test_measured_growth_rate_er(mode, theta):
    s = MeanFieldState.perturbed(8, 8, mode=mode, eps=1e-8)
    traj = evolve(s, theta, BETA, BI, ER, T=20.0, dt_pde=0.01, record_every=2000)
    a_m = BI.a[mode - 1]
    pred = mode**2 * (theta * a_m * 0.5 / 2 - 1 / BETA)
    meas = np.log(traj.final.A[0, mode - 1] / 1e-8) / 20.0
    assert meas == pytest.approx(pred, rel=0.02)


def test_measured_growth_rate_sw_second_eigenfunction():
    g = SmallWorld(0.4, 0.1)
    m = 32
    spec = numeric_spectrum(discretize(g, m), k=2)
    lam, v = spec.eigenvalues[1], spec.eigenfunctions[1]
    theta = 1.5 * 2 / (BETA * 2 * lam)
    s = MeanFieldState.perturbed(m, 8, mode=2, eps=1e-9, profile=v)
    traj = evolve(s, theta, BETA, BI, g, T=20.0, dt_pde=0.01, record_every=2000)
    pred = 4 * (theta * 2 * lam / 2 - 1 / BETA)
    ratio = traj.final.A[:, 1] / (1e-9 * v)
    meas = np.log(np.median(ratio)) / 20.0
    assert meas == pytest.approx(pred, rel=0.02)


def test_mass_conservation():
    s = random_state(8, 8, 1)
    traj = evolve(s, 0.02, BETA, BI, ER, T=100.0, dt_pde=0.01, record_every=10**4)
    rho = traj.final.to_grid()
    mass = rho.mean(axis=1) * 2 * np.pi
    assert np.max(np.abs(mass - 1)) < 1e-13


def test_free_energy_examples():
    u = MeanFieldState.uniform(8, 4)
    assert free_energy(u, 0.05, BETA, BI, ER) == pytest.approx(-np.log(2 * np.pi) / BETA, rel=1e-12)
    assert free_energy(u, 0.05, BETA, BI, ER) == pytest.approx(-0.0091894, abs=1e-7)
    s = random_state(8, 4, 2)
    assert free_energy(s, 0.0, BETA, BI, ER) > -np.log(2 * np.pi) / BETA


def test_free_energy_interaction_against_quadrature():
    m, M = 6, 4
    s = random_state(m, M, 3, amp=0.2)
    theta = 0.7
    fe = free_energy(s, theta, BETA, BI, ER, parts=True)
    nu = 64
    rho = s.to_grid(nu)
    u = 2 * np.pi * np.arange(nu) / nu
    K = discretize(ER, m)
    D = BI.D(u[:, None] - u[None, :])
    du = 2 * np.pi / nu
    E = 0.0
    for i in range(m):
        for j in range(m):
            E += K[i, j] * rho[i] @ D @ rho[j] * du * du
    E *= theta / 2 / m**2
    assert fe.interaction == pytest.approx(E, rel=1e-12)
    coarse = s.to_grid()
    ref_S = np.mean([np.sum(r * np.log(r)) for r in coarse]) * 2 * np.pi / coarse.shape[1] / BETA
    assert fe.entropy == pytest.approx(ref_S, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.0, 0.04))
def test_free_energy_decays(seed, theta):
    s = random_state(6, 8, seed)
    traj = evolve(s, theta, BETA, BI, ER, T=5.0, dt_pde=0.05)
    F = traj.F
    assert np.all(F[1:] <= F[:-1] + 1e-8 * np.abs(F[:-1]))


def test_realizability_error():
    s = MeanFieldState.perturbed(2, 2, mode=1, eps=1.5)
    with pytest.raises(RealizabilityError):
        rhs(s, 0.1, BETA, KURA, ER)
    with pytest.raises(RealizabilityError):
        free_energy(s, 0.1, BETA, KURA, ER)


def test_blowup_detection():
    s = MeanFieldState.perturbed(2, 4, mode=1, eps=0.5)
    with pytest.raises((BlowUpError, RealizabilityError)):
        evolve(s, 1e6, BETA, KURA, ER, T=1.0, dt_pde=0.1)


def test_model_size_checks():
    with pytest.raises(ValueError):
        rhs(MeanFieldState.uniform(4, 1), 0.1, BETA, BI, ER)
    with pytest.raises(ValueError):
        rhs(MeanFieldState.uniform(4, 2), 0.1, BETA, BI, ER, kernel=np.eye(3))
    with pytest.raises(ValueError):
        MeanFieldState(np.zeros((2, 3)), np.zeros((2, 2)))


def test_checkpoint_roundtrip(tmp_path):
    s = random_state(5, 3, 4)
    path = tmp_path / "state.csv"
    s.to_csv(path)
    assert path.read_text().splitlines()[0] == "x_index,j,A_j,B_j"
    back = MeanFieldState.from_csv(path)
    assert np.array_equal(back.A, s.A) and np.array_equal(back.B, s.B)


def test_trajectory_csv(tmp_path):
    traj = evolve(MeanFieldState.perturbed(4, 4, 2, 0.01), 0.01, BETA, BI, ER, T=0.5, dt_pde=0.1)
    path = tmp_path / "F.csv"
    traj.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,F,S,E_int" and len(lines) == 7


def test_uniform_fixed_point():
    u = MeanFieldState.uniform(8, 8)
    out = stationary_fixed_point(0.05, BETA, BI, ER, u)
    assert np.max(np.abs(out.A)) < 1e-14 and np.max(np.abs(out.B)) < 1e-14
    assert fixed_point_residual(u, 0.05, BETA, BI, ER) < 1e-14


def test_small_theta_unique_stationary_state():
    tc = primary_threshold(BI, ER).theta_c
    for seed in range(10):
        init = random_state(8, 8, seed, amp=0.3)
        out = stationary_fixed_point(0.4 * tc, BETA, BI, ER, init)
        assert np.max(np.abs(out.A)) < 1e-10 and np.max(np.abs(out.B)) < 1e-10


def test_h_stable_unique_minimiser():
    pot = MultichromaticPotential((-1.0,))
    for seed in range(5):
        init = random_state(6, 8, seed, amp=0.3)
        out = stationary_fixed_point(0.05, BETA, pot, ER, init, damping=0.2)
        assert np.max(np.abs(out.A)) < 1e-10 and np.max(np.abs(out.B)) < 1e-10


def test_stationary_matches_even_branch():
    tc = primary_threshold(BI, ER).theta_c
    theta = 1.5 * tc
    init = MeanFieldState.perturbed(8, 16, mode=2, eps=0.05)
    st_ = stationary_fixed_point(theta, BETA, BI, ER, init, symmetry=2)
    R2 = discretize(ER, 8) / 8 @ st_.m_k(2)
    C2 = solve_even_branch(BI, ER, BETA, theta).amplitude
    assert np.max(np.abs(R2 - C2)) < 1e-6
    assert fixed_point_residual(st_, theta, BETA, BI, ER, symmetry=2) < 1e-10


@pytest.mark.slow
@pytest.mark.parametrize("ratio", [0.5, 1.5])
def test_evolve_limit_matches_fixed_point(ratio):
    tc = primary_threshold(BI, ER).theta_c
    theta = ratio * tc
    init = MeanFieldState.perturbed(4, 16, mode=2, eps=0.05)
    fp = stationary_fixed_point(theta, BETA, BI, ER, init, symmetry=2)
    traj = evolve(init, theta, BETA, BI, ER, T=4000.0, dt_pde=0.1, symmetry=2,
                  record_every=10**6)
    assert np.max(np.abs(traj.final.A - fp.A)) < 1e-6


def test_two_peak_state_above_threshold():
    tc = primary_threshold(BI, ER).theta_c
    init = MeanFieldState.perturbed(4, 16, mode=2, eps=0.01)
    traj = evolve(init, 2 * tc, BETA, BI, ER, T=600.0, dt_pde=0.05, record_every=10**6)
    A = traj.final.A
    assert np.all(np.abs(A[:, 1]) > 100 * np.abs(A[:, 0]) + 0.1)


def test_gibbs_map_normalised():
    s = random_state(4, 8, 5, amp=0.2)
    f = gibbs_map(s, 0.05, BETA, BI, ER)
    rho = f.to_grid()
    assert np.allclose(rho.mean(axis=1) * 2 * np.pi, 1.0, atol=1e-14)
    assert np.all(rho > 0)


def test_fixed_point_errors():
    with pytest.raises(ValueError):
        stationary_fixed_point(0.01, BETA, BI, ER, MeanFieldState.uniform(4, 4), damping=0.0)
    init = MeanFieldState.perturbed(4, 8, mode=2, eps=0.05)
    with pytest.raises(FixedPointError):
        stationary_fixed_point(0.02, BETA, BI, ER, init, max_iter=3)


def test_transport_guard_warns():
    s = MeanFieldState.perturbed(4, 8, mode=1, eps=0.5)
    assert transport_guard(s, 0.01, BETA, KURA, ER, 0.01) < 1
    with pytest.warns(RuntimeWarning):
        transport_guard(s, 100.0, BETA, KURA, ER, 1.0)
