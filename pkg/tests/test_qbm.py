import numpy as np
import pytest
from scipy.integrate import solve_ivp, trapezoid
from scipy.linalg import expm

from decorec.lindblad import generator, evolve_superoperator, lindblad_rhs
from decorec.qbm import (
    OscillatorBath,
    QBMParams,
    UniformGrid,
    oscillator_records,
    oscillator_state,
    qbm_generator,
    qbm_lindblad_model,
    qbm_rhs,
    reconstruct_trajectory,
    record_integrals,
)


def gaussian_state(grid, sigma, p0=0.0):
    x = grid.points
    psi = np.exp(-(x**2) / (4 * sigma**2) + 1j * p0 * x)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def random_density(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = A @ A.conj().T
    return rho / np.trace(rho)


def test_validation():
    with pytest.raises(ValueError, match="coarse"):
        UniformGrid(7, 1.0)
    for kw in ({"M": 0, "gamma": 1, "T": 1}, {"M": 1, "gamma": -1, "T": 1}, {"M": 1, "gamma": 1, "T": 0}):
        with pytest.raises(ValueError):
            QBMParams(**kw)
    with pytest.raises(ValueError):
        qbm_generator(QBMParams(1, 1, 1, V=np.zeros(5)), UniformGrid(8, 1.0))


@pytest.mark.parametrize("derivative", ["spectral", "central"])
def test_momentum_is_hermitian_and_differentiates(derivative):
    grid = UniformGrid(32, 2 * np.pi, derivative)
    p = grid.p()
    assert np.abs(p - p.conj().T).max() <= 1e-13
    f = np.sin(grid.points)
    tol = 1e-12 if derivative == "spectral" else 2 * grid.spacing**2
    assert np.abs(grid.derivative_matrix() @ f - np.cos(grid.points)).max() <= tol


def test_rhs_matches_superoperator():
    rng = np.random.default_rng(0)
    grid = UniformGrid(12, 6.0)
    params = QBMParams(1.3, 0.4, 2.0, V=0.2 * grid.points**2)
    rho = random_density(rng, 12)
    G = qbm_generator(params, grid)
    assert np.abs(G @ rho.reshape(-1, order="F") - qbm_rhs(params, grid, rho).reshape(-1, order="F")).max() <= 1e-10


def test_trace_preserved():
    grid = UniformGrid(16, 6.0)
    G = qbm_generator(QBMParams(1.0, 0.7, 3.0, V=0.1 * grid.points**4), grid)
    assert np.abs(np.eye(16).reshape(-1, order="F") @ G).max() <= 1e-10


def test_no_damping_is_free_von_neumann():
    grid = UniformGrid(16, 6.0)
    p = grid.p()
    H = p @ p / 2
    G = qbm_generator(QBMParams(1.0, 0.0, 5.0), grid)
    eye = np.eye(16)
    assert np.abs(G + 1j * (np.kron(eye, H) - np.kron(H.T, eye))).max() <= 1e-12
    model = qbm_lindblad_model(QBMParams(1.0, 0.0, 5.0), grid)
    assert model.L == []
    assert np.abs(generator(model) - G).max() <= 1e-12


def test_diffusion_closed_form():
    """The diffusion term on its own multiplies rho(x, y) by a Gaussian in x - y."""
    rng = np.random.default_rng(1)
    grid = UniformGrid(16, 6.0)
    params = QBMParams(1.0, 0.5, 1.5)
    x = grid.points
    eye = np.eye(16)
    comm = np.kron(eye, grid.x()) - np.kron(grid.x().T, eye)
    rho = random_density(rng, 16)
    G_diff = -2 * params.M * params.gamma * params.T * comm @ comm
    out = evolve_superoperator(rho, G_diff, 0.3)
    expected = np.exp(-2 * params.M * params.gamma * params.T * (x[:, None] - x[None, :]) ** 2 * 0.3) * rho
    assert np.abs(out - expected).max() <= 1e-12


def test_gaussian_moments_follow_moment_equations():
    M, gamma, T = 1.0, 0.5, 2.0
    grid = UniformGrid(32, 8.0)
    X, P = grid.x(), grid.p()
    rho0 = gaussian_state(grid, 0.5)
    G = qbm_generator(QBMParams(M, gamma, T), grid)

    def moments(r):
        return np.array([np.trace(m @ r).real for m in (X @ X, X @ P + P @ X, P @ P)])

    def ode(t, y):
        xx, c, pp = y
        return [c / M, 2 * pp / M - 2 * gamma * c, -4 * gamma * pp + 4 * M * gamma * T]

    sol = solve_ivp(ode, (0, 0.3), moments(rho0), rtol=1e-12, atol=1e-14, dense_output=True)
    for t in (0.1, 0.3):
        assert np.abs(moments(evolve_superoperator(rho0, G, t)) - sol.sol(t)).max() <= 1e-8


def test_lindblad_difference_is_momentum_diffusion():
    rng = np.random.default_rng(2)
    grid = UniformGrid(12, 5.0)
    params = QBMParams(1.2, 0.6, 1.7, V=0.3 * grid.points**2)
    rho = random_density(rng, 12)
    p = grid.p()
    b2 = params.gamma / (4 * params.M * params.T)
    pp = p @ p
    expected = b2 * (p @ rho @ p - 0.5 * (pp @ rho + rho @ pp))
    diff = lindblad_rhs(qbm_lindblad_model(params, grid), rho) - qbm_rhs(params, grid, rho)
    assert np.abs(diff - expected).max() <= 1e-10


def test_difference_scales_as_inverse_temperature():
    grid = UniformGrid(32, 10.0)
    norms = []
    for T in (1.0, 2.0, 4.0, 8.0):
        params = QBMParams(1.0, 0.3, T)
        G = qbm_generator(params, grid)
        norms.append((np.linalg.norm(G - generator(qbm_lindblad_model(params, grid))), np.linalg.norm(G)))
    ratios = [norms[i][0] / norms[i + 1][0] for i in range(3)]
    assert all(1.6 <= r <= 2.5 for r in ratios)
    relative = [d / g for d, g in norms]
    assert all(b < a for a, b in zip(relative, relative[1:]))


def test_lindblad_keeps_positivity_where_master_equation_fails():
    grid = UniformGrid(32, 8.0)
    params = QBMParams(1.0, 1.0, 0.05)
    rho = gaussian_state(grid, 0.4).reshape(-1, order="F")
    E_ql = expm(0.02 * qbm_generator(params, grid))
    E_lb = expm(0.02 * generator(qbm_lindblad_model(params, grid)))
    a, b = rho.copy(), rho.copy()
    worst_ql, worst_lb = 0.0, 0.0
    for _ in range(10):
        a, b = E_ql @ a, E_lb @ b
        worst_ql = min(worst_ql, np.linalg.eigvalsh(a.reshape(32, 32, order="F")).min())
        worst_lb = min(worst_lb, np.linalg.eigvalsh(b.reshape(32, 32, order="F")).min())
    assert worst_ql < -0.1
    assert worst_lb >= -1e-8


def test_records_vanish_without_coupling_signal():
    bath = OscillatorBath([1.0, 2.0], [0.7, 1.9], [0.5, 0.3], [1.0, -0.2], [0.3, 0.8])
    t = np.linspace(0, 4.0, 101)
    rec = oscillator_records(t, np.zeros_like(t), bath)
    assert np.all(rec.Xs == 0) and np.all(rec.Xc == 0)
    w, m = bath.omegas, bath.masses
    assert rec.q == pytest.approx(bath.q0 * np.cos(w * 4) + bath.p0 / (m * w) * np.sin(w * 4))
    assert rec.p == pytest.approx(-m * w * bath.q0 * np.sin(w * 4) + bath.p0 * np.cos(w * 4))


def test_resonant_records_closed_form():
    w, tau = 1.3, 7.0
    t = np.linspace(0, tau, 20001)
    Xs, Xc = record_integrals(t, np.cos(w * t), [w])
    assert Xs[0] == pytest.approx(tau / 2 * np.sin(w * tau), abs=1e-7)
    assert Xc[0] == pytest.approx(tau / 2 * np.cos(w * tau) + np.sin(w * tau) / (2 * w), abs=1e-7)


def test_oscillator_state_against_ode():
    bath = OscillatorBath([1.0, 0.5, 2.0], [0.8, 1.5, 3.1], [0.4, -0.7, 1.1], [0.2, 0.0, -0.5], [0.0, 0.6, 0.1])
    tau = 5.0
    t = np.linspace(0, tau, 40001)

    def x_of(s):
        return np.sin(0.9 * s) + 0.3 * s

    rec = oscillator_records(t, x_of(t), bath)
    for i in range(3):
        m, w, c = bath.masses[i], bath.omegas[i], bath.couplings[i]
        sol = solve_ivp(
            lambda s, y: [y[1] / m, -m * w**2 * y[0] - c * x_of(s)],
            (0, tau),
            [bath.q0[i], bath.p0[i]],
            rtol=1e-12,
            atol=1e-12,
        )
        assert rec.q[i] == pytest.approx(sol.y[0, -1], abs=1e-7)
        assert rec.p[i] == pytest.approx(sol.y[1, -1], abs=1e-7)
    q, p = oscillator_state(bath, tau, rec.Xs, rec.Xc)
    assert np.array_equal(q, rec.q) and np.array_equal(p, rec.p)


def test_records_are_linear_in_trajectory():
    rng = np.random.default_rng(3)
    t = np.linspace(0, 3.0, 301)
    om = [0.5, 1.0, 2.2]
    x1, x2 = rng.normal(size=301), rng.normal(size=301)
    a = record_integrals(t, 1.7 * x1 - 0.4 * x2, om)
    b1, b2 = record_integrals(t, x1, om), record_integrals(t, x2, om)
    for k in range(2):
        assert np.abs(a[k] - (1.7 * b1[k] - 0.4 * b2[k])).max() <= 1e-12


def test_record_input_errors():
    with pytest.raises(ValueError):
        record_integrals([0.0], [1.0], [1.0])
    with pytest.raises(ValueError):
        record_integrals([0.0, 0.1, 0.3], [1.0, 1.0, 1.0], [1.0])
    with pytest.raises(ValueError):
        OscillatorBath([1.0], [0.0], [1.0], [0.0], [0.0])


def test_trajectory_reconstruction():
    tau = 10.0
    t = np.linspace(0, tau, 2001)
    x = np.exp(-((t - 5) ** 2) / 4) * np.cos(0.8 * t) + 0.2 * np.sin(1.7 * t)
    omegas = np.linspace(0.1, 2 * np.pi, 20)
    Xs, Xc = record_integrals(t, x, omegas)
    xr = reconstruct_trajectory(t, Xs, Xc, omegas, 20)
    err = np.sqrt(trapezoid((xr - x) ** 2, t) / trapezoid(x**2, t))
    assert err <= 0.05
