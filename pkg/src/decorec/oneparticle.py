"""One-particle sector: position representation, the decoherence function
F(x - y), its isotropic continuum form and localization dynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fock import FockSpace, MomentumLattice, make_fock_space, number_density
from .operators import ComplexOperator
from .scatterenv import ThermalEnvironment, decoherence_rate_c


@dataclass(frozen=True)
class PositionGrid:
    """DFT dual of a momentum lattice: x = L z / (2 n_max + 1), <x|q> = e^{-i q.x} / sqrt(M)."""

    lattice: MomentumLattice

    @property
    def points(self) -> np.ndarray:
        lat = self.lattice
        return np.array(lat.modes, dtype=float) * lat.L / lat.period

    @property
    def size(self) -> int:
        return self.lattice.n_modes

    def dft(self) -> np.ndarray:
        """W[x, q] = <x|q>; unitary."""
        Q = np.array([self.lattice.momentum(q) for q in self.lattice.modes])
        return np.exp(-1j * self.points @ Q.T) / math.sqrt(self.size)

    def to_position(self, rho_q) -> np.ndarray:
        W = self.dft()
        return W @ np.asarray(rho_q) @ W.conj().T

    def to_momentum(self, rho_x) -> np.ndarray:
        W = self.dft()
        return W.conj().T @ np.asarray(rho_x) @ W

    def displacements(self) -> np.ndarray:
        """x_i - y_j for every pair, shape (M, M, d)."""
        X = self.points
        return X[:, None, :] - X[None, :, :]


def restrict_to_one_particle(op, space: FockSpace) -> np.ndarray:
    """Block of ``op`` on single-occupation states, indexed by ``space.modes``."""
    if space.N_max < 1:
        raise ValueError("the Fock space has no one-particle sector (N_max = 0)")
    idx = [space.index[tuple(int(i == j) for j in range(space.n_modes))] for i in range(space.n_modes)]
    m = op.matrix if isinstance(op, ComplexOperator) else np.asarray(op)
    return m[np.ix_(idx, idx)]


def embed_one_particle(rho1, space: FockSpace) -> np.ndarray:
    """Inverse of :func:`restrict_to_one_particle` for states (zero elsewhere)."""
    if space.N_max < 1:
        raise ValueError("the Fock space has no one-particle sector (N_max = 0)")
    idx = [space.index[tuple(int(i == j) for j in range(space.n_modes))] for i in range(space.n_modes)]
    out = np.zeros((space.dim, space.dim), dtype=complex)
    out[np.ix_(idx, idx)] = rho1
    return out


def phase_identity_check(rho_x, lattice: MomentumLattice, k) -> float:
    """max |<x|N_k rho N_{-k}|y> - e^{ik.(x-y)} rho(x, y)| in wrap mode."""
    grid = PositionGrid(lattice)
    space = make_fock_space(lattice, 1)
    Nk = restrict_to_one_particle(number_density(space, k, wrap=True), space)
    Nmk = restrict_to_one_particle(number_density(space, tuple(-c for c in k), wrap=True), space)
    rho_x = np.asarray(rho_x)
    lhs = grid.to_position(Nk @ grid.to_momentum(rho_x) @ Nmk)
    phase = np.exp(1j * grid.displacements() @ lattice.momentum(k))
    return float(np.abs(lhs - phase * rho_x).max())


def decoherence_function_F(env: ThermalEnvironment, r) -> complex:
    """F(r) = sum_k c(k) (1 - e^{ik.r}) over all environment transfers."""
    r = np.asarray(r, dtype=float).reshape(env.lattice.dim)
    total = 0j
    for k in env.lattice.transfers():
        c = decoherence_rate_c(env, k)
        if c:
            total += c * (1 - np.exp(1j * env.lattice.momentum(k) @ r))
    return complex(total)


def F_matrix(env: ThermalEnvironment, grid: PositionGrid) -> np.ndarray:
    """F(x - y) on every pair of grid points."""
    D = grid.displacements()
    rates = [(env.lattice.momentum(k), decoherence_rate_c(env, k)) for k in env.lattice.transfers()]
    out = np.zeros(D.shape[:2], dtype=complex)
    for kv, c in rates:
        if c:
            out += c * (1 - np.exp(1j * D @ kv))
    return out


@dataclass
class IsotropicF:
    value: float
    change: float
    converged: bool
    orders: tuple


def _isotropic_terms(amplitude, occupation, m, q_max, n_q, n_mu):
    """Nodes and weights of (4 pi^2/m^2) int dq q^3 n(n+1) 8 pi^2 int dcos |f(Q)|^2 [.]."""
    xq, wq = np.polynomial.legendre.leggauss(n_q)
    q = 0.5 * q_max * (xq + 1)
    wq = 0.5 * q_max * wq
    mu, wmu = np.polynomial.legendre.leggauss(n_mu)
    Q = q[:, None] * np.sqrt(2 * (1 - mu[None, :]))
    n = np.array([occupation(x) for x in q])
    radial = wq * q**3 * n * (n + 1)
    f2 = np.abs(np.vectorize(amplitude)(Q)) ** 2
    W = (4 * math.pi**2 / m**2) * 8 * math.pi**2 * radial[:, None] * wmu[None, :] * f2
    return Q, W


def _isotropic_value(amplitude, occupation, m, r, q_max, n_q, n_mu, plateau=False):
    Q, W = _isotropic_terms(amplitude, occupation, m, q_max, n_q, n_mu)
    if plateau:
        return float(W.sum())
    return float(np.sum(W * (1 - np.sinc(Q * r / math.pi))))


def isotropic_F(
    amplitude: Callable,
    occupation: Callable,
    m: float,
    r: float,
    q_max: float,
    order: int = 32,
    tol: float = 1e-10,
    max_order: int = 1024,
    plateau: bool = False,
) -> IsotropicF:
    """Continuum F(|r|) for an isotropic Born amplitude f(|q - k|) on the shell |q| = |k|.

    Gauss-Legendre in q on [0, q_max] and in cos(theta); the orientation of r
    is averaged analytically (sinc). The order doubles from ``order`` until
    two successive values agree to ``tol`` (relative) or ``max_order`` is
    passed, in which case the result is marked unconverged.
    ``plateau=True`` evaluates the r-independent term (the r -> infinity limit).
    """
    if r < 0:
        raise ValueError("r is a distance")
    if order < 2:
        raise ValueError("order must be at least 2")
    prev = _isotropic_value(amplitude, occupation, m, r, q_max, order, order, plateau)
    n = order
    while True:
        n *= 2
        cur = _isotropic_value(amplitude, occupation, m, r, q_max, n, n, plateau)
        change = abs(cur - prev) / max(abs(cur), 1e-300) if cur != prev else 0.0
        if change <= tol or 2 * n > max_order:
            return IsotropicF(cur, change, change <= tol, (n // 2, n))
        prev = cur


def born_amplitude(nu: Callable, m: float) -> Callable:
    """f(Q) = (m / 2 pi) nu(Q)."""
    return lambda Q: m / (2 * math.pi) * nu(Q)


def localization_evolution(
    rho0_x,
    env: ThermalEnvironment,
    grid: PositionGrid,
    t: float,
    include_free: bool = False,
    mass: float = 1.0,
    tol: float = 1e-10,
    max_steps: int = 1 << 16,
):
    """d rho(x,y)/dt = -i <x|[H_0, rho]|y> - F(x - y) rho(x, y).

    Without H_0 the solution is the closed form e^{-F t} rho_0. With H_0 the
    free and decay factors are Strang-split; the step count doubles until
    two successive results differ by at most ``tol`` (max norm).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    rho0 = np.asarray(rho0_x, dtype=complex)
    F = F_matrix(env, grid)
    if not include_free or t == 0:
        return np.exp(-F * t) * rho0
    E = np.array([float(grid.lattice.momentum(q) @ grid.lattice.momentum(q)) / (2 * mass) for q in grid.lattice.modes])
    W = grid.dft()

    def run(n):
        dt = t / n
        half = np.exp(-F * dt / 2)
        U = W @ np.diag(np.exp(-1j * E * dt)) @ W.conj().T
        rho = rho0
        for _ in range(n):
            rho = half * rho
            rho = U @ rho @ U.conj().T
            rho = half * rho
        return rho

    n = 4
    prev = run(n)
    while n < max_steps:
        n *= 2
        cur = run(n)
        if np.abs(cur - prev).max() <= tol:
            return cur
        prev = cur
    raise ArithmeticError(f"split-step evolution did not reach tol {tol:g} within {max_steps} steps")
