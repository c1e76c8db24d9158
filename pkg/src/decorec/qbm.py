"""Quantum Brownian motion baseline: the high-temperature master equation on a
periodic grid, its Lindblad approximant, and oscillator-bath records."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .lindblad import LindbladModel
from .operators import dimension_cap

MIN_POINTS = 8


@dataclass(frozen=True)
class UniformGrid:
    """Periodic grid of ``n`` points x_j = -length/2 + j h with a shared derivative matrix."""

    n: int
    length: float
    derivative: str = "spectral"

    def __post_init__(self):
        if self.n < MIN_POINTS:
            raise ValueError(f"grid too coarse: {self.n} points, need at least {MIN_POINTS}")
        if not self.length > 0:
            raise ValueError("length must be positive")
        if self.derivative not in ("spectral", "central"):
            raise ValueError(f"unknown derivative {self.derivative!r}")

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def points(self) -> np.ndarray:
        return -self.length / 2 + self.spacing * np.arange(self.n)

    def derivative_matrix(self) -> np.ndarray:
        """Real antisymmetric d/dx. Spectral drops the Nyquist mode so that p stays Hermitian."""
        n, h = self.n, self.spacing
        if self.derivative == "central":
            D = np.zeros((n, n))
            idx = np.arange(n)
            D[idx, (idx + 1) % n] = 1 / (2 * h)
            D[idx, (idx - 1) % n] = -1 / (2 * h)
            return D
        k = 2 * np.pi * np.fft.fftfreq(n, d=h)
        if n % 2 == 0:
            k[n // 2] = 0.0
        F = np.fft.fft(np.eye(n), axis=0)
        return np.real(np.fft.ifft(1j * k[:, None] * F, axis=0))

    def x(self) -> np.ndarray:
        return np.diag(self.points).astype(complex)

    def p(self) -> np.ndarray:
        return -1j * self.derivative_matrix()


@dataclass(frozen=True)
class QBMParams:
    M: float
    gamma: float
    T: float
    V: np.ndarray | None = None

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("M must be positive")
        if not self.gamma >= 0:
            raise ValueError("gamma must be nonnegative")
        if not self.T > 0:
            raise ValueError("T must be positive")

    def potential(self, grid: UniformGrid) -> np.ndarray:
        if self.V is None:
            return np.zeros(grid.n)
        V = np.asarray(self.V, dtype=float)
        if V.shape != (grid.n,):
            raise ValueError(f"potential has {V.size} samples, grid has {grid.n}")
        return V


def system_hamiltonian(params: QBMParams, grid: UniformGrid) -> np.ndarray:
    p = grid.p()
    return p @ p / (2 * params.M) + np.diag(params.potential(grid))


def _check_cap(grid: UniformGrid):
    if grid.n**2 > dimension_cap():
        raise ValueError(f"superoperator dimension {grid.n ** 2} exceeds cap {dimension_cap()}")


def qbm_rhs(params: QBMParams, grid: UniformGrid, rho) -> np.ndarray:
    """-i[H, rho] - i gamma [x, {p, rho}] - 2 M gamma T [x, [x, rho]]."""
    rho = np.asarray(rho)
    H, x, p = system_hamiltonian(params, grid), grid.x(), grid.p()
    anti = p @ rho + rho @ p
    xx = x @ (x @ rho - rho @ x) - (x @ rho - rho @ x) @ x
    return (
        -1j * (H @ rho - rho @ H)
        - 1j * params.gamma * (x @ anti - anti @ x)
        - 2 * params.M * params.gamma * params.T * xx
    )


def qbm_generator(params: QBMParams, grid: UniformGrid) -> np.ndarray:
    """Superoperator of :func:`qbm_rhs` in column-stacked vec convention."""
    _check_cap(grid)
    eye = np.eye(grid.n)
    H, x, p = system_hamiltonian(params, grid), grid.x(), grid.p()

    def left(A):
        return np.kron(eye, A)

    def right(A):
        return np.kron(A.T, eye)

    comm_x = left(x) - right(x)
    return (
        -1j * (left(H) - right(H))
        - 1j * params.gamma * comm_x @ (left(p) + right(p))
        - 2 * params.M * params.gamma * params.T * comm_x @ comm_x
    )


def lindblad_coefficients(params: QBMParams) -> tuple[float, float]:
    """(a, b) in L = a x + i b p with a b = gamma and a^2 / 2 = 2 M gamma T."""
    a = math.sqrt(4 * params.M * params.gamma * params.T)
    b = math.sqrt(params.gamma / (4 * params.M * params.T))
    return a, b


def qbm_lindblad_model(params: QBMParams, grid: UniformGrid) -> LindbladModel:
    """Single-operator Lindblad approximant.

    The cross term of D[L] carries the Hamiltonian shift -(gamma/2){x, p},
    which the model Hamiltonian cancels. What is left over relative to
    :func:`qbm_generator` is the momentum diffusion b^2 D[p], of order 1/T.
    """
    _check_cap(grid)
    x, p = grid.x(), grid.p()
    H = system_hamiltonian(params, grid) + 0.5 * params.gamma * (x @ p + p @ x)
    if params.gamma == 0:
        return LindbladModel(H, [])
    a, b = lindblad_coefficients(params)
    return LindbladModel(H, [a * x + 1j * b * p], herm_tol=1e-10)


@dataclass(frozen=True)
class OscillatorBath:
    masses: np.ndarray
    omegas: np.ndarray
    couplings: np.ndarray
    q0: np.ndarray
    p0: np.ndarray

    def __post_init__(self):
        arrays = [np.atleast_1d(np.asarray(a, dtype=float)) for a in (self.masses, self.omegas, self.couplings, self.q0, self.p0)]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise ValueError("bath arrays must be one-dimensional with equal lengths")
        if np.any(arrays[0] <= 0) or np.any(arrays[1] <= 0):
            raise ValueError("oscillator masses and frequencies must be positive")
        for name, a in zip(("masses", "omegas", "couplings", "q0", "p0"), arrays):
            object.__setattr__(self, name, a)

    @classmethod
    def at_rest(cls, omegas, couplings=1.0, mass=1.0):
        omegas = np.asarray(omegas, dtype=float)
        n = omegas.size
        return cls(np.full(n, mass), omegas, np.broadcast_to(couplings, n).astype(float), np.zeros(n), np.zeros(n))


@dataclass
class OscillatorRecords:
    q: np.ndarray
    p: np.ndarray
    Xs: np.ndarray
    Xc: np.ndarray
    tau: float


def record_integrals(times, x_traj, omegas) -> tuple[np.ndarray, np.ndarray]:
    """X^s = int x(t) sin w(tau - t) dt and X^c = int x(t) cos w(tau - t) dt (trapezoid)."""
    times = np.asarray(times, dtype=float)
    x_traj = np.asarray(x_traj, dtype=float)
    if times.size < 2 or x_traj.shape != times.shape:
        raise ValueError("need at least two samples and one x value per time")
    steps = np.diff(times)
    if times[0] != 0 or np.any(steps <= 0) or np.ptp(steps) > 1e-9 * steps.mean():
        raise ValueError("times must be uniform, increasing and start at 0")
    phase = np.outer(np.asarray(omegas, dtype=float), times[-1] - times)
    return trapezoid(x_traj * np.sin(phase), times, axis=1), trapezoid(x_traj * np.cos(phase), times, axis=1)


def oscillator_state(bath: OscillatorBath, tau: float, Xs, Xc) -> tuple[np.ndarray, np.ndarray]:
    """(q(tau), p(tau)) of m q'' + m w^2 q = -c x(t) from initial data and the two records."""
    m, w, c = bath.masses, bath.omegas, bath.couplings
    cos, sin = np.cos(w * tau), np.sin(w * tau)
    q = bath.q0 * cos + bath.p0 / (m * w) * sin - c / (m * w) * np.asarray(Xs)
    p = -m * w * bath.q0 * sin + bath.p0 * cos - c * np.asarray(Xc)
    return q, p


def oscillator_records(times, x_traj, bath: OscillatorBath) -> OscillatorRecords:
    Xs, Xc = record_integrals(times, x_traj, bath.omegas)
    tau = float(np.asarray(times)[-1])
    q, p = oscillator_state(bath, tau, Xs, Xc)
    return OscillatorRecords(q, p, Xs, Xc, tau)


def legendre_basis(times, degree: int) -> np.ndarray:
    """Columns P_0..P_degree of 2 t / tau - 1; suits trajectories that are not periodic on [0, tau]."""
    times = np.asarray(times, dtype=float)
    return np.polynomial.legendre.legvander(2 * times / times[-1] - 1, degree)


def reconstruct_trajectory(times, Xs, Xc, omegas, degree: int, ridge: float = 1e-10) -> np.ndarray:
    """Ridge least-squares inversion of the records onto a polynomial basis.

    Each basis function is pushed through :func:`record_integrals`, so the
    forward map is exactly the one that produced the records.
    """
    basis = legendre_basis(times, degree)
    cols = [record_integrals(times, basis[:, j], omegas) for j in range(basis.shape[1])]
    A = np.vstack([np.stack([c[0] for c in cols], axis=1), np.stack([c[1] for c in cols], axis=1)])
    rhs = np.concatenate([np.asarray(Xs), np.asarray(Xc)])
    n = A.shape[1]
    A_reg = np.vstack([A, math.sqrt(ridge) * np.eye(n)])
    coef = np.linalg.lstsq(A_reg, np.concatenate([rhs, np.zeros(n)]), rcond=None)[0]
    return basis @ coef
