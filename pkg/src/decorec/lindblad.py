"""Lindblad evolution: generator assembly, exact and adaptive propagation, and
the sliced Gaussian-integral (product formula) solution for a single channel.

Vectorization is column stacking, ``vec(A rho B) = (B^T kron A) vec(rho)``,
i.e. ``rho.reshape(-1, order="F")``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .operators import DensityMatrix, _join_tags, dimension_cap


class PositivityError(ArithmeticError):
    pass


class StepUnderflow(ArithmeticError):
    pass


class UnsupportedConfiguration(ValueError):
    pass


@dataclass
class LindbladModel:
    """Hamiltonian plus jump operators for d rho/dt = -i[H, rho] + sum_j D[L_j] rho."""

    H: np.ndarray
    L: list = field(default_factory=list)
    space: str | None = None
    herm_tol: float = 1e-12

    def __post_init__(self):
        tag = getattr(self.H, "space", None)
        for op in self.L:
            tag = _join_tags(tag, getattr(op, "space", None))
        self.space = _join_tags(self.space, tag)
        self.H = np.array(self.H, dtype=complex)
        self.L = [np.array(op, dtype=complex) for op in self.L]
        d = self.H.shape[0]
        if self.H.shape != (d, d) or any(op.shape != (d, d) for op in self.L):
            raise ValueError("all operators of a model must share one square shape")
        asym = np.abs(self.H - self.H.conj().T).max(initial=0.0)
        if asym > self.herm_tol * max(1.0, np.abs(self.H).max(initial=0.0)):
            raise ValueError(f"Hamiltonian is not Hermitian (max asymmetry {asym:.3e})")

    @property
    def dim(self) -> int:
        return self.H.shape[0]


def vec(rho) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def lindblad_rhs(model: LindbladModel, rho) -> np.ndarray:
    """Right side of the master equation by direct matrix algebra."""
    rho = np.asarray(rho)
    out = -1j * (model.H @ rho - rho @ model.H)
    for L in model.L:
        LdL = L.conj().T @ L
        out += L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def generator(model: LindbladModel, cap: int | None = None) -> np.ndarray:
    d = model.dim
    cap = dimension_cap() if cap is None else cap
    if d * d > cap:
        raise ValueError(f"superoperator dimension {d * d} exceeds cap {cap}")
    eye = np.eye(d)
    G = -1j * (np.kron(eye, model.H) - np.kron(model.H.T, eye))
    for L in model.L:
        LdL = L.conj().T @ L
        G += np.kron(L.conj(), L) - 0.5 * (np.kron(eye, LdL) + np.kron(LdL.T, eye))
    return G


def _checked(rho: np.ndarray, space, floor: float = -1e-6) -> DensityMatrix:
    out = DensityMatrix(rho, space, validate=False)
    lam = out.min_eigenvalue()
    if lam < floor:
        raise PositivityError(f"evolved state has eigenvalue {lam:.3e} below {floor:g}")
    return out


def evolve_superoperator(rho0, G, t: float) -> np.ndarray:
    """exp(t G) applied to a density matrix (any generator, Lindblad or not)."""
    rho0 = np.asarray(rho0, dtype=complex)
    if t == 0:
        return rho0.copy()
    return unvec(expm(t * np.asarray(G)) @ vec(rho0), rho0.shape[0])


def evolve_exact(rho0, model: LindbladModel, t: float) -> DensityMatrix:
    if t < 0:
        raise ValueError("t must be nonnegative")
    space = _join_tags(getattr(rho0, "space", None), model.space)
    rho = evolve_superoperator(rho0, generator(model), t)
    return _checked(rho, space)


# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class RKStats:
    accepted: int = 0
    rejected: int = 0
    max_local_error: float = 0.0


def evolve_rk(rho0, model: LindbladModel, t: float, dt_init: float = 1e-2, tol: float = 1e-10, stats: RKStats | None = None):
    """Adaptive Dormand-Prince propagation of the vectorized equation.

    Every accepted step has an embedded error estimate (max norm) <= ``tol``.
    The trace is not renormalized.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    space = _join_tags(getattr(rho0, "space", None), model.space)
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    if t == 0:
        return DensityMatrix(rho0, space, validate=False)
    G = generator(model)
    y = vec(rho0).copy()
    stats = RKStats() if stats is None else stats
    dt_min = 1e-12 * t
    h = min(dt_init, t)
    s = 0.0
    k = np.empty((7, y.size), dtype=complex)
    k[0] = G @ y
    while s < t:
        h = min(h, t - s)
        if h < dt_min and t - s > dt_min:
            raise StepUnderflow(f"step size {h:.3e} fell below {dt_min:.3e}")
        for i in range(1, 7):
            k[i] = G @ (y + h * (np.asarray(_A[i]) @ k[:i]))
        y5 = y + h * (_B5 @ k)
        err = float(np.max(np.abs(h * ((_B5 - _B4) @ k))))
        if err <= tol:
            s += h
            y = y5
            k[0] = k[6]
            stats.accepted += 1
            stats.max_local_error = max(stats.max_local_error, err)
        else:
            stats.rejected += 1
        factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * (tol / err) ** 0.2))
        h *= factor
    return DensityMatrix(unvec(y, d), space, validate=False)


def derived_rng(seed: int, *counters: int) -> np.random.Generator:
    """Independent stream for (seed, counters...) via SeedSequence entropy."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, counters)]))


@dataclass(frozen=True)
class ProductFormulaParams:
    """K slices of length t/K; each slice integrates over one complex ell.

    ``scheme="gauss-hermite"`` uses an ``n_ell`` x ``n_ell`` tensor grid,
    ``"monte-carlo"`` draws ``n_samples`` per slice from a seeded stream.
    ``swap`` exchanges the roles of the feedback and Gaussian factors in the
    symmetric split of a slice.
    """

    K: int
    scheme: str = "gauss-hermite"
    n_ell: int = 24
    n_samples: int = 1000
    seed: int = 0
    swap: bool = False

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.scheme not in ("gauss-hermite", "monte-carlo"):
            raise ValueError(f"unknown ell-integration scheme {self.scheme!r}")
        if self.scheme == "gauss-hermite" and self.n_ell < 2:
            raise ValueError("n_ell must be at least 2")
        if self.scheme == "monte-carlo" and self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")


def _slice_nodes(params: ProductFormulaParams, slice_index: int):
    """Nodes (u, v) and weights for (1/pi) int du dv exp(-u^2 - v^2) f(u, v)."""
    if params.scheme == "gauss-hermite":
        x, w = np.polynomial.hermite.hermgauss(params.n_ell)
        u, v = np.meshgrid(x, x, indexing="ij")
        ww = np.outer(w, w) / np.pi
        return u.ravel(), v.ravel(), ww.ravel()
    rng = derived_rng(params.seed, slice_index)
    uv = rng.normal(scale=np.sqrt(0.5), size=(params.n_samples, 2))
    return uv[:, 0], uv[:, 1], np.full(params.n_samples, 1.0 / params.n_samples)


def slice_kraus(model: LindbladModel, dt: float, params: ProductFormulaParams, slice_index: int = 0):
    """Operators X and weights such that one slice maps rho -> sum w X rho X^dag.

    With ell = (u + i v)/sqrt(dt) the factors of a slice are
      F = exp(dt/2 (ell* L - ell L^dag)) = exp(i sqrt(dt) (u L_I - v L_R)),
      G = exp(-dt/2 |L - ell|^2)        = e^{-(u^2+v^2)/2} exp(-dt/2 (L_R^2 + L_I^2) + sqrt(dt)(u L_R + v L_I)),
      U = exp(-i H' dt),  H' = H + (i/4)[L, L^dag],
    and the Gaussian prefactor becomes the quadrature weight. F and G are
    split symmetrically, X = F^1/2 G F^1/2 U (``swap``: G^1/2 F G^1/2 U);
    the (i/4)[L, L^dag] shift is the one that makes this symmetric slice
    trace preserving at first order. The right-hand string is X^dag.
    """
    if len(model.L) != 1:
        raise UnsupportedConfiguration(f"product formula needs exactly one Lindblad operator, got {len(model.L)}")
    L = model.L[0]
    LR = 0.5 * (L + L.conj().T)
    LI = -0.5j * (L - L.conj().T)
    Hp = model.H + 0.25j * (L @ L.conj().T - L.conj().T @ L)
    U = expm(-1j * Hp * dt)
    base = -0.5 * dt * (LR @ LR + LI @ LI)
    sq = np.sqrt(dt)
    u, v, w = _slice_nodes(params, slice_index)
    ops = []
    for ui, vi in zip(u, v):
        f_gen = 1j * sq * (ui * LI - vi * LR)
        g_gen = base + sq * (ui * LR + vi * LI)
        if params.swap:
            half = expm(0.5 * g_gen)
            X = half @ expm(f_gen) @ half
        else:
            half = expm(0.5 * f_gen)
            X = half @ expm(g_gen) @ half
        ops.append(X @ U)
    return ops, w


def product_formula_step(rho, ops, weights) -> np.ndarray:
    out = np.zeros_like(rho, dtype=complex)
    for X, w in zip(ops, weights):
        out += w * (X @ rho @ X.conj().T)
    return out


def evolve_product_formula(rho0, model: LindbladModel, t: float, params: ProductFormulaParams, history: list | None = None):
    """K-slice Gaussian-integral solution; converges to the exact evolution as K grows.

    The ell integrals of different slices are independent, so the nested
    integral is evaluated slice by slice. ``history`` (if given) receives the
    state after every slice.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    space = _join_tags(getattr(rho0, "space", None), model.space)
    rho = np.array(rho0, dtype=complex)
    dt = t / params.K
    ops = weights = None
    for m in range(params.K):
        if ops is None or params.scheme == "monte-carlo":
            ops, weights = slice_kraus(model, dt, params, m)
        rho = product_formula_step(rho, ops, weights)
        if history is not None:
            history.append(rho.copy())
    return DensityMatrix(rho, space, validate=False)
