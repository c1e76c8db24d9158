"""Truncated bosonic Fock spaces on a finite momentum lattice.

Momenta are integer vectors ``z``; the physical momentum is ``(2*pi/L) * z``.
Units are hbar = k_B = 1.

Two closure conventions are supported for ``a^dag_q a_{q+k}`` terms:

* hard wall (default): terms whose ``q + k`` leaves the lattice are dropped;
* ``wrap=True``: ``q + k`` is reduced modulo the lattice period on every axis.

Momentum conservation of the interaction and the plain ``k . P_k`` form of the
continuity equation hold exactly with the hard wall.  The position-space phase
identity of the one-particle sector needs the wrapped convention.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .operators import ComplexOperator, dimension_cap


@dataclass(frozen=True)
class MomentumLattice:
    dim: int
    n_max: int
    L: float = 2 * np.pi

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"lattice dimension must be 1, 2 or 3, got {self.dim}")
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")
        if not self.L > 0:
            raise ValueError("box side L must be positive")

    @property
    def period(self) -> int:
        return 2 * self.n_max + 1

    @property
    def spacing(self) -> float:
        return 2 * np.pi / self.L

    @property
    def volume(self) -> float:
        return float(self.L) ** self.dim

    @cached_property
    def modes(self) -> tuple[tuple[int, ...], ...]:
        r = range(-self.n_max, self.n_max + 1)
        return tuple(itertools.product(r, repeat=self.dim))

    @property
    def n_modes(self) -> int:
        return self.period**self.dim

    def momentum(self, z) -> np.ndarray:
        return self.spacing * np.asarray(z, dtype=float)

    def contains(self, z) -> bool:
        return len(z) == self.dim and all(abs(c) <= self.n_max for c in z)

    def wrap(self, z) -> tuple[int, ...]:
        n, p = self.n_max, self.period
        return tuple(((c + n) % p) - n for c in z)

    def transfers(self, wrap: bool = False) -> tuple[tuple[int, ...], ...]:
        """Momentum transfers that can connect two lattice modes."""
        if wrap:
            return self.modes
        r = range(-2 * self.n_max, 2 * self.n_max + 1)
        return tuple(itertools.product(r, repeat=self.dim))


def as_mode(k, dim: int) -> tuple[int, ...]:
    arr = np.atleast_1d(np.asarray(k))
    if arr.shape != (dim,):
        raise ValueError(f"momentum {k!r} does not have {dim} components")
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError(f"momentum {k!r} is not a lattice vector")
    return tuple(int(c) for c in arr)


def _occupations(n_modes: int, total: int):
    """Occupation tuples with sum <= total, in lexicographic order."""
    if n_modes == 0:
        yield ()
        return
    for first in range(total + 1):
        for rest in _occupations(n_modes - 1, total - first):
            yield (first,) + rest


@dataclass(frozen=True)
class FockSpace:
    lattice: MomentumLattice
    N_max: int
    modes: tuple[tuple[int, ...], ...]
    basis: tuple[tuple[int, ...], ...] = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @cached_property
    def tag(self) -> str:
        lat = self.lattice
        tag = f"fock(d={lat.dim},n={lat.n_max},L={lat.L!r},N={self.N_max}"
        if self.modes != lat.modes:
            tag += ",modes=" + ";".join(",".join(map(str, m)) for m in self.modes)
        return tag + ")"

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {occ: i for i, occ in enumerate(self.basis)}

    @cached_property
    def mode_index(self) -> dict[tuple[int, ...], int]:
        return {m: i for i, m in enumerate(self.modes)}

    @cached_property
    def total_occupation(self) -> np.ndarray:
        return np.array([sum(occ) for occ in self.basis])

    def momenta(self) -> np.ndarray:
        """Physical momenta of the modes, shape ``(n_modes, dim)``."""
        return self.lattice.momentum(self.modes).reshape(self.n_modes, self.lattice.dim)

    def state(self, occupation) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index[tuple(occupation)]] = 1.0
        return v

    def single_particle(self, mode) -> np.ndarray:
        occ = [0] * self.n_modes
        occ[self._mode(mode)] = 1
        return self.state(occ)

    def sector(self, n: int) -> np.ndarray:
        """Basis indices with total occupation ``n``."""
        return np.flatnonzero(self.total_occupation == n)

    def _mode(self, mode) -> int:
        z = as_mode(mode, self.lattice.dim)
        try:
            return self.mode_index[z]
        except KeyError:
            raise ValueError(f"mode {z} is not in this Fock space") from None


def make_fock_space(lattice: MomentumLattice, N_max: int, modes=None, cap: int | None = None) -> FockSpace:
    """Build the truncated space with total occupation <= ``N_max``.

    ``modes`` restricts to a subset of lattice modes (lattice order is kept).
    """
    if N_max < 0:
        raise ValueError("N_max must be nonnegative")
    if modes is None:
        modes = lattice.modes
    else:
        wanted = {as_mode(m, lattice.dim) for m in modes}
        for m in wanted:
            if not lattice.contains(m):
                raise ValueError(f"mode {m} is outside the lattice")
        modes = tuple(m for m in lattice.modes if m in wanted)
    cap = dimension_cap() if cap is None else cap
    dim = math.comb(len(modes) + N_max, N_max)
    if dim > cap:
        raise ValueError(f"Fock space dimension {dim} exceeds cap {cap}")
    basis = tuple(_occupations(len(modes), N_max))
    return FockSpace(lattice, N_max, tuple(modes), basis)


def _hops(space: FockSpace, k, wrap: bool):
    """(dest, src) mode-index pairs of the terms a^dag_q a_{q+k}."""
    lat = space.lattice
    k = as_mode(k, lat.dim)
    if not wrap and any(abs(c) > 2 * lat.n_max for c in k):
        raise ValueError(f"momentum transfer {k} is not a difference of lattice modes")
    pairs = []
    for i, q in enumerate(space.modes):
        src = tuple(a + b for a, b in zip(q, k))
        if wrap:
            src = lat.wrap(src)
        j = space.mode_index.get(src)
        if j is not None:
            pairs.append((i, j))
    return pairs


def _bilinear(space: FockSpace, terms) -> np.ndarray:
    """Matrix of sum coeff * a^dag_dest a_src over ``terms = [(dest, src, coeff)]``."""
    out = np.zeros((space.dim, space.dim), dtype=complex)
    index = space.index
    for col, occ in enumerate(space.basis):
        for dest, src, coeff in terms:
            n_src = occ[src]
            if n_src == 0 or coeff == 0:
                continue
            if dest == src:
                out[col, col] += coeff * n_src
                continue
            new = list(occ)
            new[src] -= 1
            amp = math.sqrt(n_src * (new[dest] + 1))
            new[dest] += 1
            out[index[tuple(new)], col] += coeff * amp
    return out


def annihilation(space: FockSpace, mode) -> ComplexOperator:
    i = space._mode(mode)
    out = np.zeros((space.dim, space.dim), dtype=complex)
    for col, occ in enumerate(space.basis):
        n = occ[i]
        if n:
            new = list(occ)
            new[i] -= 1
            out[space.index[tuple(new)], col] = math.sqrt(n)
    return ComplexOperator(out, space.tag)


def creation(space: FockSpace, mode) -> ComplexOperator:
    """Adjoint of :func:`annihilation`; images above ``N_max`` are dropped."""
    return annihilation(space, mode).dag()


def number_density(space: FockSpace, k, wrap: bool = False) -> ComplexOperator:
    """N_k = sum_q a^dag_q a_{q+k}."""
    terms = [(i, j, 1.0) for i, j in _hops(space, k, wrap)]
    return ComplexOperator(_bilinear(space, terms), space.tag)


def number_operator(space: FockSpace) -> ComplexOperator:
    return ComplexOperator(np.diag(space.total_occupation.astype(complex)), space.tag)


def momentum_density(space: FockSpace, k, wrap: bool = False) -> list[ComplexOperator]:
    """Components of P_k = sum_q (q + k/2) a^dag_q a_{q+k}.

    The weight is the midpoint of the two modes actually connected, which is
    ``q + k/2`` unless the term was wrapped.
    """
    p = space.momenta()
    pairs = _hops(space, k, wrap)
    comps = []
    for axis in range(space.lattice.dim):
        terms = [(i, j, 0.5 * (p[i, axis] + p[j, axis])) for i, j in pairs]
        comps.append(ComplexOperator(_bilinear(space, terms), space.tag))
    return comps


def number_density_rate(space: FockSpace, k, mass: float, wrap: bool = False) -> ComplexOperator:
    """Right side of the continuity equation, -(i/M) sum_q dk.(q + dk/2) a^dag_q a_{q+k}.

    ``dk`` is the momentum actually transferred by each term; it equals ``k``
    for unwrapped terms, so with the hard wall this is ``-(i/M) k . P_k``.
    """
    if mass <= 0:
        raise ValueError("mass must be positive")
    p = space.momenta()
    terms = []
    for i, j in _hops(space, k, wrap):
        dk = p[j] - p[i]
        mid = 0.5 * (p[i] + p[j])
        terms.append((i, j, -1j * float(dk @ mid) / mass))
    return ComplexOperator(_bilinear(space, terms), space.tag)


def dot_momentum_density(space: FockSpace, k, wrap: bool = False) -> ComplexOperator:
    """k . P_k with the physical transfer vector ``k``."""
    kvec = space.lattice.momentum(as_mode(k, space.lattice.dim))
    comps = momentum_density(space, k, wrap)
    total = ComplexOperator(np.zeros((space.dim, space.dim)), space.tag)
    for c, comp in zip(kvec, comps):
        total = total + float(c) * comp
    return total


def free_hamiltonian(space: FockSpace, mass: float) -> ComplexOperator:
    """H_0 = sum_q q^2/(2 mass) a^dag_q a_q."""
    if not mass > 0:
        raise ValueError(f"mass must be positive, got {mass}")
    energies = np.sum(space.momenta() ** 2, axis=1) / (2 * mass)
    occ = np.array(space.basis, dtype=float).reshape(space.dim, space.n_modes)
    return ComplexOperator(np.diag((occ @ energies).astype(complex)), space.tag)


@dataclass(frozen=True)
class TensorSpace:
    system: FockSpace
    environment: FockSpace

    @property
    def dim(self) -> int:
        return self.system.dim * self.environment.dim

    @property
    def tag(self) -> str:
        return f"{self.system.tag}x{self.environment.tag}"

    def product(self, a, b) -> ComplexOperator:
        return ComplexOperator(np.kron(np.asarray(a), np.asarray(b)), self.tag)

    def embed_system(self, a) -> ComplexOperator:
        return self.product(a, np.eye(self.environment.dim))

    def embed_environment(self, b) -> ComplexOperator:
        return self.product(np.eye(self.system.dim), b)

    def partial_trace_environment(self, op) -> np.ndarray:
        ds, de = self.system.dim, self.environment.dim
        return np.einsum("iaja->ij", np.asarray(op).reshape(ds, de, ds, de))


def make_tensor_space(system: FockSpace, environment: FockSpace, cap: int | None = None) -> TensorSpace:
    cap = dimension_cap() if cap is None else cap
    if system.dim * environment.dim > cap:
        raise ValueError(f"tensor dimension {system.dim * environment.dim} exceeds cap {cap}")
    return TensorSpace(system, environment)


class NonHermitianInteraction(ValueError):
    pass


def interaction_hamiltonian(total: TensorSpace, nu, wrap: bool = False, tol: float = 1e-12) -> ComplexOperator:
    """H_int = (1/2V) sum_k nu(k) N_k (x) n_{-k}.

    ``nu`` maps a physical transfer vector (numpy array) to a complex number.
    """
    sys_lat, env_lat = total.system.lattice, total.environment.lattice
    if sys_lat.dim != env_lat.dim or sys_lat.L != env_lat.L:
        raise ValueError("system and environment must share the box")
    ks = sorted(set(sys_lat.transfers(wrap)) | set(env_lat.transfers(wrap)))
    out = np.zeros((total.dim, total.dim), dtype=complex)
    for k in ks:
        if not wrap and any(abs(c) > 2 * sys_lat.n_max for c in k):
            continue
        if not wrap and any(abs(c) > 2 * env_lat.n_max for c in k):
            continue
        if wrap and not (sys_lat.contains(k) and env_lat.contains(k)):
            continue
        val = complex(nu(sys_lat.momentum(k)))
        if val == 0:
            continue
        Nk = number_density(total.system, k, wrap).matrix
        nk = number_density(total.environment, tuple(-c for c in k), wrap).matrix
        if not Nk.any() or not nk.any():
            continue
        out += val * np.kron(Nk, nk)
    out /= 2 * sys_lat.volume
    asym = float(np.max(np.abs(out - out.conj().T), initial=0.0))
    if asym > tol * max(1.0, float(np.max(np.abs(out), initial=0.0))):
        raise NonHermitianInteraction(f"H_int is not Hermitian (max asymmetry {asym:.3e}); check nu(-k) = nu(k)*")
    return ComplexOperator(out, total.tag)
