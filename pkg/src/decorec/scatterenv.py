"""Scattering environment: thermal rates c(k) and b(k), the resulting Lindblad
models, first-order scattering amplitudes and number-density retrodiction.

Rate normalization follows from H_int = (1/2V) sum_k nu(k) N_k n_{-k} with the
squared energy delta read as delta(0) delta and delta(0) = 1/(2 pi) per unit
time, giving

    c(k) = (pi / 2V^2) |nu(k)|^2 sum_q w(omega_q - omega_{q-k}) n_q (n_{q-k} + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fock import (
    FockSpace,
    MomentumLattice,
    TensorSpace,
    as_mode,
    free_hamiltonian,
    number_density,
    number_density_rate,
)
from .lindblad import LindbladModel, UnsupportedConfiguration, derived_rng


@dataclass(frozen=True)
class DeltaModel:
    """Regularized energy delta: ``exact`` Kronecker matching or ``gaussian`` broadening.

    ``sigma`` (gaussian only) defaults to the lattice energy spacing.
    """

    kind: str = "exact"
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in ("exact", "gaussian"):
            raise ValueError(f"unknown delta model {self.kind!r}")
        if self.kind == "exact" and self.sigma is not None:
            raise ValueError("sigma only applies to the gaussian delta model")
        if self.sigma is not None and not self.sigma > 0:
            raise ValueError("sigma must be positive")


def gaussian(x, sigma: float):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))


@dataclass
class ThermalEnvironment:
    """Ideal Bose gas in the box of ``lattice`` at inverse temperature ``beta``.

    ``nu`` maps a physical momentum transfer (numpy array) to the potential
    transform. If ``explicit`` is a FockSpace, expectation values are taken
    in the truncated Gibbs state on that space instead of from the
    infinite-reservoir occupations.
    """

    lattice: MomentumLattice
    m: float
    beta: float
    mu: float
    nu: Callable
    delta: DeltaModel = field(default_factory=DeltaModel)
    explicit: FockSpace | None = None
    hermitian_tol: float = 1e-12

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("environment mass must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.mu < self.energies().min():
            raise ValueError("chemical potential must lie below the lowest mode energy")
        for k in self.lattice.transfers():
            kv = self.lattice.momentum(k)
            a, b = complex(self.nu(kv)), complex(self.nu(-kv))
            if abs(a - b.conjugate()) > self.hermitian_tol * max(1.0, abs(a)):
                raise ValueError(f"nu(-k) != nu(k)* at k = {k}")
        if self.explicit is not None and self.explicit.lattice != self.lattice:
            raise ValueError("explicit environment space must live on the environment lattice")

    def omega(self, z) -> float:
        p = self.lattice.momentum(z)
        return float(p @ p) / (2 * self.m)

    def energies(self) -> np.ndarray:
        return np.array([self.omega(z) for z in self.lattice.modes])

    @property
    def energy_spacing(self) -> float:
        """Smallest nonzero |omega_q - omega_q'| on the lattice."""
        levels = np.unique([sum(c * c for c in z) for z in self.lattice.modes])
        gap = int(np.diff(levels).min()) if levels.size > 1 else 1
        return gap * self.lattice.spacing**2 / (2 * self.m)

    @property
    def sigma(self) -> float:
        return self.delta.sigma if self.delta.sigma is not None else self.energy_spacing

    def nu_of(self, k) -> complex:
        return complex(self.nu(self.lattice.momentum(k)))

    def delta_weight(self, q, qk) -> float:
        """w(omega_q - omega_qk) for integer modes q and qk."""
        if self.delta.kind == "exact":
            same = sum(c * c for c in q) == sum(c * c for c in qk)
            return 1.0 / self.energy_spacing if same else 0.0
        return float(gaussian(self.omega(q) - self.omega(qk), self.sigma))


def thermal_occupation(env: ThermalEnvironment, q) -> float:
    x = env.beta * (env.omega(q) - env.mu)
    if x <= 0:
        raise ValueError(f"mode {tuple(q)} has energy at or below the chemical potential")
    return 1.0 / math.expm1(x)


def _shell_pairs(env: ThermalEnvironment, k):
    """Modes q with q - k also on the lattice (hard wall)."""
    lat = env.lattice
    k = as_mode(k, lat.dim)
    out = []
    for q in lat.modes:
        qk = tuple(a - b for a, b in zip(q, k))
        if lat.contains(qk):
            out.append((q, qk))
    return out


def environment_state(env: ThermalEnvironment) -> np.ndarray:
    """Gibbs state exp(-beta (H_0 - mu N)) / Z on the explicit environment space."""
    space = env.explicit
    if space is None:
        raise UnsupportedConfiguration("no explicit environment space configured")
    E = np.real(np.diag(free_hamiltonian(space, env.m).matrix)) - env.mu * space.total_occupation
    w = np.exp(-env.beta * (E - E.min()))
    return np.diag(w / w.sum()).astype(complex)


def scattering_operator(env: ThermalEnvironment, k) -> np.ndarray:
    """B_k = sum_q sqrt(w/2pi) b^dag_q b_{q-k} on the explicit environment space.

    Each hop changes the free energy by omega_q - omega_{q-k}, so the delta
    weight is read off the energies of the two connected basis states.
    """
    space = env.explicit
    n = number_density(space, tuple(-c for c in as_mode(k, env.lattice.dim))).matrix
    E = np.real(np.diag(free_hamiltonian(space, env.m).matrix))
    if env.delta.kind == "exact":
        gap = np.abs(E[:, None] - E[None, :])
        w = np.where(gap <= 1e-9 * env.energy_spacing, 1.0 / env.energy_spacing, 0.0)
    else:
        w = gaussian(E[:, None] - E[None, :], env.sigma)
    return n * np.sqrt(w / (2 * math.pi))


def decoherence_rate_c(env: ThermalEnvironment, k) -> float:
    """Decoherence rate of the channel N_k; zero when the energy shell is empty."""
    k = as_mode(k, env.lattice.dim)
    nu2 = abs(env.nu_of(k)) ** 2
    V = env.lattice.volume
    if nu2 == 0:
        return 0.0
    if env.explicit is not None:
        B = scattering_operator(env, k)
        moment = np.trace(environment_state(env) @ B.conj().T @ B).real
        return float(math.pi**2 / V**2 * nu2 * moment)
    total = 0.0
    for q, qk in _shell_pairs(env, k):
        w = env.delta_weight(q, qk)
        if w:
            total += w * thermal_occupation(env, q) * (thermal_occupation(env, qk) + 1)
    return float(math.pi / (2 * V**2) * nu2 * total)


def _occupation_gradient(env: ThermalEnvironment, z) -> tuple[float, np.ndarray]:
    """n and dn/dq at integer mode z, using dn/domega = -beta n (n + 1)."""
    n = thermal_occupation(env, z)
    return n, -env.beta * n * (n + 1) * env.lattice.momentum(z) / env.m


def dissipation_coefficient_b(env: ThermalEnvironment, k) -> float:
    """Coefficient of the first-order (momentum-density) correction.

    Integration-by-parts form: the squared delta becomes (1/2pi) times a
    gaussian of width sigma/sqrt(2), multiplied by the q-gradient of
    n_q (n_{q-k} + 1) along k.
    """
    if env.delta.kind != "gaussian":
        raise UnsupportedConfiguration("b(k) needs the gaussian delta model (it differentiates the delta)")
    k = as_mode(k, env.lattice.dim)
    if not any(k):
        raise ValueError("b(k) is defined for k != 0")
    nu2 = abs(env.nu_of(k)) ** 2
    if nu2 == 0:
        return 0.0
    kv = env.lattice.momentum(k)
    k2 = float(kv @ kv)
    sigma2 = env.sigma / math.sqrt(2)
    total = 0.0
    for q, qk in _shell_pairs(env, k):
        n1, g1 = _occupation_gradient(env, q)
        n2, g2 = _occupation_gradient(env, qk)
        grad = g1 * (n2 + 1) + n1 * g2
        x = env.omega(q) - env.omega(qk)
        total += float(gaussian(x, sigma2)) * (2 * env.m / k2) * float(kv @ grad)
    V = env.lattice.volume
    return float(-math.pi / (4 * V**2) * nu2 * total)


def shell_resolved(env: ThermalEnvironment, k, tails: float = 3.0) -> bool:
    """True if the lattice samples the broadened shell of k finely and fully.

    The energy step between neighbouring q along k must not exceed sigma,
    and the lattice must reach ``tails`` widths past the shell on both sides.
    """
    k = as_mode(k, env.lattice.dim)
    kv = env.lattice.momentum(k)
    step = float(np.abs(kv).max()) * env.lattice.spacing / env.m
    if step > env.sigma:
        return False
    xs = [env.omega(q) - env.omega(qk) for q, qk in _shell_pairs(env, k)]
    return bool(xs) and min(xs) <= -tails * env.sigma and max(xs) >= tails * env.sigma


def _channels(system: FockSpace, env: ThermalEnvironment, wrap: bool, rate_floor: float):
    """(k, c) for every system transfer; wrapped aliases of a transfer are merged."""
    lat = system.lattice
    if lat.dim != env.lattice.dim or lat.L != env.lattice.L:
        raise ValueError("system and environment must share the box")
    rates: dict[tuple, float] = {}
    for k in env.lattice.transfers():
        if wrap:
            key = lat.wrap(k)
        elif all(abs(c) <= 2 * lat.n_max for c in k):
            key = k
        else:
            continue
        rates[key] = rates.get(key, 0.0) + decoherence_rate_c(env, k)
    top = max(rates.values(), default=0.0)
    return [(k, c) for k, c in sorted(rates.items()) if c > 0 and c > rate_floor * top]


def scattering_lindblad_model(
    system: FockSpace,
    env: ThermalEnvironment,
    mass: float = 1.0,
    include_free: bool = True,
    wrap: bool = False,
    lamb_shift: Callable | None = None,
    rate_floor: float = 1e-14,
) -> LindbladModel:
    """L_k = sqrt(c(k)) N_k; H = H_0 - sum_k d(k) N_k N_k^dag with d = ``lamb_shift`` (default 0)."""
    H = free_hamiltonian(system, mass).matrix.copy() if include_free else np.zeros((system.dim,) * 2, complex)
    Ls = []
    for k, c in _channels(system, env, wrap, rate_floor):
        Nk = number_density(system, k, wrap).matrix
        if not Nk.any():
            continue
        Ls.append(math.sqrt(c) * Nk)
        if lamb_shift is not None:
            H = H - float(lamb_shift(system.lattice.momentum(k))) * (Nk @ Nk.conj().T)
    return LindbladModel(H, Ls, system.tag)


def dissipative_lindblad_model(
    system: FockSpace,
    env: ThermalEnvironment,
    mass: float = 1.0,
    include_free: bool = True,
    wrap: bool = False,
    rate_floor: float = 1e-14,
    sign: int = -1,
) -> LindbladModel:
    """L_k = sqrt(c(k)) (N_k + sign i (beta/2) dN_k/dt).

    dN_k/dt = -(i/M) k.P_k, so the default ``sign=-1`` gives
    sqrt(c(k)) (N_k - (beta/2M) k.P_k). With that sign transitions that raise
    the system energy are favoured; ``sign=+1`` favours lowering ones and
    relaxes toward a Gibbs-like state.
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be -1 or +1")
    H = free_hamiltonian(system, mass).matrix.copy() if include_free else np.zeros((system.dim,) * 2, complex)
    Ls = []
    for k, c in _channels(system, env, wrap, rate_floor):
        Nk = number_density(system, k, wrap).matrix
        if not Nk.any():
            continue
        rate = number_density_rate(system, k, mass, wrap).matrix
        Ls.append(math.sqrt(c) * (Nk + sign * 0.5j * env.beta * rate))
    return LindbladModel(H, Ls, system.tag)


# Brute-force second-order expansion on an explicit environment


def _tensor_check(total: TensorSpace, env: ThermalEnvironment):
    if env.explicit is None or total.environment != env.explicit:
        raise ValueError("the tensor space environment must be the explicit environment space")
    if total.system.lattice.L != env.lattice.L or total.system.lattice.dim != env.lattice.dim:
        raise ValueError("system and environment must share the box")


def _transfers(total: TensorSpace):
    s, e = total.system.lattice, total.environment.lattice
    n = min(s.n_max, e.n_max)
    return [k for k in s.transfers() if all(abs(c) <= 2 * n for c in k)]


def first_order_operator(total: TensorSpace, env: ThermalEnvironment) -> np.ndarray:
    """U_1 = -(1/2V) sum_k nu(k) N_k (x) 2 pi B_k in the slow-motion limit."""
    _tensor_check(total, env)
    out = np.zeros((total.dim, total.dim), dtype=complex)
    for k in _transfers(total):
        val = env.nu_of(k)
        if val == 0:
            continue
        Nk = number_density(total.system, k).matrix
        if Nk.any():
            out += val * np.kron(Nk, 2 * math.pi * scattering_operator(env, k))
    return -out / (2 * env.lattice.volume)


def second_order_trace(total: TensorSpace, env: ThermalEnvironment, rho) -> np.ndarray:
    """Tr_E(U_1 R U_1 - U_1^2 R / 2 - R U_1^2 / 2) with R = rho (x) rho_E."""
    U1 = first_order_operator(total, env)
    R = np.kron(np.asarray(rho), environment_state(env))
    U1sq = U1 @ U1
    return total.partial_trace_environment(U1 @ R @ U1 - 0.5 * (U1sq @ R + R @ U1sq))


def lindblad_dissipator(system: FockSpace, env: ThermalEnvironment, rho, ks=None) -> np.ndarray:
    """sum_k c(k) (N_k rho N_k^dag - {N_k^dag N_k, rho}/2) over the given transfers."""
    rho = np.asarray(rho)
    ks = system.lattice.transfers() if ks is None else ks
    out = np.zeros_like(rho, dtype=complex)
    for k in ks:
        c = decoherence_rate_c(env, k)
        if c == 0:
            continue
        N = number_density(system, k).matrix
        NdN = N.conj().T @ N
        out += c * (N @ rho @ N.conj().T - 0.5 * (NdN @ rho + rho @ NdN))
    return out


def environment_mean_first_order(total: TensorSpace, env: ThermalEnvironment) -> np.ndarray:
    """Tr_E(U_1 rho_E), an operator on the system."""
    U1 = first_order_operator(total, env)
    return total.partial_trace_environment(U1 @ np.kron(np.eye(total.system.dim), environment_state(env)))


def dyson_terms(total: TensorSpace, env: ThermalEnvironment, system_mass: float, T: float, n_steps: int):
    """Discretized U_1 and U_2 of S = 1 + i U_1 - U_2 over [-T, T] in the interaction picture.

    U_1 = -sum_i H_i dt and U_2 = sum_{i>j} H_i H_j dt^2 + sum_i H_i^2 dt^2 / 2,
    the midpoint-rule time-ordered double integral.
    """
    from .fock import interaction_hamiltonian

    _tensor_check(total, env)
    H = interaction_hamiltonian(total, env.nu).matrix
    E = np.add.outer(
        np.real(np.diag(free_hamiltonian(total.system, system_mass).matrix)),
        np.real(np.diag(free_hamiltonian(total.environment, env.m).matrix)),
    ).ravel()
    dt = 2 * T / n_steps
    times = -T + dt * (np.arange(n_steps) + 0.5)
    U1 = np.zeros_like(H)
    U2 = np.zeros_like(H)
    for t in times:
        phase = np.exp(1j * E * t)
        Ht = phase[:, None] * H * phase.conj()[None, :]
        U2 += dt * dt * (Ht @ (-U1 / dt) + 0.5 * Ht @ Ht)
        U1 -= Ht * dt
    return U1, U2


# First-order amplitudes and retrodiction


def number_density_of(positions, k_phys, weights=None) -> complex:
    """N_k = sum_j w_j e^{i k.x_j} for classical positions (weights default 1)."""
    X = np.atleast_2d(np.asarray(positions, dtype=float))
    w = np.ones(len(X)) if weights is None else np.asarray(weights)
    return complex(np.sum(w * np.exp(1j * X @ np.asarray(k_phys, dtype=float))))


def first_order_amplitude(positions, env: ThermalEnvironment, k0, kf, weights=None) -> complex:
    """(i/2V) nu(k) N_k w(omega_kf - omega_k0) with k = kf - k0.

    ``weights`` lets a one-particle state enter as its position distribution.
    """
    lat = env.lattice
    k0, kf = as_mode(k0, lat.dim), as_mode(kf, lat.dim)
    if not (lat.contains(k0) and lat.contains(kf)):
        raise ValueError("incoming and outgoing momenta must be lattice modes")
    k = tuple(b - a for a, b in zip(k0, kf))
    w = env.delta_weight(kf, k0)
    if w == 0:
        return 0j
    Nk = number_density_of(positions, lat.momentum(k), weights)
    return 1j / (2 * lat.volume) * env.nu_of(k) * Nk * w


@dataclass(frozen=True)
class ScatterEvent:
    k0: tuple
    kf: tuple


def sample_scatter_events(positions, env: ThermalEnvironment, n_events: int, seed: int = 0, weights=None):
    """Draw (k0, kf) with probability proportional to n_{k0} |amplitude|^2."""
    lat = env.lattice
    pairs, probs = [], []
    for k0 in lat.modes:
        n0 = thermal_occupation(env, k0)
        for kf in lat.modes:
            a = first_order_amplitude(positions, env, k0, kf, weights)
            if a != 0:
                pairs.append((k0, kf))
                probs.append(n0 * abs(a) ** 2)
    p = np.array(probs)
    if p.sum() <= 0:
        raise ValueError("no scattering channel has nonzero probability")
    idx = derived_rng(seed, 0).choice(len(pairs), size=n_events, p=p / p.sum())
    return [ScatterEvent(*pairs[i]) for i in idx]


def shell_measure(env: ThermalEnvironment, k) -> float:
    """Expected event weight of transfer k per unit |nu(k) N_k|^2."""
    lat = env.lattice
    total = 0.0
    for k0 in lat.modes:
        kf = tuple(a + b for a, b in zip(k0, k))
        if lat.contains(kf):
            total += thermal_occupation(env, k0) * env.delta_weight(kf, k0) ** 2
    return total


def retrodict_number_density(events, env: ThermalEnvironment):
    """Estimate |N_k|^2 / |N_0|^2 from transfer counts.

    Returns {k: (estimate, standard_error, count)} for every transfer with
    positive shell measure and nonzero nu; the error propagates Poisson
    counts of bin k and of the k = 0 reference bin.
    """
    if not events:
        raise ValueError("no scattering events to retrodict from")
    dim = env.lattice.dim
    counts: dict[tuple, int] = {}
    for ev in events:
        k = tuple(b - a for a, b in zip(ev.k0, ev.kf))
        counts[k] = counts.get(k, 0) + 1
    zero = (0,) * dim
    c0 = counts.get(zero, 0)
    if c0 == 0:
        raise ValueError("no forward (k = 0) events; cannot normalize")
    ref = c0 / (abs(env.nu_of(zero)) ** 2 * shell_measure(env, zero))
    out = {}
    for k in env.lattice.transfers():
        nu2 = abs(env.nu_of(k)) ** 2
        S = shell_measure(env, k)
        if nu2 == 0 or S == 0:
            continue
        ck = counts.get(k, 0)
        r = ck / (nu2 * S) / ref
        se = r * math.sqrt(1 / ck + 1 / c0) if ck else 0.0
        out[k] = (r, se, ck)
    return out
