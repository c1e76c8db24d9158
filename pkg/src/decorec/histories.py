"""Decoherent histories: class operators, decoherence functional, records.

History strings are tuples of per-time projector indices, enumerated in
lexicographic order. The initial state is the state at the first time t_1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .operators import ComplexOperator, _join_tags


class InvalidHistorySpec(ValueError):
    pass


def _matrix(op) -> np.ndarray:
    return np.asarray(op.matrix if isinstance(op, ComplexOperator) else op, dtype=complex)


@dataclass
class HistorySpec:
    times: list
    families: list
    H: object
    tol: float = 1e-10
    space: str | None = None

    def __post_init__(self):
        self.times = [float(t) for t in self.times]
        if not self.times or len(self.times) != len(self.families):
            raise InvalidHistorySpec("need one projector family per time")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise InvalidHistorySpec("times must be strictly increasing")
        tag = getattr(self.H, "space", None)
        for fam in self.families:
            for P in fam:
                tag = _join_tags(tag, getattr(P, "space", None))
        self.space = _join_tags(self.space, tag)
        self.H = _matrix(self.H)
        d = self.H.shape[0]
        if np.abs(self.H - self.H.conj().T).max() > self.tol:
            raise InvalidHistorySpec("Hamiltonian is not Hermitian")
        fams = []
        for i, fam in enumerate(self.families):
            mats = [_matrix(P) for P in fam]
            if not mats or any(P.shape != (d, d) for P in mats):
                raise InvalidHistorySpec(f"family {i} is empty or has the wrong shape")
            if np.abs(sum(mats) - np.eye(d)).max() > self.tol:
                raise InvalidHistorySpec(f"family {i} does not sum to the identity")
            for a, P in enumerate(mats):
                if np.abs(P - P.conj().T).max() > self.tol or np.abs(P @ P - P).max() > self.tol:
                    raise InvalidHistorySpec(f"family {i} member {a} is not an orthogonal projector")
                for b in range(a):
                    if np.abs(P @ mats[b]).max() > self.tol:
                        raise InvalidHistorySpec(f"family {i} members {b} and {a} are not orthogonal")
            fams.append(mats)
        self.families = fams
        self._steps = [expm(-1j * self.H * (b - a)) for a, b in zip(self.times, self.times[1:])]

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    def histories(self) -> list:
        return list(itertools.product(*(range(len(f)) for f in self.families)))

    def propagator(self) -> np.ndarray:
        """U(t_n, t_1)."""
        return expm(-1j * self.H * (self.times[-1] - self.times[0]))


def class_operator(spec: HistorySpec, alpha) -> ComplexOperator:
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != len(spec.families):
        raise IndexError(f"history {alpha} has {len(alpha)} entries, expected {len(spec.families)}")
    for i, (a, fam) in enumerate(zip(alpha, spec.families)):
        if not 0 <= a < len(fam):
            raise IndexError(f"projector index {a} out of range at time {i}")
    C = spec.families[0][alpha[0]]
    for step, fam, a in zip(spec._steps, spec.families[1:], alpha[1:]):
        C = fam[a] @ step @ C
    return ComplexOperator(C, spec.space)


@dataclass
class DecoherenceMatrix:
    matrix: np.ndarray
    histories: list
    spec: HistorySpec = field(repr=False)


def _density(rho, spec) -> np.ndarray:
    _join_tags(getattr(rho, "space", None), spec.space)
    m = _matrix(rho)
    if m.shape != (spec.dim, spec.dim):
        raise ValueError(f"state of shape {m.shape} does not match history space dimension {spec.dim}")
    return m


def decoherence_functional(rho, spec: HistorySpec) -> DecoherenceMatrix:
    """D(a, a') = Tr(C_a rho C_a'^dag) over all history pairs."""
    rho = _density(rho, spec)
    hs = spec.histories()
    Cs = [class_operator(spec, a).matrix for a in hs]
    n = len(hs)
    D = np.empty((n, n), dtype=complex)
    for i, Ci in enumerate(Cs):
        Cr = Ci @ rho
        for j, Cj in enumerate(Cs):
            D[i, j] = np.vdot(Cj, Cr)  # Tr(Cr Cj^dag)
    return DecoherenceMatrix(D, hs, spec)


def probabilities(D: DecoherenceMatrix):
    """Diagonal probabilities and the pairwise sum-rule residual.

    Merging histories a and a' into one coarse-grained history has
    probability p(a) + p(a') + 2 Re D(a, a'), so the residual is
    max over pairs of 2|Re D(a, a')|.
    """
    M = np.asarray(D.matrix)
    probs = {h: float(M[i, i].real) for i, h in enumerate(D.histories)}
    off = M.real - np.diag(np.diag(M.real))
    residual = 2.0 * float(np.abs(off).max(initial=0.0))
    return probs, residual


@dataclass
class RecordSet:
    projectors: dict
    null: np.ndarray
    deficiency: dict
    flagged_pairs: list
    histories: list
    skipped: list


def branch_states(psi, spec: HistorySpec) -> dict:
    psi = np.asarray(psi, dtype=complex).ravel()
    if psi.size != spec.dim:
        raise ValueError(f"state of size {psi.size} does not match history space dimension {spec.dim}")
    return {a: class_operator(spec, a).matrix @ psi for a in spec.histories()}


def construct_records(psi, spec: HistorySpec, tol: float = 1e-8, zero_norm: float = 1e-12) -> RecordSet:
    """Record projectors onto symmetrically orthogonalized branch directions.

    Branches with norm below ``zero_norm`` are skipped; pairs whose
    normalized overlap exceeds ``tol`` are reported in ``flagged_pairs``.
    """
    branches = branch_states(psi, spec)
    kept = [a for a, b in branches.items() if np.linalg.norm(b) > zero_norm]
    skipped = [a for a in branches if a not in kept]
    d = spec.dim
    if not kept:
        return RecordSet({}, np.eye(d, dtype=complex), {}, [], [], skipped)
    B = np.column_stack([branches[a] / np.linalg.norm(branches[a]) for a in kept])
    S = B.conj().T @ B
    flagged = [
        (kept[i], kept[j], float(abs(S[i, j])))
        for i in range(len(kept))
        for j in range(i + 1, len(kept))
        if abs(S[i, j]) > tol
    ]
    lam, W = np.linalg.eigh(S)
    if lam.min() <= 1e-14:
        raise ValueError("branch states are linearly dependent; records cannot separate them")
    Bt = B @ (W @ np.diag(lam**-0.5) @ W.conj().T)
    projectors, deficiency = {}, {}
    for i, a in enumerate(kept):
        v = Bt[:, i]
        R = np.outer(v, v.conj())
        projectors[a] = R
        b = branches[a]
        deficiency[a] = float(max(0.0, 1.0 - abs(np.vdot(b, R @ b)) / np.vdot(b, b).real))
    null = np.eye(d) - sum(projectors.values())
    return RecordSet(projectors, null, deficiency, flagged, kept, skipped)


def joint_probability(psi, spec: HistorySpec, records: RecordSet) -> dict:
    """p(a; b) = ||R_b C_a psi||^2, with b ranging over records plus ``None`` for the null record."""
    branches = branch_states(psi, spec)
    if any(a not in branches for a in records.projectors):
        raise ValueError("records were built for a different history spec")
    out = {}
    for a, ba in branches.items():
        for b, R in records.projectors.items():
            out[(a, b)] = float(np.linalg.norm(R @ ba) ** 2)
        out[(a, None)] = float(np.linalg.norm(records.null @ ba) ** 2)
    return out
