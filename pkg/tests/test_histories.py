import itertools

import numpy as np
import pytest
from scipy.linalg import expm

from decorec.histories import (
    DecoherenceMatrix,
    HistorySpec,
    InvalidHistorySpec,
    class_operator,
    construct_records,
    decoherence_functional,
    joint_probability,
    probabilities,
)
from decorec.operators import DensityMatrix

SX = np.array([[0, 1], [1, 0]], dtype=complex)
P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def qubit_spec(times=(0.0, 0.4), H=0.8 * SX):
    return HistorySpec(list(times), [[P0, P1]] * len(times), H)


def test_spec_validation():
    with pytest.raises(InvalidHistorySpec, match="identity"):
        HistorySpec([0.0], [[P0]], np.zeros((2, 2)))
    with pytest.raises(InvalidHistorySpec, match="increasing"):
        HistorySpec([1.0, 0.5], [[P0, P1]] * 2, np.zeros((2, 2)))
    plus = 0.5 * np.ones((2, 2))
    with pytest.raises(InvalidHistorySpec, match="orthogonal"):
        HistorySpec([0.0], [[P0, plus, P1 - plus]], np.zeros((2, 2)))


def test_single_time_class_operator():
    spec = HistorySpec([0.0], [[P0, P1]], SX)
    assert np.array_equal(class_operator(spec, (0,)).matrix, P0)


def test_zero_hamiltonian_two_times():
    spec = qubit_spec(H=np.zeros((2, 2)))
    assert np.allclose(class_operator(spec, (0, 0)).matrix, P0)
    assert np.allclose(class_operator(spec, (0, 1)).matrix, 0)


def test_class_operator_matches_direct_product():
    H = 0.8 * SX
    spec = HistorySpec([0.0, 0.4, 1.1], [[P0, P1]] * 3, H)
    for a in spec.histories():
        P = [P0, P1]
        direct = P[a[2]] @ expm(-1j * H * 0.7) @ P[a[1]] @ expm(-1j * H * 0.4) @ P[a[0]]
        assert np.abs(class_operator(spec, a).matrix - direct).max() <= 1e-14


def test_class_operators_sum_to_propagator():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    H = A + A.conj().T
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    fam2 = [np.outer(Q[:, i], Q[:, i].conj()) for i in range(3)]
    fam1 = [np.diag([1, 1, 0]).astype(complex), np.diag([0, 0, 1]).astype(complex)]
    spec = HistorySpec([0.0, 0.3, 0.9], [fam1, fam2, fam1], H)
    total = sum(class_operator(spec, a).matrix for a in spec.histories())
    assert np.abs(total - spec.propagator()).max() <= 1e-10


def test_class_operator_index_errors():
    spec = qubit_spec()
    with pytest.raises(IndexError):
        class_operator(spec, (0, 2))
    with pytest.raises(IndexError):
        class_operator(spec, (0,))


def test_decoherence_functional_brute_force():
    spec = HistorySpec([0.0, 0.5], [[P0, P1], [0.5 * (np.eye(2) + SX), 0.5 * (np.eye(2) - SX)]], 0.3 * SX + 0.2 * P0)
    rho = DensityMatrix(np.array([[0.7, 0.2 + 0.1j], [0.2 - 0.1j, 0.3]]))
    D = decoherence_functional(rho, spec)
    for (i, a), (j, b) in itertools.product(enumerate(spec.histories()), repeat=2):
        Ca, Cb = class_operator(spec, a).matrix, class_operator(spec, b).matrix
        assert D.matrix[i, j] == pytest.approx(np.trace(Ca @ rho.matrix @ Cb.conj().T), abs=1e-14)
    M = D.matrix
    assert np.abs(M - M.conj().T).max() <= 1e-14
    assert np.all(np.diag(M).real >= 0)
    assert abs(np.trace(M) - 1) <= 1e-10
    assert np.abs(M - np.diag(np.diag(M))).max() > 1e-3


def test_single_time_decoherent_for_diagonal_state():
    spec = HistorySpec([0.0], [[P0, P1]], SX)
    D = decoherence_functional(np.diag([0.25, 0.75]), spec)
    probs, residual = probabilities(D)
    assert residual == 0
    assert probs == {(0,): 0.25, (1,): 0.75}


def test_repeated_projections_decohere():
    spec = qubit_spec(H=np.zeros((2, 2)))
    rho = np.array([[0.5, 0.5], [0.5, 0.5]])
    M = decoherence_functional(rho, spec).matrix
    assert np.abs(M - np.diag(np.diag(M))).max() <= 1e-15


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        decoherence_functional(np.eye(3) / 3, qubit_spec())


def test_residual_single_pair():
    M = np.diag([0.5, 0.3, 0.2]).astype(complex)
    M[0, 2] = M[2, 0] = 0.04
    _, r = probabilities(DecoherenceMatrix(M, [(0,), (1,), (2,)], None))
    assert r == pytest.approx(0.08)


def test_residual_against_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(10):
        A = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        M = A @ A.conj().T
        M /= np.trace(M).real
        hs = [(i,) for i in range(5)]
        _, r = probabilities(DecoherenceMatrix(M, hs, None))
        p = np.diag(M).real
        brute = max(
            abs(M[[i, j]][:, [i, j]].sum().real - p[i] - p[j]) for i, j in itertools.combinations(range(5), 2)
        )
        assert r == pytest.approx(brute, abs=1e-15)


def decoherent_system():
    """Qubit whose computational basis is copied into an ancilla by a CNOT."""
    H = 0.5 * np.pi * np.kron(P1, np.eye(2) - SX)
    fam = [np.kron(P0, np.eye(2)), np.kron(P1, np.eye(2))]
    spec = HistorySpec([0.0, 1.0], [fam, [np.eye(4)]], H)
    psi = np.kron([np.sqrt(0.3), np.sqrt(0.7)], [1.0, 0.0]).astype(complex)
    return spec, psi


def test_records_exact_branches():
    spec, psi = decoherent_system()
    rec = construct_records(psi, spec)
    assert all(v <= 1e-12 for v in rec.deficiency.values())
    assert not rec.flagged_pairs
    total = sum(rec.projectors.values()) + rec.null
    assert np.abs(total - np.eye(4)).max() <= 1e-10
    Rs = list(rec.projectors.values()) + [rec.null]
    for i, j in itertools.combinations(range(len(Rs)), 2):
        assert np.abs(Rs[i] @ Rs[j]).max() <= 1e-10
    U = spec.propagator()
    rho_final = U @ np.outer(psi, psi.conj()) @ U.conj().T
    probs, _ = probabilities(decoherence_functional(np.outer(psi, psi.conj()), spec))
    for a, R in rec.projectors.items():
        assert np.trace(R @ rho_final).real == pytest.approx(probs[a], abs=1e-10)


def test_joint_probability_exact_case():
    spec, psi = decoherent_system()
    rec = construct_records(psi, spec)
    joint = joint_probability(psi, spec, rec)
    probs, _ = probabilities(decoherence_functional(np.outer(psi, psi.conj()), spec))
    for (a, b), p in joint.items():
        assert p == pytest.approx(probs[a] if a == b else 0.0, abs=1e-10)
    for a in spec.histories():
        assert sum(p for (x, _), p in joint.items() if x == a) == pytest.approx(probs[a], abs=1e-10)
    for b in rec.projectors:
        assert sum(p for (_, y), p in joint.items() if y == b) == pytest.approx(probs[b], abs=1e-10)


def test_single_history_record():
    H = 0.6 * SX
    spec = HistorySpec([0.0, 0.7], [[np.eye(2)], [np.eye(2)]], H)
    psi = np.array([1.0, 0.0], dtype=complex)
    rec = construct_records(psi, spec)
    evolved = expm(-1j * H * 0.7) @ psi
    assert np.allclose(rec.projectors[(0, 0)], np.outer(evolved, evolved.conj()))
    assert joint_probability(psi, spec, rec)[((0, 0), (0, 0))] == pytest.approx(1.0)


def tilted_spec(eps):
    """H = 0; the final projector mixes e0 into the range holding the a=1 branch by eps."""
    e = np.eye(4, dtype=complex)
    w = (e[0] + eps * e[1]) / np.sqrt(1 + eps**2)
    Q = np.outer(w, w) + np.outer(e[2], e[2])
    first = [np.outer(e[0], e[0]), np.eye(4) - np.outer(e[0], e[0])]
    spec = HistorySpec([0.0, 1.0], [first, [Q, np.eye(4) - Q]], np.zeros((4, 4)))
    psi = np.array([0.6, 0.4, 0.5, np.sqrt(1 - 0.77)], dtype=complex)
    return spec, psi


def test_deficiency_quadratic_in_overlap():
    defs = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        spec, psi = tilted_spec(eps)
        rec = construct_records(psi, spec, tol=1e-8)
        assert ((0, 0), (1, 0)) == rec.flagged_pairs[0][:2]
        defs.append(rec.deficiency[(0, 0)])
        joint = joint_probability(psi, spec, rec)
        branches = {a: class_operator(spec, a).matrix @ psi for a in spec.histories()}
        for a, d in rec.deficiency.items():
            off = sum(p for (x, y), p in joint.items() if x == a and y != a)
            assert off == pytest.approx(d * np.linalg.norm(branches[a]) ** 2, rel=1e-9, abs=1e-15)
    assert defs[0] / defs[1] == pytest.approx(4, rel=0.05)
    assert defs[1] / defs[2] == pytest.approx(4, rel=0.05)


def test_zero_norm_branches_skipped():
    spec = qubit_spec(H=np.zeros((2, 2)))
    rec = construct_records(np.array([1.0, 0.0]), spec)
    assert set(rec.skipped) == {(0, 1), (1, 0), (1, 1)}
    assert rec.histories == [(0, 0)]


def test_records_imply_decoherence():
    rng = np.random.default_rng(11)
    for _ in range(5):
        Q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
        fam = [np.outer(Q[:, i], Q[:, i].conj()) for i in range(4)]
        A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        spec = HistorySpec([0.0, 0.8], [fam, [np.eye(4)]], A + A.conj().T)
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        rec = construct_records(psi, spec)
        assert max(rec.deficiency.values()) <= 1e-12
        M = decoherence_functional(np.outer(psi, psi.conj()), spec).matrix
        assert np.abs(M - np.diag(np.diag(M))).max() <= 1e-10
