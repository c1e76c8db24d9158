"""Dense operator carriers shared by every module.

Matrices are plain complex numpy arrays wrapped with a space tag so that
operators built on different Fock spaces cannot be combined by accident.
An operator with ``space=None`` is untagged and combines with anything.
"""

from __future__ import annotations

import os

import numpy as np

DEFAULT_CAP = 4096


def dimension_cap() -> int:
    """Hard limit on Hilbert-space dimension (``DECOREC_CAP`` overrides)."""
    value = os.environ.get("DECOREC_CAP")
    if value is None:
        return DEFAULT_CAP
    cap = int(value)
    if cap < 1:
        raise ValueError(f"DECOREC_CAP must be positive, got {value!r}")
    return cap


class SpaceMismatchError(ValueError):
    pass


def _join_tags(a, b):
    if a is None:
        return b
    if b is None or a == b:
        return a
    raise SpaceMismatchError(f"operator spaces differ: {a!r} vs {b!r}")


class ComplexOperator:
    """Dense complex matrix tagged with the space it acts on."""

    __array_priority__ = 20

    def __init__(self, matrix, space: str | None = None):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {m.shape}")
        m.setflags(write=False)
        self.matrix = m
        self.space = space

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.matrix.copy() if copy else self.matrix
        return self.matrix.astype(dtype)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, space={self.space!r})"

    def dag(self) -> "ComplexOperator":
        return ComplexOperator(self.matrix.conj().T, self.space)

    def _other(self, other):
        if isinstance(other, ComplexOperator):
            return other.matrix, _join_tags(self.space, other.space)
        arr = np.asarray(other)
        if arr.shape != self.matrix.shape:
            raise SpaceMismatchError(f"shape {arr.shape} does not match {self.matrix.shape}")
        return arr, self.space

    def __matmul__(self, other):
        if isinstance(other, ComplexOperator):
            m, tag = self._other(other)
            return ComplexOperator(self.matrix @ m, tag)
        return self.matrix @ np.asarray(other)

    def __rmatmul__(self, other):
        return np.asarray(other) @ self.matrix

    def __add__(self, other):
        m, tag = self._other(other)
        return ComplexOperator(self.matrix + m, tag)

    __radd__ = __add__

    def __sub__(self, other):
        m, tag = self._other(other)
        return ComplexOperator(self.matrix - m, tag)

    def __rsub__(self, other):
        m, tag = self._other(other)
        return ComplexOperator(m - self.matrix, tag)

    def __neg__(self):
        return ComplexOperator(-self.matrix, self.space)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return ComplexOperator(self.matrix * scalar, self.space)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return ComplexOperator(self.matrix / scalar, self.space)

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def is_zero(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.matrix) <= atol))


class InvalidDensityMatrix(ValueError):
    pass


class DensityMatrix(ComplexOperator):
    """Hermitian, unit-trace, positive semidefinite operator.

    Validation thresholds: Hermiticity and trace to ``1e-10``, smallest
    eigenvalue no lower than ``-1e-8``.  ``validate=False`` keeps the raw
    matrix (used for integrator output where drift is a diagnostic).
    """

    herm_tol = 1e-10
    trace_tol = 1e-10
    eig_floor = -1e-8

    def __init__(self, matrix, space: str | None = None, validate: bool = True):
        super().__init__(matrix, space)
        if validate:
            self.check()

    @classmethod
    def from_state(cls, psi, space: str | None = None) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), space)

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def check(self):
        herm = self.hermiticity_error()
        if herm > self.herm_tol:
            raise InvalidDensityMatrix(f"not Hermitian: max asymmetry {herm:.3e}")
        tr = np.trace(self.matrix)
        if abs(tr - 1) > self.trace_tol:
            raise InvalidDensityMatrix(f"trace {tr.real:.12g} differs from 1")
        lam = self.min_eigenvalue()
        if lam < self.eig_floor:
            raise InvalidDensityMatrix(f"negative eigenvalue {lam:.3e}")


def to_pairs(array):
    """Nested lists of ``[re, im]`` pairs, row-major."""
    a = np.asarray(array, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def from_pairs(data):
    a = np.asarray(data, dtype=float)
    if a.shape[-1] != 2:
        raise ValueError("complex data must be given as [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def dump_operator_json(op, path):
    import json

    with open(path, "w") as fh:
        json.dump(to_pairs(np.asarray(op)), fh)
