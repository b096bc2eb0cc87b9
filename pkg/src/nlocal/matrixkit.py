"""Small dense linear-algebra helpers for qubit operators.

Matrices are plain ``numpy`` arrays of ``complex128`` (operators) or
``float64`` (3x3 correlation tensors).
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SX, SY, SZ)
PAULIS_WITH_ID = (I2, SX, SY, SZ)


class ShapeError(ValueError):
    """Raised when an operator has the wrong dimension for the request."""


def as_operator(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    return a


def kron(*ops) -> np.ndarray:
    """Kronecker product of one or more square matrices, left to right."""
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, as_operator(op))
    return out


def kron_all(ops: Iterable) -> np.ndarray:
    return kron(*list(ops))


def ket(bits: str) -> np.ndarray:
    """Computational-basis column vector, e.g. ``ket("01")``."""
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def projector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def is_hermitian(m, tol: float = HERMITIAN_TOL) -> bool:
    m = as_operator(m)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def min_eigenvalue(m) -> float:
    m = as_operator(m)
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2).min())


def is_psd(m, tol: float = PSD_TOL) -> bool:
    return is_hermitian(m) and min_eigenvalue(m) >= tol


def is_density(m) -> bool:
    """Hermitian, unit trace and positive semidefinite within the module tolerances."""
    m = as_operator(m)
    return (
        is_hermitian(m)
        and abs(np.trace(m) - 1.0) <= TRACE_TOL
        and min_eigenvalue(m) >= PSD_TOL
    )


def num_qubits(m) -> int:
    d = as_operator(m).shape[0]
    q = d.bit_length() - 1
    if 2**q != d:
        raise ShapeError(f"dimension {d} is not a power of two")
    return q


def partial_trace(m, qubit_count: int, traced: Iterable[int]) -> np.ndarray:
    """Trace out the qubits listed in ``traced``.

    Qubit 0 is the most significant (leftmost) tensor factor.
    """
    m = as_operator(m)
    if m.shape[0] != 2**qubit_count:
        raise ShapeError(
            f"matrix of dimension {m.shape[0]} does not act on {qubit_count} qubits"
        )
    traced = sorted(set(int(t) for t in traced))
    if any(t < 0 or t >= qubit_count for t in traced):
        raise ShapeError(f"traced qubit indices {traced} out of range for {qubit_count} qubits")
    keep = [q for q in range(qubit_count) if q not in traced]
    t = m.reshape((2,) * (2 * qubit_count))
    # contract each traced row index with its column index, highest first so
    # the remaining axis numbers stay valid
    n_left = qubit_count
    for q in reversed(traced):
        t = np.trace(t, axis1=q, axis2=q + n_left)
        n_left -= 1
    d = 2 ** len(keep)
    return t.reshape(d, d)


def _jacobi_rotate_columns(a: np.ndarray, v: np.ndarray, p: int, q: int) -> float:
    """One Hestenes sweep step: orthogonalise columns p and q of ``a`` in place.

    The rotation is the symmetric Jacobi rotation that zeroes entry (p, q)
    of ``a.T @ a`` without forming that product. Returns the off-diagonal
    magnitude that was eliminated.
    """
    alpha = a[:, p] @ a[:, p]
    beta = a[:, q] @ a[:, q]
    gamma = a[:, p] @ a[:, q]
    if gamma == 0.0:
        return 0.0
    zeta = (beta - alpha) / (2.0 * gamma)
    t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = c * t
    ap = a[:, p].copy()
    a[:, p] = c * ap - s * a[:, q]
    a[:, q] = s * ap + c * a[:, q]
    vp = v[:, p].copy()
    v[:, p] = c * vp - s * v[:, q]
    v[:, q] = s * vp + c * v[:, q]
    return abs(gamma) / np.sqrt(alpha * beta) if alpha * beta > 0 else 0.0


def singular_values_3x3(w, max_sweeps: int = 60) -> tuple[float, float, float]:
    """Singular values of a real 3x3 matrix, sorted descending.

    Cyclic Jacobi on ``w.T @ w`` carried out implicitly (one-sided form) so
    that small singular values keep full relative accuracy.
    """
    a = np.array(w, dtype=float)
    if a.shape != (3, 3):
        raise ShapeError(f"expected a 3x3 matrix, got {a.shape}")
    v = np.eye(3)
    for _ in range(max_sweeps):
        off = 0.0
        for p, q in ((0, 1), (0, 2), (1, 2)):
            off = max(off, _jacobi_rotate_columns(a, v, p, q))
        if off < 1e-15:
            break
    s = np.sqrt(np.sum(a * a, axis=0))
    s = np.sort(s)[::-1]
    return float(s[0]), float(s[1]), float(s[2])
