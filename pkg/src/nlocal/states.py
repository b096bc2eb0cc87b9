"""Two-qubit states in Bloch form.

Axis convention: sigma_1 = X, sigma_2 = Y, sigma_3 = Z; |0>, |1> are the Z
eigenstates and qubit 0 is the left tensor factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .matrixkit import (
    I2,
    PAULIS,
    as_operator,
    is_density,
    kron,
    ket,
    min_eigenvalue,
    projector,
    singular_values_3x3,
)

BLOCH_TOL = 1e-10


class InvalidStateError(ValueError):
    """Raised when a matrix is not a valid two-qubit density operator."""


@dataclass(frozen=True)
class TwoQubitState:
    rho: np.ndarray = field(repr=False)

    def __post_init__(self):
        rho = as_operator(self.rho).copy()
        if rho.shape != (4, 4):
            raise InvalidStateError(f"two-qubit state needs a 4x4 matrix, got {rho.shape}")
        if not is_density(rho):
            raise InvalidStateError(
                f"not a density operator (trace={np.trace(rho):.3g}, "
                f"min eigenvalue={min_eigenvalue(rho):.3g})"
            )
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def bloch(self) -> BlochForm:
        return bloch_decompose(self)

    @property
    def tensor(self) -> np.ndarray:
        return bloch_decompose(self).w


@dataclass(frozen=True)
class BlochForm:
    """Local Bloch vectors ``a`` (left qubit), ``b`` (right qubit) and correlation tensor ``w``."""

    a: np.ndarray
    b: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name, shape in (("a", (3,)), ("b", (3,)), ("w", (3, 3))):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def is_within_bounds(self) -> bool:
        return (
            np.linalg.norm(self.a) <= 1 + BLOCH_TOL
            and np.linalg.norm(self.b) <= 1 + BLOCH_TOL
            and bool(np.all(np.abs(self.w) <= 1 + BLOCH_TOL))
        )


@dataclass(frozen=True)
class Reconstruction:
    """Output of :func:`bloch_reconstruct`; ``rho`` is kept even when unphysical."""

    rho: np.ndarray
    valid: bool
    min_eigenvalue: float

    @property
    def state(self) -> TwoQubitState:
        if not self.valid:
            raise InvalidStateError(
                f"Bloch parameters are unphysical (min eigenvalue {self.min_eigenvalue:.3g})"
            )
        return TwoQubitState(self.rho)


def bloch_decompose(s: TwoQubitState) -> BlochForm:
    rho = s.rho if isinstance(s, TwoQubitState) else TwoQubitState(s).rho
    a = [np.trace(rho @ kron(p, I2)).real for p in PAULIS]
    b = [np.trace(rho @ kron(I2, p)).real for p in PAULIS]
    w = [[np.trace(rho @ kron(p, q)).real for q in PAULIS] for p in PAULIS]
    return BlochForm(np.array(a), np.array(b), np.array(w))


def bloch_reconstruct(f: BlochForm) -> Reconstruction:
    rho = kron(I2, I2)
    for j, p in enumerate(PAULIS):
        rho = rho + f.a[j] * kron(p, I2) + f.b[j] * kron(I2, p)
        for k, q in enumerate(PAULIS):
            rho = rho + f.w[j, k] * kron(p, q)
    rho = rho / 4
    lam = min_eigenvalue(rho)
    return Reconstruction(rho, bool(is_density(rho)), lam)


def correlation_singulars(s: TwoQubitState) -> tuple[float, float, float]:
    return singular_values_3x3(bloch_decompose(s).w)


_BELL_KETS = {
    "phi+": (ket("00") + ket("11")) / np.sqrt(2),
    "phi-": (ket("00") - ket("11")) / np.sqrt(2),
    "psi+": (ket("01") + ket("10")) / np.sqrt(2),
    "psi-": (ket("01") - ket("10")) / np.sqrt(2),
}
BELL_LABELS = tuple(_BELL_KETS)


def bell_state(label: str) -> TwoQubitState:
    key = label.lower().replace("φ", "phi").replace("ψ", "psi").replace("−", "-")
    try:
        return TwoQubitState(projector(_BELL_KETS[key]))
    except KeyError:
        raise ValueError(f"unknown Bell state {label!r}; expected one of {BELL_LABELS}") from None


def maximally_mixed() -> TwoQubitState:
    return TwoQubitState(np.eye(4, dtype=complex) / 4)


def random_density(rng: np.random.Generator, dim: int = 4, rank: int | None = None) -> np.ndarray:
    """Random density matrix ``A A^dagger / Tr``; full rank unless ``rank`` is given."""
    k = dim if rank is None else rank
    a = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def rotation_unitary(r: np.ndarray) -> np.ndarray:
    """SU(2) matrix ``U`` with ``U (v.sigma) U^dagger = (r v).sigma`` for a rotation ``r``."""
    r = np.asarray(r, dtype=float)
    if not np.allclose(r @ r.T, np.eye(3), atol=1e-10) or np.linalg.det(r) < 0:
        raise ValueError("expected a proper rotation matrix")
    x, y, z, w = Rotation.from_matrix(r).as_quat()
    return w * I2 - 1j * (x * PAULIS[0] + y * PAULIS[1] + z * PAULIS[2])


def apply_local_unitary(s: TwoQubitState, ua: np.ndarray, ub: np.ndarray) -> TwoQubitState:
    u = kron(ua, ub)
    return TwoQubitState(u @ s.rho @ u.conj().T)


def _proper(m: np.ndarray) -> np.ndarray:
    if np.linalg.det(m) < 0:
        m = m.copy()
        m[1] = -m[1]
    return m


def canonical_orientation(s: TwoQubitState) -> TwoQubitState:
    """Rotate each qubit locally so the correlation tensor is diagonal with the
    largest singular value on Z, the second on X and the smallest on Y.

    Signs of the diagonal entries are not normalised.
    """
    w = bloch_decompose(s).w
    u, _, vt = np.linalg.svd(w)
    # rows of the target frame: singular direction 0 -> z, 1 -> x, 2 -> y
    perm = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
    ra = _proper(perm @ u.T)
    rb = _proper(perm @ vt)
    return apply_local_unitary(s, rotation_unitary(ra), rotation_unitary(rb))
