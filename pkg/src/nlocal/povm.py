"""Ideal and lossy measurements: Bell-state measurements for the central
parties and two-outcome qubit measurements for the extreme parties."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrixkit import HERMITIAN_TOL, PAULIS, PSD_TOL, I2, min_eigenvalue
from .noise import check_unit
from .states import bell_state

# outcome bits (first, second) -> Bell projector
BSM_LABELS = {(0, 0): "phi+", (0, 1): "phi-", (1, 0): "psi+", (1, 1): "psi-"}


@dataclass(frozen=True)
class Direction:
    v: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, dtype=float).reshape(-1)
        if v.shape != (3,):
            raise ValueError(f"direction must be a 3-vector, got shape {v.shape}")
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError(f"direction must have unit norm, got |v| = {np.linalg.norm(v)}")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_angle(cls, theta: float) -> Direction:
        """Unit vector in the x-z plane at polar angle ``theta`` from +z."""
        return cls(np.array([np.sin(theta), 0.0, np.cos(theta)]))

    @property
    def observable(self) -> np.ndarray:
        return sum(c * p for c, p in zip(self.v, PAULIS))


@dataclass(frozen=True)
class Povm:
    elements: tuple[np.ndarray, ...]
    labels: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        els = tuple(np.array(e, dtype=complex) for e in self.elements)
        if len(els) != len(self.labels):
            raise ValueError("one label per element required")
        dim = els[0].shape[0]
        for e in els:
            if e.shape != (dim, dim):
                raise ValueError("POVM elements must share one square shape")
            e.setflags(write=False)
        object.__setattr__(self, "elements", els)
        object.__setattr__(self, "labels", tuple(tuple(lab) for lab in self.labels))

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def completeness_error(self) -> float:
        return float(np.abs(sum(self.elements) - np.eye(self.dim)).max())

    def min_eigenvalue(self) -> float:
        return min(min_eigenvalue(e) for e in self.elements)

    def is_valid(self) -> bool:
        hermitian = all(np.abs(e - e.conj().T).max() <= HERMITIAN_TOL for e in self.elements)
        return hermitian and self.min_eigenvalue() >= PSD_TOL and self.completeness_error() <= 1e-12

    def signed_sum(self, bit: int = 0) -> np.ndarray:
        """``sum_o (-1)^{o[bit]} E_o``."""
        return sum((-1) ** lab[bit] * e for lab, e in zip(self.labels, self.elements))

    def stack(self) -> np.ndarray:
        return np.stack(self.elements)


def bsm_ideal() -> Povm:
    return bsm_noisy(1.0)


def bsm_noisy(beta: float) -> Povm:
    beta = check_unit(beta, "beta")
    labels = list(BSM_LABELS)
    els = [beta * bell_state(BSM_LABELS[lab]).rho + (1 - beta) / 4 * np.eye(4) for lab in labels]
    return Povm(tuple(els), tuple(labels))


def qubit_ideal(d: Direction) -> Povm:
    return qubit_noisy(d, 1.0)


def qubit_noisy(d: Direction, eta: float) -> Povm:
    """Projective ``d.sigma`` measurement that fails with probability ``1 - eta``.

    Outcome 0 is the +1 eigenprojector.
    """
    if not isinstance(d, Direction):
        d = Direction(d)
    eta = check_unit(eta, "eta")
    obs = d.observable
    plus = (I2 + obs) / 2
    minus = (I2 - obs) / 2
    noise = (1 - eta) / 2 * I2
    return Povm((eta * plus + noise, eta * minus + noise), ((0,), (1,)))


def central_observable(beta: float, which: str = "first-bit") -> np.ndarray:
    """Signed combination of the lossy BSM elements selected by one outcome bit.

    Equals ``beta * Z x Z`` for ``"first-bit"`` and ``beta * X x X`` for ``"second-bit"``.
    """
    bit = {"first-bit": 0, "second-bit": 1}.get(which)
    if bit is None:
        raise ValueError(f"which must be 'first-bit' or 'second-bit', got {which!r}")
    return bsm_noisy(beta).signed_sum(bit)
