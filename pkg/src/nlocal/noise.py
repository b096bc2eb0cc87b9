"""Noisy source preparation (Hadamard + CNOT) and single-qubit damping channels."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matrixkit import I2, kron, ket, partial_trace, projector
from .states import TwoQubitState

CHANNEL_KINDS = ("none", "amplitude", "phase")

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def check_unit(value: float, name: str) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class GateNoise:
    """Hadamard fidelity ``alpha`` and CNOT fidelity ``delta``."""

    alpha: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_unit(self.alpha, "alpha"))
        object.__setattr__(self, "delta", check_unit(self.delta, "delta"))


@dataclass(frozen=True)
class ChannelSpec:
    """Damping on the qubit sent left (``gamma``) and the one sent right (``xi``)."""

    kind: str = "none"
    gamma: float = 0.0
    xi: float = 0.0

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"channel kind must be one of {CHANNEL_KINDS}, got {self.kind!r}")
        gamma = check_unit(self.gamma, "gamma")
        xi = check_unit(self.xi, "xi")
        if self.kind == "none" and (gamma or xi):
            raise ValueError("channel kind 'none' requires gamma = xi = 0")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "xi", xi)


def kraus_operators(kind: str, gamma: float) -> list[np.ndarray]:
    gamma = check_unit(gamma, "gamma")
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex)
    if kind == "amplitude":
        k1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    elif kind == "phase":
        k1 = np.array([[0, 0], [0, math.sqrt(gamma)]], dtype=complex)
    elif kind == "none":
        return [I2.copy()]
    else:
        raise ValueError(f"unknown channel kind {kind!r}")
    return [k0, k1]


def noisy_hadamard_prep(alpha: float) -> TwoQubitState:
    """Noisy Hadamard on the first qubit of |01><01|.

    The returned matrix is the expanded form
    ``(|00><00| + |10><10|)/2 - alpha/2 (|00><10| + |10><00|)``.
    """
    alpha = check_unit(alpha, "alpha")
    p00, p10 = ket("00"), ket("10")
    rho = 0.5 * (projector(p00) + projector(p10)) - 0.5 * alpha * (
        np.outer(p00, p10) + np.outer(p10, p00)
    )
    return TwoQubitState(rho)


def hadamard_channel_form(alpha: float, bits: str = "01") -> np.ndarray:
    """The operator form ``alpha (H x I) rho (H x I)^dag + (1-alpha)/2 I x Tr_1(rho)``
    applied to ``rho = |bits><bits|``.

    On the nominal input |01><01| this differs from :func:`noisy_hadamard_prep`
    in the sign of the coherence and in the second-qubit population; on
    |10><10| the two agree exactly. Kept for comparison only.
    """
    alpha = check_unit(alpha, "alpha")
    rho = projector(ket(bits))
    h = kron(HADAMARD, I2)
    return alpha * (h @ rho @ h.conj().T) + (1 - alpha) / 2 * kron(
        I2, partial_trace(rho, 2, [0])
    )


def noisy_cnot(state: TwoQubitState, delta: float) -> TwoQubitState:
    delta = check_unit(delta, "delta")
    rho = delta * (CNOT @ state.rho @ CNOT.conj().T) + (1 - delta) / 4 * np.eye(4)
    return TwoQubitState(rho)


def prepare_source(g: GateNoise) -> TwoQubitState:
    return noisy_cnot(noisy_hadamard_prep(g.alpha), g.delta)


def apply_channel(state: TwoQubitState, gamma: float, xi: float, kind: str) -> TwoQubitState:
    """Damp the left qubit with ``gamma`` and the right qubit with ``xi``."""
    ks_left = kraus_operators(kind, gamma)
    ks_right = kraus_operators(kind, xi)
    rho = np.zeros((4, 4), dtype=complex)
    for ka in ks_left:
        for kb in ks_right:
            k = kron(ka, kb)
            rho += k @ state.rho @ k.conj().T
    return TwoQubitState(rho)


def apply_channel_spec(state: TwoQubitState, c: ChannelSpec) -> TwoQubitState:
    if c.kind == "none":
        return state
    return apply_channel(state, c.gamma, c.xi, c.kind)


def closed_tensor(g: GateNoise, c: ChannelSpec) -> tuple[float, float, float]:
    """Diagonal of the correlation tensor of a prepared and transmitted source."""
    ad = g.alpha * g.delta
    if c.kind == "none":
        return (-ad, ad, g.delta)
    d = (1 - c.gamma) * (1 - c.xi)
    sd = math.sqrt(d)
    if c.kind == "amplitude":
        return (-ad * sd, ad * sd, g.delta * d + c.gamma * c.xi)
    return (-ad * sd, ad * sd, g.delta)
