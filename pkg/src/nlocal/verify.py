"""Randomised and grid-based property suites shared by the CLI and the tests.

Each suite returns how many of its checks passed together with the worst
deviation it saw, so a failure report says by how much a check missed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .matrixkit import PAULIS, SX, SZ, kron
from .network import (
    NetworkSpec,
    bell_quantity,
    closed_form_lhs,
    compute_IJ_factorized,
    compute_IJ_full,
    effective_states,
    maximize_S,
    random_direction,
    random_homogeneous_spec,
    random_spec,
    theorem1_scaling_check,
)
from .noise import ChannelSpec, GateNoise, closed_tensor, kraus_operators, prepare_source
from .povm import bsm_noisy, central_observable, qubit_noisy

DEFAULT_TOLERANCES = {
    "channel": 1e-12,
    "scaling": 1e-10,
    "equivalence": 1e-10,
    "attainability": 1e-4,
    "upper-bound": 1e-10,
}
SUITES = ("povm-channel", "scaling", "equivalence", "attainability", "upper-bound")
SPEC_SIZES = (2, 3, 4)
_PAULI_PAIRS = np.array([[kron(p, q) for q in PAULIS] for p in PAULIS])


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: int
    total: int
    worst: float

    @property
    def ok(self) -> bool:
        return self.passed == self.total


def _kraus_tensor(rho: np.ndarray, kind: str, gamma: float, xi: float) -> np.ndarray:
    """Correlation tensor after the Kraus map, computed directly from the operators."""
    out = np.zeros((4, 4), dtype=complex)
    for ka in kraus_operators(kind, gamma):
        for kb in kraus_operators(kind, xi):
            k = kron(ka, kb)
            out += k @ rho @ k.conj().T
    return np.einsum("ab,jkba->jk", out, _PAULI_PAIRS).real


def povm_channel_suite(tol: float = DEFAULT_TOLERANCES["channel"], points: int = 10,
                       seed: int = 0) -> SuiteResult:
    """Kraus and POVM completeness, POVM positivity, and closed tensors vs. Kraus maps.

    The tensor comparison covers ``points**4`` values of (alpha, delta, gamma, xi)
    for each damping kind.
    """
    rng = np.random.default_rng(seed)
    axis = np.linspace(0.0, 1.0, points)
    passed = total = 0
    worst = 0.0

    def record(dev: float, ok: bool | None = None):
        nonlocal passed, total, worst
        total += 1
        worst = max(worst, dev)
        passed += int(dev <= tol if ok is None else ok)

    eye = np.eye(2)
    for kind in ("amplitude", "phase"):
        for g in axis:
            ks = kraus_operators(kind, g)
            record(float(np.abs(sum(k.conj().T @ k for k in ks) - eye).max()))

    for b in axis:
        povm = bsm_noisy(b)
        record(povm.completeness_error())
        record(max(0.0, -povm.min_eigenvalue()))
        record(float(np.abs(central_observable(b, "first-bit") - b * kron(SZ, SZ)).max()))
        record(float(np.abs(central_observable(b, "second-bit") - b * kron(SX, SX)).max()))
        d = random_direction(rng)
        q = qubit_noisy(d, b)
        record(q.completeness_error())
        record(max(0.0, -q.min_eigenvalue()))

    for a, dl in itertools.product(axis, axis):
        gate = GateNoise(a, dl)
        rho = prepare_source(gate).rho
        t0 = np.einsum("ab,jkba->jk", rho, _PAULI_PAIRS).real
        record(float(np.abs(t0 - np.diag(closed_tensor(gate, ChannelSpec()))).max()))
        for kind in ("amplitude", "phase"):
            for g, x in itertools.product(axis, axis):
                t = _kraus_tensor(rho, kind, g, x)
                record(float(np.abs(t - np.diag(closed_tensor(gate, ChannelSpec(kind, g, x)))).max()))
    return SuiteResult("povm-channel", passed, total, worst)


def _specs(rng: np.random.Generator, count: int, homogeneous: bool = False) -> list[NetworkSpec]:
    make = random_homogeneous_spec if homogeneous else random_spec
    return [make(rng, SPEC_SIZES[i % len(SPEC_SIZES)]) for i in range(count)]


def scaling_suite(rng: np.random.Generator, count: int, tol: float) -> SuiteResult:
    passed = 0
    worst = 0.0
    for spec in _specs(rng, count):
        states = effective_states(spec)
        i_n, j_n = compute_IJ_full(spec, states)
        i_0, j_0 = compute_IJ_full(spec.ideal_measurements(), states)
        f = spec.fidelity_product
        worst = max(worst, abs(i_n - f * i_0), abs(j_n - f * j_0))
        passed += int(theorem1_scaling_check(spec, tol))
    return SuiteResult("scaling", passed, count, worst)


def equivalence_suite(rng: np.random.Generator, count: int, tol: float) -> SuiteResult:
    passed = 0
    worst = 0.0
    for spec in _specs(rng, count):
        full = compute_IJ_full(spec)
        fact = compute_IJ_factorized(spec)
        dev = max(abs(a - b) for a, b in zip(full, fact))
        worst = max(worst, dev)
        passed += int(dev <= tol)
    return SuiteResult("equivalence", passed, count, worst)


def attainability_suite(rng: np.random.Generator, count: int, tol: float) -> SuiteResult:
    passed = 0
    worst = 0.0
    for spec in _specs(rng, count, homogeneous=True):
        best = maximize_S(spec, align=True, path="full")
        lhs = closed_form_lhs(effective_states(spec), spec.fidelity_product)
        dev = abs(best.S - lhs)
        worst = max(worst, dev)
        passed += int(dev <= tol)
    return SuiteResult("attainability", passed, count, worst)


def upper_bound_suite(rng: np.random.Generator, count: int, tol: float) -> SuiteResult:
    """The closed-form value bounds S at arbitrary (three-dimensional) settings."""
    passed = 0
    worst = 0.0
    for spec in _specs(rng, count):
        s = bell_quantity(*compute_IJ_full(spec))
        lhs = closed_form_lhs(effective_states(spec), spec.fidelity_product)
        excess = max(0.0, s - lhs)
        worst = max(worst, excess)
        passed += int(excess <= tol)
    return SuiteResult("upper-bound", passed, count, worst)


def run_suites(seed: int = 0, tolerances: dict | None = None, specs: int = 10,
               points: int = 10) -> list[SuiteResult]:
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    children = np.random.SeedSequence(seed).spawn(len(SUITES))
    rngs = [np.random.default_rng(c) for c in children]
    return [
        povm_channel_suite(tol["channel"], points, seed=int(children[0].generate_state(1)[0])),
        scaling_suite(rngs[1], specs, tol["scaling"]),
        equivalence_suite(rngs[2], specs, tol["equivalence"]),
        attainability_suite(rngs[3], specs, tol["attainability"]),
        upper_bound_suite(rngs[4], specs, tol["upper-bound"]),
    ]
