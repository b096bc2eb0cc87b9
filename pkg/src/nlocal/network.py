"""Linear n-local networks: the quantities I and J, and the detection criterion.

Qubits are ordered source by source, ``(s1q1, s1q2, s2q1, ..., snq2)``, so
party A_1 holds qubit 0, central party A_i (i = 2..n) holds qubits
``(2i-3, 2i-2)`` and A_{n+1} holds the last qubit. Every party therefore acts
on adjacent qubits and joint measurement operators are plain Kronecker chains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from .matrixkit import PAULIS_WITH_ID, kron, kron_all
from .noise import (
    ChannelSpec,
    GateNoise,
    apply_channel_spec,
    check_unit,
    prepare_source,
)
from .povm import Direction, bsm_noisy, central_observable, qubit_noisy
from .states import (
    BELL_LABELS,
    TwoQubitState,
    apply_local_unitary,
    bell_state,
    canonical_orientation,
    correlation_singulars,
    random_density,
    rotation_unitary,
)

FULL_ORACLE_MAX_N = 6
SCALING_CHECK_MAX_N = 4
SCENARIO_TOL = 1e-12

_S = 1 / math.sqrt(2)
DEFAULT_M0 = Direction([_S, 0.0, _S])
DEFAULT_M1 = Direction([-_S, 0.0, _S])


class ResourceCapError(RuntimeError):
    """Raised when a dense computation would exceed the supported size."""


@dataclass(frozen=True)
class Source:
    """One source: either an explicit state or a noisy preparation, then a channel."""

    state: TwoQubitState | None = None
    gate: GateNoise | None = None
    channel: ChannelSpec = field(default_factory=ChannelSpec)

    def __post_init__(self):
        if (self.state is None) == (self.gate is None):
            raise ValueError("a source needs exactly one of 'state' or 'gate'")

    def effective_state(self) -> TwoQubitState:
        base = self.state if self.state is not None else prepare_source(self.gate)
        return apply_channel_spec(base, self.channel)


@dataclass(frozen=True)
class NetworkSpec:
    n: int
    sources: tuple[Source, ...]
    betas: tuple[float, ...]
    mu: float = 1.0
    nu: float = 1.0
    m0: Direction = DEFAULT_M0
    m1: Direction = DEFAULT_M1
    n0: Direction = DEFAULT_M0
    n1: Direction = DEFAULT_M1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "sources", tuple(self.sources))
        betas = tuple(check_unit(b, f"betas[{i}]") for i, b in enumerate(self.betas))
        object.__setattr__(self, "betas", betas)
        if len(self.sources) != self.n:
            raise ValueError(f"expected {self.n} sources, got {len(self.sources)}")
        if len(betas) != self.n - 1:
            raise ValueError(f"expected {self.n - 1} betas, got {len(betas)}")
        object.__setattr__(self, "mu", check_unit(self.mu, "mu"))
        object.__setattr__(self, "nu", check_unit(self.nu, "nu"))
        for name in ("m0", "m1", "n0", "n1"):
            d = getattr(self, name)
            if not isinstance(d, Direction):
                object.__setattr__(self, name, Direction(d))

    @classmethod
    def homogeneous(
        cls,
        n: int,
        gate: GateNoise = GateNoise(),
        channel: ChannelSpec = ChannelSpec(),
        beta: float = 1.0,
        mu: float = 1.0,
        nu: float = 1.0,
        **directions,
    ) -> NetworkSpec:
        src = Source(gate=gate, channel=channel)
        return cls(n, (src,) * n, (beta,) * (n - 1), mu, nu, **directions)

    @classmethod
    def from_states(cls, states: Sequence[TwoQubitState], betas=None, mu=1.0, nu=1.0, **directions):
        n = len(states)
        betas = (1.0,) * (n - 1) if betas is None else tuple(betas)
        return cls(n, tuple(Source(state=s) for s in states), betas, mu, nu, **directions)

    @property
    def fidelity_product(self) -> float:
        return self.mu * self.nu * float(np.prod(self.betas))

    def with_directions(self, m0, m1, n0, n1) -> NetworkSpec:
        return replace(self, m0=m0, m1=m1, n0=n0, n1=n1)

    def ideal_measurements(self) -> NetworkSpec:
        return replace(self, betas=(1.0,) * (self.n - 1), mu=1.0, nu=1.0)

    def is_homogeneous(self) -> bool:
        first = self.sources[0]
        return first.gate is not None and all(
            s.gate == first.gate and s.channel == first.channel for s in self.sources
        )


@dataclass(frozen=True)
class DetectionReport:
    I: float
    J: float
    S: float
    closed_lhs: float
    detected: bool
    margin: float
    reason: str
    scenario_lhs: float | None = None


def effective_states(spec: NetworkSpec) -> list[TwoQubitState]:
    return [s.effective_state() for s in spec.sources]


# ---------------------------------------------------------------------------
# full density-matrix oracle


def _contract_party(t: np.ndarray, stack: np.ndarray) -> np.ndarray:
    """Measure the leading qubits of the remaining register.

    ``t`` has shape ``(O, D, D)``; ``stack`` holds the party's POVM elements,
    shape ``(m, d, d)``. Returns shape ``(O * m, D/d, D/d)`` with
    ``out[o, m] = Tr_party[E_m t[o]]`` on the leading factor.
    """
    o, big, _ = t.shape
    m, d, _ = stack.shape
    rest = big // d
    t = t.reshape(o, d, rest, d, rest)
    out = np.einsum("mba,oarbs->omrs", stack, t, optimize=True)
    return out.reshape(o * m, rest, rest)


def joint_probabilities(rho: np.ndarray, povms: Sequence[np.ndarray]) -> np.ndarray:
    """Joint outcome distribution of parties measuring consecutive blocks of ``rho``."""
    t = rho.reshape(1, *rho.shape)
    for stack in povms:
        t = _contract_party(t, np.asarray(stack))
    if t.shape[1:] != (1, 1):
        raise ValueError("POVMs do not cover the full register")
    shape = [len(s) for s in povms]
    return t[:, 0, 0].real.reshape(shape)


def _signed_expectation(p: np.ndarray, bit: int) -> float:
    sign_ext = np.array([1.0, -1.0])
    # BSM outcome index 2*g + h; bit 0 -> g, bit 1 -> h
    sign_bsm = np.array([1.0, 1.0, -1.0, -1.0]) if bit == 0 else np.array([1.0, -1.0, 1.0, -1.0])
    signs = [sign_ext] + [sign_bsm] * (p.ndim - 2) + [sign_ext]
    acc = p
    for s in reversed(signs):
        acc = acc @ s
    return float(acc)


def compute_IJ_full(spec: NetworkSpec, states: Sequence[TwoQubitState] | None = None) -> tuple[float, float]:
    """I and J from the full 2n-qubit density matrix and every outcome probability."""
    if spec.n > FULL_ORACLE_MAX_N:
        raise ResourceCapError(
            f"full oracle supports n <= {FULL_ORACLE_MAX_N} (joint dimension 4^n), got n = {spec.n}"
        )
    states = effective_states(spec) if states is None else list(states)
    rho = kron_all(s.rho for s in states)
    centrals = [bsm_noisy(b).stack() for b in spec.betas]
    ms = (spec.m0, spec.m1)
    ns = (spec.n0, spec.n1)
    i_val = j_val = 0.0
    for y1 in (0, 1):
        left = qubit_noisy(ms[y1], spec.mu).stack()
        for y2 in (0, 1):
            right = qubit_noisy(ns[y2], spec.nu).stack()
            p = joint_probabilities(rho, [left, *centrals, right])
            total = p.sum()
            if abs(total - 1.0) > 1e-9:
                raise RuntimeError(f"outcome probabilities sum to {total}")
            i_val += _signed_expectation(p, 0)
            j_val += (-1) ** (y1 + y2) * _signed_expectation(p, 1)
    return i_val / 4, j_val / 4


# ---------------------------------------------------------------------------
# factorized transfer contraction


def pauli_coefficients(op: np.ndarray) -> np.ndarray:
    """Coefficients of ``op`` in the (normalised) Pauli basis including identity.

    One qubit: ``op = sum_j c[j] sigma_j``. Two qubits: ``op = sum_jk c[j,k] sigma_j x sigma_k``.
    """
    op = np.asarray(op, dtype=complex)
    if op.shape == (2, 2):
        return np.array([np.trace(op @ p).real / 2 for p in PAULIS_WITH_ID])
    if op.shape == (4, 4):
        return np.array(
            [[np.trace(op @ kron(p, q)).real / 4 for q in PAULIS_WITH_ID] for p in PAULIS_WITH_ID]
        )
    raise ValueError(f"unsupported operator shape {op.shape}")


def extended_correlations(s: TwoQubitState) -> np.ndarray:
    """``R[j, k] = Tr[rho sigma_j x sigma_k]`` with sigma_0 = identity."""
    return np.array(
        [[np.trace(s.rho @ kron(p, q)).real for q in PAULIS_WITH_ID] for p in PAULIS_WITH_ID]
    )


def _central_coefficients(beta: float, which: str) -> np.ndarray:
    c = pauli_coefficients(central_observable(beta, which))
    if np.abs(c[0, :]).max() > 1e-12 or np.abs(c[:, 0]).max() > 1e-12:
        raise AssertionError("signed central observable has a local (identity) component")
    return c


def chain_kernels(states: Sequence[TwoQubitState], betas: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """4x4 transfer products ``R_1 C_2 R_2 ... C_n R_n`` for the I and J branches."""
    rs = [extended_correlations(s) for s in states]
    kernels = []
    for which in ("first-bit", "second-bit"):
        k = rs[0]
        cache: dict[float, np.ndarray] = {}
        for beta, r in zip(betas, rs[1:]):
            c = cache.get(beta)
            if c is None:
                c = cache[beta] = _central_coefficients(beta, which)
            k = k @ c @ r
        kernels.append(k)
    return kernels[0], kernels[1]


def _extreme_vector(d: Direction, eta: float) -> np.ndarray:
    e = pauli_coefficients(qubit_noisy(d, eta).signed_sum(0))
    if abs(e[0]) > 1e-12:
        raise AssertionError("signed extreme observable has an identity component")
    return e


def compute_IJ_factorized(spec: NetworkSpec, states: Sequence[TwoQubitState] | None = None) -> tuple[float, float]:
    states = effective_states(spec) if states is None else list(states)
    k_i, k_j = chain_kernels(states, spec.betas)
    a0, a1 = _extreme_vector(spec.m0, spec.mu), _extreme_vector(spec.m1, spec.mu)
    b0, b1 = _extreme_vector(spec.n0, spec.nu), _extreme_vector(spec.n1, spec.nu)
    i_val = (a0 + a1) @ k_i @ (b0 + b1) / 4
    j_val = (a0 - a1) @ k_j @ (b0 - b1) / 4
    return float(i_val), float(j_val)


def bell_quantity(i_val: float, j_val: float) -> float:
    return math.sqrt(abs(i_val)) + math.sqrt(abs(j_val))


# ---------------------------------------------------------------------------
# closed-form criterion


def top_two_singulars(states: Sequence[TwoQubitState]) -> tuple[np.ndarray, np.ndarray]:
    t = np.array([correlation_singulars(s)[:2] for s in states])
    return t[:, 0], t[:, 1]


def closed_form_lhs(states: Sequence[TwoQubitState], fidelity_product: float) -> float:
    t1, t2 = top_two_singulars(states)
    return math.sqrt(fidelity_product) * math.sqrt(float(np.prod(t1) + np.prod(t2)))


def scenario_lhs(spec: NetworkSpec) -> float | None:
    """Per-scenario closed forms for homogeneous gate + channel sources."""
    if not spec.is_homogeneous():
        return None
    g, c = spec.sources[0].gate, spec.sources[0].channel
    n = spec.n
    a, d = g.alpha, g.delta
    pref = spec.fidelity_product
    if c.kind == "none":
        return math.sqrt(pref * d**n * (1 + a**n))
    dd = (1 - c.gamma) * (1 - c.xi)
    x = (a * d * math.sqrt(dd)) ** n
    if c.kind == "amplitude":
        z = (d * dd + c.gamma * c.xi) ** n
        return math.sqrt(pref * max(2 * x, x + z))
    return math.sqrt(pref * max(2 * x, x + d**n))


def detect_closed(spec: NetworkSpec, states: Sequence[TwoQubitState] | None = None) -> DetectionReport:
    states = effective_states(spec) if states is None else list(states)
    lhs = closed_form_lhs(states, spec.fidelity_product)
    i_val, j_val = compute_IJ_factorized(spec, states)
    scen = scenario_lhs(spec)
    if scen is not None and abs(scen - lhs) > SCENARIO_TOL:
        raise AssertionError(f"scenario closed form {scen!r} disagrees with singular-value form {lhs!r}")
    detected = lhs > 1.0
    if min((spec.mu, spec.nu, *spec.betas)) == 0.0:
        reason = "zero-fidelity detector"
    elif detected:
        reason = "criterion exceeds 1"
    else:
        reason = "criterion does not exceed 1"
    return DetectionReport(
        I=i_val,
        J=j_val,
        S=bell_quantity(i_val, j_val),
        closed_lhs=lhs,
        detected=detected,
        margin=lhs - 1.0,
        reason=reason,
        scenario_lhs=scen,
    )


def theorem1_scaling_check(spec: NetworkSpec, tol: float = 1e-10) -> bool:
    """Check ``I_noisy = mu nu prod(beta) I_ideal`` (and the same for J) with the full oracle."""
    if spec.n > SCALING_CHECK_MAX_N:
        raise ResourceCapError(f"scaling check supports n <= {SCALING_CHECK_MAX_N}, got {spec.n}")
    states = effective_states(spec)
    i_noisy, j_noisy = compute_IJ_full(spec, states)
    i_ideal, j_ideal = compute_IJ_full(spec.ideal_measurements(), states)
    f = spec.fidelity_product
    return abs(i_noisy - f * i_ideal) <= tol and abs(j_noisy - f * j_ideal) <= tol


# ---------------------------------------------------------------------------
# settings optimisation


@dataclass(frozen=True)
class Optimum:
    S: float
    angles: tuple[float, float, float, float]
    directions: tuple[Direction, Direction, Direction, Direction]
    I: float
    J: float


class _PlanarObjective:
    """S as a function of the four x-z plane angles (m0, m1, n0, n1)."""

    def __init__(self, spec: NetworkSpec, states: Sequence[TwoQubitState]):
        k_i, k_j = chain_kernels(states, spec.betas)
        # x and z components only
        idx = [1, 3]
        scale = spec.mu * spec.nu / 4
        self.a = scale * k_i[np.ix_(idx, idx)]
        self.b = scale * k_j[np.ix_(idx, idx)]

    @staticmethod
    def _vec(theta):
        theta = np.asarray(theta, dtype=float)
        return np.stack([np.sin(theta), np.cos(theta)], axis=-1)

    def ij(self, t_m0, t_m1, t_n0, t_n1):
        m0, m1, n0, n1 = (self._vec(t) for t in (t_m0, t_m1, t_n0, t_n1))
        i_val = np.einsum("...i,ij,...j->...", m0 + m1, self.a, n0 + n1)
        j_val = np.einsum("...i,ij,...j->...", m0 - m1, self.b, n0 - n1)
        return i_val, j_val

    def __call__(self, *angles):
        i_val, j_val = self.ij(*angles)
        return np.sqrt(np.abs(i_val)) + np.sqrt(np.abs(j_val))


_GOLDEN = (math.sqrt(5) - 1) / 2


def _golden_max(f, lo: float, hi: float, tol: float = 1e-6) -> float:
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = f(d)
    return (lo + hi) / 2


def _coordinate_ascent(obj: _PlanarObjective, x: np.ndarray, step: float, grid: np.ndarray) -> np.ndarray:
    x = x.copy()
    best = float(obj(*x))
    for _ in range(200):
        start = best
        for k in range(4):
            trial = np.repeat(x[None, :], len(grid), axis=0)
            trial[:, k] = grid
            vals = obj(*trial.T)
            j = int(np.argmax(vals))
            centre = grid[j]

            def f1(t, k=k):
                y = x.copy()
                y[k] = t
                return float(obj(*y))

            t_star = _golden_max(f1, centre - step, centre + step)
            cand = x.copy()
            cand[k] = t_star
            val = float(obj(*cand))
            if val >= best:
                x, best = cand, val
        if best - start <= 1e-15:
            break
    return x


def maximize_S(
    spec: NetworkSpec,
    *,
    align: bool = True,
    path: str = "factorized",
    grid_step: float = math.pi / 60,
    starts: int = 4,
) -> Optimum:
    """Maximise sqrt|I| + sqrt|J| over extreme-party directions in the x-z plane.

    With ``align`` each source is first rotated by local unitaries into the
    orientation where its two largest correlation singular values sit on the
    Z and X axes, which the fixed Bell-state measurements probe. The
    ``full`` path re-evaluates the optimum with the density-matrix oracle.
    """
    states = effective_states(spec)
    if align:
        states = [canonical_orientation(s) for s in states]
    obj = _PlanarObjective(spec, states)

    grid = np.arange(-math.pi, math.pi, grid_step)
    coarse = np.arange(-math.pi, math.pi, math.pi / 12)
    mesh = np.stack(np.meshgrid(coarse, coarse, coarse, coarse, indexing="ij"), axis=-1).reshape(-1, 4)
    vals = obj(*mesh.T)
    order = np.argsort(vals)[::-1][:starts]
    best_x, best_val = None, -1.0
    for x0 in mesh[order]:
        x = _coordinate_ascent(obj, x0, grid_step, grid)
        res = minimize(lambda y: -float(obj(*y)), x, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 4000})
        if -res.fun > float(obj(*x)):
            x = res.x
        val = float(obj(*x))
        if val > best_val:
            best_x, best_val = x, val

    angles = tuple(float(t) for t in best_x)
    dirs = tuple(Direction.from_angle(t) for t in angles)
    if path == "full":
        i_val, j_val = compute_IJ_full(spec.with_directions(*dirs), states)
    elif path == "factorized":
        i_val, j_val = (float(v) for v in obj.ij(*angles))
    else:
        raise ValueError(f"path must be 'factorized' or 'full', got {path!r}")
    return Optimum(bell_quantity(i_val, j_val), angles, dirs, i_val, j_val)


# ---------------------------------------------------------------------------
# randomised specs for property checks


def random_direction(rng: np.random.Generator) -> Direction:
    v = rng.normal(size=3)
    return Direction(v / np.linalg.norm(v))


def random_source(rng: np.random.Generator) -> Source:
    """Random source biased towards strong correlations so I and J stay sizeable."""
    kind = ("none", "amplitude", "phase")[rng.integers(3)]
    channel = (
        ChannelSpec()
        if kind == "none"
        else ChannelSpec(kind, rng.uniform(0, 0.5), rng.uniform(0, 0.5))
    )
    if rng.uniform() < 0.5:
        p = rng.uniform(0.5, 1.0)
        bell = bell_state(BELL_LABELS[rng.integers(4)])
        rho = p * bell.rho + (1 - p) * random_density(rng)
        ua, ub = (rotation_unitary(Rotation.random(random_state=rng).as_matrix()) for _ in range(2))
        state = apply_local_unitary(TwoQubitState(rho), ua, ub)
        return Source(state=state, channel=channel)
    return Source(gate=GateNoise(rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0)), channel=channel)


def random_spec(rng: np.random.Generator, n: int) -> NetworkSpec:
    return NetworkSpec(
        n,
        tuple(random_source(rng) for _ in range(n)),
        tuple(rng.uniform(0.5, 1.0, size=n - 1)),
        rng.uniform(0.5, 1.0),
        rng.uniform(0.5, 1.0),
        *(random_direction(rng) for _ in range(4)),
    )


def random_homogeneous_spec(rng: np.random.Generator, n: int) -> NetworkSpec:
    kind = ("none", "amplitude", "phase")[rng.integers(3)]
    gamma = 0.0 if kind == "none" else rng.uniform()
    channel = ChannelSpec(kind, gamma, gamma)
    gate = GateNoise(rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0))
    return NetworkSpec.homogeneous(
        n, gate, channel, beta=rng.uniform(0.5, 1.0), mu=rng.uniform(0.5, 1.0), nu=rng.uniform(0.5, 1.0)
    )
