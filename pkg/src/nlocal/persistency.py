"""Persistency: the longest chain of identical noisy sources for which the
detection criterion still fires.

Every criterion is a maximum over one or two sums of power terms. Terms are
kept as logarithms so that very long chains neither underflow nor lose the
difference between "exactly 1" and "1 plus something tiny".
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .network import NetworkSpec, detect_closed, maximize_S
from .noise import ChannelSpec, GateNoise, check_unit, closed_tensor

SCENARIO_PARAMS: dict[str, tuple[str, ...]] = {
    "entanglement-only": ("alpha", "delta"),
    "channel-amp": ("gamma",),
    "channel-ph": ("gamma",),
    "measurement-only": ("mu", "nu", "beta"),
    "combined-none": ("alpha", "delta", "mu", "nu", "beta"),
    "combined-amp": ("alpha", "delta", "gamma", "mu", "nu", "beta"),
    "combined-ph": ("alpha", "delta", "gamma", "mu", "nu", "beta"),
}
DEFAULT_N_CAP = 10**6
TRACE_LIMIT = 200
BISECT_TOL = 1e-12
TIE_TOL = 1e-9


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class PersistencyQuery:
    scenario: str
    params: Mapping[str, float]
    margin: float = 0.0
    n_cap: int = DEFAULT_N_CAP

    def __post_init__(self):
        required = SCENARIO_PARAMS.get(self.scenario)
        if required is None:
            raise ScenarioError(
                f"unknown scenario {self.scenario!r}; expected one of {sorted(SCENARIO_PARAMS)}"
            )
        params = dict(self.params)
        missing = [k for k in required if k not in params]
        extra = [k for k in params if k not in required]
        if missing or extra:
            raise ScenarioError(
                f"scenario {self.scenario!r} takes parameters {required}; "
                f"missing {missing}, unexpected {extra}"
            )
        object.__setattr__(self, "params", {k: check_unit(params[k], k) for k in required})
        if not self.margin >= 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")
        if int(self.n_cap) != self.n_cap or self.n_cap < 2:
            raise ValueError(f"n_cap must be an integer >= 2, got {self.n_cap}")
        object.__setattr__(self, "n_cap", int(self.n_cap))

    def with_params(self, **updates) -> PersistencyQuery:
        return PersistencyQuery(self.scenario, {**self.params, **updates}, self.margin, self.n_cap)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def _pow_log(x: float, k: float) -> float:
    """``log(x**k)`` with ``0**0 == 1``."""
    if k == 0:
        return 0.0
    return k * _log(x)


def log_terms(n: float, q: PersistencyQuery) -> list[list[float]]:
    """Alternatives whose maximum is LHS**2; each alternative is a sum of ``exp(term)``."""
    p = q.params
    s = q.scenario
    log2 = math.log(2.0)
    if s == "entanglement-only":
        dn = _pow_log(p["delta"], n)
        return [[dn, dn + _pow_log(p["alpha"], n)]]
    if s == "channel-amp":
        g = p["gamma"]
        x = _pow_log(1 - g, n)
        z = _pow_log((1 - g) ** 2 + g**2, n)
        return [[log2 + x], [x, z]]
    if s == "channel-ph":
        return [[0.0, _pow_log(1 - p["gamma"], n)]]

    pref = _log(p["mu"]) + _log(p["nu"]) + _pow_log(p["beta"], n - 1)
    if s == "measurement-only":
        return [[pref + log2]]
    a, d = p["alpha"], p["delta"]
    if s == "combined-none":
        dn = _pow_log(d, n)
        return [[pref + dn, pref + dn + _pow_log(a, n)]]
    if s == "combined-ph":
        x = _pow_log(a * d * (1 - p["gamma"]), n)
        return [[pref + log2 + x], [pref + x, pref + _pow_log(d, n)]]
    # combined-amp: per-source sorted singular values of the damped tensor
    t = sorted((abs(v) for v in closed_tensor(GateNoise(a, d), ChannelSpec("amplitude", p["gamma"], p["gamma"]))), reverse=True)
    return [[pref + _pow_log(t[0], n), pref + _pow_log(t[1], n)]]


def _logsumexp(terms: Sequence[float]) -> float:
    ordered = sorted(terms, reverse=True)
    m = ordered[0]
    if m == -math.inf:
        return -math.inf
    return m + math.log1p(sum(math.exp(t - m) for t in ordered[1:]))


def log_lhs_squared(n: float, q: PersistencyQuery) -> float:
    return max(_logsumexp(alt) for alt in log_terms(n, q))


def criterion_lhs(n: float, q: PersistencyQuery) -> float:
    """Left-hand side of the detection criterion at chain length ``n``."""
    if n < 1:
        raise ValueError(f"chain length must be >= 1, got {n}")
    return math.exp(0.5 * log_lhs_squared(n, q))


def _sum_exceeds(terms: Sequence[float], threshold: float) -> bool:
    finite = sorted((t for t in terms if t > -math.inf), reverse=True)
    if not finite:
        return False
    m = finite[0]
    if m > threshold:
        return True
    if m == threshold:
        # any further positive term pushes the sum strictly above, even if
        # exp() of its offset underflows
        return len(finite) > 1
    rest = sum(math.exp(t - m) for t in finite[1:])
    return m + math.log1p(rest) > threshold


def detects(n: float, q: PersistencyQuery) -> bool:
    """Strict test ``LHS(n) > 1 + margin``."""
    threshold = 2 * math.log1p(q.margin)
    return any(_sum_exceeds(alt, threshold) for alt in log_terms(n, q))


@dataclass(frozen=True)
class PersistencyResult:
    P: int | None
    n_real: float | None
    lhs_trace: list[tuple[int, float]] = field(repr=False)
    tie: bool = False

    @property
    def bounded(self) -> bool:
        return self.P is not None


class MonotonicityError(RuntimeError):
    pass


def _check_probes(probes: dict[int, tuple[bool, float]]) -> None:
    seen_fail = False
    prev = math.inf
    for n in sorted(probes):
        hit, loglhs = probes[n]
        if hit and seen_fail:
            raise MonotonicityError(f"criterion fires at n={n} after failing at a shorter chain")
        seen_fail |= not hit
        if loglhs > prev + 1e-12 * max(1.0, abs(prev)):
            raise MonotonicityError(f"criterion increases between probes at n={n}")
        prev = loglhs


def persistency(q: PersistencyQuery) -> PersistencyResult:
    probes: dict[int, tuple[bool, float]] = {}

    def hit(n: int) -> bool:
        if n not in probes:
            probes[n] = (detects(n, q), log_lhs_squared(n, q))
        return probes[n][0]

    if not hit(1):
        _check_probes(probes)
        return PersistencyResult(0, None, _trace(q, 1))

    lo, hi = 1, 2
    while hi < q.n_cap and hit(hi):
        lo, hi = hi, min(2 * hi, q.n_cap)
    if hit(hi):
        _check_probes(probes)
        return PersistencyResult(None, None, _trace(q, min(q.n_cap, TRACE_LIMIT)))
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if hit(mid):
            lo = mid
        else:
            hi = mid
    _check_probes(probes)
    p_int = lo

    a, b = float(p_int), float(p_int + 1)
    while b - a > BISECT_TOL:
        mid = (a + b) / 2
        if detects(mid, q):
            a = mid
        else:
            b = mid
    n_real = (a + b) / 2
    tie = (p_int + 1) - n_real < TIE_TOL
    return PersistencyResult(p_int, n_real, _trace(q, p_int + 1), tie)


def _trace(q: PersistencyQuery, upto: int) -> list[tuple[int, float]]:
    return [(n, criterion_lhs(n, q)) for n in range(1, min(upto, TRACE_LIMIT) + 1)]


def integer_scan(q: PersistencyQuery, limit: int = 10_000) -> int | None:
    """Plain linear scan from n = 1; ``None`` if still detected at ``limit``."""
    n = 1
    while n <= limit and detects(n, q):
        n += 1
    return None if n > limit else n - 1


def network_spec_for(q: PersistencyQuery, n: int) -> NetworkSpec:
    """The homogeneous network a query describes, at chain length ``n``."""
    p = {"alpha": 1.0, "delta": 1.0, "gamma": 0.0, "mu": 1.0, "nu": 1.0, "beta": 1.0, **q.params}
    kind = {"channel-amp": "amplitude", "channel-ph": "phase", "combined-amp": "amplitude",
            "combined-ph": "phase"}.get(q.scenario, "none")
    channel = ChannelSpec() if kind == "none" else ChannelSpec(kind, p["gamma"], p["gamma"])
    return NetworkSpec.homogeneous(
        n, GateNoise(p["alpha"], p["delta"]), channel, beta=p["beta"], mu=p["mu"], nu=p["nu"]
    )


def generic_lhs(n: int, q: PersistencyQuery) -> float:
    """Criterion via the network module's singular-value form (integer ``n`` only)."""
    return detect_closed(network_spec_for(q, n)).closed_lhs


ORACLE_MAX_P = 4


def oracle_check(q: PersistencyQuery, P: int | None) -> dict:
    """Confirm a finite persistency with the density-matrix oracle.

    At n = P the optimised Bell quantity must exceed 1 + margin, and at
    n = P + 1 the closed-form criterion must not. Only run for
    2 <= P <= ORACLE_MAX_P; otherwise an empty dict is returned.
    """
    if P is None or not 2 <= P <= ORACLE_MAX_P:
        return {}
    best = maximize_S(network_spec_for(q, P), align=True, path="full")
    after = detect_closed(network_spec_for(q, P + 1)).closed_lhs
    threshold = 1.0 + q.margin
    return {
        "S_at_P": best.S,
        "closed_lhs_at_P_plus_1": after,
        "consistent": best.S > threshold and not after > threshold,
    }


# ---------------------------------------------------------------------------
# sweeps


def _expand_key(key: str) -> tuple[str, ...]:
    """``"mu=nu"`` ties several parameters to one grid axis."""
    return tuple(k.strip() for k in key.split("="))


@dataclass(frozen=True)
class SweepRow:
    values: dict[str, float]
    result: PersistencyResult


def _run_point(args):
    template, updates = args
    return persistency(template.with_params(**updates))


def sweep(
    template: PersistencyQuery,
    grid: Mapping[str, Sequence[float]],
    workers: int | None = None,
) -> list[SweepRow]:
    """Persistency over a one- or two-axis grid, rows in grid order (first axis slowest)."""
    if not 1 <= len(grid) <= 2:
        raise ValueError("sweep grid must have one or two axes")
    axes = list(grid.items())
    points = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        values = {key: float(v) for (key, _), v in zip(axes, combo)}
        updates = {name: v for key, v in values.items() for name in _expand_key(key)}
        points.append((values, updates))
    jobs = [(template, upd) for _, upd in points]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    return [SweepRow(values, r) for (values, _), r in zip(points, results)]


def grid_values(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic grid, rounded to suppress floating drift."""
    if step <= 0:
        raise ValueError("grid step must be positive")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


# ---------------------------------------------------------------------------
# published table


@dataclass(frozen=True)
class TableRow:
    alpha: float
    delta: float
    gamma: float
    mu: float
    nu: float
    beta: float
    printed_P: int | None = None

    def query(self, margin: float = 0.0, n_cap: int = DEFAULT_N_CAP) -> PersistencyQuery:
        params = dict(alpha=self.alpha, delta=self.delta, gamma=self.gamma,
                      mu=self.mu, nu=self.nu, beta=self.beta)
        return PersistencyQuery("combined-ph", params, margin, n_cap)


TABLE1_ROWS = (
    TableRow(1.0, 1.0, 0.1, 0.94, 0.93, 0.92, printed_P=4),
    TableRow(0.94, 0.93, 0.1, 1.0, 1.0, 1.0, printed_P=7),
    TableRow(0.92, 0.95, 0.0, 0.92, 0.94, 0.95, printed_P=9),
    TableRow(0.92, 0.95, 0.12, 0.94, 0.93, 0.95, printed_P=4),
)


@dataclass(frozen=True)
class TableComparison:
    row: TableRow
    result: PersistencyResult
    scan_P: int | None

    @property
    def computed_P(self) -> int | None:
        return self.result.P

    @property
    def agrees(self) -> bool | None:
        if self.row.printed_P is None:
            return None
        return self.computed_P == self.row.printed_P


def table1(rows: Sequence[TableRow] = TABLE1_ROWS, margin: float = 0.0,
           n_cap: int = DEFAULT_N_CAP) -> list[TableComparison]:
    out = []
    for row in rows:
        q = row.query(margin, n_cap)
        out.append(TableComparison(row, persistency(q), integer_scan(q)))
    return out
