"""Batch command-line front end.

Usage::

    nlocal detect --input spec.json
    nlocal persistency --input query.json --format csv
    nlocal sweep --input sweep.json --grid-step 0.01 --output fig2.csv --format csv
    nlocal table1
    nlocal verify --seed 3

Exit codes: 0 success, 1 a check failed, 2 configuration error, 3 resource cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import persistency as pers
from .network import (
    FULL_ORACLE_MAX_N,
    NetworkSpec,
    ResourceCapError,
    Source,
    bell_quantity,
    compute_IJ_full,
    detect_closed,
    maximize_S,
)
from .noise import ChannelSpec, GateNoise
from .povm import Direction
from .states import TwoQubitState, bell_state
from .verify import DEFAULT_TOLERANCES, run_suites

COMMANDS = ("detect", "persistency", "sweep", "verify", "table1")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config parsing


def _get(doc: dict, key: str, where: str, default: Any = ...):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    if key not in doc:
        if default is ...:
            raise ConfigError(f"{where}.{key}: required key missing" if where else f"{key}: required key missing")
        return default
    return doc[key]


ALLOWED_KEYS = {
    "detect": {"n", "sources", "betas", "mu", "nu", "m0", "m1", "n0", "n1", "margin", "oracle"},
    "persistency": {"scenario", "params", "margin", "n_cap"},
    "sweep": {"scenario", "params", "grid", "margin", "n_cap"},
    "table1": {"rows", "margin", "n_cap"},
    "verify": {"seed", "specs", "points", "tolerances"},
}


def _check_keys(doc: dict, command: str) -> None:
    unknown = sorted(set(doc) - ALLOWED_KEYS[command])
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown key for {command}")


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _unit(value, where: str) -> float:
    x = _number(value, where)
    if not 0.0 <= x <= 1.0:
        raise ConfigError(f"{where}: must lie in [0, 1], got {x}")
    return x


def _parse_state(doc, where: str) -> TwoQubitState:
    try:
        if isinstance(doc, str):
            return bell_state(doc)
        real = np.array(_get(doc, "real", where), dtype=float)
        imag = np.array(doc.get("imag", np.zeros_like(real)), dtype=float)
        return TwoQubitState(real + 1j * imag)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _parse_source(doc, where: str) -> Source:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = set(doc) - {"state", "gate", "channel"}
    if unknown:
        raise ConfigError(f"{where}.{sorted(unknown)[0]}: unknown key")
    state = gate = None
    if "state" in doc:
        state = _parse_state(doc["state"], f"{where}.state")
    if "gate" in doc:
        g = doc["gate"]
        gate = GateNoise(
            _unit(_get(g, "alpha", f"{where}.gate", 1.0), f"{where}.gate.alpha"),
            _unit(_get(g, "delta", f"{where}.gate", 1.0), f"{where}.gate.delta"),
        )
    if (state is None) == (gate is None):
        raise ConfigError(f"{where}: give exactly one of 'state' or 'gate'")
    channel = ChannelSpec()
    if "channel" in doc:
        c = doc["channel"]
        kind = _get(c, "kind", f"{where}.channel")
        try:
            channel = ChannelSpec(
                kind,
                _unit(_get(c, "gamma", f"{where}.channel", 0.0), f"{where}.channel.gamma"),
                _unit(_get(c, "xi", f"{where}.channel", 0.0), f"{where}.channel.xi"),
            )
        except ValueError as exc:
            raise ConfigError(f"{where}.channel: {exc}") from None
    return Source(state=state, gate=gate, channel=channel)


def _parse_direction(value, where: str) -> Direction:
    try:
        v = np.array(value, dtype=float)
        if v.shape != (3,):
            raise ValueError("expected a 3-vector")
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("zero vector")
        return Direction(v / norm)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_network(doc: dict) -> tuple[NetworkSpec, bool]:
    """Build a NetworkSpec; the flag tells whether all four directions were given."""
    n = _get(doc, "n", "")
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        raise ConfigError(f"n: expected an integer >= 2, got {n!r}")
    sources = _get(doc, "sources", "")
    if not isinstance(sources, list):
        raise ConfigError("sources: expected a list")
    if len(sources) == 1 and n > 1:
        sources = sources * n
    if len(sources) != n:
        raise ConfigError(f"sources: expected {n} entries (or 1 to repeat), got {len(sources)}")
    parsed = tuple(_parse_source(s, f"sources[{i}]") for i, s in enumerate(sources))
    betas = _get(doc, "betas", "", [1.0] * (n - 1))
    if isinstance(betas, (int, float)) and not isinstance(betas, bool):
        betas = [betas] * (n - 1)
    if not isinstance(betas, list) or len(betas) != n - 1:
        raise ConfigError(f"betas: expected a list of {n - 1} numbers")
    betas = tuple(_unit(b, f"betas[{i}]") for i, b in enumerate(betas))
    mu = _unit(_get(doc, "mu", "", 1.0), "mu")
    nu = _unit(_get(doc, "nu", "", 1.0), "nu")
    names = ("m0", "m1", "n0", "n1")
    given = [k for k in names if k in doc]
    if given and len(given) != 4:
        raise ConfigError(f"{[k for k in names if k not in doc][0]}: give all four directions or none")
    dirs = {k: _parse_direction(doc[k], k) for k in given}
    return NetworkSpec(n, parsed, betas, mu, nu, **dirs), bool(given)


def parse_query(doc: dict, args) -> pers.PersistencyQuery:
    scenario = _get(doc, "scenario", "")
    if scenario not in pers.SCENARIO_PARAMS:
        raise ConfigError(f"scenario: unknown scenario {scenario!r}")
    params = _get(doc, "params", "", {})
    if not isinstance(params, dict):
        raise ConfigError("params: expected an object")
    params = {k: _unit(v, f"params.{k}") for k, v in params.items()}
    margin, n_cap = _margin_and_cap(doc, args)
    try:
        return pers.PersistencyQuery(scenario, params, margin, n_cap)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from None


def _margin_and_cap(doc: dict, args) -> tuple[float, int]:
    margin = args.margin if args.margin is not None else _number(doc.get("margin", 0.0), "margin")
    n_cap = args.n_cap if args.n_cap is not None else doc.get("n_cap", pers.DEFAULT_N_CAP)
    if not margin >= 0:
        raise ConfigError(f"margin: must be >= 0, got {margin}")
    if isinstance(n_cap, bool) or not isinstance(n_cap, int) or n_cap < 2:
        raise ConfigError(f"n_cap: expected an integer >= 2, got {n_cap!r}")
    return margin, n_cap


def _parse_axis(key: str, spec, grid_step: float | None) -> list[float]:
    where = f"grid.{key}"
    if isinstance(spec, list):
        if grid_step is not None:
            raise ConfigError(f"{where}: --grid-step only applies to start/stop ranges")
        vals = [_unit(v, f"{where}[{i}]") for i, v in enumerate(spec)]
    elif isinstance(spec, dict):
        start = _unit(_get(spec, "start", where), f"{where}.start")
        stop = _unit(_get(spec, "stop", where), f"{where}.stop")
        step = grid_step if grid_step is not None else _number(_get(spec, "step", where), f"{where}.step")
        if step <= 0 or stop < start:
            raise ConfigError(f"{where}: need start <= stop and step > 0")
        vals = pers.grid_values(start, stop, step)
    else:
        raise ConfigError(f"{where}: expected a list or a start/stop/step object")
    if not vals:
        raise ConfigError(f"{where}: empty grid axis")
    return vals


# ---------------------------------------------------------------------------
# commands


def _directions_doc(dirs) -> dict:
    return {k: [float(x) for x in d.v] for k, d in zip(("m0", "m1", "n0", "n1"), dirs)}


def cmd_detect(doc: dict, args) -> tuple[dict, list[dict], int]:
    spec, has_dirs = parse_network(doc)
    margin = args.margin if args.margin is not None else _number(doc.get("margin", 0.0), "margin")
    if margin < 0:
        raise ConfigError(f"margin: must be >= 0, got {margin}")
    report = detect_closed(spec)
    detected = report.closed_lhs > 1.0 + margin
    out = {
        "command": "detect",
        "n": spec.n,
        "I": report.I,
        "J": report.J,
        "S": report.S,
        "closed_lhs": report.closed_lhs,
        "detected": detected,
        "margin": report.closed_lhs - 1.0 - margin,
        "reason": report.reason,
        "scenario_lhs": report.scenario_lhs,
    }
    oracle_mode = doc.get("oracle", "auto")
    if oracle_mode not in ("auto", "always", "never"):
        raise ConfigError(f"oracle: expected 'auto', 'always' or 'never', got {oracle_mode!r}")
    if oracle_mode == "always" or (oracle_mode == "auto" and spec.n <= FULL_ORACLE_MAX_N):
        if has_dirs:
            i_val, j_val = compute_IJ_full(spec)
            oracle = {"settings": "given", "I": i_val, "J": j_val, "S": bell_quantity(i_val, j_val)}
        else:
            best = maximize_S(spec, align=True, path="full")
            oracle = {"settings": "optimized", "I": best.I, "J": best.J, "S": best.S,
                      "aligned": True, "directions": _directions_doc(best.directions)}
        out["oracle"] = oracle
    row = {k: out[k] for k in ("n", "I", "J", "S", "closed_lhs", "detected", "margin", "reason")}
    return out, [row], EXIT_OK


def _result_doc(r: pers.PersistencyResult) -> dict:
    return {"P": r.P, "n_real": r.n_real, "bounded": r.bounded, "tie": r.tie}


def cmd_persistency(doc: dict, args) -> tuple[dict, list[dict], int]:
    q = parse_query(doc, args)
    r = pers.persistency(q)
    out = {
        "command": "persistency",
        "scenario": q.scenario,
        "params": dict(q.params),
        "margin": q.margin,
        "n_cap": q.n_cap,
        **_result_doc(r),
        "lhs_trace": [[n, v] for n, v in r.lhs_trace],
    }
    row = {**q.params, "P": r.P, "n_real": r.n_real, "bounded": r.bounded}
    return out, [row], EXIT_OK


def cmd_sweep(doc: dict, args) -> tuple[dict, list[dict], int]:
    scenario = _get(doc, "scenario", "")
    if scenario not in pers.SCENARIO_PARAMS:
        raise ConfigError(f"scenario: unknown scenario {scenario!r}")
    grid_doc = _get(doc, "grid", "")
    if not isinstance(grid_doc, dict) or not 1 <= len(grid_doc) <= 2:
        raise ConfigError("grid: expected an object with one or two axes")
    grid = {key: _parse_axis(key, spec, args.grid_step) for key, spec in grid_doc.items()}
    fixed = _get(doc, "params", "", {})
    if not isinstance(fixed, dict):
        raise ConfigError("params: expected an object")
    fixed = {k: _unit(v, f"params.{k}") for k, v in fixed.items()}
    seeded = dict(fixed)
    for key, vals in grid.items():
        for name in pers._expand_key(key):
            if name in fixed:
                raise ConfigError(f"grid.{key}: parameter {name!r} is also fixed in params")
            seeded[name] = vals[0]
    margin, n_cap = _margin_and_cap(doc, args)
    try:
        template = pers.PersistencyQuery(scenario, seeded, margin, n_cap)
    except ValueError as exc:
        raise ConfigError(f"grid/params: {exc}") from None
    rows = pers.sweep(template, grid, workers=args.workers)
    table = [{**row.values, "P": row.result.P, "n_real": row.result.n_real,
              "bounded": row.result.bounded} for row in rows]
    out = {
        "command": "sweep",
        "scenario": scenario,
        "params": fixed,
        "axes": list(grid),
        "margin": margin,
        "n_cap": n_cap,
        "rows": table,
    }
    return out, table, EXIT_OK


def cmd_table1(doc: dict, args) -> tuple[dict, list[dict], int]:
    rows_doc = doc.get("rows")
    if rows_doc is None:
        rows = pers.TABLE1_ROWS
    else:
        if not isinstance(rows_doc, list):
            raise ConfigError("rows: expected a list")
        rows = []
        for i, r in enumerate(rows_doc):
            vals = {k: _unit(_get(r, k, f"rows[{i}]"), f"rows[{i}].{k}")
                    for k in ("alpha", "delta", "gamma", "mu", "nu", "beta")}
            printed = r.get("printed_P")
            if printed is not None and (isinstance(printed, bool) or not isinstance(printed, int)):
                raise ConfigError(f"rows[{i}].printed_P: expected an integer")
            rows.append(pers.TableRow(**vals, printed_P=printed))
    margin, n_cap = _margin_and_cap(doc, args)
    table = []
    consistent = True
    for cmp in pers.table1(rows, margin, n_cap):
        oracle = pers.oracle_check(cmp.row.query(margin, n_cap), cmp.computed_P)
        ok = cmp.computed_P == cmp.scan_P and oracle.get("consistent", True)
        consistent &= ok
        table.append({
            **{k: getattr(cmp.row, k) for k in ("alpha", "delta", "gamma", "mu", "nu", "beta")},
            "computed_P": cmp.computed_P,
            "printed_P": cmp.row.printed_P,
            "agree": cmp.agrees,
            "scan_P": cmp.scan_P,
            "n_real": cmp.result.n_real,
            "oracle_S_at_P": oracle.get("S_at_P"),
            "closed_lhs_at_P_plus_1": oracle.get("closed_lhs_at_P_plus_1"),
            "consistent": ok,
        })
    out = {"command": "table1", "margin": margin, "n_cap": n_cap, "rows": table,
           "consistent": consistent}
    return out, table, EXIT_OK if consistent else EXIT_FAIL


def cmd_verify(doc: dict, args) -> tuple[dict, list[dict], int]:
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed: expected a non-negative integer, got {seed!r}")
    tol_doc = doc.get("tolerances", {})
    if not isinstance(tol_doc, dict):
        raise ConfigError("tolerances: expected an object")
    tolerances = dict(DEFAULT_TOLERANCES)
    for k, v in tol_doc.items():
        if k not in tolerances:
            raise ConfigError(f"tolerances.{k}: unknown tolerance")
        v = _number(v, f"tolerances.{k}")
        if not v > 0:
            raise ConfigError(f"tolerances.{k}: must be positive, got {v}")
        tolerances[k] = v
    count = doc.get("specs", 10)
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ConfigError(f"specs: expected a positive integer, got {count!r}")
    points = doc.get("points", 10)
    if isinstance(points, bool) or not isinstance(points, int) or points < 2:
        raise ConfigError(f"points: expected an integer >= 2, got {points!r}")
    results = run_suites(seed=seed, tolerances=tolerances, specs=count, points=points)
    table = [{"suite": r.name, "passed": r.passed, "total": r.total, "ok": r.ok} for r in results]
    ok = all(r.ok for r in results)
    out = {"command": "verify", "seed": seed, "tolerances": tolerances, "suites": table, "ok": ok}
    return out, table, EXIT_OK if ok else EXIT_FAIL


HANDLERS = {
    "detect": cmd_detect,
    "persistency": cmd_persistency,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "table1": cmd_table1,
}
INPUT_REQUIRED = {"detect", "persistency", "sweep"}


# ---------------------------------------------------------------------------
# output


def _clean(value):
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        return _clean(value.item())
    return value


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render(document: dict, rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_clean(document), indent=2) + "\n"
    buf = io.StringIO()
    header = list(rows[0]) if rows else []
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(row.get(k)) for k in header])
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nlocal", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--input", type=Path, help="JSON config document")
    p.add_argument("--output", type=Path, help="output file (default: standard output)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, help="seed for the randomised verification suites")
    p.add_argument("--n-cap", type=int, dest="n_cap", help="largest chain length searched")
    p.add_argument("--margin", type=float, help="detection margin: detected iff LHS > 1 + margin")
    p.add_argument("--grid-step", type=float, dest="grid_step", help="step for start/stop sweep axes")
    p.add_argument("--workers", type=int, default=None, help="parallel sweep workers")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.input is None:
            if args.command in INPUT_REQUIRED:
                raise ConfigError(f"--input: required for {args.command}")
            doc = {}
        else:
            try:
                doc = json.loads(args.input.read_text())
            except OSError as exc:
                raise ConfigError(f"--input: {exc}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"--input: invalid JSON ({exc})") from None
            if not isinstance(doc, dict):
                raise ConfigError("--input: top level must be an object")
        if args.margin is not None and not args.margin >= 0:
            raise ConfigError(f"--margin: must be >= 0, got {args.margin}")
        if args.n_cap is not None and args.n_cap < 2:
            raise ConfigError(f"--n-cap: must be >= 2, got {args.n_cap}")
        if args.grid_step is not None and not args.grid_step > 0:
            raise ConfigError(f"--grid-step: must be positive, got {args.grid_step}")
        _check_keys(doc, args.command)
        document, rows, code = HANDLERS[args.command](doc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE

    text = render(document, rows, args.format)
    if args.output is None:
        sys.stdout.write(text)
    else:
        args.output.write_text(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
