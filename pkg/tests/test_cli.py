import csv
import io
import json
import math
from pathlib import Path

import pytest

from nlocal.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(args, capsys):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def phase_chain(n):
    return {
        "n": n,
        "sources": [{"gate": {"alpha": 1.0, "delta": 1.0}, "channel": {"kind": "phase", "gamma": 0.1, "xi": 0.1}}],
        "betas": 0.92,
        "mu": 0.94,
        "nu": 0.93,
    }


def test_detect_bell_pairs(capsys):
    code, out, _ = run(["detect", "--input", CONFIGS / "detect.json"], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["detected"] is True
    assert doc["closed_lhs"] == pytest.approx(math.sqrt(2), abs=1e-12)
    assert doc["oracle"]["settings"] == "optimized"
    assert doc["oracle"]["S"] == pytest.approx(math.sqrt(2), abs=1e-9)


@pytest.mark.parametrize("n, detected", [(4, True), (5, False)])
def test_detect_phase_chain(tmp_path, capsys, n, detected):
    code, out, _ = run(["detect", "--input", write(tmp_path, phase_chain(n))], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["detected"] is detected
    assert doc["oracle"]["S"] == pytest.approx(doc["closed_lhs"], abs=1e-4)


def test_detect_zero_beta(tmp_path, capsys):
    cfg = {"n": 3, "sources": [{"state": "phi-"}], "betas": [1.0, 0.0]}
    code, out, _ = run(["detect", "--input", write(tmp_path, cfg)], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["detected"] is False
    assert doc["reason"] == "zero-fidelity detector"


def test_detect_given_directions(capsys):
    code, out, _ = run(["detect", "--input", CONFIGS / "detect-explicit.json"], capsys)
    doc = json.loads(out)
    assert doc["oracle"]["settings"] == "given"
    assert doc["oracle"]["S"] == pytest.approx(doc["S"], abs=1e-12)


def test_detect_margin_flag(capsys):
    code, out, _ = run(["detect", "--input", CONFIGS / "detect.json", "--margin", "0.5"], capsys)
    doc = json.loads(out)
    assert doc["detected"] is False
    assert doc["margin"] == pytest.approx(math.sqrt(2) - 1.5)


def test_persistency_anchor(capsys):
    code, out, _ = run(["persistency", "--input", CONFIGS / "persistency.json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["P"] == 4
    assert doc["n_real"] == pytest.approx(4.567, abs=1e-3)
    assert doc["bounded"] is True


def test_persistency_csv(capsys):
    code, out, _ = run(["persistency", "--input", CONFIGS / "persistency.json", "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["alpha", "delta", "P", "n_real", "bounded"]
    assert rows[0]["P"] == "4" and rows[0]["bounded"] == "true"
    assert float(rows[0]["n_real"]) == pytest.approx(4.567288059052316, rel=1e-12)


def test_unbounded_is_reported(tmp_path, capsys):
    cfg = {"scenario": "channel-ph", "params": {"gamma": 0.3}}
    code, out, _ = run(["persistency", "--input", write(tmp_path, cfg), "--n-cap", "1000"], capsys)
    doc = json.loads(out)
    assert doc["P"] is None and doc["bounded"] is False and doc["n_cap"] == 1000
    code, out, _ = run(["persistency", "--input", write(tmp_path, cfg), "--margin", "0.01"], capsys)
    assert json.loads(out)["P"] == 10


def test_fig4_sweep_csv(capsys):
    code, out, _ = run(["sweep", "--input", CONFIGS / "sweep-fig4.json", "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and list(rows[0]) == ["mu=nu", "beta", "P", "n_real", "bounded"]
    table = {(float(r["mu=nu"]), float(r["beta"])): (int(r["P"]) if r["P"] else math.inf) for r in rows}
    assert table[(0.9, 0.9)] == 5
    for (m, b), p in table.items():
        for nm, nb in ((m - 0.05, b), (m, b - 0.05)):
            key = (round(nm, 12), round(nb, 12))
            if key in table:
                assert table[key] <= p


def test_fig2_sweep_contains_anchor(capsys):
    code, out, _ = run(["sweep", "--input", CONFIGS / "sweep-fig2.json", "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 16 * 16
    (anchor,) = [r for r in rows if r["alpha"] == "0.9" and r["delta"] == "0.9"]
    assert anchor["P"] == "4"


def test_grid_step_override(capsys):
    code, out, _ = run(["sweep", "--input", CONFIGS / "sweep-fig3.json", "--grid-step", "0.1"], capsys)
    doc = json.loads(out)
    assert [r["gamma"] for r in doc["rows"]] == [round(0.1 * i, 12) for i in range(11)]
    assert doc["rows"][1]["P"] == 6


def test_table1_report(capsys):
    code, out, _ = run(["table1", "--input", CONFIGS / "table1.json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["consistent"]
    rows = doc["rows"]
    assert len(rows) == 4
    assert [r["agree"] for r in rows] == [True, False, False, False]
    assert [r["printed_P"] for r in rows] == [4, 7, 9, 4]
    assert all(r["computed_P"] == r["scan_P"] for r in rows)
    code2, out2, _ = run(["table1"], capsys)
    assert json.loads(out2)["rows"] == rows


def test_verify_default(capsys):
    code, out, _ = run(["verify"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["ok"]
    assert {s["suite"] for s in doc["suites"]} == {
        "povm-channel", "scaling", "equivalence", "attainability", "upper-bound"
    }


def test_verify_seed_variation(tmp_path, capsys):
    cfg = write(tmp_path, {"specs": 3, "points": 3})
    verdicts = set()
    for seed in range(10):
        code, out, _ = run(["verify", "--input", cfg, "--seed", seed, "--format", "csv"], capsys)
        verdicts.add((code, out))
    assert len(verdicts) == 1 and verdicts.pop()[0] == 0


def test_verify_negative_tolerance(tmp_path, capsys):
    cfg = write(tmp_path, {"tolerances": {"scaling": -1e-10}})
    code, _, err = run(["verify", "--input", cfg], capsys)
    assert code == 2 and "tolerances.scaling" in err


@pytest.mark.parametrize(
    "command, doc, key",
    [
        ("persistency", {"scenario": "bogus", "params": {}}, "scenario"),
        ("persistency", {"scenario": "channel-ph", "params": {"gamma": 1.5}}, "params.gamma"),
        ("persistency", {"scenario": "channel-ph", "params": {"gamma": 0.1}, "ncap": 5}, "ncap"),
        ("detect", {"n": 2, "sources": [{"state": "phi-"}], "mu": 2}, "mu"),
        ("detect", {"n": 2, "sources": [{"state": "phi-"}, {"gate": {"alpha": "x"}}]}, "sources[1].gate.alpha"),
        ("detect", {"n": 2, "sources": [{"state": "phi-"}], "m0": [0, 0, 1]}, "m1"),
        ("detect", {"sources": [{"state": "phi-"}]}, "n"),
        ("sweep", {"scenario": "channel-amp", "grid": {"gamma": {"start": 0, "stop": 1}}}, "grid.gamma.step"),
        ("table1", {"rows": [{"alpha": 1}]}, "rows[0].delta"),
    ],
)
def test_config_errors_name_the_key(tmp_path, capsys, command, doc, key):
    code, out, err = run([command, "--input", write(tmp_path, doc)], capsys)
    assert code == 2 and out == ""
    assert key in err


def test_missing_and_malformed_input(tmp_path, capsys):
    assert run(["detect"], capsys)[0] == 2
    assert run(["detect", "--input", tmp_path / "absent.json"], capsys)[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["detect", "--input", bad], capsys)[0] == 2


def test_resource_cap_exit_code(tmp_path, capsys):
    cfg = {"n": 7, "sources": [{"state": "phi-"}], "oracle": "always"}
    code, out, err = run(["detect", "--input", write(tmp_path, cfg)], capsys)
    assert code == 3 and "n <= 6" in err
    cfg["oracle"] = "auto"
    code, out, _ = run(["detect", "--input", write(tmp_path, cfg)], capsys)
    assert code == 0 and "oracle" not in json.loads(out)


@pytest.mark.parametrize("config", sorted(p.name for p in CONFIGS.glob("*.json")))
def test_example_configs_are_deterministic(tmp_path, capsys, config):
    command = config.split(".")[0].split("-")[0]
    outputs = []
    for i in range(2):
        target = tmp_path / f"out{i}.json"
        code, _, _ = run([command, "--input", CONFIGS / config, "--output", target], capsys)
        assert code == 0
        outputs.append(target.read_bytes())
    assert outputs[0] == outputs[1]


def _floats(doc):
    if isinstance(doc, float):
        yield doc
    elif isinstance(doc, dict):
        for v in doc.values():
            yield from _floats(v)
    elif isinstance(doc, list):
        for v in doc:
            yield from _floats(v)


def test_json_floats_round_trip(capsys):
    code, out, _ = run(["detect", "--input", CONFIGS / "detect-gate-noise.json"], capsys)
    doc = json.loads(out)
    for x in _floats(doc):
        assert float(repr(x)) == x
    # a value with no short representation is printed in full
    assert len(repr(doc["closed_lhs"]).replace(".", "").lstrip("0")) >= 12
