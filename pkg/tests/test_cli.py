import json

import numpy as np
import pytest

from delaycode import exponents as ex
from delaycode.cli import main
from delaycode.source_model import ternary_source


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_exponents_match_library(capsys):
    code, out, _ = run(capsys, "exponents", "--dist", "ternary065", "--rate", "1.5")
    assert code == 0
    header, row = out.strip().splitlines()
    vals = dict(zip(header.split(","), map(float, row.split(","))))
    p = ternary_source()
    assert vals["E_upper_block"] == float(ex.format_value(ex.block_upper(p, 1.5)))
    assert vals["E_focusing"] == float(ex.format_value(ex.focusing_bound(p, 1.5)))
    assert vals["critical_rate"] == pytest.approx(1.509, abs=0.002)


def test_exponents_from_file(capsys, tmp_path):
    f = tmp_path / "ternary065.json"
    f.write_text(json.dumps({"x_size": 3, "y_size": 1, "probs": [0.65, 0.175, 0.175]}))
    code, out, _ = run(capsys, "exponents", "--dist", str(f), "--rate", "1.5", "--format", "json")
    assert code == 0
    assert json.loads(out)["E_upper_block"] == pytest.approx(ex.block_upper(ternary_source(), 1.5))


def test_rate_below_entropy_gives_zeros(capsys):
    code, out, _ = run(capsys, "exponents", "--rate", "1.0", "--format", "json")
    obj = json.loads(out)
    assert code == 0
    assert all(obj[k] == 0 for k in ("E_lower_block", "E_upper_block", "E_focusing", "E_si_upper"))


def test_malformed_json_exit_2(capsys):
    code, _, err = run(capsys, "exponents", "--dist", "{not json", "--rate", "1.5")
    assert code == 2 and "error" in err


def test_bad_flag_exit_2(capsys):
    code, _, _ = run(capsys, "exponents", "--rate")
    assert code == 2


def test_curves_row_count(capsys, tmp_path):
    out = tmp_path / "c.csv"
    code, _, _ = run(capsys, "curves", "--grid", "1.3:1.58:7", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(ex.CSV_HEADER)
    assert len(lines) == 8


def test_curves_bad_grid(capsys):
    code, _, _ = run(capsys, "curves", "--grid", "1.5:1.3:4")
    assert code == 2


def test_simulate_deterministic(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scheme": "prefix", "dist": "ternary065", "rate_num": 3,
                               "rate_den": 2, "delays": [5, 9], "trials": 2,
                               "symbols_per_trial": 20000, "seed": 42}))
    a = run(capsys, "simulate", str(cfg))[1]
    monkeypatch.setenv("DELAYCODE_THREADS", "1")
    b = run(capsys, "simulate", str(cfg))[1]
    assert a == b
    assert a.splitlines()[0].startswith("scheme,rate_num,rate_den,delta")


def test_simulate_zero_errors_at_full_rate(capsys):
    code, out, _ = run(capsys, "simulate", "--rate", "2/1", "--delays", "3,5", "--trials", "1",
                       "--symbols", "10000")
    assert code == 0
    assert all(line.split(",")[4] == "0" for line in out.strip().splitlines()[1:])


def test_simulate_unknown_scheme(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scheme": "magic"}))
    assert run(capsys, "simulate", str(cfg))[0] == 2


def test_queue_report(capsys):
    code, out, _ = run(capsys, "queue", "--delays", "3,5")
    obj = json.loads(out)
    assert code == 0 and obj["Z"] == pytest.approx(0.228, abs=5e-4)
    assert [d["delta"] for d in obj["delays"]] == [3, 5]


def test_repro_json_subset(capsys):
    code, out, _ = run(capsys, "repro", "--json", "--only", "1,2,4,9")
    rows = json.loads(out)
    assert code == 0
    assert [r["id"] for r in rows] == [1, 2, 4, 9]
    assert all({"criterion", "expected", "got", "tol", "pass"} <= set(r) for r in rows)


def test_repro_perturbed_source_fails_cleanly(capsys):
    code, out, _ = run(capsys, "repro", "--a", "0.60", "--only", "3")
    assert code == 1
    assert "FAIL" in out and "min_ratio" in out
