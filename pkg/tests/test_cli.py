import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from kreintrace.cli import main

RUN = [sys.executable, "-m", "kreintrace.cli"]


def run_cli(args, **kw):
    return subprocess.run(RUN + args, capture_output=True, text=True, **kw)


def test_mu_water_wave_matches_closed_form(tmp_path):
    out = tmp_path / "mu.csv"
    code = main(["mu", "--builtin", "water_wave", "--lambda-min", "0.01",
                 "--lambda-max", "100", "--points", "25",
                 "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "lambda,mu,bracket_lo,bracket_hi,truncation_Y"
    for ln in lines[1:]:
        lam, mu, lo, hi, _ = (float(t) for t in ln.split(","))
        ref = math.sqrt(lam) * math.tanh(math.sqrt(lam))
        assert abs(mu - ref) <= 1e-6 * ref
        assert lo <= mu <= hi
    manifest = json.loads((tmp_path / "mu.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "mu"
    assert manifest["config"]["builtin"] == "water_wave"


def test_mu_zero_string_all_zero(capsys):
    assert main(["mu", "--builtin", "zero", "--points", "25"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()[1:]
    assert all(float(r.split(",")[1]) == 0.0 for r in rows)


def test_seventeen_digit_roundtrip(capsys):
    assert main(["mu", "--builtin", "quasi_relativistic", "--lambda-min",
                 "0.37", "--lambda-max", "0.37", "--points", "1"]) == 0
    row = capsys.readouterr().out.strip().splitlines()[1]
    lam = float(row.split(",")[0])
    assert lam == 0.37  # 17 significant digits round-trip floats exactly


def test_json_mirrors_csv(tmp_path):
    a = tmp_path / "t.csv"
    b = tmp_path / "t.json"
    args = ["mu", "--builtin", "unit_zero", "--points", "3"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--format", "json", "--out", str(b)]) == 0
    rows_csv = a.read_text().strip().splitlines()
    rows_json = json.loads(b.read_text())["rows"]
    assert len(rows_json) == len(rows_csv) - 1
    header = rows_csv[0].split(",")
    for ln, obj in zip(rows_csv[1:], rows_json):
        for name, tok in zip(header, ln.split(",")):
            assert float(obj[name]) == float(tok)


def test_exit_codes():
    assert main(["mu", "--builtin", "not_a_string"]) == 2
    assert main(["string"]) == 2                       # neither source given
    assert main(["fraclap", "--alpha", "2.7", "--grid-n", "16"]) == 2
    proc = run_cli(["--bogus-flag"])
    assert proc.returncode == 64
    proc = run_cli(["mu", "--builtin", "zero", "--points", "not_an_int"])
    assert proc.returncode == 64


def test_exit_code_convergence(monkeypatch, tmp_path):
    import kreintrace.krein as kr
    monkeypatch.setattr(kr, "_MAX_STEPS", 10)
    kr._spectral_mu_cached.cache_clear()
    code = main(["mu", "--builtin", "quasi_relativistic", "--points", "1",
                 "--lambda-min", "1.0", "--lambda-max", "1.0"])
    kr._spectral_mu_cached.cache_clear()
    assert code == 3


def test_string_subcommand_roundtrip(tmp_path, capsys):
    spec = tmp_path / "s.json"
    assert main(["string", "--builtin", "sqrt_shift"]) == 0
    text = capsys.readouterr().out
    spec.write_text(text)
    assert main(["mu", "--string", str(spec), "--points", "1",
                 "--lambda-min", "3.0", "--lambda-max", "3.0"]) == 0
    row = capsys.readouterr().out.strip().splitlines()[1]
    assert float(row.split(",")[1]) == pytest.approx(2.0, rel=1e-6)


def test_string_file_digest_in_manifest(tmp_path):
    spec = tmp_path / "s.json"
    from kreintrace.strings import builtin
    spec.write_text(builtin("water_wave").to_json())
    out = tmp_path / "mu.csv"
    assert main(["mu", "--string", str(spec), "--points", "1",
                 "--out", str(out)]) == 0
    man = json.loads((tmp_path / "mu.csv.manifest.json").read_text())
    assert str(spec) in man["input_digests"]
    assert len(man["input_digests"][str(spec)]) == 64


def test_rerun_reproduces_bytes(tmp_path):
    args = ["trace-cf", "--builtin", "water_wave", "--xi", "1.0",
            "--s", "0.3", "--paths", "400", "--dt", "1e-3",
            "--horizon", "10", "--seed", "5", "--workers", "2"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    ma = (tmp_path / "a.csv.manifest.json").read_text()
    mb = (tmp_path / "b.csv.manifest.json").read_text()
    assert json.loads(ma)["config"] == json.loads(mb)["config"]


def test_trace_cf_header_and_theory(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["trace-cf", "--builtin", "zero", "--xi", "1.0",
                 "--s", "0.5", "--paths", "200", "--dt", "1e-3",
                 "--horizon", "30", "--seed", "1", "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == ("string,xi,s,estimate,stderr,theory,abs_err,"
                        "n_paths,dt,excluded_frac")
    row = lines[1].split(",")
    assert row[0] == "zero"
    assert float(row[3]) == 1.0 and float(row[5]) == 1.0


def test_seed_env_fallback_and_flag_priority(tmp_path, monkeypatch):
    monkeypatch.setenv("KT_SEED", "77")
    out1 = tmp_path / "env.csv"
    assert main(["walk", "--dim", "1", "--j", "1", "--xi", "0.9",
                 "--paths", "300", "--steps", "20000",
                 "--out", str(out1)]) == 0
    man = json.loads((tmp_path / "env.csv.manifest.json").read_text())
    assert man["seed"] == 77
    out2 = tmp_path / "flag.csv"
    assert main(["walk", "--dim", "1", "--j", "1", "--xi", "0.9",
                 "--paths", "300", "--steps", "20000", "--seed", "3",
                 "--out", str(out2)]) == 0
    man2 = json.loads((tmp_path / "flag.csv.manifest.json").read_text())
    assert man2["seed"] == 3


def test_walk_csv_schema(tmp_path):
    out = tmp_path / "w.csv"
    assert main(["walk", "--dim", "2", "--j", "1", "--xi", "0.5,0.25",
                 "--paths", "500", "--steps", "40000", "--seed", "2",
                 "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "d,j,xi0,xi1,closed_form_re,estimate,stderr"


def test_extend_and_dtn_grid_output(tmp_path, capsys):
    assert main(["extend", "--builtin", "half_laplacian", "--y", "0.5",
                 "--function", "cos", "--mode-k", "2", "--grid-n", "32",
                 "--box-l", "3.141592653589793"]) == 0
    text = capsys.readouterr().out
    lines = text.strip().splitlines()
    assert lines[0] == "index0,value"
    vals = np.asarray([float(r.split(",")[1]) for r in lines[1:]])
    x = -np.pi + (2 * np.pi / 32) * np.arange(32)
    ref = math.exp(-2 * 0.5) * np.cos(2 * x)
    assert np.max(np.abs(vals - ref)) < 1e-12


def test_fraclap_compare_mode(capsys):
    assert main(["fraclap", "--alpha", "1.0", "--mode", "compare",
                 "--grid-n", "512", "--box-l", "20"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "alpha,rel_l2_error"
    assert float(out[1].split(",")[1]) < 2e-3


def test_poisson_modes(capsys):
    assert main(["poisson", "--mode", "eval", "--alpha", "1.0",
                 "--y-height", "1.0", "--x", "0.0"]) == 0
    val = float(capsys.readouterr().out.strip().splitlines()[1].split(",")[-1])
    assert val == pytest.approx(1.0 / math.pi, rel=1e-12)
    assert main(["poisson", "--mode", "fourier", "--alpha", "1.0",
                 "--modes", "4"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()[1:]
    for r in rows:
        _, tr, tgt = (float(t) for t in r.split(","))
        assert abs(tr - tgt) < 1e-6


def test_energy_subcommand(capsys):
    assert main(["energy", "--builtin", "half_laplacian", "--function",
                 "cos", "--mode-k", "3", "--grid-n", "32", "--box-l",
                 "3.141592653589793", "--y-max", "9.3",
                 "--y-points", "100"]) == 0
    row = capsys.readouterr().out.strip().splitlines()[1]
    assert float(row.split(",")[2]) < 0.01
