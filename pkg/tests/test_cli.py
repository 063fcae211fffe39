import json
import subprocess
import sys
import time

import numpy as np
import pytest

from miest.cli import main
from miest.core import Dataset, renyi
from miest.io import write_csv
from miest.synthetic import case1_spec, oracle_mi, sample


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def case1_csv(tmp_path):
    p = tmp_path / "case1.csv"
    write_csv(sample(case1_spec(2), 400, seed=4), p)
    return p


def test_weights_two_minus_one(capsys):
    assert run("weights", "--N", 100, "--dx", 1, "--exact", "--L", "1,2") == 0
    doc = json.loads(capsys.readouterr().out)
    assert list(doc["weights"].values()) == [2.0, -1.0]


def test_weights_single_value_empty_basis(capsys):
    assert run("weights", "--N", 100, "--dx", 2, "--odin", "none", "--L", "1.5") == 0
    assert list(json.loads(capsys.readouterr().out)["weights"].values()) == [1.0]


def test_weights_eta_too_small():
    assert run("weights", "--N", 100, "--dx", 1, "--relaxed", "--eta", "0.01",
               "--L", "1,2,3") == 5


def test_weights_exact_infeasible():
    assert run("weights", "--N", 100, "--dx", 2, "--exact", "--L", "1,2") == 5


def test_renyi_needs_alpha(case1_csv):
    assert run("estimate", case1_csv, "--functional", "renyi") == 2


def test_bad_flags(case1_csv):
    assert run("estimate", case1_csv, "--l-min", "1.2") == 2
    assert run("estimate", case1_csv, "--ci", "1.5") == 2
    assert run("estimate", case1_csv, "--nonsense") == 2


def test_missing_file(tmp_path):
    assert run("estimate", tmp_path / "absent.csv") == 3


def test_estimate_case1(case1_csv, tmp_path, capsys):
    out = tmp_path / "r.json"
    assert run("estimate", case1_csv, "--functional", "renyi", "--alpha", "0.5",
               "--odin", "1", "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["case"] == "cont_disc" and np.isfinite(doc["estimate"])
    truth = oracle_mi(case1_spec(2), renyi(0.5), "quadrature").value
    assert abs(doc["estimate"] - truth) < 0.1
    assert "per-class values" in capsys.readouterr().out


def test_estimate_one_class_prints_one(tmp_path, capsys):
    p = tmp_path / "one.csv"
    rng = np.random.default_rng(0)
    write_csv(Dataset(x_cont=rng.random((100, 2)), y_disc=np.zeros(100, dtype=int)), p)
    assert run("estimate", p, "--functional", "renyi", "--alpha", "0.5",
               "--estimator", "plugin") == 0
    assert capsys.readouterr().out.splitlines()[0].split() == ["estimate", "1"]


def test_shannon_line(case1_csv, capsys):
    assert run("estimate", case1_csv, "--estimator", "plugin") == 0
    lines = dict(l.split(None, 1) for l in capsys.readouterr().out.splitlines()[:2])
    assert float(lines["shannon"].split()[-1]) == -float(lines["estimate"])


def test_strict_mode_exit_4(tmp_path):
    p = tmp_path / "sparse.csv"
    write_csv(Dataset(x_cont=[[0.0], [0.05], [0.5], [0.55]], y_disc=[0, 1, 0, 1]), p)
    assert run("estimate", p, "--estimator", "plugin", "--l", "0.3", "--strict") == 4


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_estimate_byte_identical(case1_csv, tmp_path, fmt):
    outs = []
    for k, threads in enumerate((1, 2)):
        out = tmp_path / f"r{k}.{fmt}"
        assert run("estimate", case1_csv, "--ci", "0.9", "--B", "50", "--seed", "11",
                   "--threads", threads, "--format", fmt, "--out", out) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_sample_and_oracle_reproducible(tmp_path, capsys):
    for k in range(2):
        assert run("sample", "--N", 50, "--d", 2, "--format", "bin", "--seed", 5,
                   "--out", tmp_path / f"s{k}.bin") == 0
    assert (tmp_path / "s0.bin").read_bytes() == (tmp_path / "s1.bin").read_bytes()
    assert run("oracle", "--d", 2, "--method", "mc", "--M", 10 ** 6, "--seed", 1,
               "--functional", "renyi", "--alpha", "0.5") == 0
    a = capsys.readouterr().out
    assert run("oracle", "--d", 2, "--method", "mc", "--M", 10 ** 6, "--seed", 1,
               "--functional", "renyi", "--alpha", "0.5") == 0
    assert capsys.readouterr().out == a
    assert run("oracle", "--d", 3, "--method", "quadrature") == 3
    assert run("oracle", "--M", 1000) == 2


def test_bench_malformed_plan(tmp_path, capsys):
    p = tmp_path / "plan.json"
    p.write_text('{\n  "trials": 1,\n  "seed": ,\n}')
    assert run("bench", p, "--out", tmp_path / "x") == 2
    assert "line 3 column" in capsys.readouterr().err


def test_bench_smoke_plan_under_a_minute(tmp_path):
    start = time.perf_counter()
    prefix = tmp_path / "smoke"
    assert run("bench", "smoke", "--out", prefix) == 0
    assert time.perf_counter() - start < 60
    for ext in ("csv", "json", "svg"):
        assert (tmp_path / f"smoke.{ext}").exists()
    again = tmp_path / "again"
    assert run("bench", "smoke", "--out", again, "--format", "json") == 0
    assert (tmp_path / "again.json").read_bytes() == (tmp_path / "smoke.json").read_bytes()


def test_selftest():
    assert run("selftest") == 0


@pytest.mark.parametrize("cmd", ["estimate", "weights", "oracle", "sample", "bench"])
def test_help_mentions_parameters(cmd):
    proc = subprocess.run([sys.executable, "-m", "miest", cmd, "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    if cmd in ("estimate", "weights"):
        for word in ("delta", "eta", "epsilon", "--L-count"):
            assert word in proc.stdout
