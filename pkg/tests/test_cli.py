import subprocess
import sys

import pytest

from minigibbs.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from minigibbs.factor_graph import write_graph
from minigibbs.model_zoo import make_ising_chain


@pytest.fixture
def chain_file(tmp_path):
    p = tmp_path / "chain.txt"
    write_graph(make_ising_chain(2, 2.5), p)
    return str(p)


def test_stats(capsys):
    assert main(["stats", "--model", "ising", "--grid", "20", "--beta", "1.0"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Psi=416.144 L=2.21208 Delta=399" in out


def test_stats_exports_graph(tmp_path, capsys):
    p = tmp_path / "potts.txt"
    assert main(["stats", "--model", "potts", "--grid", "2", "--domain", "3", "--out", str(p)]) == EXIT_OK
    assert main(["stats", "--graph-file", str(p)]) == EXIT_OK
    first, second = capsys.readouterr().out.split("n=")[1:]
    assert first == second


def test_sample_to_stdout(capsys):
    assert main(["sample", "--model", "ising", "--grid", "3", "--sampler", "mgpmh", "--lambda", "2",
                 "--iters", "300", "--stride", "100", "--seed", "4"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "iteration,marginal_error,factor_evals"
    assert [int(l.split(",")[0]) for l in lines[1:]] == [100, 200, 300]


def test_sample_deterministic(tmp_path):
    args = ["sample", "--model", "potts", "--grid", "3", "--domain", "4", "--sampler", "double-min",
            "--lambda", "2", "--lambda2", "6", "--iters", "2000", "--stride", "250"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("argv", [
    ["sample", "--model", "ising", "--sampler", "gibbs", "--lambda", "3"],
    ["sample", "--model", "ising", "--sampler", "local"],
    ["sample", "--model", "ising", "--sampler", "double-min", "--lambda", "3"],
    ["sample", "--model", "ising", "--sampler", "bogus"],
    ["sample", "--sampler", "gibbs"],
    ["sample", "--model", "ising", "--sampler", "gibbs", "--iters", "-5"],
    ["stats", "--model", "ising", "--grid", "0"],
    ["stats", "--model", "ising", "--graph-file", "x"],
    ["frobnicate"],
    [],
])
def test_config_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_malformed_graph_file_is_config_error(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("2 2\n1\n1 5\n0 0\n")
    assert main(["stats", "--graph-file", str(p)]) == EXIT_CONFIG


def test_missing_file_is_runtime_error(tmp_path, capsys):
    assert main(["stats", "--graph-file", str(tmp_path / "missing.txt")]) == EXIT_RUNTIME
    assert "I/O error" in capsys.readouterr().err


def test_unwritable_output(tmp_path, capsys):
    out = tmp_path / "no" / "such" / "dir.csv"
    assert main(["sample", "--model", "ising", "--grid", "2", "--sampler", "gibbs", "--iters", "10",
                 "--out", str(out)]) == EXIT_RUNTIME


def test_verify(chain_file, capsys):
    assert main(["verify", "--graph-file", chain_file, "--delta", "0.3", "--trials", "20000"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "chain,gamma_bar,gamma,bound_factor,satisfied"
    assert len(lines) == 1 + 1 + 2 + 2
    assert all(l.endswith(",true") for l in lines[1:])


def test_verify_precondition_is_runtime_error(chain_file, capsys):
    assert main(["verify", "--graph-file", chain_file, "--lambda", "0.1", "--trials", "100"]) == EXIT_RUNTIME
    assert "PreconditionError" in capsys.readouterr().err


def test_verify_too_large_is_runtime_error(capsys):
    assert main(["verify", "--model", "ising", "--grid", "4", "--trials", "100"]) == EXIT_RUNTIME


def test_cost(capsys):
    assert main(["cost", "--model", "ising", "--grid", "3", "--sampler", "gibbs", "--sampler", "local",
                 "--batch-size", "3", "--iters", "500"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].startswith("gibbs,500,16,") and lines[2].startswith("local,500,6,")


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "minigibbs", "stats", "--model", "ising", "--grid", "2"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "Delta=3" in r.stdout
