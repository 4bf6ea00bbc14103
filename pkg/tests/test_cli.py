import numpy as np
import pytest

from kae.cli import main, parse_kernel
from kae.errors import SpecError
from kae.kernels import ScalarKernelSpec


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_kernel():
    assert parse_kernel("gaussian:0.5") == ScalarKernelSpec.gaussian(0.5)
    assert parse_kernel("poly:1,0.5,3") == ScalarKernelSpec.polynomial(1.0, 0.5, 3)
    assert parse_kernel("linear") == ScalarKernelSpec.linear()
    assert parse_kernel("gaussian:median") == "median"
    for bad in ("gaussian", "gaussian:-1", "poly:1,2", "rbf:1"):
        with pytest.raises(SpecError):
            parse_kernel(bad)


def test_k2ae_workflow(tmp_path, capsys):
    data, model = tmp_path / "x.csv", tmp_path / "m.json"
    assert run(capsys, "gen-data", "--kind", "circles", "--n-per-cluster", 10, "--out", data,
               "--labels", tmp_path / "y.csv")[0] == 0
    argv = ["fit", "--mode", "k2ae", "--data", data, "--layers", "1", "--kernel", "gaussian:median",
            "--lambda", "0,0.01", "--epochs", 5, "--step", 1e-3, "--init", "uniform", "--out", model]
    code, out, _ = run(capsys, *argv)
    assert code == 0 and "distortion=" in out
    trace = (tmp_path / "trace.csv").read_text().splitlines()
    assert trace[0] == "epoch,total,distortion,norm1,norm2" and len(trace) == 7
    first = model.read_bytes()
    assert run(capsys, *argv)[0] == 0
    assert model.read_bytes() == first

    X = np.loadtxt(data, delimiter=",")
    np.savetxt(tmp_path / "kt.csv", X[:4] @ X.T, delimiter=",", fmt="%.17g")
    np.savetxt(tmp_path / "kd.csv", np.sum(X[:4] ** 2, 1), fmt="%.17g")
    code, out, _ = run(capsys, "encode", "--model", model, "--gram-test", tmp_path / "kt.csv",
                       "--gram-test-diag", tmp_path / "kd.csv")
    assert code == 0 and len(out.splitlines()) == 4
    code, out, err = run(capsys, "test-distortion", "--model", model, "--gram-test", tmp_path / "kt.csv",
                         "--gram-test-diag", tmp_path / "kd.csv", "--out", tmp_path / "td.csv")
    assert code == 0 and err.startswith("mean=")
    assert np.loadtxt(tmp_path / "td.csv").shape == (4,)


def test_finite_workflow(tmp_path, capsys):
    data, model = tmp_path / "g.csv", tmp_path / "f.json"
    run(capsys, "gen-data", "--kind", "gaussians", "--clusters", 2, "--n-per-cluster", 5, "--out", data)
    code, _, _ = run(capsys, "fit", "--data", data, "--layers", "1,1", "--kernel", "gaussian:1",
                     "--kernel", "poly:1,1,1", "--lambda", "0.01", "--epochs", 3, "--step", 0.01,
                     "--out", model, "--trace", tmp_path / "t.csv")
    assert code == 0
    code, out, _ = run(capsys, "reconstruct", "--model", model, "--data", data)
    assert code == 0 and len(out.splitlines()) == 10
    code, out, _ = run(capsys, "encode", "--model", model, "--data", data)
    assert code == 0 and len(out.splitlines()) == 10


def test_kpca_and_toy(tmp_path, capsys):
    np.savetxt(tmp_path / "K.csv", np.diag([4.0, 1.0, 0.0]), delimiter=",")
    code, out, _ = run(capsys, "kpca", "--gram", tmp_path / "K.csv", "--components", 1)
    assert code == 0 and [float(v) for v in out.split()] == [2.0, 0.0, 0.0]
    code, out, err = run(capsys, "kpca", "--gram", tmp_path / "K.csv", "--components", 1, "--closed-form")
    assert code == 0 and err.strip() == "distortion=1"
    code, out, _ = run(capsys, "toy", "--size", 3, "--lambda", 0.1, "--mu", 0.1)
    lines = out.splitlines()
    assert lines[0] == "phi,psi,value" and len(lines) == 10
    assert lines[5] == "0,0,1"


def test_gradcheck(capsys):
    code, out, _ = run(capsys, "gradcheck", "--backend", "python", "--no-jacobian")
    assert code == 0
    value = float(out.split("max_relative_error_gradient=")[1].split()[0])
    assert value <= 1e-5


@pytest.mark.parametrize("argv, tag", [
    (["bogus"], "usage"),
    (["fit", "--layers", "x", "--out", "m.json", "--data", "missing.csv"], "spec"),
    (["kpca", "--gram", "missing.csv", "--components", "1"], "io"),
])
def test_errors_are_single_line(tmp_path, capsys, monkeypatch, argv, tag):
    monkeypatch.chdir(tmp_path)
    code, out, err = run(capsys, *argv)
    assert code != 0
    assert err.startswith(f"kae-error[{tag}]: ") and err.count("\n") == 1


def test_error_codes_from_library(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("1,2\n3\n")
    code, _, err = run(capsys, "kpca", "--gram", tmp_path / "bad.csv", "--components", 1)
    assert code == 1 and err.startswith("kae-error[parse]: ") and "line 2" in err
    np.savetxt(tmp_path / "K.csv", np.eye(2), delimiter=",")
    code, _, err = run(capsys, "kpca", "--gram", tmp_path / "K.csv", "--components", 3)
    assert err.startswith("kae-error[rank]: ")
