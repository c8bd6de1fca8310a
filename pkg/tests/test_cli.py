import json
import os
import subprocess
import sys

import pytest

from lamperti.cli import main, parse_step
from lamperti.models import PRESETS


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def config_line(path):
    first = path.read_text().splitlines()[0]
    assert first.startswith("# config: ")
    return json.loads(first[len("# config: "):])


def test_parse_step():
    assert parse_step("2^-5") == 2.0**-5
    assert parse_step("2**-9") == 2.0**-9
    assert parse_step("0.25") == 0.25


def test_simulate_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        code, _, _ = run(["simulate", "--model", "heston32", "--preset", "example-6.2", "--h", "0.25",
                          "--steps", "4", "--seed", "7", "--out", str(out)], capsys)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[1] == "t,y_transformed,x_original"
    assert len(lines) == 2 + 5
    assert all(float(v) > 0 for row in lines[3:] for v in row.split(",")[1:])


def test_simulate_replays_from_embedded_config(tmp_path, capsys):
    first = tmp_path / "first.csv"
    run(["simulate", "--preset", "example-6.4", "--scheme", "lbem", "--h", "2^-6", "--T", "1",
         "--seed", "3", "--path-index", "2", "--out", str(first)], capsys)
    rec = config_line(first)
    cfg = tmp_path / "model.json"
    cfg.write_text(json.dumps(rec["model"]))
    again = tmp_path / "again.csv"
    code, _, _ = run(["simulate", "--config", str(cfg), "--scheme", rec["scheme"], "--h", repr(rec["h"]),
                      "--steps", str(rec["steps"]), "--seed", str(rec["seed"]),
                      "--path-index", str(rec["path_index"]), "--out", str(again)], capsys)
    assert code == 0
    assert first.read_text().splitlines()[1:] == again.read_text().splitlines()[1:]


def test_convergence_writes_table_and_fit(tmp_path, capsys):
    out = tmp_path / "conv.csv"
    code, stdout, _ = run(["convergence", "--model", "cir", "--preset", "example-6.1", "--paths", "200",
                           "--h-ref", "2^-10", "--out", str(out)], capsys)
    assert code == 0
    rows = out.read_text().splitlines()
    assert rows[1] == "model,scheme,h,e_M,n_paths,seed,h_ref"
    assert [float(r.split(",")[2]) for r in rows[2:]] == [2.0**-i for i in range(5, 10)]
    fit = json.loads(out.with_suffix(".fit.json").read_text())
    assert 0.7 < fit["q"] < 1.3
    assert set(fit) == {"model", "scheme", "q", "resid", "logC", "n_paths", "seed"}
    rec = json.loads(out.with_name("conv.fit.json.config.json").read_text())
    assert rec["plan"]["h_ref"] == 2.0**-10 and rec["plan"]["n_paths"] == 200
    assert config_line(out)["model"]["model"] == "cir"
    assert "q=" in stdout


def test_fit_on_hand_written_table(tmp_path, capsys):
    src = tmp_path / "hand.csv"
    src.write_text("model,scheme,h,e_M,n_paths,seed,h_ref\n"
                   + "".join(f"cir,proposed,{h!r},{h!r},100,1,0.000244140625\n"
                             for h in (0.03125, 0.015625, 0.0078125)))
    out = tmp_path / "fit.json"
    code, stdout, _ = run(["fit", "--input", str(src), "--out", str(out)], capsys)
    assert code == 0
    fit = json.loads(out.read_text())
    assert fit["q"] == pytest.approx(1.0, abs=1e-12)
    assert fit["resid"] == pytest.approx(0.0, abs=1e-12)


def test_bench_writes_timing_csv(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    code, stdout, _ = run(["bench", "--preset", "example-6.3", "--paths", "100", "--h-set", "2^-5,2^-6",
                           "--out", str(out)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "model,proposed_seconds,lbem_seconds,paths,h_set"
    assert lines[2].startswith("cev,") and "ratio=" in stdout


@pytest.mark.parametrize("argv", [
    ["simulate", "--model", "cir", "--param", "kappa=0.1", "--param", "theta=0.1", "--param", "sigma=1",
     "--x0", "0.1", "--h", "0.1", "--steps", "3"],
    ["simulate", "--model", "vasicek", "--x0", "1", "--h", "0.1", "--steps", "3"],
    ["simulate", "--preset", "example-9", "--h", "0.1", "--steps", "3"],
    ["simulate", "--preset", "example-6.1", "--h", "2", "--steps", "3"],
    ["simulate", "--preset", "example-6.1", "--model", "cev", "--h", "0.1", "--steps", "3"],
    ["convergence", "--preset", "example-6.1", "--h-set", "0.3"],
    ["fit", "--input", "/nonexistent/table.csv"],
    ["simulate", "--preset", "example-6.1"],
    ["frobnicate"],
])
def test_validation_errors_exit_1(argv, capsys):
    code = None
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    err = capsys.readouterr().err.strip().splitlines()
    assert code == 1
    assert len(err) == 1 and err[0].startswith("error=validation type=")


def test_solver_failure_exit_2(monkeypatch, capsys):
    from lamperti import solvers
    from lamperti.solvers import SolverFailure

    def boom(*a, **k):
        raise SolverFailure("LBEM Newton failed: forced")

    monkeypatch.setattr("lamperti.cli.simulate_path", boom)
    code, _, err = run(["simulate", "--preset", "example-6.1", "--h", "0.1", "--steps", "2"], capsys)
    assert code == 2 and err.startswith("error=solver type=SolverFailure")
    assert solvers.SolverFailure is SolverFailure


def test_presets_cover_all_examples():
    assert sorted(PRESETS) == ["example-6.1", "example-6.2", "example-6.3", "example-6.4"]


def test_console_script_entry_point(tmp_path):
    out = tmp_path / "p.csv"
    res = subprocess.run([sys.executable, "-m", "lamperti.cli", "simulate", "--preset", "example-6.1",
                          "--h", "0.5", "--steps", "2", "--out", str(out)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert out.exists()


def test_numpy_backend_route(tmp_path):
    env = dict(os.environ, LAMPERTI_DISABLE_NUMBA="1")
    code = ("from lamperti import kernels; assert kernels.BACKEND == 'numpy', kernels.BACKEND; "
            "from lamperti.cli import main; raise SystemExit(main(['convergence', '--preset', 'example-6.3', "
            f"'--paths', '20', '--h-ref', '2^-9', '--h-set', '2^-5,2^-6', '--out', r'{tmp_path / 'c.csv'}']))")
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert json.loads((tmp_path / "c.csv").read_text().splitlines()[0][len("# config: "):])["backend"] == "numpy"
