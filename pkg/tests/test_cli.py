import csv
import json
import subprocess
import sys

import pytest

from qst_disentangle.cli import float_list, int_range, main
from qst_disentangle.quantum import StateVector, fidelity, from_amplitudes


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_int_range():
    assert int_range("2..6") == [2, 3, 4, 5, 6]
    assert int_range("1,3") == [1, 3]
    assert float_list("0.99,0.9999") == [0.99, 0.9999]


def test_gen_state_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "gen-state", "--qubits", "3", "--seed", "7", "--out", str(a))[0] == 0
    assert run(capsys, "gen-state", "--qubits", "3", "--seed", "7", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert StateVector.from_json(json.loads(a.read_text())).n_qubits == 3


def test_gen_state_matches_golden(tmp_path, capsys, data_dir):
    out = tmp_path / "s.json"
    run(capsys, "gen-state", "--qubits", "2", "--seed", "42", "--out", str(out))
    got = StateVector.from_json(json.loads(out.read_text()))
    ref = StateVector.from_json(json.loads((data_dir / "random_state_n2_seed42.json").read_text()))
    assert fidelity(got, ref) == pytest.approx(1.0, abs=1e-14)


def test_table1_matches_golden(tmp_path, capsys, data_dir):
    code, _, _ = run(capsys, "bench", "table1", "--output-dir", str(tmp_path))
    assert code == 0
    with open(tmp_path / "table1.csv") as fh:
        projected = "".join(",".join(row[:3]) + "\n" for row in csv.reader(fh))
    assert projected == (data_dir / "table1_n8_r5.csv").read_text()


def test_vqc_then_reconstruct(tmp_path, capsys):
    code, out, _ = run(capsys, "vqc", "--qubits", "3", "--seed", "2", "--r", "2",
                       "--output-dir", str(tmp_path))
    assert code == 0
    assert float(out.split("fidelity ")[1].split()[0]) >= 0.99
    rebuilt = tmp_path / "again.json"
    code, out, _ = run(capsys, "reconstruct", "--record", str(tmp_path / "vqc_record.json"),
                       "--target", str(tmp_path / "state.json"), "--out", str(rebuilt))
    assert code == 0 and float(out.split()[1]) >= 0.99
    assert rebuilt.read_text() == (tmp_path / "vqc_reconstructed.json").read_text()


def test_rl_on_bell(tmp_path, capsys):
    state = tmp_path / "bell.json"
    state.write_text(json.dumps(from_amplitudes([1, 0, 0, 1], normalize=True).to_json()))
    code, out, _ = run(capsys, "rl", "--state", str(state), "--output-dir", str(tmp_path))
    assert code == 0
    assert json.loads((tmp_path / "rl_record.json").read_text())["kind"] == "rl"
    code, _, err = run(capsys, "reconstruct", "--record", str(tmp_path / "rl_record.json"),
                       "--target", str(state))
    assert code == 0 and "fidelity" in err


def test_unconverged_exit_2(tmp_path, capsys):
    code, _, err = run(capsys, "vqc", "--qubits", "4", "--max-epochs", "1", "--output-dir", str(tmp_path))
    assert code == 2
    assert json.loads(err.strip().splitlines()[-1])["error"] == "unconverged"
    assert (tmp_path / "vqc_record.json").exists()


@pytest.mark.parametrize("argv", [
    ["gen-state"],
    ["gen-state", "--qubits", "0"],
    ["vqc", "--qubits", "2", "--state", "x.json"],
    ["vqc"],
    ["nonsense"],
    [],
])
def test_usage_errors_exit_1(argv, capsys, tmp_path):
    code, _, err = run(capsys, *argv, "--output-dir", str(tmp_path)) if argv else run(capsys)
    assert code == 1
    assert json.loads(err.strip().splitlines()[-1])["error"] == "usage"


def test_bad_state_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_qubits": 1, "amplitudes": [[1, 0], [1, 0]]}))
    assert run(capsys, "vqc", "--state", str(bad), "--output-dir", str(tmp_path))[0] == 1


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"qubits": 3, "r": 1, "output_dir": str(tmp_path / "out")}))
    assert run(capsys, "bench", "table1", "--config", str(cfg))[0] == 0
    rows = (tmp_path / "out" / "table1.csv").read_text().splitlines()
    assert rows[-1] == "Total,14,42,,"
    # explicit flags beat the file
    assert run(capsys, "bench", "table1", "--config", str(cfg), "--r", "2")[0] == 0
    assert (tmp_path / "out" / "table1.csv").read_text().splitlines()[-1] == "Total,28,84,,"


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"qubitz": 3}))
    code, _, err = run(capsys, "bench", "table1", "--config", str(cfg))
    assert code == 1 and "qubitz" in err


def test_output_dir_from_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("QST_OUTPUT_DIR", str(tmp_path / "env"))
    assert run(capsys, "bench", "table1", "--qubits", "2", "--r", "1")[0] == 0
    assert (tmp_path / "env" / "table1.csv").exists()


def test_common_flags_before_subcommand(tmp_path, capsys):
    assert run(capsys, "--output-dir", str(tmp_path), "bench", "table1", "--qubits", "2")[0] == 0
    assert (tmp_path / "table1.csv").exists()


def test_sweep_resumes_from_checkpoints(tmp_path, capsys):
    argv = ["bench", "sweep", "--qubits", "2..3", "--precisions", "0.99", "--seeds", "2",
            "--output-dir", str(tmp_path)]
    assert run(capsys, *argv)[0] == 0
    cells = sorted((tmp_path / "sweep_cells").iterdir())
    assert len(cells) == 4
    first = (tmp_path / "sweep.csv").read_text()
    # a poisoned checkpoint is reused verbatim, proving cells are not recomputed
    row = json.loads(cells[0].read_text())
    row["fidelity"] = 0.5
    cells[0].write_text(json.dumps(row))
    assert run(capsys, *argv)[0] == 0
    second = (tmp_path / "sweep.csv").read_text()
    assert second != first and "0.5," in second


def test_sgd_command(tmp_path, capsys):
    assert run(capsys, "bench", "sgd", "--qubits", "2", "--r", "1,2", "--seeds", "1",
               "--output-dir", str(tmp_path))[0] == 0
    lines = (tmp_path / "sgd.csv").read_text().splitlines()
    assert lines[0] == "r,scheme,s_gd,s_gd_normalized" and len(lines) == 5


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "qst_disentangle", "gen-state", "--qubits", "1"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["n_qubits"] == 1
