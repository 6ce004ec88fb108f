import hashlib
import subprocess
import sys

import pytest

from banzkp.cli import main


def out_of(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr()


def test_cost_paper_table(capsys):
    code, out = out_of(capsys, ["cost", "--mode", "paper"])
    assert code == 0
    row = next(l for l in out.out.splitlines() if l.startswith("comm_bits "))
    assert row.split()[1:3] == ["1000", "1710"]
    assert "# ecdsa_key_bytes=20" in out.out


def test_cost_csv_is_parseable(capsys):
    import csv
    code, out = out_of(capsys, ["cost", "--format", "csv", "--mode", "wire"])
    rows = list(csv.reader(l for l in out.out.splitlines() if not l.startswith("#")))
    assert rows[0] == ["metric", "banzkp", "tinyzkp", "saving_pct"]
    assert {r[0] for r in rows[1:]} >= {"comm_bits", "comm_bits_wire", "memory_bytes", "energy_mJ"}


def test_run_twice_same_hash(capsys):
    argv = ["run", "--scenario", "honest7", "--seed", "1", "--modulus-bits", "1096", "--format", "lines"]
    _, a = out_of(capsys, argv)
    _, b = out_of(capsys, argv)
    assert hashlib.sha256(a.out.encode()).digest() == hashlib.sha256(b.out.encode()).digest()
    assert '"type": "summary"' in a.out.splitlines()[-1]


def test_run_table_and_csv(capsys):
    code, out = out_of(capsys, ["run", "--seed", "2", "--modulus-bits", "1096"])
    assert code == 0 and "authenticated: 6" in out.out and "digest: " in out.out
    code, out = out_of(capsys, ["run", "--seed", "2", "--modulus-bits", "1096", "--format", "csv"])
    assert "role,bits_tx,bits_rx,modmuls,mem_bytes,energy_mJ,mode" in out.out


def test_run_writes_to_output_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("BANZKP_OUTPUT_DIR", str(tmp_path))
    assert main(["run", "--seed", "5", "--modulus-bits", "1096", "--format", "lines"]) == 0
    assert (tmp_path / "honest7-5.jsonl").exists()
    target = tmp_path / "x" / "cost.txt"
    assert main(["cost", "--output", str(target)]) == 0
    assert "1710" in target.read_text()


def test_attack_lines(capsys):
    code, out = out_of(capsys, ["attack", "--kind", "replay", "--seed", "7", "--trials", "20",
                                "--modulus-bits", "1096"])
    assert code == 0
    assert out.out.strip() == "replay: PASS (0/20 accepted)"


def test_attack_all_parallel(capsys):
    code, out = out_of(capsys, ["attack", "--seed", "1", "--trials", "5", "--modulus-bits", "1096",
                                "--jobs", "2"])
    lines = out.out.strip().splitlines()
    assert code == 0 and len(lines) == 7
    assert all(": PASS (" in l for l in lines)


@pytest.mark.parametrize("argv", [
    [],
    ["run"],
    ["run", "--seed", "x"],
    ["run", "--seed", "1", "--modulus-bits", "1024"],
    ["attack", "--kind", "nope", "--seed", "1"],
    ["attack"],
    ["cost", "--mode", "fast"],
    ["bogus"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "usage:" in capsys.readouterr().err


def test_scenario_error_exit_1(tmp_path, capsys):
    f = tmp_path / "bad.toml"
    f.write_text("modulus_bits = 1096\n\n[[traffic]]\nnode = 42\ndata = 'x'\n")
    assert main(["run", "--scenario", str(f), "--seed", "1"]) == 1
    err = capsys.readouterr().err
    assert f"{f}:3:" in err


def test_missing_scenario_exit_1(capsys):
    assert main(["run", "--scenario", "/nonexistent.toml", "--seed", "1"]) == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "banzkp", "cost"], capture_output=True, text=True)
    assert res.returncode == 0 and "1710" in res.stdout


def test_selftest_passes(capsys):
    assert main(["selftest"]) == 0
    assert "FAIL" not in capsys.readouterr().out
