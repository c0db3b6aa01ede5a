import json
import subprocess
import sys

import pytest

from cache_regret.cli import build_parser, main
from cache_regret.harness import RESULT_FIELDS, read_results


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_bounds_single(capsys):
    code, out, _ = run(["bounds", "--setting", "single", "--T", "100", "--C", "1", "--N", "100",
                        "--no-header-meta"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "name,setting,T,C,N,d,J,r,value,side"
    assert lines[1].endswith("3.93328737,lower")
    assert "14.1421356" in lines[2]


def test_bounds_usage_errors(capsys):
    code, _, err = run(["bounds", "--setting", "ftpl-inelastic", "--T", "10", "--N", "10"], capsys)
    assert code == 2 and "error" in err
    assert run(["bounds", "--setting", "wat", "--T", "10"], capsys)[0] == 2


def test_argparse_errors_exit_two(capsys):
    for argv in (["simulate", "--reward", "single", "--sequence", "uniform2c", "--C", "1"],
                 ["ballsbins", "--T", "4", "--C", "1", "--trials", "0"],
                 ["simulate", "--reward", "single", "--sequence", "uniform2c", "--T", "5", "--C", "1",
                  "--alpha", "0.1"],
                 ["nonsense"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
    capsys.readouterr()


def test_simulate_semantic_errors(capsys):
    base = ["simulate", "--T", "10", "--C", "1"]
    assert run(base + ["--reward", "single", "--sequence", "uniform2c", "--policies", "arc"], capsys)[0] == 2
    assert run(base + ["--reward", "single", "--topology", "paper", "--sequence", "uniform2c"], capsys)[0] == 2
    assert run(base + ["--reward", "single", "--sequence", "zipf:-1", "--N", "9"], capsys)[0] == 2
    assert run(base + ["--reward", "inelastic", "--topology", "paper", "--sequence", "uniform2c", "--r", "2"],
               capsys)[0] == 2


def test_simulate_deterministic_without_meta(tmp_path, capsys):
    argv = ["simulate", "--reward", "elastic", "--topology", "paper", "--sequence", "zipf:0.8", "--N", "50",
            "--alpha", "0.04", "--T", "40", "--policies", "lru,ftpl,oga", "--reps", "2", "--seed", "3",
            "--no-header-meta"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == ",".join(RESULT_FIELDS)
    results = read_results(a)
    assert [r.policy for r in results] == ["lru"] * 2 + ["ftpl"] * 2 + ["oga"] * 2
    assert all(r.T == 40 for r in results)
    code, out, _ = run(argv[:-1], capsys)
    assert code == 0 and out.startswith("# cache_regret generated=")


def test_simulate_json(capsys):
    code, out, _ = run(["simulate", "--reward", "single", "--sequence", "alternating", "--T", "20", "--C", "1",
                        "--policies", "lru", "--checkpoints", "1", "--format", "json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["columns"] == list(RESULT_FIELDS)
    last = doc["rows"][-1]
    assert last["t"] == 20 and last["regret"] == 10


def test_jobs_from_environment(monkeypatch):
    monkeypatch.setenv("CACHE_REGRET_JOBS", "3")
    assert build_parser().parse_args(["mad", "--Tmax", "2"]).jobs == 3
    monkeypatch.setenv("CACHE_REGRET_JOBS", "junk")
    assert build_parser().parse_args(["mad", "--Tmax", "2"]).jobs == 1


def test_mad_table(capsys):
    code, out, _ = run(["mad", "--Tmax", "4", "--no-header-meta"], capsys)
    rows = [line.split(",") for line in out.splitlines()]
    assert code == 0 and rows[0] == ["T", "mad_exact", "mad_lower_bound", "margin"]
    assert [r[1] for r in rows[1:]] == ["0.5", "0.5", "0.75", "0.75"]
    assert all(float(r[3]) > 0 for r in rows[1:])


def test_ballsbins_passes(capsys):
    code, out, _ = run(["ballsbins", "--T", "100", "--C", "2", "--trials", "5000", "--seed", "1",
                        "--no-header-meta"], capsys)
    header, row = out.splitlines()
    assert code == 0 and row.split(",")[-1] == "pass"
    assert header.split(",")[:3] == ["mode", "T", "C"]


def test_trace_convert_round_trip(tmp_path, capsys):
    src = tmp_path / "ratings.dat"
    src.write_text("".join(f"{u}::{100 + (k % 3)}::4::{k}\n" for k, u in enumerate([1, 2] * 6)))
    out = tmp_path / "streams.csv"
    assert main(["trace-convert", "--in", str(src), "--in-format", "movielens_dat", "--users", "2",
                 "--out", str(out)]) == 0
    text = out.read_text().splitlines()
    assert text[0] == "# N=3 T=6" and text[1] == "user,item,timestamp"
    code, res, _ = run(["simulate", "--reward", "elastic", "--topology", "paper", "--sequence",
                        f"trace:{out}", "--T", "6", "--C", "1", "--policies", "lfu"], capsys)
    assert code == 1  # the preset topology has 10 users, the trace only 2
    code, res, _ = run(["simulate", "--reward", "single", "--sequence", f"trace:{out}", "--T", "6", "--C", "1",
                        "--policies", "lfu"], capsys)
    assert code == 1  # single-user replay of a two-user trace is refused
    one = tmp_path / "one.csv"
    assert main(["trace-convert", "--in", str(src), "--in-format", "movielens_dat", "--users", "1",
                 "--out", str(one)]) == 0
    code, res, _ = run(["simulate", "--reward", "single", "--sequence", f"trace:{one}", "--T", "12", "--C", "1",
                        "--policies", "lfu", "--checkpoints", "1", "--no-header-meta"], capsys)
    assert code == 0 and res.splitlines()[-1].startswith("lfu,0,0,12,")


def test_trace_convert_malformed_reports_line(tmp_path, capsys):
    src = tmp_path / "bad.dat"
    src.write_text("1::5::3::10\n1::6::3\n")
    code, _, err = run(["trace-convert", "--in", str(src), "--in-format", "movielens_dat", "--users", "1"],
                       capsys)
    assert code == 1 and ":2:" in err
    code, _, err = run(["trace-convert", "--in", str(tmp_path / "missing.dat"), "--users", "1"], capsys)
    assert code == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cache_regret", "mad", "--Tmax", "2", "--no-header-meta"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.splitlines()[1].startswith("1,0.5,")
