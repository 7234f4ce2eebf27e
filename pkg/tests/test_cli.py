import json

import pytest

from reasonlab import harness
from reasonlab.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_generate_then_verify(tmp_path, capsys):
    data = tmp_path / "g.jsonl"
    code, _, err = run(["generate", "--task", "game24", "--count", "5", "--param", "solvable=true",
                        "--out", str(data)], capsys)
    assert code == EXIT_OK and "wrote 5" in err
    code, out, _ = run(["verify", "--dataset", str(data)], capsys)
    assert code == EXIT_OK and "0 problem(s)" in out


def test_generate_to_stdout_is_deterministic(capsys):
    _, a, _ = run(["generate", "--task", "mwis", "--count", "3", "--seed", "7"], capsys)
    _, b, _ = run(["generate", "--task", "mwis", "--count", "3", "--seed", "7"], capsys)
    assert a == b and len(a.splitlines()) == 3


def test_run_with_config_and_overrides(tmp_path, capsys):
    data, recs = tmp_path / "d.jsonl", tmp_path / "r.jsonl"
    harness.write_jsonl(data, harness.generate_dataset("blocksworld", {"blocks": 3}, 4, 0))
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"task": "blocksworld", "mode": "cot", "dataset": str(data)}))
    code, out, _ = run(["run", "--config", str(cfg), "--mode", "tot", "--beam-width", "3", "--out", str(recs)], capsys)
    summary = json.loads(out)
    assert code == EXIT_OK and summary["mode"] == "tot" and summary["accuracy"] == 1.0
    code, _, _ = run(["verify", "--dataset", str(data), "--records", str(recs)], capsys)
    assert code == EXIT_OK


def test_verify_reports_tampering(tmp_path, capsys):
    rows = harness.generate_dataset("equations", {}, 3, 0)
    rows[2]["answer"] = "-1"
    data = tmp_path / "d.jsonl"
    harness.write_jsonl(data, rows)
    code, out, err = run(["verify", "--dataset", str(data)], capsys)
    assert code == EXIT_DATA and "instance 2" in err


def test_trace_from_instance(capsys):
    code, out, _ = run(["trace", "--task", "mwis", "--instance", '{"input": [1, 2, 3, -1, -2, 3]}'], capsys)
    assert code == EXIT_OK and out.rstrip().endswith("output=[1, 2, 1, 2, 2, 1].")


@pytest.mark.parametrize("task", harness.TASKS)
def test_trace_from_dataset(tmp_path, task, capsys):
    params = {"solvable": True} if task == "game24" else {}
    data = tmp_path / "d.jsonl"
    harness.write_jsonl(data, harness.generate_dataset(task, params, 2, 0))
    code, out, _ = run(["trace", "--dataset", str(data), "--id", "1"], capsys)
    assert code == EXIT_OK and out.strip()


def test_curves_small(tmp_path, capsys):
    table = tmp_path / "t.txt"
    code, out, _ = run(["curves", "--grid", "0,50,400", "--seeds", "0", "--eval", "100",
                        "--out", str(tmp_path / "c.jsonl"), "--table", str(table)], capsys)
    assert code == EXIT_OK and "samples to 90%" in table.read_text()


@pytest.mark.parametrize("argv", [
    [],
    ["generate"],
    ["generate", "--task", "chess"],
    ["run", "--task", "mwis"],
    ["trace", "--task", "mwis"],
    ["generate", "--task", "mwis", "--param", "novalue"],
])
def test_usage_errors(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == EXIT_USAGE


def test_data_errors(tmp_path, capsys):
    assert main(["verify", "--dataset", str(tmp_path / "missing.jsonl")]) == EXIT_DATA
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json\n")
    assert main(["trace", "--dataset", str(bad)]) == EXIT_DATA
    assert main(["generate", "--task", "mwis", "--count", "-2"]) == EXIT_DATA
    cfg = tmp_path / "c.json"
    cfg.write_text("[")
    assert main(["run", "--config", str(cfg)]) == EXIT_DATA
