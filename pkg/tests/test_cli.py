import json
import subprocess
import sys

import pytest

from bergman_expansion.cli import main
from bergman_expansion.corpus import CORPUS_ENV, CorpusError, load_corpus, run_corpus

MINI = {
    "schema_version": 1,
    "defaults": {"frame": [2, 0]},
    "entries": [
        {"id": "4.24", "frame": [2, 0], "mode": "integrate", "lhs": "ZP 1 ZBARP 1", "rhs": [{"pi": -1}]},
        {"id": "4.17-bplus", "indices": ["l"], "mode": "kernel", "base": "P", "lhs": "BP l", "rhs": []},
    ],
}


def write(tmp_path, doc, name="c.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return p


def test_verify_mini_corpus(tmp_path, capsys):
    p = write(tmp_path, MINI)
    report = tmp_path / "r.json"
    assert main(["verify", "--corpus", str(p), "--report", str(report)]) == 0
    data = json.loads(report.read_text())
    assert data["totals"] == {"pass": 2, "fail": 0, "error": 0, "total": 2}
    entry = data["entries"][0]
    assert entry["status"] == "pass" and "pi^-1" in entry["sample"]["value"]
    assert "seconds" not in entry
    assert len(data["corpus_digest"]) == 64


def test_verify_detects_wrong_identity(tmp_path, capsys):
    bad = json.loads(json.dumps(MINI))
    bad["entries"][0]["rhs"] = [{"coeff": "2", "pi": -1}]
    p = write(tmp_path, bad)
    report = tmp_path / "r.json"
    assert main(["verify", "--corpus", str(p), "--report", str(report)]) == 1
    entry = json.loads(report.read_text())["entries"][0]
    assert entry["status"] == "fail" and "difference" in entry


def test_verify_evaluation_error_exit_1(tmp_path, monkeypatch):
    import bergman_expansion.corpus as corpus

    def boom(mode, K):
        raise ArithmeticError("forced failure")

    monkeypatch.setattr(corpus, "_reduce", boom)
    p = write(tmp_path, MINI)
    report = tmp_path / "r.json"
    assert main(["verify", "--corpus", str(p), "--report", str(report)]) == 1
    entry = json.loads(report.read_text())["entries"][0]
    assert entry["status"] == "error" and "forced failure" in entry["error"]


@pytest.mark.parametrize(
    "doc,fragment",
    [
        ('{"schema_version": 1, "entries": [', ":1:"),
        ({"schema_version": 2, "entries": []}, "schema_version"),
        ({"schema_version": 1, "entries": [{"id": "a", "mode": "kernel", "lhs": "B q", "rhs": []}]}, "entries[0].lhs"),
        ({"schema_version": 1, "entries": [{"id": "a", "mode": "kernel", "lhs": "FOO 1", "rhs": []}]}, "unknown generator"),
        ({"schema_version": 1, "entries": [{"id": "a", "mode": "odd", "lhs": "B 1", "rhs": []}]}, "entries[0].mode"),
        ({"schema_version": 1, "entries": [{"id": "a", "mode": "kernel", "lhs": "B 1", "rhs": []}] * 2}, "duplicate id"),
        ({"schema_version": 1, "entries": [{"id": "a", "mode": "kernel", "lhs": "FORMOP Q", "rhs": []}]}, "form operator"),
        ({"schema_version": 1, "entries": [{"id": "a", "frame": [2, 0], "mode": "kernel", "lhs": "B 7", "rhs": []}]}, "out of range"),
    ],
)
def test_corrupted_corpus_exit_2(tmp_path, capsys, doc, fragment):
    p = write(tmp_path, doc)
    with pytest.raises(CorpusError):
        load_corpus(p)
    assert main(["verify", "--corpus", str(p)]) == 2
    assert fragment in capsys.readouterr().err


def test_env_var_selects_corpus(tmp_path, monkeypatch):
    p = write(tmp_path, MINI)
    monkeypatch.setenv(CORPUS_ENV, str(p))
    assert run_corpus()["totals"]["total"] == 2


def test_filter(tmp_path):
    p = write(tmp_path, MINI)
    assert run_corpus(p, filter="4.17*")["totals"]["total"] == 1
    assert main(["verify", "--corpus", str(p), "--filter", "nothing*"]) == 2


def test_jobs_determinism_small(tmp_path):
    reports = []
    for jobs in (1, 3):
        out = tmp_path / f"r{jobs}.json"
        assert main(["verify", "--filter", "4.1[0-3]*", "--jobs", str(jobs), "--report", str(out)]) == 0
        reports.append(out.read_bytes())
    assert reports[0] == reports[1]


def test_timings_flag(tmp_path):
    p = write(tmp_path, MINI)
    out = tmp_path / "r.json"
    main(["verify", "--corpus", str(p), "--timings", "--report", str(out)])
    data = json.loads(out.read_text())
    assert "total_seconds" in data and "seconds" in data["entries"][0]


def test_expand_cancellation(capsys):
    assert main(["expand", "--n", "2", "--q", "0", "--j", "1", "--r", "1"]) == 0
    assert "zero matrix" in capsys.readouterr().out


@pytest.mark.parametrize(
    "args,tag",
    [(["2", "0", "1", "2"], "(1.23)"), (["4", "2", "2", "2"], "(1.23)"), (["4", "4", "1", "2"], "(1.24)")],
)
def test_expand_check_leading(capsys, args, tag):
    n, q, j, r = args
    assert main(["expand", "--n", n, "--q", q, "--j", j, "--r", r, "--check-leading"]) == 0
    assert f"EQUAL to Eq. {tag}" in capsys.readouterr().out


def test_expand_json_and_registry(tmp_path, capsys):
    reg = write(tmp_path, {"operators": [{"order": 2, "builtin": "curvature"}, {"order": 1, "zero": True},
                                         {"order": 3, "zero": True}, {"order": 4, "zero": True}]}, "reg.json")
    out = tmp_path / "m.json"
    assert main(["expand", "--n", "2", "--q", "0", "--j", "1", "--r", "2", "--registry", str(reg), "--json", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["matrix"][0]["out"] == [1, 2]
    assert "R[1,2]" in data["matrix"][0]["coeff"]


@pytest.mark.parametrize(
    "argv",
    [
        ["expand", "--n", "2", "--q", "3", "--j", "1", "--r", "1"],
        ["expand", "--n", "2", "--q", "0", "--j", "2", "--r", "1"],
        ["expand", "--n", "3", "--q", "1", "--j", "1", "--r", "1", "--check-leading"],
        ["expand", "--n", "2", "--q", "0", "--j", "1", "--r", "3", "--check-leading"],
        ["expand", "--n", "2", "--q", "0", "--j", "1", "--r", "3"],
        ["constants", "--b", "3", "1", "0"],
        ["bogus"],
        [],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_bad_registry_exit_2(tmp_path, capsys):
    reg = write(tmp_path, {"operators": [{"order": 2, "builtin": "nope"}]}, "reg.json")
    assert main(["expand", "--n", "2", "--q", "0", "--j", "1", "--r", "2", "--registry", str(reg)]) == 2


def test_constants(capsys):
    assert main(["constants", "--b", "1", "2", "0"]) == 0
    assert "1/8" in capsys.readouterr().out
    assert main(["constants", "--c", "2", "1"]) == 0
    assert "1/160*pi^-2" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bergman_expansion", "constants", "--c", "1", "0"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "1/12*pi^-1" in proc.stdout
