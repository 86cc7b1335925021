import json

import pytest

from syminfer import cli, lang
from syminfer.config import ConfigError, RunConfig, parse_range

SUM = "fn f(a: int, b: int) {\n  assume(a >= 0 && a <= 5);\n  int s = a + b;\n  @L;\n}\n"
FAST = ["--start-depth", "2", "--max-depth", "4", "--degree", "1", "--oct-range=-6:6"]


@pytest.fixture
def suite(tmp_path):
    d = tmp_path / "suite"
    d.mkdir()
    (d / "sum.mvl").write_text(SUM)
    (d / "sum.expected").write_text("#! degree=1\n@L\ns == a + b  # the defining equality\na <= 5\n")
    return d


def test_run_prints_invariants(tmp_path, capsys):
    f = tmp_path / "sum.mvl"
    f.write_text(SUM)
    out = tmp_path / "r.json"
    assert cli.main(["run", str(f), *FAST, "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "a + b - s == 0" in text
    rep = json.loads(out.read_text())
    assert rep["schema"] == cli.SCHEMA and rep["program"] == "f"
    invs = [e["invariant"] for e in rep["locations"]["L"]["inequalities"]]
    assert "a <= 5" in invs and "a >= 0" in invs
    assert "timing" not in rep


def test_report_is_deterministic(tmp_path):
    f = tmp_path / "sum.mvl"
    f.write_text(SUM)
    docs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        assert cli.main(["run", str(f), *FAST, "--out", str(out)]) == 0
        docs.append(out.read_bytes())
    assert docs[0] == docs[1]


def test_timing_only_on_request(tmp_path):
    f = tmp_path / "sum.mvl"
    f.write_text(SUM)
    out = tmp_path / "r.json"
    cli.main(["run", str(f), *FAST, "--no-octagons", "--include-timing", "--out", str(out)])
    assert json.loads(out.read_text())["timing"]["solver_queries"] > 0


def test_bench_marks_correct_suite(suite, tmp_path, capsys):
    out = tmp_path / "b.json"
    assert cli.main(["bench", str(suite), "--runs", "1", *FAST, "--out", str(out)]) == 0
    table = capsys.readouterr().out
    assert "✓" in table and "✗" not in table
    row = json.loads(out.read_text())["programs"][0]
    assert row["correct"] and row["V"] == 3 and row["T"] == 4 and row["D"] == 1


def test_bench_marks_wrong_expectation(suite, capsys):
    (suite / "sum.expected").write_text("@L\ns == a - b\n")
    assert cli.main(["bench", str(suite), "--runs", "1", *FAST]) == 0
    assert "✗" in capsys.readouterr().out


def test_bench_survives_broken_entry(suite, capsys):
    (suite / "bad.mvl").write_text("fn g(a: int) { @L; while (a > 0) { a = a - 1; } }\n")
    (suite / "bad.expected").write_text("@L\na == a\n")
    # a location with no states cannot be checked; the other entry still runs
    assert cli.main(["bench", str(suite), "--runs", "1", *FAST]) == 0
    table = capsys.readouterr().out
    assert table.count("✓") >= 1


@pytest.mark.parametrize(
    "argv",
    [
        ["run"],
        ["frobnicate"],
        ["run", "x.mvl", "--degree", "0"],
        ["run", "x.mvl", "--oct-range", "5:1"],
        ["run", "x.mvl", "--oct-range", "nonsense"],
        ["run", "/nonexistent/x.mvl"],
        ["bench", "/nonexistent"],
    ],
)
def test_usage_errors_exit_one(argv):
    with pytest.raises(SystemExit) as e:
        code = cli.main(argv)
        raise SystemExit(code)
    assert e.value.code == 1


def test_parse_error_exits_one(tmp_path, capsys):
    f = tmp_path / "bad.mvl"
    f.write_text("fn f(a: int) { int x = ; }")
    assert cli.main(["run", str(f)]) == 1
    assert "1:" in capsys.readouterr().err


def test_unknown_location(tmp_path):
    f = tmp_path / "sum.mvl"
    f.write_text(SUM)
    assert cli.main(["run", str(f), "--loc", "Q", *FAST]) == 1


def test_read_expected(tmp_path):
    p = lang.parse("fn f(a: int) { int b = a; @A; int c = b; @B; }")
    side = tmp_path / "f.expected"
    side.write_text("#! degree=3 counter=t\n# comment\n@A\nb == a\n\n@B\nc == b  # trailing\n")
    opts, rels = cli.read_expected(side, p)
    assert opts == {"degree": "3", "counter": "t"}
    assert rels == {"A": ["b == a"], "B": ["c == b"]}


@pytest.mark.parametrize("text", ["b == a\n", "@Z\nb == a\n", "@A\nb == = a\n"])
def test_read_expected_errors(tmp_path, text):
    p = lang.parse("fn f(a: int) { int b = a; @A; int c = b; @B; }")
    side = tmp_path / "f.expected"
    side.write_text(text)
    with pytest.raises(cli.UsageError):
        cli.read_expected(side, p)


def test_unknown_sidecar_option():
    with pytest.raises(cli.UsageError):
        cli._apply_options(RunConfig(), {"colour": "red"})


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(start_depth=30, max_depth=20).validate()
    assert parse_range("-3:4") == (-3, 4)
    assert "runs" not in RunConfig().to_json()


def test_solver_env(monkeypatch):
    monkeypatch.setenv("SYMINFER_SOLVER", "cvc5 --lang smt2")
    assert RunConfig().solver_cmd == "cvc5 --lang smt2"
