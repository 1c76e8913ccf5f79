import subprocess
import sys

import pytest

from tickcheck.bench import gen_fischer
from tickcheck.cli import main, parse_property
from tickcheck.engine import replay_trace
from tickcheck.cycles import build_property, compose
from tickcheck.frontend import SourceFile, parse, pretty
from tickcheck.lowering import LoweringConfig, lower


@pytest.fixture
def fischer_file(tmp_path):
    def make(n, db_u, dc_l, dc_u):
        path = tmp_path / f"fischer_{n}_{db_u}_{dc_l}_{dc_u}.tdve"
        path.write_text(pretty(gen_fischer(n, db_u, dc_l, dc_u)))
        return path

    return make


def test_parse_prints_the_normal_form(tmp_path, capsys):
    path = tmp_path / "m.tdve"
    path.write_text("int x;process P{state a;init a;trans a->a{effect x=0;};}")
    assert main(["parse", str(path)]) == 0
    out = capsys.readouterr().out
    assert parse(out) == parse(path.read_text())


def test_lower_shows_the_clock(fischer_file, capsys):
    assert main(["lower", str(fischer_file(2, 2, 3, 4)), "--method", "ledm"]) == 0
    out = capsys.readouterr().out
    assert "ubtimer" in out and "tick -> tick" in out


def test_check_holds(fischer_file, capsys):
    code = main(["check", str(fischer_file(2, 2, 3, 4)), "--property", "G(c < 2)",
                 "--algorithm", "map"])
    assert code == 0
    assert capsys.readouterr().out.startswith("holds: ")


def test_check_violated_writes_a_replayable_trace(fischer_file, capsys):
    path = fischer_file(3, 3, 1, 3)
    assert main(["check", str(path), "--method", "ledm", "--property", "G(c < 2)"]) == 1
    trace = path.with_suffix(".trace")
    assert f"trace written to {trace}" in capsys.readouterr().out
    model = lower(parse(path.read_text()), LoweringConfig("ledm"))
    product = compose(model, build_property(parse_property("G(c < 2)")))
    replay_trace(product, trace.read_text())


def test_check_with_a_claim_file(tmp_path, capsys):
    model = tmp_path / "toggle.tdve"
    model.write_text("process P { state idle, busy; init idle;"
                     " trans idle -> busy { }, busy -> idle { }, idle -> idle { }; }")
    claim = tmp_path / "claim.tdve"
    claim.write_text("process never { state s, bad; init s; accept bad;"
                     " trans s -> s { }, s -> bad { guard P.idle; }, bad -> bad { guard P.idle; }; }")
    out = tmp_path / "out.trace"
    code = main(["check", str(model), "--claim", str(claim), "--trace", str(out)])
    assert code == 1 and out.exists()
    assert "# cycle:" in out.read_text()


def test_parse_error_is_reported_with_position(tmp_path, capsys):
    path = tmp_path / "bad.tdve"
    path.write_text("int x = ;\n")
    assert main(["parse", str(path)]) == 2
    assert capsys.readouterr().err.startswith(f"{path}:1:9: ")


def test_model_error_lists_diagnostics(tmp_path, capsys):
    path = tmp_path / "bad.tdve"
    path.write_text("process P { state a;\ninit b; trans }")
    assert main(["check", str(path), "--property", "G(true)"]) == 2
    err = capsys.readouterr().err
    assert f"{path}:1:1: initial location 'b' not declared" in err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["check", "nowhere.tdve", "--property", "G(true)"],
        ["experiment", "3"],
        ["experiment", "1", "--range", "5..2"],
    ],
)
def test_usage_errors_exit_two(argv, capsys):
    assert main(argv) == 2


def test_check_needs_exactly_one_property(fischer_file):
    path = str(fischer_file(2, 2, 3, 4))
    assert main(["check", path]) == 2
    assert main(["check", path, "--property", "G(true)", "--claim", path]) == 2
    assert main(["check", path, "--property", "X(true)"]) == 2


def test_property_syntax():
    assert parse_property("G(c < 2)").kind == "always_p"
    assert parse_property("F(P1.cs)").kind == "eventually_p"
    r = parse_property("G(P1.a -> F(P1.cs))")
    assert r.kind == "response_p_q" and r.q is not None


def test_bench_round_trips(tmp_path):
    out = tmp_path / "f.tdve"
    assert main(["bench", "fischer", "--n", "2", "--out", str(out)]) == 0
    assert parse(SourceFile.read(str(out))) == gen_fischer(2, 2, 3, 4)
    assert main(["bench", "preemptive", "--units", "3", "2", "--out", str(tmp_path / "p.tdve")]) == 0


def test_experiment_csv(tmp_path):
    out = tmp_path / "e.csv"
    assert main(["experiment", "1", "--n", "2", "--range", "2..3", "--csv", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("method,mode,n,") and len(lines) == 7


def test_module_entry_point(fischer_file):
    path = fischer_file(2, 2, 3, 4)
    proc = subprocess.run([sys.executable, "-m", "tickcheck.cli", "parse", str(path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "process P1" in proc.stdout
