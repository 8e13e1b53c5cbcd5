import json

import pytest

from daumc.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_sat(capsys):
    code, out, _ = run(capsys, "check", "toy", "Ob[alpha](X q)")
    assert code == 0 and "SAT" in out


def test_check_unsat_with_explanation(capsys):
    code, out, _ = run(capsys, "check", "toy", "Ob[alpha](G p)", "--explain", "--format", "json")
    rep = json.loads(out)
    assert code == 1 and rep["holds"] is False
    assert rep["counterexample"] == "a | b" and rep["failing_action"] == "K2"
    assert "timing_s" not in rep


def test_check_timing_is_opt_in(capsys):
    _, out, _ = run(capsys, "check", "toy", "Ob[alpha](X q)", "--timing", "--format", "json")
    assert json.loads(out)["timing_s"] >= 0


def test_check_from_state(capsys):
    code, out, _ = run(capsys, "check", "toy", "Ob[alpha](G q)", "--from", "b")
    assert code == 0


def test_nested_obligation_points_to_oracle(capsys):
    code, _, err = run(capsys, "check", "toy", "XX Ob[alpha](p)")
    assert code == 2 and "oracle-eval" in err


def test_parse_error_and_missing_model(capsys):
    assert run(capsys, "check", "toy", "Ob[alpha](")[0] == 2
    assert run(capsys, "check", "no-such-model", "p")[0] == 2


def test_mission(capsys):
    assert run(capsys, "mission", "toy", "E F q")[0] == 0
    assert run(capsys, "mission", "toy", "A G p")[0] == 1


def test_oracle_eval(capsys):
    code, out, _ = run(capsys, "oracle-eval", "fig2", "m/h5", "cstit[alpha](A)")
    assert code == 0 and "true" in out
    assert run(capsys, "oracle-eval", "fig2", "m/h1", "cstit[alpha](A)")[0] == 1


def test_validate(capsys):
    assert run(capsys, "validate", "toy")[0] == 0
    assert run(capsys, "validate", "fig2")[0] == 0


def test_validate_reports_diagnostics(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"states": {"a": []}, "initial": "a", "transitions": [], "accumulation": "min"}))
    code, out, err = run(capsys, "validate", str(p))
    assert code in (1, 2) and (out + err).strip()


def test_patterns(capsys):
    assert run(capsys, "patterns", "P1", "--seeds", "50")[0] == 0
    assert run(capsys, "patterns", "V1", "--seeds", "50")[0] == 0
    assert run(capsys, "patterns", "Q9")[0] == 2


def test_casestudy_exit_codes(capsys):
    code, out, _ = run(capsys, "casestudy", "--fixture", "B-red")
    assert code == 0 and "3/3 rows match" in out


def test_casestudy_json_is_reproducible(capsys):
    _, a, _ = run(capsys, "casestudy", "--format", "json")
    _, b, _ = run(capsys, "casestudy", "--format", "json")
    assert a == b
    assert json.loads(a)


@pytest.mark.parametrize("argv", [[], ["check"], ["check", "toy"]])
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as e:
        main(argv)
    assert e.value.code == 2
