import json

import pytest

from lomega.cli import ConfigError, ExperimentConfig, main, run


def call(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_certify_kakutani_exit0(capsys):
    code, out, _ = call(capsys, "certify", "--map", "ex46", "--L", "1.0", "--omega", "sqrt2",
                        "--pairs", "100000", "--seed", "7")
    rep = json.loads(out)
    assert code == 0 and rep["result"]["certificate"]["margin"] > 0
    assert rep["version"] == "v0.1.0"
    assert rep["result"]["citation"]


def test_certify_ex44_constant_fails(capsys):
    code, out, _ = call(capsys, "certify", "--map", "ex44", "--L", "0", "--omega", "zero", "--pairs", "2000")
    rep = json.loads(out)
    assert code == 1
    assert rep["result"]["certificate"]["witness"] is not None


def test_afp_thm510_rows(capsys, tmp_path):
    csv = tmp_path / "trace.csv"
    code, out, _ = call(capsys, "afp", "--map", "thm510", "--n", "20", "--csv", str(csv))
    rep = json.loads(out)
    assert code == 0
    eta = 0.2
    for row in rep["result"]["rows"]:
        assert row["residual"] == eta * 2.0 ** -(row["n"] + 2)
    lines = csv.read_text().splitlines()
    assert lines[0] == "iter,residual" and len(lines) == 21


@pytest.mark.parametrize("argv,field", [
    (["certify", "--map", "ex45", "--param", "eps=0.5"], "params"),
    (["certify", "--map", "ex46", "--omega", "bogus"], "omega"),
    (["certify"], "map"),
    (["certify", "--map", "ex46", "--pairs", "0"], "pairs"),
])
def test_config_errors_exit2(capsys, argv, field):
    code, _, err = call(capsys, *argv)
    assert code == 2
    assert field in err


def test_unknown_config_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "catalog", "colour": "red"}))
    code, _, err = call(capsys, "catalog", "--config", str(cfg))
    assert code == 2 and "colour" in err


def test_config_roundtrip():
    cfg = ExperimentConfig(command="certify", map="ex46", params={"L": 0.5}, pairs=10)
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"map": "ex46"})


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "certify", "map": "ex46", "pairs": 500, "seed": 1}))
    code, out, _ = call(capsys, "certify", "--config", str(cfg), "--seed", "2", "--dim", "8", "--samples", "100")
    rep = json.loads(out)
    assert rep["config"]["seed"] == 2 and rep["config"]["pairs"] == 500


def test_env_out_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("LOMEGA_OUT_DIR", str(tmp_path))
    code, out, _ = call(capsys, "modulus", "--omega", "ratio", "--omega-param", "L=0.3", "--L", "0.3")
    assert code == 0
    assert (tmp_path / "modulus.json").read_text() == out


def test_modulus_upgrade_fail_exit1(capsys):
    code, out, _ = call(capsys, "modulus", "--omega", "sqrt2", "--L", "0")
    assert code == 1
    assert json.loads(out)["result"]["upgrade"]["witness"]["delta"] < 0.1


def test_run_direct():
    code, text = run(ExperimentConfig(command="displace", map="thm51", dim=8, starts="basis", budget=80))
    assert code == 0
    assert json.loads(text)["result"]["displacement"]["candidates"][0]["start_residual"] == 0.25


def test_extend_command(capsys):
    code, out, _ = call(capsys, "extend", "--omega", "ratio", "--pairs", "20000")
    rep = json.loads(out)
    assert code == 0 and rep["result"]["domination"]["verdict"] == "pass"
