from causalprm.cli import main
from causalprm.machines import load_prm


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_compile_soda_rule(capsys, tmp_path):
    p = tmp_path / "cd.txt"
    p.write_text("ap: s o f\ns ~> !o W f\n")
    code, out, _ = run(capsys, "compile", str(p))
    assert code == 0
    assert out.startswith("ap: f o s")
    assert "rejecting sinks: 2" in out


def test_compile_empty_tlcd(capsys, tmp_path):
    p = tmp_path / "cd.txt"
    p.write_text("ap: a\n")
    code, out, _ = run(capsys, "compile", str(p))
    assert code == 0 and "# 1 states, rejecting sinks: none" in out


def test_compile_office_counter(capsys):
    code, out, _ = run(capsys, "compile", "@office/tlcd.txt")
    assert code == 0 and "rejecting sinks" in out


def test_compile_dot(capsys):
    code, out, _ = run(capsys, "compile", "--dot", "@coffee_soda/tlcd.txt")
    assert code == 0 and out.startswith("digraph")


def test_compile_state_explosion(capsys):
    code, _, err = run(capsys, "compile", "--max-states", "3", "@office/tlcd.txt")
    assert code == 3 and "exceeds" in err


def test_compile_parse_error(capsys, tmp_path):
    p = tmp_path / "cd.txt"
    p.write_text("ap: a\na ~> (a\n")
    code, _, err = run(capsys, "compile", str(p))
    assert code == 2 and "error" in err


def test_missing_file(capsys):
    code, _, err = run(capsys, "compile", "/nonexistent/cd.txt")
    assert code == 2 and "No such file" in err


def test_product_report(capsys, tmp_path):
    out_file = tmp_path / "b.yaml"
    code, _, _ = run(capsys, "product", "@coffee_soda/prm.yaml", "@coffee_soda/tlcd.txt",
                     "--map", "@coffee_soda/map.txt", "--out", str(out_file))
    assert code == 0
    text = out_file.read_text()
    b = load_prm(text)  # the report is YAML comments, so the file still loads
    assert b.n_states == 15
    added = [l for l in text.splitlines() if l.endswith("added terminal")]
    assert {l.split()[1] + " " + l.split()[2] for l in added} == {
        "(q0, 1)", "(q1, 1)", "(q2, 1)", "(q3, 1)"}


def test_product_warns_when_tlcd_fails_on_map(capsys, tmp_path, caplog):
    p = tmp_path / "cd.txt"
    p.write_text("ap: c\nc ~> G !c\n")
    code, out, _ = run(capsys, "product", "@coffee_soda/prm.yaml", str(p),
                       "--map", "@coffee_soda/map.txt")
    assert code == 0
    assert any("does not hold" in r.message for r in caplog.records)


def test_train(capsys, tmp_path):
    code, out, _ = run(capsys, "train", "@two_doors/config.yaml", "--seed-list", "0,1",
                       "--total-steps", "2000", "--out", str(tmp_path), "--variant", "causal")
    assert code == 0
    assert (tmp_path / "causal.csv").read_text().startswith("Step,Value\n")
    assert (tmp_path / "causal_seed1.csv").exists() and not (tmp_path / "plain.csv").exists()


def test_train_bad_config(capsys, tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("map: m.txt\n")
    code, _, err = run(capsys, "train", str(p))
    assert code == 2 and "prm" in err


def test_eval(capsys):
    code, out, _ = run(capsys, "eval", "@two_doors/map.txt", "@two_doors/prm.yaml",
                       "@two_doors/tlcd.txt")
    assert code == 0
    assert "optimal initial value 0.6417594" in out and "largest gap" in out


def test_check(capsys):
    code, out, _ = run(capsys, "check", "@office/map.txt", "@office/tlcd.txt")
    assert code == 0 and "holds" in out
    code, out, _ = run(capsys, "check", "@office/map.txt", "@office/tlcd.txt", "--semantics", "word")
    assert code == 1 and "violated" in out


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "causalprm", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "compile" in res.stdout
