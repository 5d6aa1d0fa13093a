import json
import subprocess
import sys

import pytest

from senstrace.cli import main
from senstrace.harness import CORPUS_DIR

PLUS = CORPUS_DIR / "plus_self.sdl"
PLUS_SPEC = CORPUS_DIR / "plus_self.spec.json"


@pytest.fixture
def inputs(tmp_path):
    path = tmp_path / "inputs.json"
    path.write_text(json.dumps({"x": {"value": 21, "source": "o", "metric": "diff"}}))
    return path


def test_run(inputs, capsys):
    assert main(["run", str(PLUS), str(inputs)]) == 0
    assert json.loads(capsys.readouterr().out) == {"value": "42", "senv": {"o": 2}, "metric": "diff", "steps": 0}


def test_run_sensitive_guard(tmp_path, inputs, capsys):
    prog = tmp_path / "g.sdl"
    prog.write_text("(if0 x 1 2)")
    assert main(["run", str(prog), str(inputs)]) == 2
    assert "SensitiveGuard" in capsys.readouterr().err


def test_run_missing_file(inputs, capsys):
    assert main(["run", "/nonexistent.sdl", str(inputs)]) == 1


def test_run_parse_error(tmp_path, inputs):
    prog = tmp_path / "bad.sdl"
    prog.write_text("(+ x")
    assert main(["run", str(prog), str(inputs)]) == 1


def test_check_pass(capsys):
    assert main(["check", str(PLUS), str(PLUS_SPEC), "--trials", "200"]) == 0


def test_check_mutation(capsys):
    assert main(["check", str(PLUS), str(PLUS_SPEC), "--trials", "50", "--mutation", "plus-drop-senv"]) == 3
    report = json.loads(capsys.readouterr().out)
    assert report["violations"]


def test_check_zero_trials():
    with pytest.raises(SystemExit) as info:
        main(["check", str(PLUS), str(PLUS_SPEC), "--trials", "0"])
    assert info.value.code == 2


def test_check_json(capsys):
    assert main(["check", str(PLUS), str(PLUS_SPEC), "--trials", "20", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"] is True


def test_corpus(capsys):
    assert main(["corpus", "--trials", "50", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"] is True


def test_corpus_mutation(capsys):
    assert main(["corpus", "--trials", "50", "--mutation", "wrong-join"]) == 3


def test_corpus_missing_dir(tmp_path):
    assert main(["corpus", str(tmp_path / "nope")]) == 1


def test_demo(capsys):
    assert main(["demo-gd", "--seed", "0"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("noisy accuracy:")
    assert out[1].startswith("Odometer_(α,ε)({data ↦ (10,")
    assert json.loads(out[2])["regime"] == "renyi"


def test_demo_json(capsys):
    assert main(["demo-gd", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["noisy_accuracy"] > 0.85


def test_demo_tiny_budget(capsys):
    assert main(["demo-gd", "--budget", "0.01"]) == 4
    assert "FilterHalt" in capsys.readouterr().err


def test_demo_alpha_one():
    with pytest.raises(SystemExit) as info:
        main(["demo-gd", "--alpha", "1"])
    assert info.value.code == 2


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("SENSTRACE_SEED", "5")
    main(["demo-gd", "--json"])
    a = capsys.readouterr().out
    main(["demo-gd", "--json", "--seed", "5"])
    assert capsys.readouterr().out == a


def test_console_entry_point(inputs):
    out = subprocess.run([sys.executable, "-m", "senstrace.cli", "run", str(PLUS), str(inputs)],
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == '{"value":"42","senv":{"o":2},"metric":"diff","steps":0}'
