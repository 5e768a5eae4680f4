import pytest

from artifact.cli import main


def test_run_toy_passes(capsys):
    assert main(["run", "--dynamic", "toy", "--trials", "100", "--horizon", "1000", "--delta", "0.1", "--seed", "7"]) == 0
    assert "verdict=PASS" in capsys.readouterr().out


def test_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "toy"
    assert main(["run", "--dynamic", "toy", "--trials", "40", "--horizon", "50", "--out", str(out)]) == 0
    assert (tmp_path / "toy.checkpoints.csv").exists()
    assert (tmp_path / "toy.trials.csv").exists()


def test_run_failing_verdict_exits_one(capsys):
    # a tiny trial count cannot push the 95% upper bound below delta
    assert main(["run", "--dynamic", "toy", "--trials", "2", "--horizon", "50"]) == 1


def test_usage_errors():
    assert main(["run", "--trials", "5"]) == 2
    assert main(["run", "--dynamic", "toy", "--bogus"]) == 2
    assert main([]) == 2
    assert main(["run", "--dynamic", "toy", "--trials", "0"]) == 2
    assert main(["run", "--dynamic", "pca", "--spectrum", "0.5,0.5,0.0", "--k", "1"]) == 2
    assert main(["deviation", "--dynamic", "pca", "--T1", "2", "--Lambda", "1", "--delta-p", "0.3"]) == 2


def test_help_exits_zero():
    assert main(["--help"]) == 0


def test_schedule_pca_passes(capsys, tmp_path):
    out = tmp_path / "plan.csv"
    assert main(["schedule", "--dynamic", "pca", "--delta", "0.1", "--intervals", "12", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "12/12 intervals pass" in text
    assert "precondition" in text
    assert len(out.read_text().splitlines()) == 14


def test_schedule_sgd_reports_failures(capsys):
    code = main(["schedule", "--dynamic", "sgd", "--delta", "0.1", "--intervals", "20"])
    lines = capsys.readouterr().out.splitlines()
    assert len([ln for ln in lines if ln[:1].isdigit() and "," in ln]) == 20
    assert code == 1


def test_deviation_values(capsys):
    assert main(["deviation", "--dynamic", "sgd", "--T0", "100", "--T1", "200", "--Lambda", str(1 / 140), "--delta-p", "0.36787944117144233"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1.2, rel=1e-9)
    assert main([
        "deviation", "--dynamic", "pca", "--T0", "0", "--T1", "2", "--Lambda", "1", "--delta-p", "0.36787944117144233",
        "--gamma", "0.5", "--lambda-top", "1", "--gap", "0.5",
    ]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(977.3, abs=0.05)
    assert main(["deviation", "--dynamic", "bandit", "--dim", "1", "--T1", "9", "--Lambda", "1", "--delta-p", "0.36787944117144233"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(55.05, abs=0.01)
