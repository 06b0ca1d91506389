import json

import pandas as pd
import pytest

from src.config import ConfigError
from src.harness.suite import SuiteReport
from src.harness.sweep import EXIT_VIOLATION
from src.main import EXIT_CONFIG, build_parser, main, parse_eps


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(
        "seed: 11\n"
        "perturbation:\n"
        "  preset: height\n"
        "  amplitudes: [0.0]\n"
        "grid: {n_r: 8, n_theta: 16, volume_nodes: 16, orbit_seeds: 2}\n"
        "discmaps: {trials: 1, times: 4, rotation_eps: [0.01]}\n",
        encoding="utf-8",
    )
    return path


def test_parse_eps():
    assert parse_eps("0,0.01,-0.03") == [0.0, 0.01, -0.03]
    assert parse_eps("0.05,") == [0.05]
    assert parse_eps(None) is None
    with pytest.raises(ConfigError):
        parse_eps("0,um")


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_missing_config_exits_with_config_code(tmp_path):
    assert main(["ratio", "--config", str(tmp_path / "nada.yaml")]) == EXIT_CONFIG


def test_inadmissible_amplitude_exits_with_config_code(tmp_path):
    assert main(["sweep", "--eps", "0.9", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_invalid_environment_exits_with_config_code(monkeypatch):
    monkeypatch.setenv("ZOLL_LAB_WORKERS", "muitos")
    assert main(["ratio"]) == EXIT_CONFIG


@pytest.mark.slow
def test_discmap_command_writes_tables(tmp_path, tiny_config):
    out = tmp_path / "disc"
    assert main(["discmap", "--config", str(tiny_config), "--out", str(out)]) == 0
    trials = pd.read_csv(out / "discmap_trials.csv")
    assert len(trials) == 1
    rotation = pd.read_csv(out / "rotation.csv")
    assert rotation["ok"].all()
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["exit_code"] == 0
    assert summary["config"]["seed"] == 11
    assert "round_trip_map" in summary["discmap"]


@pytest.mark.slow
def test_ratio_command_for_zoll(tmp_path, tiny_config):
    out = tmp_path / "ratio"
    assert main(["ratio", "--config", str(tiny_config), "--out", str(out)]) == 0
    table = pd.read_csv(out / "ratios.csv")
    assert table.loc[0, "rho_sys"] == pytest.approx(1.0, abs=1e-8)
    assert table.loc[0, "rho_dia"] == pytest.approx(1.0, abs=1e-8)


@pytest.mark.slow
def test_sweep_command_for_lens_zoll(tmp_path, tiny_config):
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(tiny_config), "--p", "2", "--out", str(out)]) == 0
    records = pd.read_csv(out / "records.csv")
    assert list(records["verdict"]) == ["zoll_equality"]
    assert records.loc[0, "inverse_t_sigma"] == pytest.approx(0.5)
    assert records.loc[0, "rho_sys"] == pytest.approx(0.5, abs=1e-8)
    assert (out / "grids" / "section_eps_+0.0000.csv").exists()


def test_discmap_exit_code_reflects_moving_minimizer(monkeypatch, tmp_path, tiny_config):
    trials = pd.DataFrame({"argmin_drift": [0.5], "argmin_bound": [0.2]})
    rotation = pd.DataFrame({"eps": [0.01], "ok": [True]})
    report = SuiteReport(trials, rotation, {"round_trip_map": (1, 1), "argmin_drift": (0, 1)})
    monkeypatch.setattr("src.main.discmap_suite", lambda config: report)
    assert main(["discmap", "--config", str(tiny_config), "--out", str(tmp_path / "disc")]) == EXIT_VIOLATION
