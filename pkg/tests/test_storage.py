import json

import pandas as pd
import pytest

from src.storage.records import ResultRecord, Verdict
from src.storage.writer import IoError, ReportWriter, emit, records_frame


@pytest.fixture
def records():
    return [
        ResultRecord(eps=0.0, lens_order=1, inverse_t_sigma=1.0, rho_sys=1.0, rho_dia=1.0,
                     verdict=Verdict.ZOLL_EQUALITY),
        ResultRecord(eps=0.05, lens_order=1, inverse_t_sigma=1.0, rho_sys=0.9017, rho_dia=1.1016,
                     verdict=Verdict.STRICT_INEQUALITY),
        ResultRecord(eps=0.3, lens_order=1, inverse_t_sigma=1.0, verdict=Verdict.OUT_OF_REGIME,
                     message="NoReturn: sem retorno"),
    ]


def test_columns_follow_declaration_order():
    columns = ResultRecord.columns()
    assert columns[:4] == ["eps", "lens_order", "generator", "kind"]
    assert columns[-2:] == ["verdict", "message"]
    assert columns.index("rho_sys") < columns.index("rho_dia") < columns.index("inverse_t_sigma")


def test_record_rejects_unknown_fields():
    with pytest.raises(ValueError):
        ResultRecord(eps=0.0, lens_order=1, inverse_t_sigma=1.0, verdict=Verdict.ZOLL_EQUALITY, extra=1)


def test_records_frame_uses_verdict_values(records):
    frame = records_frame(records)
    assert list(frame.columns) == ResultRecord.columns()
    assert list(frame["verdict"]) == ["zoll_equality", "strict_inequality", "out_of_regime"]


def test_emit_requires_records(tmp_path):
    with pytest.raises(IoError):
        emit([], tmp_path, {}, 0)


def test_emit_writes_records_summary_and_grids(tmp_path, records):
    grid = pd.DataFrame({"r": [0.5], "theta": [0.0], "tau": [1.0], "sigma": [0.0], "fixed_flag": [1]})
    paths = emit(records, tmp_path / "out", {"lens_order": 1}, 2, {"section_eps_+0.0500": grid})
    assert [p.name for p in paths] == ["records.csv", "summary.json", "section_eps_+0.0500.csv"]

    table = pd.read_csv(tmp_path / "out" / "records.csv")
    assert list(table.columns) == ResultRecord.columns()
    assert table.loc[2, "message"] == "NoReturn: sem retorno"

    summary = json.loads((tmp_path / "out" / "summary.json").read_text(encoding="utf-8"))
    assert summary["config"] == {"lens_order": 1}
    assert summary["exit_code"] == 2
    assert summary["verdicts"] == {"zoll_equality": 1, "strict_inequality": 1, "out_of_regime": 1, "violation": 0}
    assert set(summary["versions"]) == {"numpy", "scipy", "pandas", "pydantic"}

    saved = pd.read_csv(tmp_path / "out" / "grids" / "section_eps_+0.0500.csv")
    assert list(saved.columns) == ["r", "theta", "tau", "sigma", "fixed_flag"]


def test_summary_replaces_non_finite_values(tmp_path, records):
    path = ReportWriter(tmp_path).write_summary({"value": float("nan")}, records, 0, {"extra": [float("inf")]})
    summary = json.loads(path.read_text(encoding="utf-8"))
    assert summary["config"]["value"] is None
    assert summary["extra"] == [None]


def test_unwritable_directory_raises_io_error(tmp_path, records):
    blocker = tmp_path / "arquivo"
    blocker.write_text("x")
    with pytest.raises(IoError):
        ReportWriter(blocker / "sub").write_records(records)
