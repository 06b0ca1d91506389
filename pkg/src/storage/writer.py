import json
import logging
from collections import Counter
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.storage.records import ResultRecord, Verdict

logger = logging.getLogger(__name__)

TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "pydantic")


class IoError(Exception):
    """Falha ao gravar os arquivos de resultado"""
    pass


def package_versions() -> Dict[str, str]:
    versions = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "ausente"
    return versions


def records_frame(records: Sequence[ResultRecord]) -> pd.DataFrame:
    """DataFrame com a ordem fixa de colunas de ResultRecord"""
    return pd.DataFrame([r.row() for r in records], columns=ResultRecord.columns())


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


class ReportWriter:
    """Grava records.csv, summary.json e grids/*.csv num diretório de saída"""

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)

    def _ensure(self, path: Path) -> None:
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise IoError(f"Não foi possível criar o diretório {path}: {e}") from e

    def write_records(self, records: Sequence[ResultRecord]) -> Path:
        if not records:
            raise IoError("Lista de registros vazia: nada a gravar")
        self._ensure(self.directory)
        path = self.directory / "records.csv"
        try:
            records_frame(records).to_csv(path, index=False, float_format="%.12g")
        except OSError as e:
            raise IoError(f"Erro ao gravar {path}: {e}") from e
        logger.info(f"{len(records)} registro(s) gravados em {path}")
        return path

    def write_summary(self, config_echo: Mapping[str, Any], records: Sequence[ResultRecord],
                      exit_code: int, extra: Optional[Mapping[str, Any]] = None) -> Path:
        self._ensure(self.directory)
        counts = Counter(r.verdict.value for r in records)
        summary = {
            "config": dict(config_echo),
            "versions": package_versions(),
            "verdicts": {v.value: counts.get(v.value, 0) for v in Verdict},
            "exit_code": exit_code,
            "plot_columns": ["eps", "rho_sys", "rho_dia", "inverse_t_sigma"],
        }
        if extra:
            summary.update(extra)
        path = self.directory / "summary.json"
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(_jsonable(summary), f, indent=2, ensure_ascii=False)
        except OSError as e:
            raise IoError(f"Erro ao gravar {path}: {e}") from e
        return path

    def write_grid(self, name: str, frame: pd.DataFrame) -> Path:
        """grids/<name>.csv (colunas r, theta, tau, sigma, fixed_flag para campos de seção)"""
        grids = self.directory / "grids"
        self._ensure(grids)
        path = grids / f"{name}.csv"
        try:
            frame.to_csv(path, index=False, float_format="%.12g")
        except OSError as e:
            raise IoError(f"Erro ao gravar {path}: {e}") from e
        logger.debug(f"Malha gravada em {path}")
        return path

    def write_table(self, name: str, frame: pd.DataFrame) -> Path:
        self._ensure(self.directory)
        path = self.directory / f"{name}.csv"
        try:
            frame.to_csv(path, index=False, float_format="%.12g")
        except OSError as e:
            raise IoError(f"Erro ao gravar {path}: {e}") from e
        return path


def emit(records: Sequence[ResultRecord], directory: Union[str, Path], config_echo: Mapping[str, Any],
         exit_code: int, grids: Optional[Mapping[str, pd.DataFrame]] = None,
         extra: Optional[Mapping[str, Any]] = None) -> List[Path]:
    """records.csv + summary.json (+ grids/*.csv); erro para lista vazia"""
    if not records:
        raise IoError("emit exige ao menos um registro")
    writer = ReportWriter(directory)
    paths = [writer.write_records(records), writer.write_summary(config_echo, records, exit_code, extra)]
    for name, frame in (grids or {}).items():
        paths.append(writer.write_grid(name, frame))
    return paths
