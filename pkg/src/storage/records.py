from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field


class Verdict(str, Enum):
    ZOLL_EQUALITY = "zoll_equality"
    STRICT_INEQUALITY = "strict_inequality"
    OUT_OF_REGIME = "out_of_regime"
    VIOLATION = "violation"


class ResultRecord(BaseModel):
    """Uma linha do records.csv: um ponto ε da varredura"""

    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    eps: float
    lens_order: int = Field(ge=1)
    generator: str = ""
    kind: str = "scaled"
    t_min: Optional[float] = None
    t_max: Optional[float] = None
    volume: Optional[float] = None
    rho_sys: Optional[float] = None
    rho_dia: Optional[float] = None
    inverse_t_sigma: float
    cal: Optional[float] = None
    calabi_identity_residual: Optional[float] = None
    volume_residual: Optional[float] = None
    boundary_residual: Optional[float] = None
    sys_margin: Optional[float] = None
    dia_margin: Optional[float] = None
    error_estimate: Optional[float] = None
    c3_distance: Optional[float] = None
    orbit_count: int = 0
    verdict: Verdict
    message: str = ""

    @classmethod
    def columns(cls) -> List[str]:
        """Ordem fixa das colunas (a ordem de declaração dos campos)"""
        return list(cls.model_fields)

    def row(self) -> dict:
        data = self.model_dump()
        data["verdict"] = self.verdict.value
        return data
