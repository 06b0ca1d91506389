# zoll_lab/src/config.py
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
ADMISSIBLE_AMPLITUDE = 0.5


class ConfigError(Exception):
    """Erro de configuração com diagnóstico de campo ou linha"""
    pass


def load_settings() -> Dict[str, Any]:
    """Carrega configurações do ambiente"""
    env_path = os.path.join(os.path.dirname(__file__), '..', '.env')
    load_dotenv(env_path)

    settings = {
        'out': os.getenv('ZOLL_LAB_OUT', 'results'),
        'log_level': os.getenv('ZOLL_LAB_LOG_LEVEL', 'INFO').upper(),
        'workers': os.getenv('ZOLL_LAB_WORKERS', '1'),
    }

    if not isinstance(logging.getLevelName(settings['log_level']), int):
        raise EnvironmentError(f"Nível de log inválido em ZOLL_LAB_LOG_LEVEL: {settings['log_level']}")
    try:
        settings['workers'] = int(settings['workers'])
    except ValueError as e:
        raise EnvironmentError(f"ZOLL_LAB_WORKERS precisa ser inteiro: {settings['workers']}") from e
    if settings['workers'] < 1:
        raise EnvironmentError(f"ZOLL_LAB_WORKERS precisa ser ≥ 1: {settings['workers']}")
    return settings


def setup_logging(level: Union[str, int] = 'INFO') -> None:
    """Configura o logging da aplicação (uma vez por processo)"""
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


# ---------------------------------------------------------------------------
# Esquema do experimento
# ---------------------------------------------------------------------------

Term = Tuple[float, List[int]]
Generator = Union[str, List[Term]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PerturbationSpec(_Strict):
    """Gerador da perturbação e cronograma de amplitudes"""

    kind: Literal["scaled", "shift", "exact"] = "scaled"
    preset: Optional[str] = "height"
    terms: Optional[List[Term]] = None
    components: Optional[List[Generator]] = None
    amplitudes: List[float] = Field(default_factory=lambda: [0.0])

    @field_validator("amplitudes")
    @classmethod
    def _admissible(cls, values: List[float]) -> List[float]:
        if not values:
            raise ValueError("a lista de amplitudes não pode ser vazia")
        too_large = [v for v in values if abs(v) > ADMISSIBLE_AMPLITUDE]
        if too_large:
            raise ValueError(f"amplitudes fora do limite |ε| ≤ {ADMISSIBLE_AMPLITUDE}: {too_large}")
        return values

    @field_validator("terms")
    @classmethod
    def _four_exponents(cls, terms: Optional[List[Term]]) -> Optional[List[Term]]:
        for _, exps in terms or []:
            if len(exps) != 4 or min(exps) < 0:
                raise ValueError(f"monômio precisa de 4 expoentes não negativos: {exps}")
        return terms

    @model_validator(mode="after")
    def _generator_present(self) -> "PerturbationSpec":
        if self.kind == "shift":
            if not self.components or len(self.components) != 4:
                raise ValueError("kind 'shift' exige 'components' com 4 geradores (η = Σ h_j dx_j)")
        elif self.preset is None and self.terms is None:
            raise ValueError("informe 'preset' ou 'terms'")
        return self

    @property
    def generator_label(self) -> str:
        if self.kind == "shift":
            return "shift[" + ",".join(c if isinstance(c, str) else "terms" for c in self.components) + "]"
        return self.preset if self.terms is None else "terms"


class IntegratorSettings(_Strict):
    rel_tol: float = Field(1e-10, gt=0)
    abs_tol: float = Field(1e-10, gt=0)
    max_step: float = Field(0.1, gt=0)
    projection: bool = True


class GridSettings(_Strict):
    n_r: int = Field(32, ge=4)
    n_theta: int = Field(64, ge=8)
    volume_nodes: int = Field(48, ge=8)
    orbit_seeds: int = Field(4, ge=2)


class Thresholds(_Strict):
    eps_max: float = Field(0.1, gt=0)
    t_cap: float = Field(1.5, gt=1.0, lt=2.0)
    newton_tol: float = Field(1e-10, gt=0)
    dedup_tol: float = Field(1e-5, gt=0)
    v_norm_max: float = Field(0.05, gt=0)
    c1_ball: float = Field(0.05, gt=0)
    safety_factor: float = Field(10.0, gt=1.0)


class DiscSuiteSettings(_Strict):
    trials: int = Field(100, ge=1)
    v_norm: float = Field(0.01, gt=0)
    k: float = Field(1.0, gt=0)
    rotation_eps: List[float] = Field(default_factory=lambda: [-0.05, -0.01, 0.01, 0.05])
    times: int = Field(8, ge=2)


class OutputSettings(_Strict):
    directory: str = "results"
    grids: bool = True


class ExperimentConfig(_Strict):
    """Configuração completa de um experimento (chaves desconhecidas são rejeitadas)"""

    lens_order: int = Field(1, ge=1)
    seed: int = 0
    workers: int = Field(1, ge=1)
    perturbation: PerturbationSpec = Field(default_factory=PerturbationSpec)
    integrator: IntegratorSettings = Field(default_factory=IntegratorSettings)
    grid: GridSettings = Field(default_factory=GridSettings)
    thresholds: Thresholds = Field(default_factory=Thresholds)
    discmaps: DiscSuiteSettings = Field(default_factory=DiscSuiteSettings)
    output: OutputSettings = Field(default_factory=OutputSettings)

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Aplica os valores de linha de comando (None é ignorado) e revalida"""
        data = self.model_dump()
        mapping = {
            "p": ("lens_order",),
            "seed": ("seed",),
            "workers": ("workers",),
            "eps": ("perturbation", "amplitudes"),
            "out": ("output", "directory"),
        }
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in mapping:
                raise ConfigError(f"Sobrescrita desconhecida: {key}")
            target = data
            *parents, leaf = mapping[key]
            for name in parents:
                target = target[name]
            target[leaf] = value
        return validate_config(data)


def _describe(error: ValidationError, lines: Optional[Dict[str, int]] = None) -> str:
    messages = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<raiz>"
        line = (lines or {}).get(str(item["loc"][0])) if item["loc"] else None
        where = f"{location} (linha {line})" if line else location
        messages.append(f"{where}: {item['msg']}")
    return "; ".join(messages)


def validate_config(data: Dict[str, Any], lines: Optional[Dict[str, int]] = None) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Configuração inválida: {_describe(e, lines)}") from e


def _top_level_lines(text: str) -> Dict[str, int]:
    """Linha (1-based) de cada chave de primeiro nível, para os diagnósticos"""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {key.value: key.start_mark.line + 1 for key, _ in node.value}


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Lê um arquivo YAML ou JSON (JSON é subconjunto de YAML) e valida o esquema"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Não foi possível ler {path}: {e}") from e

    try:
        data = yaml.safe_load(text) if path.suffix != ".json" else json.loads(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" (linha {mark.line + 1}, coluna {mark.column + 1})" if mark else ""
        raise ConfigError(f"YAML inválido em {path}{where}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON inválido em {path} (linha {e.lineno}, coluna {e.colno}): {e.msg}") from e

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: o documento precisa ser um mapeamento, não {type(data).__name__}")
    config = validate_config(data, _top_level_lines(text))
    logger.info(f"Configuração carregada de {path}: p = {config.lens_order}, "
                f"{len(config.perturbation.amplitudes)} amplitude(s)")
    return config
