"""Tradução de uma PerturbationSpec em formas de contato e configurações numéricas."""
import logging
from typing import List, Sequence, Union

import numpy as np

from src.config import ConfigError, ExperimentConfig, PerturbationSpec
from src.geometry.forms3d import (
    ContactForm,
    add_exact,
    deck,
    one_form_shift,
    scaled_perturbation,
    zoll_form,
)
from src.geometry.reebflow import IntegratorConfig
from src.utils.polynomials import Polynomial4, preset

logger = logging.getLogger(__name__)


def resolve_generator(generator: Union[str, Sequence]) -> Polynomial4:
    """Nome de preset ou lista de monômios (coeficiente, [e₁, e₂, e₃, e₄])"""
    if isinstance(generator, str):
        try:
            return preset(generator)
        except ValueError as e:
            raise ConfigError(f"perturbation: {e}") from e
    try:
        return Polynomial4([(c, tuple(exps)) for c, exps in generator])
    except (TypeError, ValueError) as e:
        raise ConfigError(f"perturbation.terms inválido: {e}") from e


def _require_harmonic(poly: Polynomial4, where: str) -> None:
    if not poly.is_harmonic():
        raise ConfigError(f"{where}: o gerador {poly} não é harmônico (Δf ≠ 0)")


def deck_invariance_residual(alpha: ContactForm, samples: int = 64, seed: int = 0) -> float:
    """max |α(g·x)(g·v) − α(x)(v)| para o gerador g da ação de recobrimento"""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(samples, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    v = rng.normal(size=(samples, 4))
    v -= np.einsum("ij,ij->i", v, x)[:, None] * x
    p = alpha.lens_order
    return float(np.max(np.abs(alpha.evaluate(deck(x, p), deck(v, p)) - alpha.evaluate(x, v))))


def build_form(spec: PerturbationSpec, eps: float, p: int = 1) -> ContactForm:
    """α_ε para um ponto da varredura; ε = 0 devolve a forma de Zoll de ordem p"""
    if spec.kind == "shift":
        components: List[Polynomial4] = [resolve_generator(c) for c in spec.components]
        for j, poly in enumerate(components):
            _require_harmonic(poly, f"perturbation.components[{j}]")
        alpha = one_form_shift(components, eps, p)
    else:
        poly = resolve_generator(spec.terms if spec.terms is not None else spec.preset)
        if spec.kind == "scaled":
            _require_harmonic(poly, "perturbation")
            alpha = scaled_perturbation(poly, eps, p)
        else:
            alpha = add_exact(zoll_form(p), poly, eps)

    if p >= 2 and eps != 0.0:
        residual = deck_invariance_residual(alpha)
        if residual > 1e-12:
            raise ConfigError(
                f"perturbation: a forma não desce a L({p},1) (resíduo de invariância {residual:.2e})"
            )
    return alpha


def integrator_config(config: ExperimentConfig) -> IntegratorConfig:
    s = config.integrator
    return IntegratorConfig(rel_tol=s.rel_tol, abs_tol=s.abs_tol, max_step=s.max_step, projection=s.projection)


def check_generators(config: ExperimentConfig) -> None:
    """Valida os geradores antes de iniciar a varredura (ConfigError com o campo)"""
    largest = max(config.perturbation.amplitudes, key=abs) or 0.01
    build_form(config.perturbation, largest, config.lens_order)
