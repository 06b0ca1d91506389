"""Carta de Weinstein explícita do colar: W(r, θ, R, Θ) = (R, θ, R(θ − Θ), ½(R² − r²))."""
import logging
from typing import Callable, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class DiscMapError(Exception):
    """Erro base do cálculo de aplicações do disco"""
    pass


class OutOfDomain(DiscMapError):
    """|θ − Θ| ≥ ½: ponto fora do domínio 𝕐 da carta"""
    pass


class NegativeRadicand(DiscMapError):
    """ρ² − 2p_ϑ < 0 na inversa da carta"""
    pass


class DivisionAtBinding(DiscMapError):
    """Divisão por ρ = 0 na borda do disco"""
    pass


def _check_domain(theta, Theta) -> None:
    # sem redução módulo 1: o domínio é definido pelo levantamento dado
    if np.any(np.abs(np.real(np.asarray(theta) - np.asarray(Theta))) >= 0.5):
        raise OutOfDomain("|θ − Θ| ≥ ½ fora do domínio da carta de Weinstein")


def weinstein_map(r, theta, R, Theta) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(r, θ, R, Θ) ↦ (ρ, ϑ, p_ρ, p_ϑ)"""
    _check_domain(theta, Theta)
    r, theta, R, Theta = np.broadcast_arrays(r, theta, R, Theta)
    return R, theta, R * (theta - Theta), 0.5 * (R ** 2 - r ** 2)


def weinstein_inverse(rho, vartheta, p_rho, p_vartheta) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(ρ, ϑ, p_ρ, p_ϑ) ↦ (√(ρ² − 2p_ϑ), ϑ, ρ, ϑ − p_ρ/ρ)"""
    rho, vartheta, p_rho, p_vartheta = np.broadcast_arrays(rho, vartheta, p_rho, p_vartheta)
    radicand = rho ** 2 - 2.0 * p_vartheta
    if np.any(np.real(radicand) < 0):
        raise NegativeRadicand(f"ρ² − 2p_ϑ negativo: mínimo {np.min(np.real(radicand)):.3e}")
    if np.any(rho == 0):
        raise DivisionAtBinding("ρ = 0 na inversa da carta de Weinstein")
    return np.sqrt(radicand), vartheta, rho, vartheta - p_rho / rho


def k_primitive(r, theta, R, Theta, k: float = 1.0) -> np.ndarray:
    """K(r, θ, R, Θ) = (k − ½R²)(θ − Θ)"""
    _check_domain(theta, Theta)
    return (k - 0.5 * np.asarray(R) ** 2) * (np.asarray(theta) - np.asarray(Theta))


def _complex_step(fn: Callable, point: np.ndarray, direction: int, h: float = 1e-30) -> np.ndarray:
    shifted = point.astype(complex)
    shifted[direction] = shifted[direction] + 1j * h
    return np.imag(fn(*shifted)) / h


def chart_identity_residual(samples: int = 200, k: float = 1.0, seed: int = 0) -> float:
    """max |W^*λ_can − ((−λ)⊕λ − dK)| em amostras aleatórias de 𝕐, derivadas por passo complexo"""
    rng = np.random.default_rng(seed)
    a = np.sqrt(2.0 * k)
    r = rng.uniform(0.0, a, samples)
    R = rng.uniform(0.0, a, samples)
    theta = rng.uniform(0.0, 1.0, samples)
    Theta = theta + rng.uniform(-0.45, 0.45, samples)
    point = np.stack([r, theta, R, Theta])

    rho, _, p_rho, p_vartheta = weinstein_map(r, theta, R, Theta)
    lam_left = -(-k + 0.5 * r ** 2)
    lam_right = -k + 0.5 * R ** 2

    worst = 0.0
    for i in range(4):
        d_rho = _complex_step(lambda *x: weinstein_map(*x)[0], point, i)
        d_vartheta = _complex_step(lambda *x: weinstein_map(*x)[1], point, i)
        d_k = _complex_step(lambda *x: k_primitive(*x, k=k), point, i)
        pulled = p_rho * d_rho + p_vartheta * d_vartheta
        expected = (lam_left if i == 1 else 0.0) + (lam_right if i == 3 else 0.0) - d_k
        worst = max(worst, float(np.max(np.abs(pulled - expected))))
    return worst
