from functools import lru_cache
from typing import Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss


@lru_cache(maxsize=64)
def _leggauss(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return leggauss(n)


def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Nós e pesos de Gauss–Legendre em [a, b]"""
    x, w = _leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def periodic_nodes(n: int, offset: float = 0.5) -> Tuple[np.ndarray, np.ndarray]:
    """Nós uniformes em R/Z (regra do ponto médio com offset=0.5)"""
    return (np.arange(n) + offset) / n, np.full(n, 1.0 / n)


def hat_nodes(n: int = 16) -> Tuple[np.ndarray, np.ndarray]:
    """Nós em u ∈ [0, 1] usados na divisão por r"""
    return gauss_legendre(n, 0.0, 1.0)


def wrap_unit(x: np.ndarray) -> np.ndarray:
    """Representante em [-1/2, 1/2) de um ângulo em R/Z"""
    return (np.asarray(x) + 0.5) % 1.0 - 0.5


def spectral_derivative(samples: np.ndarray, period: float = 1.0) -> np.ndarray:
    """Derivada de amostras periódicas igualmente espaçadas ao longo do eixo 0"""
    m = samples.shape[0]
    freqs = np.fft.fftfreq(m, d=1.0 / m)
    if m % 2 == 0:
        freqs[m // 2] = 0.0
    shape = (m,) + (1,) * (samples.ndim - 1)
    factor = (2j * np.pi / period) * freqs.reshape(shape)
    return np.real(np.fft.ifft(factor * np.fft.fft(samples, axis=0), axis=0))


def quadratic_extrapolation(x: np.ndarray, y: np.ndarray, x0: float = 0.0) -> np.ndarray:
    """Extrapola y(x0) pelos três primeiros nós (x crescente ao longo do eixo 0)"""
    x = np.asarray(x, dtype=float)[:3]
    y = np.asarray(y)[:3]
    result = np.zeros_like(y[0], dtype=float)
    for i in range(3):
        weight = 1.0
        for j in range(3):
            if j != i:
                weight *= (x0 - x[j]) / (x[i] - x[j])
        result = result + weight * y[i]
    return result
