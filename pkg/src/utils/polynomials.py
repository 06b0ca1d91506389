import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

Term = Tuple[float, Sequence[int]]


class Polynomial4:
    """Polinômio real em R⁴ descrito por uma lista de monômios (coeficiente, expoentes)"""

    def __init__(self, terms: Sequence[Term]):
        merged: Dict[Tuple[int, ...], float] = {}
        for coeff, exps in terms:
            key = tuple(int(e) for e in exps)
            if len(key) != 4 or min(key) < 0:
                raise ValueError(f"Expoentes inválidos para monômio em R⁴: {exps}")
            merged[key] = merged.get(key, 0.0) + float(coeff)

        keys = [k for k, c in merged.items() if c != 0.0]
        self.exponents = np.array(keys, dtype=int).reshape(-1, 4)
        self.coefficients = np.array([merged[k] for k in keys], dtype=float)
        self._gradient: Optional[List["Polynomial4"]] = None

    @classmethod
    def zero(cls) -> "Polynomial4":
        return cls([])

    @property
    def degree(self) -> int:
        if len(self.coefficients) == 0:
            return 0
        return int(self.exponents.sum(axis=1).max())

    def terms(self) -> List[Term]:
        return [(float(c), tuple(int(e) for e in exps)) for c, exps in zip(self.coefficients, self.exponents)]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.value(x)

    def value(self, x: np.ndarray) -> np.ndarray:
        """Avalia o polinômio em pontos x de shape (n, 4)"""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if len(self.coefficients) == 0:
            return np.zeros(x.shape[0])
        powers = x[:, :, None] ** np.arange(self.degree + 1)
        # monomials[n, m] = prod_k x_k ** e_mk
        monomials = np.prod(powers[:, np.arange(4)[None, :], self.exponents], axis=2)
        return monomials @ self.coefficients

    def derivative(self, k: int) -> "Polynomial4":
        """Derivada parcial em relação a x_k"""
        terms = []
        for coeff, exps in zip(self.coefficients, self.exponents):
            if exps[k] == 0:
                continue
            new = exps.copy()
            new[k] -= 1
            terms.append((coeff * exps[k], new))
        return Polynomial4(terms)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Gradiente ambiente, shape (n, 4)"""
        if self._gradient is None:
            self._gradient = [self.derivative(k) for k in range(4)]
        return np.stack([g.value(x) for g in self._gradient], axis=-1)

    def directional(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.einsum("ij,ij->i", self.gradient(x), np.atleast_2d(v))

    def laplacian(self) -> "Polynomial4":
        terms: List[Term] = []
        for k in range(4):
            terms.extend(self.derivative(k).derivative(k).terms())
        return Polynomial4(terms)

    def is_zero(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.coefficients) <= tol))

    def is_harmonic(self, tol: float = 1e-12) -> bool:
        return self.laplacian().is_zero(tol)

    def is_deck_invariant(self, p: int, samples: int = 64, tol: float = 1e-12, seed: int = 0) -> bool:
        """Verifica invariância sob z ↦ e^{2πi/p}z em pontos aleatórios da esfera"""
        if p == 1:
            return True
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(samples, 4))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        c, s = np.cos(2 * np.pi / p), np.sin(2 * np.pi / p)
        rotated = np.column_stack([
            c * x[:, 0] - s * x[:, 1], s * x[:, 0] + c * x[:, 1],
            c * x[:, 2] - s * x[:, 3], s * x[:, 2] + c * x[:, 3],
        ])
        return bool(np.max(np.abs(self.value(rotated) - self.value(x))) <= tol)

    def sup_on_sphere(self, samples: int = 4096, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(samples, 4))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        return float(np.max(np.abs(self.value(x)))) if len(self.coefficients) else 0.0

    def __repr__(self) -> str:
        return f"Polynomial4({self.terms()})"


# Geradores nomeados (todos harmônicos)
PRESETS: Dict[str, List[Term]] = {
    # |z₁|² − |z₂|²
    "height": [(1.0, (2, 0, 0, 0)), (1.0, (0, 2, 0, 0)), (-1.0, (0, 0, 2, 0)), (-1.0, (0, 0, 0, 2))],
    # Re(z₁ z̄₂)
    "cross": [(1.0, (1, 0, 1, 0)), (1.0, (0, 1, 0, 1))],
    # x₁x₃, não invariante ao longo das fibras
    "mixed": [(1.0, (1, 0, 1, 0))],
    # Re(z₁² z̄₂²)
    "quartic": [
        (1.0, (2, 0, 2, 0)), (-1.0, (2, 0, 0, 2)), (-1.0, (0, 2, 2, 0)),
        (1.0, (0, 2, 0, 2)), (4.0, (1, 1, 1, 1)),
    ],
}


def preset(name: str) -> Polynomial4:
    """Retorna um gerador harmônico pelo nome"""
    try:
        return Polynomial4(PRESETS[name])
    except KeyError as e:
        raise ValueError(f"Gerador desconhecido: {name}. Disponíveis: {', '.join(PRESETS)}") from e
