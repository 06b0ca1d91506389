"""Funções do espaço 𝕍 no disco: nulas com a diferencial na borda r = 0 e radiais perto do centro.

Convenção de normas: ‖f‖_{C^m} é a soma, sobre multi-índices de ordem ≤ m em (r, θ), dos supremos
das derivadas parciais; ‖f‖_𝕍 = ‖f‖_{C²} + ‖(1/r)df‖_{C¹} com 1/r aplicado por divisão chapéu.
"""
import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from scipy.interpolate import RegularGridInterpolator

from src.discmaps.chart import DiscMapError
from src.utils.quadrature import hat_nodes

logger = logging.getLogger(__name__)

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]


class NonVanishingBoundary(DiscMapError):
    """A função não se anula na borda do disco"""
    pass


def _divided(poly: Polynomial, power: int) -> Polynomial:
    """poly/ρ^power para um polinômio com os primeiros coeficientes nulos"""
    coef = poly.coef[power:]
    return Polynomial(coef if coef.size else [0.0])


def _trig(kind: str, m: int, order: int, theta: np.ndarray) -> np.ndarray:
    x = 2.0 * np.pi * m * theta + order * np.pi / 2.0
    base = np.cos(x) if kind == "cos" else np.sin(x)
    return (2.0 * np.pi * m) ** order * base


@dataclass(frozen=True)
class AngularTerm:
    coefficient: float
    mode: int
    kind: str = "cos"

    def __post_init__(self):
        if self.mode < 1 or self.kind not in ("cos", "sin"):
            raise ValueError(f"Termo angular inválido: modo {self.mode}, tipo {self.kind}")


@dataclass(frozen=True)
class GeneratingSpec:
    """G(ρ, ϑ) = Σ c_j ρ^{j+2} + Σ a·ρ²(ρ_p − ρ)₊⁴·trig(2πmϑ)"""

    k: float = 1.0
    radial: Tuple[float, ...] = ()
    angular: Tuple[AngularTerm, ...] = ()
    plateau: Optional[float] = None

    @property
    def radius(self) -> float:
        return float(np.sqrt(2.0 * self.k))

    @property
    def rho_plateau(self) -> float:
        return self.plateau if self.plateau is not None else 0.75 * self.radius

    @property
    def radial_poly(self) -> Polynomial:
        return Polynomial([0.0, 0.0, *self.radial])

    @property
    def profile(self) -> Polynomial:
        return Polynomial([0.0, 0.0, 1.0]) * Polynomial([self.rho_plateau, -1.0]) ** 4

    def is_zero(self) -> bool:
        return not any(self.radial) and not any(t.coefficient for t in self.angular)

    def scaled(self, t: float) -> "GeneratingSpec":
        return replace(self, radial=tuple(t * c for c in self.radial),
                       angular=tuple(replace(a, coefficient=t * a.coefficient) for a in self.angular))

    def __neg__(self) -> "GeneratingSpec":
        return self.scaled(-1.0)

    def derivative(self, i: int, j: int) -> Field:
        """∂_ρ^i ∂_ϑ^j G em forma fechada"""
        radial = self.radial_poly.deriv(i) if i else self.radial_poly
        profile = self.profile.deriv(i) if i else self.profile

        def fn(rho, theta):
            rho, theta = np.broadcast_arrays(np.asarray(rho, float), np.asarray(theta, float))
            out = radial(rho) if j == 0 else np.zeros(rho.shape)
            if self.angular:
                inside = np.where(rho < self.rho_plateau, profile(rho), 0.0)
                for term in self.angular:
                    out = out + term.coefficient * inside * _trig(term.kind, term.mode, j, theta)
            return out

        return fn

    def value(self, rho, theta) -> np.ndarray:
        return self.derivative(0, 0)(rho, theta)

    def split(self, rho, theta) -> Tuple[np.ndarray, np.ndarray]:
        """(G_ρ, G_ϑ) com ∂_ρG = ρG_ρ e ∂_ϑG = ρ²G_ϑ, sem divisão por ρ"""
        rho, theta = np.broadcast_arrays(np.asarray(rho, float), np.asarray(theta, float))
        g_rho = _divided(self.radial_poly.deriv(), 1)(rho)
        g_theta = np.zeros(rho.shape)
        if self.angular:
            inside = rho < self.rho_plateau
            d_profile = np.where(inside, _divided(self.profile.deriv(), 1)(rho), 0.0)
            reduced = np.where(inside, _divided(self.profile, 2)(rho), 0.0)
            for term in self.angular:
                g_rho = g_rho + term.coefficient * d_profile * _trig(term.kind, term.mode, 0, theta)
                g_theta = g_theta + term.coefficient * reduced * _trig(term.kind, term.mode, 1, theta)
        return g_rho, g_theta

    def split_theta_slope(self, rho, theta) -> np.ndarray:
        """∂_ρ G_ϑ"""
        rho, theta = np.broadcast_arrays(np.asarray(rho, float), np.asarray(theta, float))
        out = np.zeros(rho.shape)
        if self.angular:
            slope = np.where(rho < self.rho_plateau, _divided(self.profile, 2).deriv()(rho), 0.0)
            for term in self.angular:
                out = out + term.coefficient * slope * _trig(term.kind, term.mode, 1, theta)
        return out

    def to_dict(self) -> Dict:
        return {
            "k": self.k,
            "radial": list(self.radial),
            "angular": [[t.coefficient, t.mode, t.kind] for t in self.angular],
            "plateau": self.plateau,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "GeneratingSpec":
        angular = tuple(AngularTerm(float(c), int(m), str(kind)) for c, m, kind in data.get("angular", []))
        return cls(float(data.get("k", 1.0)), tuple(float(c) for c in data.get("radial", [])),
                   angular, data.get("plateau"))


class VFunction:
    """Função escalar no disco em coordenadas de colar (r, θ) com derivadas analíticas opcionais.

    Derivadas ausentes são obtidas por diferenças finitas centradas, unilaterais perto de
    r = 0 e r = a.
    """

    def __init__(self, func: Field, k: float = 1.0,
                 derivative: Optional[Callable[[int, int], Optional[Field]]] = None,
                 split: Optional[Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]] = None,
                 h: float = 1e-3, name: str = ""):
        self.func = func
        self.k = float(k)
        self._derivative = derivative
        self._split = split
        self.h = h
        self.name = name
        self._cache: Dict[Tuple[int, int], Field] = {}

    @classmethod
    def from_spec(cls, spec: GeneratingSpec) -> "VFunction":
        return cls(spec.value, spec.k, spec.derivative, spec.split, name="closed_form")

    @property
    def radius(self) -> float:
        return float(np.sqrt(2.0 * self.k))

    @property
    def has_split(self) -> bool:
        return self._split is not None

    def __call__(self, r, theta) -> np.ndarray:
        return self.func(r, theta)

    def partial(self, i: int, j: int) -> Field:
        if (i, j) == (0, 0):
            return self.func
        if (i, j) in self._cache:
            return self._cache[(i, j)]
        fn = self._derivative(i, j) if self._derivative is not None else None
        if fn is None:
            fn = self._fd_r(self.partial(i - 1, j)) if i > 0 else self._fd_theta(self.partial(0, j - 1))
        self._cache[(i, j)] = fn
        return fn

    def _fd_r(self, fn: Field) -> Field:
        h, a = self.h, self.radius

        def d(r, theta):
            r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
            r, theta = r.ravel(), theta.ravel()
            out = np.empty(r.shape)
            low, high = r < h, r > a - h
            mid = ~(low | high)
            if mid.any():
                out[mid] = (fn(r[mid] + h, theta[mid]) - fn(r[mid] - h, theta[mid])) / (2 * h)
            if low.any():
                rl, tl = r[low], theta[low]
                out[low] = (-3 * fn(rl, tl) + 4 * fn(rl + h, tl) - fn(rl + 2 * h, tl)) / (2 * h)
            if high.any():
                rh, th = r[high], theta[high]
                out[high] = (3 * fn(rh, th) - 4 * fn(rh - h, th) + fn(rh - 2 * h, th)) / (2 * h)
            return out

        return d

    def _fd_theta(self, fn: Field) -> Field:
        h = self.h
        return lambda r, theta: (fn(r, np.asarray(theta) + h) - fn(r, np.asarray(theta) - h)) / (2 * h)

    def split(self, r, theta) -> Tuple[np.ndarray, np.ndarray]:
        return radial_split(self, r, theta)

    def to_frame(self, r: np.ndarray, theta: np.ndarray) -> pd.DataFrame:
        R, TH = np.meshgrid(r, theta, indexing="ij")
        return pd.DataFrame({"r": R.ravel(), "theta": TH.ravel(), "value": self.func(R.ravel(), TH.ravel())})

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, k: float = 1.0) -> "VFunction":
        """Interpolação cúbica de uma malha (r, theta, value), periódica em θ"""
        r = np.unique(frame["r"].to_numpy())
        theta = np.unique(frame["theta"].to_numpy())
        table = frame.pivot(index="r", columns="theta", values="value").loc[r, theta].to_numpy()
        period_theta = np.concatenate([theta[-2:] - 1.0, theta, theta[:2] + 1.0])
        padded = np.concatenate([table[:, -2:], table, table[:, :2]], axis=1)
        interpolator = RegularGridInterpolator((r, period_theta), padded, method="cubic",
                                               bounds_error=False, fill_value=None)

        def func(rr, tt):
            rr, tt = np.broadcast_arrays(np.asarray(rr, float), np.asarray(tt, float))
            return interpolator(np.column_stack([rr.ravel(), (tt.ravel() % 1.0)])).reshape(rr.shape)

        return cls(func, k, name="grid")


def _as_vfunction(f: Union[VFunction, GeneratingSpec, Field], k: float = 1.0) -> VFunction:
    if isinstance(f, VFunction):
        return f
    if isinstance(f, GeneratingSpec):
        return VFunction.from_spec(f)
    return VFunction(f, k)


def _check_boundary(f: VFunction, theta: np.ndarray, tol: float) -> None:
    boundary = np.max(np.abs(f(np.zeros_like(theta, dtype=float), theta))) if np.size(theta) else 0.0
    if boundary > tol:
        raise NonVanishingBoundary(f"|f(0, θ)| = {boundary:.3e} acima de {tol:.0e}")


def hat_divide(f: Union[VFunction, Field], r, theta, nodes: int = 16, tol: float = 1e-10) -> np.ndarray:
    """f̂ com f = r·f̂, por f̂(r, θ) = ∫₀¹ ∂_r f(ur, θ) du em Gauss–Legendre"""
    f = _as_vfunction(f)
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    _check_boundary(f, np.unique(theta), tol)
    u, w = hat_nodes(nodes)
    d_r = f.partial(1, 0)
    return sum(wi * d_r(ui * r, theta) for ui, wi in zip(u, w))


def radial_split(f: Union[VFunction, GeneratingSpec, Field], r, theta, nodes: int = 16,
                 tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    """(f_ρ, f_ϑ) com ∂_ρf = ρf_ρ e ∂_ϑf = ρ²f_ϑ, por divisão chapéu dupla"""
    f = _as_vfunction(f)
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    if f.has_split:
        return f._split(r, theta)
    _check_boundary(f, np.unique(theta), tol)
    u, w = hat_nodes(nodes)
    d_rr = f.partial(2, 0)
    d_rrt = f.partial(2, 1)
    f_rho = sum(wi * d_rr(ui * r, theta) for ui, wi in zip(u, w))
    f_theta = sum(wi * wj * uj * d_rrt(ui * uj * r, theta)
                  for ui, wi in zip(u, w) for uj, wj in zip(u, w))
    return f_rho, f_theta


def vnorm(f: Union[VFunction, GeneratingSpec, Field], n_r: int = 24, n_theta: int = 32,
          nodes: int = 16) -> float:
    """‖f‖_𝕍 amostrado numa malha de colar"""
    f = _as_vfunction(f)
    r = np.linspace(0.0, f.radius, n_r)
    theta = np.arange(n_theta) / n_theta
    R, TH = [a.ravel() for a in np.meshgrid(r, theta, indexing="ij")]
    sup = lambda fn: float(np.max(np.abs(fn(R, TH))))

    c2 = sum(sup(f.partial(i, j)) for i in range(3) for j in range(3 - i))

    u, w = hat_nodes(nodes)

    def hat_of(i: int, j: int, weight_power: int) -> Field:
        fn = f.partial(i, j)
        return lambda rr, tt: sum(wi * ui ** weight_power * fn(ui * rr, tt) for ui, wi in zip(u, w))

    quotient = [hat_of(2, 0, 0), hat_of(1, 1, 0),            # f̂_r, f̂_θ
                hat_of(3, 0, 1), hat_of(2, 1, 0),            # ∂_r f̂_r, ∂_θ f̂_r
                hat_of(2, 1, 1), hat_of(1, 2, 0)]            # ∂_r f̂_θ, ∂_θ f̂_θ
    c1 = sum(sup(fn) for fn in quotient)
    return c2 + c1


def random_spec(rng: np.random.Generator, k: float = 1.0, norm: float = 0.01, modes: int = 2,
                radial_degree: int = 2, plateau: Optional[float] = None) -> GeneratingSpec:
    """G admissível aleatório com ‖G‖_𝕍 = norm"""
    radial = tuple(rng.normal(size=radial_degree + 1))
    angular = tuple(AngularTerm(float(rng.normal()), m, kind)
                    for m in range(1, modes + 1) for kind in ("cos", "sin"))
    spec = GeneratingSpec(k, radial, angular, plateau)
    return spec.scaled(norm / vnorm(spec))
