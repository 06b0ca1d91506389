"""Formas de contato em S³ ⊂ R⁴ e nos espaços lenticulares L(p,1), sempre no recobrimento S³.

Convenções: coordenadas ambiente (x₁, y₁, x₂, y₂) com z₁ = x₁ + i y₁, z₂ = x₂ + i y₂.
A forma de referência é α_* = (1/2π) Σ (x dy − y dx), de período 1 e volume 1.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence, Tuple

import numpy as np

from src.utils.polynomials import Polynomial4
from src.utils.quadrature import gauss_legendre, periodic_nodes

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
ZOLL_DENSITY = 1.0 / (2.0 * np.pi ** 2)
HOPF_JACOBIAN = 2.0 * np.pi ** 2
# ponto de S³ em (x₁, y₁, x₂, y₂); lotes têm forma (n, 4)
Point4 = np.ndarray

REFERENCE_POINT: Point4 = np.array([1.0, 0.0, 0.0, 0.0])


class GeometryError(Exception):
    """Erro base das rotinas geométricas"""
    pass


class DegenerateContact(GeometryError):
    """A condição de contato falha numericamente"""
    pass


class NonOrientedDensity(GeometryError):
    """A densidade α∧dα troca de sinal na malha de quadratura"""
    pass


class EmptyOrbitSet(GeometryError):
    """Nenhuma órbita da classe 𝔥 disponível"""
    pass


class OutOfChart(GeometryError):
    """Ponto fora da carta de Darboux"""
    pass


# ---------------------------------------------------------------------------
# Pontos de S³ e ação do recobrimento
# ---------------------------------------------------------------------------

def as_batch(x: np.ndarray) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


def to_complex(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    x = as_batch(x)
    return x[:, 0] + 1j * x[:, 1], x[:, 2] + 1j * x[:, 3]


def from_complex(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    z1 = np.atleast_1d(z1)
    z2 = np.atleast_1d(z2)
    return np.column_stack([z1.real, z1.imag, z2.real, z2.imag])


def project(x: np.ndarray) -> np.ndarray:
    x = as_batch(x)
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def deck(x: np.ndarray, p: int, j: int = 1) -> np.ndarray:
    """Aplica z ↦ e^{2πij/p}z nas duas coordenadas complexas"""
    z1, z2 = to_complex(x)
    phase = np.exp(TWO_PI * 1j * j / p)
    return from_complex(phase * z1, phase * z2)


def hermitian(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """⟨a, b⟩ complexo em C², linha a linha"""
    a1, a2 = to_complex(a)
    b1, b2 = to_complex(b)
    return np.conj(a1) * b1 + np.conj(a2) * b2


def quaternion_frame(x: np.ndarray) -> np.ndarray:
    """Referencial ortonormal tangente (ix, jx, kx), shape (n, 3, 4)"""
    x = as_batch(x)
    x1, x2, x3, x4 = x.T
    bi = np.column_stack([-x2, x1, -x4, x3])
    bj = np.column_stack([-x3, x4, x1, -x2])
    bk = np.column_stack([-x4, -x3, x2, x1])
    return np.stack([bi, bj, bk], axis=1)


def hopf_point(u: np.ndarray, phi1: np.ndarray, phi2: np.ndarray) -> np.ndarray:
    """Ponto de S³ em coordenadas de Hopf (u = |z₂|², φ₁, φ₂)"""
    z1 = np.sqrt(1.0 - u) * np.exp(TWO_PI * 1j * phi1)
    z2 = np.sqrt(u) * np.exp(TWO_PI * 1j * phi2)
    return from_complex(z1, z2)


# ---------------------------------------------------------------------------
# Campos de covetores
# ---------------------------------------------------------------------------

class SphereMap(Protocol):
    """Aplicação de S³ com diferencial analítica"""

    def apply(self, x: np.ndarray) -> np.ndarray: ...

    def push(self, x: np.ndarray, v: np.ndarray) -> np.ndarray: ...


class CovectorField(ABC):
    """Uma 1-forma em S³ com avaliação pontual da derivada exterior"""

    description: str = ""

    @abstractmethod
    def evaluate(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """α_x(v) para lotes de pontos e vetores (n, 4)"""

    @abstractmethod
    def differential(self, x: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """dα_x(u, v)"""


class StandardField(CovectorField):
    """c·α_* com α_* = (1/2π) Σ (x dy − y dx)"""

    def __init__(self, scale: float = 1.0):
        self.scale = float(scale)
        self.description = f"{self.scale:g}·alpha_*"

    @staticmethod
    def _j(x: np.ndarray) -> np.ndarray:
        return np.column_stack([-x[:, 1], x[:, 0], -x[:, 3], x[:, 2]])

    def evaluate(self, x, v):
        x, v = as_batch(x), as_batch(v)
        return self.scale / TWO_PI * np.einsum("ij,ij->i", self._j(x), v)

    def differential(self, x, u, v):
        u, v = as_batch(u), as_batch(v)
        return self.scale / np.pi * np.einsum("ij,ij->i", self._j(u), v)


class ScaledField(CovectorField):
    """(1 + εf)·β para f polinomial"""

    def __init__(self, base: CovectorField, f: Polynomial4, eps: float):
        self.base, self.f, self.eps = base, f, float(eps)
        self.description = f"(1 + {self.eps:g} f)·[{base.description}]"

    def evaluate(self, x, v):
        return (1.0 + self.eps * self.f.value(x)) * self.base.evaluate(x, v)

    def differential(self, x, u, v):
        x = as_batch(x)
        factor = 1.0 + self.eps * self.f.value(x)
        df_u = self.f.directional(x, u)
        df_v = self.f.directional(x, v)
        wedge = df_u * self.base.evaluate(x, v) - df_v * self.base.evaluate(x, u)
        return self.eps * wedge + factor * self.base.differential(x, u, v)


class ShiftedField(CovectorField):
    """β + ε·η com η = Σ h_j dx_j"""

    def __init__(self, base: CovectorField, components: Sequence[Polynomial4], eps: float):
        if len(components) != 4:
            raise ValueError("η precisa de quatro componentes polinomiais")
        self.base, self.components, self.eps = base, list(components), float(eps)
        self.description = f"[{base.description}] + {self.eps:g}·eta"

    def _eta(self, x, v):
        v = as_batch(v)
        return sum(h.value(x) * v[:, j] for j, h in enumerate(self.components))

    def evaluate(self, x, v):
        return self.base.evaluate(x, v) + self.eps * self._eta(x, v)

    def differential(self, x, u, v):
        u, v = as_batch(u), as_batch(v)
        d_eta = sum(h.directional(x, u) * v[:, j] - h.directional(x, v) * u[:, j]
                    for j, h in enumerate(self.components))
        return self.base.differential(x, u, v) + self.eps * d_eta


class ExactShiftField(CovectorField):
    """β + c·dh: mesma derivada exterior que β"""

    def __init__(self, base: CovectorField, h: Polynomial4, c: float = 1.0):
        self.base, self.h, self.c = base, h, float(c)
        self.description = f"[{base.description}] + {self.c:g}·dh"

    def evaluate(self, x, v):
        return self.base.evaluate(x, v) + self.c * self.h.directional(as_batch(x), v)

    def differential(self, x, u, v):
        return self.base.differential(x, u, v)


class PullbackField(CovectorField):
    """c·F^*β para uma aplicação F com diferencial conhecida"""

    def __init__(self, base: CovectorField, mapping: SphereMap, scale: float = 1.0):
        self.base, self.mapping, self.scale = base, mapping, float(scale)
        self.description = f"{self.scale:g}·F^*[{base.description}]"

    def evaluate(self, x, v):
        x = as_batch(x)
        return self.scale * self.base.evaluate(self.mapping.apply(x), self.mapping.push(x, v))

    def differential(self, x, u, v):
        x = as_batch(x)
        y = self.mapping.apply(x)
        return self.scale * self.base.differential(y, self.mapping.push(x, u), self.mapping.push(x, v))


@dataclass(frozen=True)
class ContactForm:
    """Forma de contato no recobrimento S³ de L(p,1)"""

    base: CovectorField
    lens_order: int = 1
    kind: str = "zoll_reference"
    amplitude: float = 0.0
    reference_period: float = 1.0
    normalization: Optional[SphereMap] = None
    source: Optional["ContactForm"] = None
    label: str = ""

    def evaluate(self, x, v) -> np.ndarray:
        return self.base.evaluate(x, v)

    def differential(self, x, u, v) -> np.ndarray:
        return self.base.differential(x, u, v)

    def describe(self) -> str:
        return self.label or f"{self.kind} (p={self.lens_order}): {self.base.description}"


# ---------------------------------------------------------------------------
# Construtores
# ---------------------------------------------------------------------------

def zoll_form(p: int = 1) -> ContactForm:
    """Forma de Zoll de período primo 1: α_* para p=1, p·α_* no recobrimento para p ≥ 2"""
    if p < 1:
        raise ValueError(f"Ordem lenticular inválida: {p}")
    return ContactForm(StandardField(float(p)), lens_order=p, kind="zoll_reference")


def scaled_perturbation(f: Polynomial4, eps: float, p: int = 1) -> ContactForm:
    base = zoll_form(p)
    return ContactForm(ScaledField(base.base, f, eps), lens_order=p,
                       kind="scaled_perturbation", amplitude=float(eps))


def one_form_shift(components: Sequence[Polynomial4], eps: float, p: int = 1) -> ContactForm:
    base = zoll_form(p)
    return ContactForm(ShiftedField(base.base, components, eps), lens_order=p,
                       kind="one_form_shift", amplitude=float(eps))


def add_exact(alpha: ContactForm, h: Polynomial4, c: float = 1.0) -> ContactForm:
    """α + c·dh, com as mesmas trajetórias de Reeb que α"""
    return ContactForm(ExactShiftField(alpha.base, h, c), lens_order=alpha.lens_order,
                       kind=alpha.kind, amplitude=alpha.amplitude)


class _Identity:
    def apply(self, x):
        return as_batch(x)

    def push(self, x, v):
        return as_batch(v)


def rescale(alpha: ContactForm, c: float) -> ContactForm:
    return ContactForm(PullbackField(alpha.base, _Identity(), c), lens_order=alpha.lens_order,
                       kind=alpha.kind, amplitude=alpha.amplitude)


# ---------------------------------------------------------------------------
# Campo de Reeb, volume e razões
# ---------------------------------------------------------------------------

def _kernel(alpha: ContactForm, x: np.ndarray) -> np.ndarray:
    """Direção do núcleo de dα: (A₂₃, −A₁₃, A₁₂) no referencial quaterniônico"""
    frame = quaternion_frame(x)
    b1, b2, b3 = frame[:, 0], frame[:, 1], frame[:, 2]
    a12 = alpha.differential(x, b1, b2)
    a13 = alpha.differential(x, b1, b3)
    a23 = alpha.differential(x, b2, b3)
    return a23[:, None] * b1 - a13[:, None] * b2 + a12[:, None] * b3


def contact_density(alpha: ContactForm, x: np.ndarray) -> np.ndarray:
    """Densidade de α∧dα relativa à medida redonda de S³"""
    x = as_batch(x)
    return alpha.evaluate(x, _kernel(alpha, x))


def reeb_at(alpha: ContactForm, q: Point4, tol: float = 1e-12) -> np.ndarray:
    """Campo de Reeb R com dα(R,·) = 0 e α(R) = 1"""
    x = as_batch(q)
    kernel = _kernel(alpha, x)
    scale = alpha.evaluate(x, kernel)
    if np.any(np.abs(scale) < tol):
        raise DegenerateContact(f"α(ker dα) abaixo da tolerância: min |α(K)| = {np.min(np.abs(scale)):.3e}")
    reeb = kernel / scale[:, None]
    return reeb[0] if np.ndim(q) == 1 else reeb


@dataclass
class ContactCheck:
    min_density: float
    max_density: float

    @property
    def ok(self) -> bool:
        return self.min_density > 0.0 or self.max_density < 0.0


def contact_check(alpha: ContactForm, n: int = 16) -> ContactCheck:
    """Verifica o sinal da densidade de α∧dα numa malha de Hopf"""
    x, _ = hopf_grid(n, rule="midpoint")
    density = contact_density(alpha, x)
    return ContactCheck(float(density.min()), float(density.max()))


def hopf_grid(n: int, rule: str = "gauss") -> Tuple[np.ndarray, np.ndarray]:
    """Malha tensorial em (u, φ₁, φ₂) com pesos que incluem o jacobiano 2π²"""
    if rule == "gauss":
        u, wu = gauss_legendre(n, 0.0, 1.0)
    elif rule == "midpoint":
        u, wu = periodic_nodes(n)
    else:
        raise ValueError(f"Regra de quadratura desconhecida: {rule}")
    phi, wphi = periodic_nodes(n)
    U, P1, P2 = np.meshgrid(u, phi, phi, indexing="ij")
    W = wu[:, None, None] * wphi[None, :, None] * wphi[None, None, :]
    return hopf_point(U.ravel(), P1.ravel(), P2.ravel()), HOPF_JACOBIAN * W.ravel()


@dataclass
class VolumeEstimate:
    value: float
    error: float
    nodes: int


def volume_estimate(alpha: ContactForm, n: int = 64, rule: str = "gauss",
                    richardson: bool = True, chunk: int = 65536) -> VolumeEstimate:
    """Volume de contato com estimativa de erro por refinamento (n contra 2n)"""

    def integrate(m: int) -> float:
        x, w = hopf_grid(m, rule)
        total, sign = 0.0, None
        for start in range(0, len(w), chunk):
            density = contact_density(alpha, x[start:start + chunk])
            local = np.sign(density)
            if sign is None:
                sign = local[0]
            if sign == 0 or np.any(local != sign):
                raise NonOrientedDensity("α∧dα muda de sinal: a forma não é de contato")
            total += float(np.dot(density, w[start:start + chunk]))
        return total / alpha.lens_order

    value = integrate(n)
    error = abs(integrate(2 * n) - value) if richardson else 0.0
    if richardson:
        logger.debug(f"Volume {value:.12f} (refinamento {n}→{2 * n}: Δ = {error:.2e})")
    return VolumeEstimate(value, error, n)


def contact_volume(alpha: ContactForm, n: int = 64, rule: str = "gauss", richardson: bool = False) -> float:
    """Vol(α) = ∫ α∧dα; no caso lenticular o resultado do recobrimento é dividido por p"""
    return volume_estimate(alpha, n, rule, richardson).value


def ratios(alpha: ContactForm, orbits: Sequence, volume: Optional[float] = None) -> Tuple[float, float]:
    """(ρ_sys, ρ_dia) = (T_min², T_max²)/Vol sobre órbitas da classe 𝔥"""
    periods = [o.period for o in orbits if o.class_h]
    if not periods:
        raise EmptyOrbitSet("Nenhuma órbita da classe 𝔥 fornecida")
    vol = contact_volume(alpha) if volume is None else volume
    return min(periods) ** 2 / vol, max(periods) ** 2 / vol


# ---------------------------------------------------------------------------
# Distância C³₋
# ---------------------------------------------------------------------------

def _c3_grid(level: int) -> np.ndarray:
    """Malhas encaixadas: os nós de um nível estão contidos nos do nível seguinte"""
    n = 2 ** (level + 1)
    u = np.arange(n + 1) / n
    phi = np.arange(n) / n
    U, P1, P2 = np.meshgrid(u, phi, phi, indexing="ij")
    return hopf_point(U.ravel(), P1.ravel(), P2.ravel())


def _difference_components(alpha1: ContactForm, alpha2: ContactForm, x: np.ndarray) -> np.ndarray:
    frame = quaternion_frame(x)
    values = []
    for i in range(3):
        values.append(alpha1.evaluate(x, frame[:, i]) - alpha2.evaluate(x, frame[:, i]))
    for i, j in ((0, 1), (0, 2), (1, 2)):
        values.append(alpha1.differential(x, frame[:, i], frame[:, j])
                      - alpha2.differential(x, frame[:, i], frame[:, j]))
    return np.stack(values, axis=1)


def _geodesic(x: np.ndarray, direction: np.ndarray, s: float) -> np.ndarray:
    return np.cos(s) * x + np.sin(s) * direction


def c3_minus_distance(alpha1: ContactForm, alpha2: ContactForm, level: int = 2, h: float = 1e-3) -> float:
    """Estimativa amostral de ‖α₁ − α₂‖_{C²} + ‖dα₁ − dα₂‖_{C²} (cota inferior)"""
    x = _c3_grid(level)
    frame = quaternion_frame(x)
    comp = lambda y: _difference_components(alpha1, alpha2, y)

    base = comp(x)
    estimate = float(np.max(np.abs(base)))
    for k in range(3):
        plus = comp(_geodesic(x, frame[:, k], h))
        minus = comp(_geodesic(x, frame[:, k], -h))
        estimate = max(estimate,
                       float(np.max(np.abs((plus - minus) / (2 * h)))),
                       float(np.max(np.abs((plus - 2 * base + minus) / h ** 2))))
        for l in range(k + 1, 3):
            mixed = []
            for sk, sl in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                y = project(x + sk * h * frame[:, k] + sl * h * frame[:, l])
                mixed.append(comp(y))
            second = (mixed[0] - mixed[1] - mixed[2] + mixed[3]) / (4 * h ** 2)
            estimate = max(estimate, float(np.max(np.abs(second))))
    return estimate


# ---------------------------------------------------------------------------
# Carta de Darboux
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DarbouxChart:
    """𝔇(x, φ) = (√(1−|x|²/2p) e^{2πiφ/p}, (x₁+ix₂)/√(2p) · e^{2πiφ/p})"""

    lens_order: int = 1
    margin: float = 1e-3

    @property
    def radius(self) -> float:
        return float(np.sqrt(2.0 * self.lens_order))

    def forward(self, x: np.ndarray, phi: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        phi = np.broadcast_to(np.asarray(phi, dtype=float), (x.shape[0],))
        p = self.lens_order
        rho2 = np.sum(x ** 2, axis=1)
        phase = np.exp(TWO_PI * 1j * phi / p)
        z1 = np.sqrt(1.0 - rho2 / (2 * p)) * phase
        z2 = (x[:, 0] + 1j * x[:, 1]) / np.sqrt(2 * p) * phase
        return from_complex(z1, z2)

    def jacobian(self, x: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Derivadas de forward em (x₁, x₂, φ), shape (n, 3, 4)"""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        phi = np.broadcast_to(np.asarray(phi, dtype=float), (x.shape[0],))
        p = self.lens_order
        c = np.sqrt(1.0 - np.sum(x ** 2, axis=1) / (2 * p))
        e = np.exp(TWO_PI * 1j * phi / p)
        s = np.sqrt(2 * p)
        d1 = from_complex(-x[:, 0] / (2 * p * c) * e, e / s)
        d2 = from_complex(-x[:, 1] / (2 * p * c) * e, 1j * e / s)
        z = self.forward(x, phi)
        z1, z2 = to_complex(z)
        dphi = from_complex(TWO_PI * 1j / p * z1, TWO_PI * 1j / p * z2)
        return np.stack([d1, d2, dphi], axis=1)

    def inverse(self, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Retorna (x, φ) com φ ∈ [0, p)"""
        z1, z2 = to_complex(q)
        p = self.lens_order
        modulus = np.abs(z1)
        if np.any(modulus <= np.sqrt(1.0 - (1.0 - self.margin) ** 2)):
            raise OutOfChart("Ponto fora da carta de Darboux (|x| ≥ √(2p)(1 − margem))")
        phi = p * ((np.angle(z1) / TWO_PI) % 1.0)
        w = np.sqrt(2 * p) * z2 * np.conj(z1) / modulus
        return np.column_stack([w.real, w.imag]), phi

    def pullback_residual(self, n: int = 10, seed: int = 0) -> float:
        """max |𝔇^*(pα_*) − (dφ + λ_st)| numa malha de n³ pontos"""
        rng = np.random.default_rng(seed)
        radius = rng.uniform(0.0, 0.9 * self.radius, n ** 3)
        angle = rng.uniform(0.0, 1.0, n ** 3)
        x = np.column_stack([radius * np.cos(TWO_PI * angle), radius * np.sin(TWO_PI * angle)])
        phi = rng.uniform(0.0, 1.0, n ** 3)
        point = self.forward(x, phi)
        jac = self.jacobian(x, phi)
        alpha = zoll_form(self.lens_order)
        expected = [-x[:, 1] / (4 * np.pi), x[:, 0] / (4 * np.pi), np.ones(len(phi))]
        return max(float(np.max(np.abs(alpha.evaluate(point, jac[:, i]) - expected[i]))) for i in range(3))


def darboux_chart(p: int = 1) -> DarbouxChart:
    return DarbouxChart(lens_order=p)


def fiber_angle(x: Point4, center: Point4) -> Tuple[np.ndarray, np.ndarray]:
    """Ângulo de fibra de Darboux relativo à carta centrada em `center` e o módulo do produto hermitiano"""
    c = hermitian(np.broadcast_to(center, as_batch(x).shape), x)
    return np.angle(c) / TWO_PI, np.abs(c)
