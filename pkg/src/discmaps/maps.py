"""Difeomorfismos exatos do disco em coordenadas de colar e as funções geradoras 𝒢 e ℰ.

Um mapa φ é dado por (r, θ) ↦ (R_φ, Θ_φ) e pela ação σ com φ^*λ − λ = dσ, λ = (−k + ½r²)dθ.
Θ_φ é sempre um levantamento próximo de θ (sem redução módulo 1).
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import minimize, root

from src.discmaps.chart import DiscMapError
from src.discmaps.vfunction import GeneratingSpec, VFunction, _as_vfunction, radial_split
from src.utils.quadrature import gauss_legendre, quadratic_extrapolation, spectral_derivative, wrap_unit

logger = logging.getLogger(__name__)

Evaluation = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]]


class NonMonotone(DiscMapError):
    """ρ ↦ ρ√(1 − 2G_ϑ) não é estritamente crescente"""
    pass


class DomainOverflow(DiscMapError):
    """|θ − Θ_φ| ≥ ½ fora do platô central"""
    pass


def to_w(r: np.ndarray, theta: np.ndarray, k: float) -> np.ndarray:
    """Carta central w = √(2k − r²)·e^{−2πiθ}, como pontos (n, 2)"""
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    w = np.sqrt(np.clip(2.0 * k - r ** 2, 0.0, None)) * np.exp(-2j * np.pi * theta)
    return np.stack([w.real, w.imag], axis=-1)


def from_w(w: np.ndarray, k: float) -> Tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=float)
    r = np.sqrt(np.clip(2.0 * k - np.sum(w ** 2, axis=-1), 0.0, None))
    theta = (-np.arctan2(w[..., 1], w[..., 0]) / (2 * np.pi)) % 1.0
    return r, theta


class ExactDiscMap:
    """Aplicação exata φ do disco N com ação σ"""

    def __init__(self, evaluate: Evaluation, k: float = 1.0,
                 generating: Optional[Union[GeneratingSpec, VFunction]] = None, label: str = ""):
        self._evaluate = evaluate
        self.k = float(k)
        self.generating = generating
        self.label = label

    @property
    def radius(self) -> float:
        return float(np.sqrt(2.0 * self.k))

    def evaluate(self, r, theta) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        return self._evaluate(np.clip(r, 0.0, self.radius), theta)

    def apply(self, r, theta) -> Tuple[np.ndarray, np.ndarray]:
        R, Theta, _ = self.evaluate(r, theta)
        return R, Theta

    def sigma(self, r, theta) -> np.ndarray:
        return self.evaluate(r, theta)[2]

    def apply_w(self, w: np.ndarray) -> np.ndarray:
        r, theta = from_w(w, self.k)
        R, Theta = self.apply(r, theta)
        return to_w(R, Theta, self.k)

    def _jacobian(self, r, theta, h: float = 1e-7):
        a = self.radius
        up = np.minimum(r + h, a)
        down = np.maximum(r - h, 0.0)
        R_up, T_up = self.apply(up, theta)
        R_dn, T_dn = self.apply(down, theta)
        R_r, T_r = (R_up - R_dn) / (up - down), (T_up - T_dn) / (up - down)
        R_p, T_p = self.apply(r, theta + h)
        R_m, T_m = self.apply(r, theta - h)
        return R_r, (R_p - R_m) / (2 * h), T_r, (T_p - T_m) / (2 * h)

    def inverse(self, R, Theta, tol: float = 1e-13, max_iter: int = 40) -> Tuple[np.ndarray, np.ndarray]:
        """Newton no colar a partir de (R, Θ)"""
        R, Theta = np.broadcast_arrays(np.asarray(R, float), np.asarray(Theta, float))
        r, theta = R.copy(), Theta.copy()
        for _ in range(max_iter):
            Rc, Tc = self.apply(r, theta)
            f1, f2 = Rc - R, wrap_unit(Tc - Theta)
            if max(np.max(np.abs(f1), initial=0.0), np.max(np.abs(f2), initial=0.0)) < tol:
                break
            a11, a12, a21, a22 = self._jacobian(r, theta)
            det = a11 * a22 - a12 * a21
            dr = (a22 * f1 - a12 * f2) / det
            dt = (-a21 * f1 + a11 * f2) / det
            r = np.clip(r - dr, 0.0, self.radius)
            theta = theta - dt
        return r, theta

    def inverted(self) -> "ExactDiscMap":
        """φ⁻¹ com ação σ_{φ⁻¹} = −σ∘φ⁻¹"""

        def evaluate(R, Theta):
            r, theta = self.inverse(R, Theta)
            return r, theta, -self.sigma(r, theta)

        return ExactDiscMap(evaluate, self.k, label=f"inverse({self.label})")

    def displacement(self, r, theta) -> np.ndarray:
        w = to_w(r, theta, self.k)
        return np.linalg.norm(self.apply_w(w) - w, axis=-1)

    def sup_distance(self, other: Optional["ExactDiscMap"] = None, n_r: int = 32, n_theta: int = 64) -> float:
        """sup_N |φ − ψ| na carta w (ψ = id por omissão)"""
        r = np.linspace(0.0, self.radius, n_r)
        theta = np.arange(n_theta) / n_theta
        R, TH = [x.ravel() for x in np.meshgrid(r, theta, indexing="ij")]
        mine = to_w(*self.apply(R, TH), self.k)
        theirs = to_w(R, TH, self.k) if other is None else to_w(*other.apply(R, TH), self.k)
        return float(np.max(np.linalg.norm(mine - theirs, axis=-1)))

    def is_identity(self, tol: float = 1e-6) -> bool:
        return self.sup_distance() <= tol

    def area_residual(self, n_r: int = 24, n_theta: int = 32, h: float = 1e-5) -> float:
        """max |R(R_rΘ_θ − R_θΘ_r) − r|: preservação de r dr∧dθ"""
        r = np.linspace(0.05, 0.95, n_r) * self.radius
        theta = np.arange(n_theta) / n_theta
        R, TH = [x.ravel() for x in np.meshgrid(r, theta, indexing="ij")]
        Rp, Tp = self.apply(R + h, TH)
        Rm, Tm = self.apply(R - h, TH)
        Rq, Tq = self.apply(R, TH + h)
        Rn, Tn = self.apply(R, TH - h)
        image, _ = self.apply(R, TH)
        jac = ((Rp - Rm) * (Tq - Tn) - (Rq - Rn) * (Tp - Tm)) / (4 * h * h)
        return float(np.max(np.abs(image * jac - R)))

    def boundary_action_residual(self, n_theta: int = 64) -> float:
        """max |σ(0, θ) − K∘Γ_φ(0, θ)| com K = (k − ½R²)(θ − Θ)"""
        theta = np.arange(n_theta) / n_theta
        R, Theta, sigma = self.evaluate(np.zeros(n_theta), theta)
        return float(np.max(np.abs(sigma - (self.k - 0.5 * R ** 2) * (theta - Theta))))

    def c1_distance(self, n_r: int = 24, n_theta: int = 32, h: float = 1e-6) -> float:
        """‖φ − id‖_{C¹} amostrada no colar"""
        r = np.linspace(0.0, self.radius, n_r)
        theta = np.arange(n_theta) / n_theta
        R, TH = [x.ravel() for x in np.meshgrid(r, theta, indexing="ij")]
        Rv, Tv = self.apply(R, TH)
        a11, a12, a21, a22 = self._jacobian(R, TH, h)
        parts = [Rv - R, Tv - TH, a11 - 1.0, a12, a21, a22 - 1.0]
        return float(sum(np.max(np.abs(p)) for p in parts))

    def loop_exactness(self, n_loops: int = 20, samples: int = 64, seed: int = 0) -> np.ndarray:
        """|∮_{φ∘ℓ} λ − ∮_ℓ λ| para círculos aleatórios na carta w, λ = (1/4π)(w₁dw₂ − w₂dw₁)"""
        rng = np.random.default_rng(seed)
        a = self.radius
        radius = rng.uniform(0.05, 0.3, n_loops) * a
        center = rng.uniform(0.0, 1.0, n_loops) * (0.9 * a - radius)
        angle = rng.uniform(0.0, 2 * np.pi, n_loops)
        s = 2 * np.pi * np.arange(samples) / samples
        w = np.stack([center * np.cos(angle) + radius * np.cos(s)[:, None],
                      center * np.sin(angle) + radius * np.sin(s)[:, None]], axis=-1)
        image = self.apply_w(w.reshape(-1, 2)).reshape(w.shape)

        def circulation(curve: np.ndarray) -> np.ndarray:
            velocity = spectral_derivative(curve, 1.0)
            return np.mean(curve[..., 0] * velocity[..., 1] - curve[..., 1] * velocity[..., 0], axis=0) / (4 * np.pi)

        return np.abs(circulation(image) - circulation(w))

    def calabi(self, n_r: int = 48, n_theta: int = 64) -> float:
        """CAL(φ) = ½∫_N σ dλ com dλ = r dr∧dθ"""
        r, wr = gauss_legendre(n_r, 0.0, self.radius)
        theta = np.arange(n_theta) / n_theta
        R, TH = np.meshgrid(r, theta, indexing="ij")
        sigma = self.sigma(R.ravel(), TH.ravel()).reshape(R.shape)
        return 0.5 * float(np.sum(sigma * (r * wr)[:, None]) / n_theta)


def identity_map(k: float = 1.0) -> ExactDiscMap:
    return ExactDiscMap(lambda r, theta: (r, theta, np.zeros_like(r)), k, GeneratingSpec(k), "id")


def rotation_map(eps: float, k: float = 1.0) -> ExactDiscMap:
    """(r, θ) ↦ (r, θ − ε) com σ ≡ εk, gerada por G = ½ερ²"""
    return ExactDiscMap(lambda r, theta: (r, theta - eps, np.full(r.shape, eps * k)), k,
                        GeneratingSpec(k, (0.5 * eps,)), f"rotation({eps:g})")


def radial_twist(coefficients, k: float = 1.0) -> ExactDiscMap:
    """φ(r, θ) = (r, θ − g′(r)/r) para g(ρ) = Σ c_j ρ^{j+2}"""
    spec = GeneratingSpec(k, tuple(float(c) for c in coefficients))

    def evaluate(r, theta):
        g_rho, _ = spec.split(r, theta)
        return r, theta - g_rho, spec.value(r, theta) + (k - 0.5 * r ** 2) * g_rho

    return ExactDiscMap(evaluate, k, spec, "radial_twist")


# ---------------------------------------------------------------------------
# ℰ: função geradora → aplicação
# ---------------------------------------------------------------------------

def _split_slope(g: VFunction, spec: Optional[GeneratingSpec], rho, theta, h: float = 1e-6) -> np.ndarray:
    if spec is not None:
        return spec.split_theta_slope(rho, theta)
    return (radial_split(g, rho + h, theta)[1] - radial_split(g, np.maximum(rho - h, 0.0), theta)[1]) \
        / (rho + h - np.maximum(rho - h, 0.0))


def map_from_gen(G: Union[GeneratingSpec, VFunction], k: Optional[float] = None, check: bool = True,
                 n_check: Tuple[int, int] = (48, 64), bisection_tol: float = 1e-12) -> ExactDiscMap:
    """ℰ(G): R_G por inversão monótona de ρ ↦ ρ√(1 − 2G_ϑ), Θ = θ − G_ρ(R, θ)"""
    spec = G if isinstance(G, GeneratingSpec) else None
    g = _as_vfunction(G)
    k = g.k if k is None else float(k)
    a = float(np.sqrt(2.0 * k))

    if check:
        rho = np.linspace(0.0, a, n_check[0])
        theta = np.arange(n_check[1]) / n_check[1]
        P, TH = np.meshgrid(rho, theta, indexing="ij")
        _, g_theta = radial_split(g, P, TH)
        factor = 1.0 - 2.0 * g_theta
        if np.any(factor <= 0.0):
            raise NonMonotone(f"1 − 2G_ϑ ≤ 0 (mínimo {factor.min():.3e}): ‖G‖ grande demais")
        mu = P * np.sqrt(factor)
        if np.any(np.diff(mu, axis=0) <= 0.0):
            raise NonMonotone("ρ ↦ ρ√(1 − 2G_ϑ) não é estritamente crescente")

    def radial_factor(rho, theta):
        return np.sqrt(np.clip(1.0 - 2.0 * radial_split(g, rho, theta)[1], 0.0, None))

    def solve_R(r, theta):
        lo, hi = np.zeros_like(r), np.full_like(r, a)
        for _ in range(int(np.ceil(np.log2(a / bisection_tol))) + 1):
            mid = 0.5 * (lo + hi)
            below = mid * radial_factor(mid, theta) < r
            lo, hi = np.where(below, mid, lo), np.where(below, hi, mid)
        R = 0.5 * (lo + hi)
        q = radial_factor(R, theta)
        slope = q - R * _split_slope(g, spec, R, theta) / np.maximum(q, 1e-300)
        R = np.clip(R - (R * q - r) / slope, 0.0, a)
        R = np.where(r <= 0.0, 0.0, R)
        return np.where(r >= a, a, R)

    def evaluate(r, theta):
        R = solve_R(r, theta)
        g_rho, _ = radial_split(g, R, theta)
        return R, theta - g_rho, g(R, theta) + (k - 0.5 * R ** 2) * g_rho

    return ExactDiscMap(evaluate, k, G, "E(G)")


# ---------------------------------------------------------------------------
# 𝒢: aplicação → função geradora
# ---------------------------------------------------------------------------

def _illinois(fn: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray,
              tol: float = 1e-15, max_iter: int = 100) -> np.ndarray:
    """Regula falsi (variante de Illinois) vetorizada para fn crescente com fn(lo) ≤ 0 ≤ fn(hi)"""
    f_lo, f_hi = fn(lo), fn(hi)
    x = lo.copy()
    side = np.zeros(lo.shape, dtype=int)
    for _ in range(max_iter):
        denom = f_hi - f_lo
        safe = np.abs(denom) > 0
        x = np.where(safe, (lo * f_hi - hi * f_lo) / np.where(safe, denom, 1.0), 0.5 * (lo + hi))
        fx = fn(x)
        if np.max(np.abs(fx), initial=0.0) < tol:
            break
        upper = fx > 0
        hi, f_hi = np.where(upper, x, hi), np.where(upper, fx, f_hi)
        lo, f_lo = np.where(upper, lo, x), np.where(upper, f_lo, fx)
        f_lo = np.where(upper & (side == 1), 0.5 * f_lo, f_lo)
        f_hi = np.where(~upper & (side == -1), 0.5 * f_hi, f_hi)
        side = np.where(upper, 1, -1)
    return x


class _MapInversion:
    """r_φ(ρ, ϑ) com R_φ(r_φ, ϑ) = ρ, com memória da última chamada"""

    def __init__(self, phi: ExactDiscMap):
        self.phi = phi
        self._last: Optional[Tuple[np.ndarray, np.ndarray, Tuple]] = None

    def __call__(self, rho, theta):
        rho, theta = np.broadcast_arrays(np.asarray(rho, float), np.asarray(theta, float))
        if self._last is not None and self._last[0].shape == rho.shape \
                and np.array_equal(self._last[0], rho) and np.array_equal(self._last[1], theta):
            return self._last[2]
        a = self.phi.radius
        r = _illinois(lambda x: self.phi.apply(x, theta)[0] - rho, np.zeros_like(rho), np.full_like(rho, a))
        r = np.where(rho <= 0.0, 0.0, np.where(rho >= a, a, r))
        _, Theta, sigma = self.phi.evaluate(r, theta)
        self._last = (rho.copy(), theta.copy(), (r, Theta, sigma))
        return r, Theta, sigma


def gen_from_map(phi: ExactDiscMap, check: bool = True, n_check: Tuple[int, int] = (32, 48),
                 c1_ball: Optional[float] = None) -> VFunction:
    """𝒢(φ): G = σ − (k − ½ρ²)(ϑ − Θ_φ) avaliado em r_φ(ρ, ϑ)"""
    k, a = phi.k, phi.radius
    if c1_ball is not None:
        distance = phi.c1_distance()
        if distance >= c1_ball:
            logger.warning(f"‖φ − id‖_C¹ = {distance:.3e} fora da bola de {c1_ball}")
    solve = _MapInversion(phi)

    if check:
        rho = np.linspace(0.0, a, n_check[0])
        theta = np.arange(n_check[1]) / n_check[1]
        P, TH = np.meshgrid(rho, theta, indexing="ij")
        _, Theta, _ = solve(P, TH)
        overflow = np.max(np.abs(TH - Theta))
        if overflow >= 0.5:
            raise DomainOverflow(f"|θ − Θ_φ| = {overflow:.3f} ≥ ½")

    def value(rho, theta):
        _, Theta, sigma = solve(rho, theta)
        return sigma - (k - 0.5 * np.asarray(rho) ** 2) * (theta - Theta)

    def derivative(i, j):
        if (i, j) == (1, 0):
            return lambda rho, theta: np.asarray(rho) * (theta - solve(rho, theta)[1])
        if (i, j) == (0, 1):
            return lambda rho, theta: 0.5 * (np.asarray(rho) ** 2 - solve(rho, theta)[0] ** 2)
        return None

    def split(rho, theta):
        rho, theta = np.broadcast_arrays(np.asarray(rho, float), np.asarray(theta, float))
        r, Theta, _ = solve(rho, theta)
        g_rho = theta - Theta
        small = rho < 2e-3 * a
        safe = np.where(small, 1.0, rho)
        g_theta = np.where(small, 0.0, (rho ** 2 - r ** 2) / (2 * safe ** 2))
        if small.any():
            nodes = np.array([2e-3, 4e-3, 6e-3]) * a
            ts = theta[small]
            samples = []
            for node in nodes:
                rn, _, _ = _MapInversion(phi)(np.full(ts.shape, node), ts)
                samples.append((node ** 2 - rn ** 2) / (2 * node ** 2))
            g_theta[small] = quadratic_extrapolation(nodes, np.array(samples), rho[small])
        return g_rho, g_theta

    return VFunction(value, k, derivative, split, name="G(phi)")


def boundary_second_derivative_check(G: Union[GeneratingSpec, VFunction], phi: ExactDiscMap,
                                     n_theta: int = 64) -> float:
    """max |∂²_ρρG(0, ϑ) − (ϑ − Θ_φ(0, ϑ))|"""
    g = _as_vfunction(G)
    theta = np.arange(n_theta) / n_theta
    zero = np.zeros(n_theta)
    _, Theta = phi.apply(zero, theta)
    return float(np.max(np.abs(g.partial(2, 0)(zero, theta) - (theta - Theta))))


# ---------------------------------------------------------------------------
# Pontos críticos e pontos fixos (carta w, suave em todo o interior)
# ---------------------------------------------------------------------------

@dataclass
class DiscPoint:
    w: np.ndarray
    r: float
    theta: float
    value: float = float("nan")


def gradient_w(G: Union[GeneratingSpec, VFunction], w: np.ndarray) -> np.ndarray:
    """∇G na carta w: −w·G_ρ + G_θ·(w₂, −w₁)/(2π|w|²)"""
    g = _as_vfunction(G)
    w = np.atleast_2d(np.asarray(w, dtype=float))
    r, theta = from_w(w, g.k)
    g_rho, _ = radial_split(g, r, theta)
    g_theta = g.partial(0, 1)(r, theta)
    norm2 = np.sum(w ** 2, axis=1)
    angular = np.where(norm2 > 0, g_theta / (2 * np.pi * np.where(norm2 > 0, norm2, 1.0)), 0.0)
    return -w * g_rho[:, None] + angular[:, None] * np.column_stack([w[:, 1], -w[:, 0]])


def _polar_w_grid(k: float, n_r: int, n_theta: int, inner: float = 0.02) -> np.ndarray:
    a = np.sqrt(2.0 * k)
    radii = np.linspace(0.0, (1.0 - inner) * a, n_r)
    angles = 2 * np.pi * np.arange(n_theta) / n_theta
    grid = np.stack([np.outer(radii, np.cos(angles)), np.outer(radii, np.sin(angles))], axis=-1)
    return grid


def _grid_minima(values: np.ndarray) -> np.ndarray:
    mask = np.zeros(values.shape, dtype=bool)
    inner = values[1:-1]
    mask[1:-1] = ((inner <= values[:-2]) & (inner <= values[2:])
                  & (inner <= np.roll(inner, 1, axis=1)) & (inner <= np.roll(inner, -1, axis=1)))
    mask[0, 0] = True
    return mask


def _polish_roots(fn: Callable[[np.ndarray], np.ndarray], seeds: np.ndarray, a: float,
                  tol: float, dedup: float = 1e-6) -> List[np.ndarray]:
    found: List[np.ndarray] = []
    for seed in seeds:
        result = root(lambda v: fn(v[None])[0], seed, method="hybr", options={"xtol": 1e-14})
        x = result.x
        if np.linalg.norm(x) >= a * (1.0 - 1e-6) or np.linalg.norm(fn(x[None])[0]) > tol:
            continue
        if all(np.linalg.norm(x - y) > dedup for y in found):
            found.append(x)
    return found


def critical_points(G: Union[GeneratingSpec, VFunction], n_r: int = 32, n_theta: int = 48,
                    tol: float = 1e-10, seed_tol: float = 0.25) -> List[DiscPoint]:
    """Pontos críticos interiores de G (o centro sempre incluído quando crítico)"""
    g = _as_vfunction(G)
    a = g.radius
    grid = _polar_w_grid(g.k, n_r, n_theta)
    grad = np.linalg.norm(gradient_w(g, grid.reshape(-1, 2)), axis=1).reshape(grid.shape[:2])
    scale = max(float(grad.max()), 1e-300)
    seeds = grid[_grid_minima(grad) & (grad <= seed_tol * scale)]
    points = _polish_roots(lambda w: gradient_w(g, w), seeds, a, tol)
    result = []
    for w in points:
        r, theta = from_w(w, g.k)
        result.append(DiscPoint(w, float(r), float(theta), float(g(r, theta))))
    return result


def fixed_points(phi: ExactDiscMap, n_r: int = 32, n_theta: int = 48, tol: float = 1e-10,
                 seed_tol: float = 0.25) -> List[DiscPoint]:
    """Pontos fixos interiores de φ, polidos por Newton na carta w"""
    a = phi.radius
    grid = _polar_w_grid(phi.k, n_r, n_theta)
    flat = grid.reshape(-1, 2)
    moved = np.linalg.norm(phi.apply_w(flat) - flat, axis=1).reshape(grid.shape[:2])
    scale = max(float(moved.max()), 1e-300)
    seeds = grid[_grid_minima(moved) & (moved <= seed_tol * scale)]
    points = _polish_roots(lambda w: phi.apply_w(w) - w, seeds, a, tol)
    result = []
    for w in points:
        r, theta = from_w(w, phi.k)
        result.append(DiscPoint(w, float(r), float(theta), float(phi.sigma(r, theta))))
    return result


def extremum(G: Union[GeneratingSpec, VFunction], kind: str = "min", n_r: int = 48,
             n_theta: int = 64) -> DiscPoint:
    """Extremo global de G em N̊ por malha + Nelder–Mead + Newton no gradiente"""
    g = _as_vfunction(G)
    sign = 1.0 if kind == "min" else -1.0
    grid = _polar_w_grid(g.k, n_r, n_theta).reshape(-1, 2)
    r, theta = from_w(grid, g.k)
    values = sign * g(r, theta)
    start = grid[int(np.argmin(values))]

    objective = lambda v: float(sign * g(*from_w(v[None], g.k))[0])
    coarse = minimize(objective, start, method="Nelder-Mead",
                      options={"xatol": 1e-12, "fatol": 1e-18, "maxiter": 4000})
    x = coarse.x
    polished = root(lambda v: gradient_w(g, v[None])[0], x, method="hybr", options={"xtol": 1e-14})
    if polished.success and np.linalg.norm(polished.x) < g.radius and \
            objective(polished.x) <= objective(x) + 1e-14:
        x = polished.x
    r, theta = from_w(x[None], g.k)
    return DiscPoint(x, float(r[0]), float(theta[0]), float(g(r, theta)[0]))
