"""Caminhos hamiltonianos t ↦ φ_t, Hamilton–Jacobi, quase-autonomia, Calabi e testemunhas de sinal."""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp

from src.discmaps.chart import DiscMapError
from src.discmaps.maps import DiscPoint, ExactDiscMap, extremum, gradient_w, map_from_gen, to_w
from src.discmaps.vfunction import GeneratingSpec, VFunction, _as_vfunction
from src.utils.quadrature import gauss_legendre

logger = logging.getLogger(__name__)

FIVE_POINT = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


class WitnessNotFound(DiscMapError):
    """Nenhum ponto fixo interior com o sinal de ação esperado"""
    pass


def _disc_grid(k: float, n_r: int, n_theta: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nós Gauss em r × uniformes em θ e pesos de dλ = r dr∧dθ"""
    r, wr = gauss_legendre(n_r, 0.0, float(np.sqrt(2.0 * k)))
    theta = np.arange(n_theta) / n_theta
    R, TH = np.meshgrid(r, theta, indexing="ij")
    weights = np.repeat((r * wr / n_theta)[:, None], n_theta, axis=1)
    return R.ravel(), TH.ravel(), weights.ravel()


@dataclass
class HamiltonianPath:
    """t ↦ φ_t com H_t e X_t por diferenças em t (estêncil de cinco pontos)"""

    map_at: Callable[[float], ExactDiscMap]
    k: float = 1.0
    h_t: float = 1e-3
    generating: Optional[GeneratingSpec] = None
    _maps: Dict[float, ExactDiscMap] = field(default_factory=dict, repr=False)

    def phi(self, t: float) -> ExactDiscMap:
        key = round(float(t), 14)
        if key not in self._maps:
            self._maps[key] = self.map_at(key)
        return self._maps[key]

    def orbit_values(self, t: float, r, theta) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(H_t∘φ_t, X_t^R∘φ_t, X_t^Θ∘φ_t) em q = (r, θ)"""
        r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
        stencil = [self.phi(t + j * self.h_t).evaluate(r, theta) for j in (-2, -1, 0, 1, 2)]
        d_R = sum(c * s[0] for c, s in zip(FIVE_POINT, stencil)) / self.h_t
        d_Theta = sum(c * s[1] for c, s in zip(FIVE_POINT, stencil)) / self.h_t
        d_sigma = sum(c * s[2] for c, s in zip(FIVE_POINT, stencil)) / self.h_t
        R = stencil[2][0]
        hamiltonian = d_sigma - (-self.k + 0.5 * R ** 2) * d_Theta
        return hamiltonian, d_R, d_Theta

    def hamiltonian(self, t: float, R, Theta) -> np.ndarray:
        """H_t(R, Θ) via φ_t⁻¹"""
        r, theta = self.phi(t).inverse(R, Theta)
        return self.orbit_values(t, r, theta)[0]

    def vector_field(self, t: float, R, Theta) -> Tuple[np.ndarray, np.ndarray]:
        r, theta = self.phi(t).inverse(R, Theta)
        _, x_R, x_Theta = self.orbit_values(t, r, theta)
        return x_R, x_Theta

    def symplectic_residual(self, t: float, n_r: int = 8, n_theta: int = 16, h: float = 1e-4) -> float:
        """max |ι_X dλ − dH_t| em coordenadas de colar: X^R = H_Θ/R, X^Θ = −H_R/R"""
        a = float(np.sqrt(2.0 * self.k))
        r = np.linspace(0.15, 0.8, n_r) * a
        theta = np.arange(n_theta) / n_theta
        q_r, q_theta = [x.ravel() for x in np.meshgrid(r, theta, indexing="ij")]
        R, Theta, _ = self.phi(t).evaluate(q_r, q_theta)
        _, x_R, x_Theta = self.orbit_values(t, q_r, q_theta)
        H_R = (self.hamiltonian(t, R + h, Theta) - self.hamiltonian(t, R - h, Theta)) / (2 * h)
        H_Theta = (self.hamiltonian(t, R, Theta + h) - self.hamiltonian(t, R, Theta - h)) / (2 * h)
        return float(max(np.max(np.abs(R * x_R - H_Theta)), np.max(np.abs(R * x_Theta + H_R))))

    def reconstruct(self, r0: float, theta0: float, t_end: float = 1.0, rtol: float = 1e-11) -> Tuple[float, float]:
        """Integra ẏ = X_t(y) a partir de q e devolve y(t_end)"""

        def rhs(t, y):
            x_R, x_Theta = self.vector_field(t, np.array([y[0]]), np.array([y[1]]))
            return [x_R[0], x_Theta[0]]

        solution = solve_ivp(rhs, (0.0, t_end), [r0, theta0], method="DOP853", rtol=rtol, atol=rtol)
        return float(solution.y[0, -1]), float(solution.y[1, -1])

    def calabi(self, n_times: int = 8, n_r: int = 32, n_theta: int = 48) -> float:
        """∫₀¹ ∫_N H_t dλ dt, usando ∫_N H_t dλ = ∫_N H_t∘φ_t dλ"""
        t, wt = gauss_legendre(n_times, 0.0, 1.0)
        r, theta, weights = _disc_grid(self.k, n_r, n_theta)
        return float(sum(wi * np.sum(self.orbit_values(ti, r, theta)[0] * weights) for ti, wi in zip(t, wt)))


def hamiltonian_of_path(map_at: Callable[[float], ExactDiscMap], k: float = 1.0, h_t: float = 1e-3) -> HamiltonianPath:
    return HamiltonianPath(map_at, k, h_t)


def generated_path(G: GeneratingSpec, h_t: float = 1e-3) -> HamiltonianPath:
    """φ_t = ℰ(tG)"""
    return HamiltonianPath(lambda t: map_from_gen(G.scaled(t), check=False), G.k, h_t, G)


def hj_residual(G: GeneratingSpec, n_times: int = 8, n_r: int = 16, n_theta: int = 24,
                path: Optional[HamiltonianPath] = None) -> float:
    """sup |G∘ν_t − H_t∘φ_t| para G_t = tG"""
    path = path or generated_path(G)
    r, theta, _ = _disc_grid(G.k, n_r, n_theta)
    worst = 0.0
    for t in gauss_legendre(n_times, 0.0, 1.0)[0]:
        R, _, _ = path.phi(t).evaluate(r, theta)
        H, _, _ = path.orbit_values(t, r, theta)
        worst = max(worst, float(np.max(np.abs(G.value(R, theta) - H))))
    return worst


def path_action(path: HamiltonianPath, r, theta, n_times: int = 8) -> np.ndarray:
    """σ(q) = ∫₀¹ [H_t + λ(X_t)](φ_t(q)) dt; em pontos fixos de todo φ_t sobra só ∫₀¹ H_t(q) dt"""
    t, wt = gauss_legendre(n_times, 0.0, 1.0)
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    total = np.zeros(r.shape)
    for ti, wi in zip(t, wt):
        H, _, x_Theta = path.orbit_values(ti, r, theta)
        R = path.phi(ti).evaluate(r, theta)[0]
        total += wi * (H + (-path.k + 0.5 * R ** 2) * x_Theta)
    return total
    return worst


@dataclass
class QuasiAutonomy:
    path: HamiltonianPath
    q_min: DiscPoint
    q_max: DiscPoint
    min_drift: float
    max_drift: float
    argmin_drift: float
    degenerate: bool = False
    spacing: float = 0.0

    @property
    def argmin_stationary(self) -> bool:
        """O minimizador discreto de H_t fica a no máximo dois espaçamentos de q_min"""
        return self.argmin_drift <= 2.0 * self.spacing


def _boundary_point() -> DiscPoint:
    return DiscPoint(np.array([np.nan, np.nan]), 0.0, 0.0, 0.0)


def local_spacing(q: DiscPoint, k: float, r_nodes: np.ndarray, n_theta: int) -> float:
    """Espaçamento da malha (r, θ) perto de q, medido na carta w (ou em r, na borda)"""
    a = float(np.sqrt(2.0 * k))
    if not q.r > 0:
        return float(np.max(np.diff(np.concatenate([[0.0], np.sort(r_nodes), [a]]))))
    rho = np.sort(np.concatenate([[0.0], np.sqrt(np.clip(2.0 * k - r_nodes ** 2, 0.0, None)), [a]]))
    radius = float(np.hypot(*q.w))
    i = int(np.clip(np.searchsorted(rho, radius), 1, len(rho) - 1))
    radial = rho[i] - rho[i - 1]
    angular = 2.0 * np.pi * rho[i] / n_theta
    return float(np.hypot(radial, angular))


def quasi_autonomous_path(G: GeneratingSpec, n_times: int = 8, n_r: int = 24,
                          n_theta: int = 32) -> QuasiAutonomy:
    """φ_t = ℰ(tG) e a certificação de min H_t = min G, max H_t = max G"""
    path = generated_path(G)
    r, theta, _ = _disc_grid(G.k, n_r, n_theta)
    r_nodes = np.unique(r)
    r = np.concatenate([np.zeros(n_theta), r])
    theta = np.concatenate([np.arange(n_theta) / n_theta, theta])

    if G.is_zero() or np.max(np.abs(G.value(r, theta))) < 1e-14:
        logger.info("G constante: quase-autonomia degenerada (todos os pontos extremos)")
        point = _boundary_point()
        return QuasiAutonomy(path, point, point, 0.0, 0.0, 0.0, degenerate=True,
                             spacing=local_spacing(point, G.k, r_nodes, n_theta))

    def pick(kind: str) -> DiscPoint:
        inner = extremum(G, kind)
        better = inner.value < 0.0 if kind == "min" else inner.value > 0.0
        return inner if better else _boundary_point()

    q_min, q_max = pick("min"), pick("max")
    spacing = local_spacing(q_min, G.k, r_nodes, n_theta)
    min_drift = max_drift = argmin_drift = 0.0
    for t in gauss_legendre(n_times, 0.0, 1.0)[0]:
        values, _, _ = path.orbit_values(t, r, theta)
        at_min = path.orbit_values(t, q_min.r, q_min.theta)[0][()] if q_min.r > 0 else 0.0
        at_max = path.orbit_values(t, q_max.r, q_max.theta)[0][()] if q_max.r > 0 else 0.0
        min_drift = max(min_drift, abs(at_min - q_min.value), max(0.0, at_min - values.min()))
        max_drift = max(max_drift, abs(at_max - q_max.value), max(0.0, values.max() - at_max))
        R, Theta, _ = path.phi(t).evaluate(r, theta)
        node = int(np.argmin(values))
        moved = np.linalg.norm(to_w(R[node], Theta[node], G.k) - q_min.w) if q_min.r > 0 else R[node]
        argmin_drift = max(argmin_drift, float(moved))
    quasi = QuasiAutonomy(path, q_min, q_max, float(min_drift), float(max_drift), argmin_drift,
                          spacing=spacing)
    if not quasi.argmin_stationary:
        logger.warning(f"Minimizador de H_t se desloca {argmin_drift:.3e} (> 2 × espaçamento {spacing:.3e})")
    return quasi


@dataclass
class CalabiValue:
    value: float
    path_value: float = float("nan")

    @property
    def difference(self) -> float:
        return abs(self.value - self.path_value)


def calabi(phi: ExactDiscMap, path: Optional[HamiltonianPath] = None, n_r: int = 48,
           n_theta: int = 64, n_times: int = 8) -> CalabiValue:
    """½∫σ dλ e, com caminho, ∫₀¹∫_N H_t dλ dt"""
    value = phi.calabi(n_r, n_theta)
    if path is None:
        return CalabiValue(value)
    return CalabiValue(value, path.calabi(n_times, min(n_r, 32), min(n_theta, 48)))


@dataclass
class Witness:
    point: DiscPoint
    sigma: float
    generating_value: float
    displacement: float
    cal: float


def sign_witness(phi: ExactDiscMap, G: Optional[Union[GeneratingSpec, VFunction]] = None,
                 tol: float = 1e-8) -> Optional[Witness]:
    """Ponto fixo interior com σ < 0 se CAL ≤ 0 (ou σ > 0 se CAL ≥ 0); None para φ = id"""
    if phi.is_identity():
        return None
    G = G if G is not None else phi.generating
    if G is None:
        raise WitnessNotFound("Aplicação sem função geradora associada")
    g = _as_vfunction(G)
    cal = phi.calabi()
    kind = "min" if cal <= 0 else "max"
    point = extremum(g, kind)
    sign = -1.0 if kind == "min" else 1.0

    sigma = float(phi.sigma(point.r, point.theta))
    moved = float(phi.displacement(point.r, point.theta))
    gradient = float(np.linalg.norm(gradient_w(g, point.w[None])))
    logger.info(f"Testemunha ({kind}): CAL = {cal:.3e}, σ = {sigma:.3e}, |φ(q) − q| = {moved:.2e}")
    if sign * point.value <= 0 or sign * sigma <= 0:
        raise WitnessNotFound(f"Extremo com sinal errado: G = {point.value:.3e}, σ = {sigma:.3e}")
    if moved > tol or abs(sigma - point.value) > tol or gradient > 1e-6:
        raise WitnessNotFound(f"Extremo não é ponto fixo: deslocamento {moved:.2e}, |σ − G| = {abs(sigma - point.value):.2e}")
    return Witness(point, sigma, point.value, moved, cal)
