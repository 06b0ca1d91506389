"""Integração do fluxo de Reeb, retornos à página do livro aberto e busca de órbitas periódicas."""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import minimize_scalar

from src.geometry.forms3d import (
    ContactForm,
    EmptyOrbitSet,
    GeometryError,
    as_batch,
    contact_density,
    deck,
    fiber_angle,
    from_complex,
    quaternion_frame,
    reeb_at,
    to_complex,
)
from src.utils.quadrature import gauss_legendre

logger = logging.getLogger(__name__)


class StepFailure(GeometryError):
    """O controle de passo do integrador falhou"""
    pass


class NoReturn(GeometryError):
    """Trajetória sem retorno à página antes do tempo limite"""
    pass


class ChartEscape(GeometryError):
    """A órbita sai da família de cartas de Darboux"""
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerâncias do DOP853 e re-projeção na esfera"""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_step: float = 0.1
    projection: bool = True

    def __post_init__(self):
        if min(self.rel_tol, self.abs_tol, self.max_step) <= 0:
            raise ValueError("Tolerâncias e passo máximo precisam ser positivos")

    def for_batch(self, n: int) -> Tuple[float, float]:
        """Tolerâncias efetivas para um lote de n pontos.

        O controle de erro do scipy usa a norma RMS do estado inteiro; dividir por √(4n)
        garante a tolerância pedida em cada componente.
        """
        factor = np.sqrt(4.0 * n)
        return max(self.rel_tol / factor, 3e-14), max(self.abs_tol / factor, 1e-16)


DEFAULT_CONFIG = IntegratorConfig()


@dataclass
class PeriodicOrbit:
    """Órbita periódica representada por uma semente na página"""

    seed: np.ndarray
    period: float
    class_h: bool = False
    closure_residual: float = float("nan")
    lift_winding: int = 0
    lens_order: int = 1
    page: str = "standard"
    return_derivative: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Page:
    """Página U·{z₂ ∈ R₊} do livro aberto de Hopf"""

    unitary: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))
    name: str = "standard"

    def embed(self, c: np.ndarray) -> np.ndarray:
        c = np.atleast_1d(np.asarray(c, dtype=complex))
        y = np.vstack([c, np.sqrt(np.clip(1.0 - np.abs(c) ** 2, 0.0, None)).astype(complex)])
        z = self.unitary @ y
        return from_complex(z[0], z[1])

    def local(self, x: np.ndarray) -> np.ndarray:
        z1, z2 = to_complex(x)
        return self.unitary.conj().T @ np.vstack([z1, z2])

    def coordinate(self, x: np.ndarray) -> np.ndarray:
        return self.local(x)[0]

    def event_vectors(self, p: int) -> Tuple[np.ndarray, np.ndarray]:
        """Vetores w_g, w_h com Im/Re(e^{−2πi/p}·z₂ local) = x·w"""
        basis = self.local(np.eye(4))[1] * np.exp(-2j * np.pi / p)
        return basis.imag.copy(), basis.real.copy()


STANDARD_PAGE = Page()
SWAPPED_PAGE = Page(np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex), "swapped")


@dataclass
class ReturnBatch:
    times: np.ndarray
    points: np.ndarray
    returned: np.ndarray


# ---------------------------------------------------------------------------
# Integração
# ---------------------------------------------------------------------------

def _make_solver(alpha: ContactForm, x0: np.ndarray, t_bound: float, cfg: IntegratorConfig,
                 scales: Optional[np.ndarray] = None) -> DOP853:
    n = x0.shape[0]
    rtol, atol = cfg.for_batch(n)
    weights = np.ones(n) if scales is None else scales

    def fun(_t, y):
        return (weights[:, None] * reeb_at(alpha, y.reshape(n, 4))).ravel()

    return DOP853(fun, 0.0, x0.ravel().copy(), t_bound, rtol=rtol, atol=atol, max_step=cfg.max_step)


def _advance(solver: DOP853, n: int, cfg: IntegratorConfig) -> None:
    message = solver.step()
    if solver.status == "failed":
        raise StepFailure(f"Falha do integrador em t = {solver.t:.6f}: {message}")
    if cfg.projection:
        y = solver.y.reshape(n, 4)
        y /= np.linalg.norm(y, axis=1, keepdims=True)


def integrate(alpha: ContactForm, q: np.ndarray, t: Union[float, np.ndarray],
              cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Φ_t(q) por Runge–Kutta embutido adaptativo; aceita um tempo por ponto"""
    x0 = as_batch(q)
    n = x0.shape[0]
    times = np.broadcast_to(np.asarray(t, dtype=float), (n,)).copy()
    span = float(np.max(np.abs(times)))
    if span == 0.0:
        result = x0.copy()
    else:
        solver = _make_solver(alpha, x0, span, cfg, times / span)
        while solver.status == "running":
            _advance(solver, n, cfg)
        result = solver.y.reshape(n, 4).copy()
    return result[0] if np.ndim(q) == 1 else result


def trajectory(alpha: ContactForm, q: np.ndarray, times: np.ndarray,
               cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    return integrate(alpha, np.repeat(as_batch(q), len(times), axis=0), times, cfg)


def volume_distortion(alpha: ContactForm, x: np.ndarray, t: float = 1.0, h: float = 1e-4,
                      cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """|ρ(Φ_t x)·det DΦ_t(x)/ρ(x) − 1| por ponto, com ρ a densidade de α∧dα.

    DΦ_t é estimada por diferenças centradas ao longo de geodésicas no referencial
    quaterniônico e expressa no referencial do ponto de chegada.
    """
    x = as_batch(x)
    n = x.shape[0]
    frame = quaternion_frame(x)
    plus = np.cos(h) * x[:, None, :] + np.sin(h) * frame
    minus = np.cos(h) * x[:, None, :] - np.sin(h) * frame
    end = integrate(alpha, np.vstack([x, plus.reshape(-1, 4), minus.reshape(-1, 4)]), t, cfg)
    y = end[:n]
    columns = (end[n:4 * n] - end[4 * n:]).reshape(n, 3, 4) / (2.0 * np.sin(h))
    jacobian = np.einsum("nak,nbk->nab", quaternion_frame(y), columns)
    ratio = contact_density(alpha, y) * np.linalg.det(jacobian) / contact_density(alpha, x)
    return np.abs(ratio - 1.0)


def reparametrised_time(alpha: ContactForm, other: ContactForm, x: np.ndarray, t: float,
                        nodes: int = 16, cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """t₂(t, x) = ∫₀ᵗ other(R_α)(Φ^α_s x) ds.

    Quando d(other) = dα, Φ^other_{t₂}(x) = Φ^α_t(x): os dois fluxos têm as mesmas
    trajetórias e t₂ é a nova parametrização.
    """
    x = as_batch(x)
    s, w = gauss_legendre(nodes, 0.0, t)
    points = integrate(alpha, np.repeat(x, nodes, axis=0), np.tile(s, x.shape[0]), cfg)
    speed = other.evaluate(points, reeb_at(alpha, points)).reshape(x.shape[0], nodes)
    return speed @ w


# ---------------------------------------------------------------------------
# Cruzamentos com hiperplanos
# ---------------------------------------------------------------------------

def _rowdot(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", x, w)


def _polish(alpha: ContactForm, x: np.ndarray, t: np.ndarray, w: np.ndarray, b: np.ndarray,
            cfg: IntegratorConfig, max_iter: int = 8, tol: float = 1e-13) -> Tuple[np.ndarray, np.ndarray]:
    """Newton no tempo sobre o evento afim g(x) = x·w − b"""
    for _ in range(max_iter):
        g = _rowdot(x, w) - b
        rate = _rowdot(reeb_at(alpha, x), w)
        delta = -g / rate
        if np.max(np.abs(delta)) < tol:
            break
        x = integrate(alpha, x, delta, cfg)
        t = t + delta
    return t, x


def _first_crossing(alpha: ContactForm, x0: np.ndarray, w: np.ndarray, b: Union[float, np.ndarray],
                    accept: Callable[[np.ndarray], np.ndarray], cfg: IntegratorConfig,
                    t_max: float, min_time: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Primeiro cruzamento positivo de g(x) = x·w − b depois de min_time, para um lote de pontos"""
    n = x0.shape[0]
    w = np.broadcast_to(w, (n, 4))
    b = np.broadcast_to(np.asarray(b, dtype=float), (n,))
    solver = _make_solver(alpha, x0, t_max, cfg)

    times = np.full(n, np.nan)
    hits = np.full((n, 4), np.nan)
    pending = np.ones(n, dtype=bool)
    g_prev = _rowdot(x0, w) - b
    t_prev = 0.0

    while pending.any() and solver.status == "running":
        _advance(solver, n, cfg)
        y = solver.y.reshape(n, 4)
        g_new = _rowdot(y, w) - b
        crossed = pending & (g_prev < 0) & (g_new >= 0)
        if crossed.any():
            idx = np.flatnonzero(crossed)
            frac = -g_prev[idx] / (g_new[idx] - g_prev[idx])
            t_lin = t_prev + frac * (solver.t - t_prev)
            start = integrate(alpha, y[idx], t_lin - solver.t, cfg)
            t_root, x_root = _polish(alpha, start, t_lin, w[idx], b[idx], cfg)
            good = (t_root > min_time) & accept(x_root)
            chosen = idx[good]
            times[chosen] = t_root[good]
            hits[chosen] = x_root[good]
            pending[chosen] = False
        g_prev = g_new
        t_prev = solver.t

    return times, hits, ~pending


def section_return(alpha: ContactForm, q: np.ndarray, cfg: IntegratorConfig = DEFAULT_CONFIG,
                   page: Page = STANDARD_PAGE, t_max: float = 2.0, min_time: float = 0.25,
                   strict: bool = True) -> ReturnBatch:
    """Tempo e ponto do primeiro retorno à página, já trazido de volta pela ação do recobrimento"""
    x0 = as_batch(q)
    p = alpha.lens_order
    w_g, w_h = page.event_vectors(p)
    times, hits, ok = _first_crossing(alpha, x0, w_g, 0.0, lambda x: x @ w_h > 0.0,
                                      cfg, t_max, min_time)
    if strict and not ok.all():
        raise NoReturn(f"{int((~ok).sum())} ponto(s) sem retorno até t = {t_max}")
    points = np.full_like(hits, np.nan)
    if ok.any():
        points[ok] = deck(hits[ok], p, -1)
    return ReturnBatch(times, points, ok)


def orbit_period(alpha: ContactForm, x: np.ndarray, t_guess: float,
                 cfg: IntegratorConfig = DEFAULT_CONFIG, window: float = 0.25) -> Tuple[float, float]:
    """Período de fechamento por um hiperplano transversal local em deck·x"""
    target = deck(x, alpha.lens_order)[0]
    normal = reeb_at(alpha, target)
    normal = normal / np.linalg.norm(normal)
    start = integrate(alpha, x, t_guess - window, cfg)
    times, hits, ok = _first_crossing(
        alpha, as_batch(start), normal, float(target @ normal),
        lambda y: np.linalg.norm(y - target, axis=1) < 0.2, cfg, 2.0 * window, 0.0,
    )
    if not ok[0]:
        raise NoReturn(f"Órbita não fecha perto de T = {t_guess:.6f}")
    return t_guess - window + float(times[0]), float(np.linalg.norm(hits[0] - target))


# ---------------------------------------------------------------------------
# Busca de órbitas
# ---------------------------------------------------------------------------

def seed_grid(n: int, radius: float = 0.85) -> np.ndarray:
    """Sementes em anéis concêntricos do disco |c| < 1"""
    seeds = [0.0 + 0.0j]
    for i in range(1, n):
        r = radius * i / (n - 1)
        seeds.extend(r * np.exp(2j * np.pi * np.arange(4 * i) / (4 * i)))
    return np.array(seeds, dtype=complex)


def _displacement(alpha: ContactForm, page: Page, c: np.ndarray,
                  cfg: IntegratorConfig) -> Tuple[np.ndarray, np.ndarray]:
    batch = section_return(alpha, page.embed(c), cfg, page, strict=False)
    moved = np.full(len(c), np.nan, dtype=complex)
    if batch.returned.any():
        moved[batch.returned] = page.coordinate(batch.points[batch.returned])
    return moved - c, batch.returned


def _stencil_jacobian(F: np.ndarray, m: int, h: float) -> np.ndarray:
    d_re = (F[m:2 * m] - F[2 * m:3 * m]) / (2 * h)
    d_im = (F[3 * m:4 * m] - F[4 * m:]) / (2 * h)
    return np.stack([np.stack([d_re.real, d_im.real], -1), np.stack([d_re.imag, d_im.imag], -1)], -2)


def return_derivative(alpha: ContactForm, page: Page, c: complex,
                      cfg: IntegratorConfig = DEFAULT_CONFIG, h: float = 1e-6) -> np.ndarray:
    """Derivada 2×2 do mapa de retorno em coordenadas da página (estimativa, não validada)"""
    cc = np.array([c], dtype=complex)
    stencil = np.concatenate([cc, cc + h, cc - h, cc + 1j * h, cc - 1j * h])
    F, _ = _displacement(alpha, page, stencil, cfg)
    return _stencil_jacobian(F, 1, h)[0] + np.eye(2)


def newton_on_page(alpha: ContactForm, page: Page, seeds: np.ndarray,
                   cfg: IntegratorConfig = DEFAULT_CONFIG, tol: float = 1e-10, max_iter: int = 30,
                   h: float = 1e-6, max_radius: float = 0.97,
                   max_step: float = 0.25) -> Tuple[np.ndarray, np.ndarray]:
    """Newton em lote para P(c) − c = 0 com jacobiana por diferenças centradas e backtracking"""
    c = np.array(seeds, dtype=complex)
    n = len(c)
    active = np.ones(n, dtype=bool)
    converged = np.zeros(n, dtype=bool)
    previous = c.copy()
    previous_norm = np.full(n, np.inf)
    halvings = np.zeros(n, dtype=int)

    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        m = idx.size
        cc = c[idx]
        stencil = np.concatenate([cc, cc + h, cc - h, cc + 1j * h, cc - 1j * h])
        F_all, ok_all = _displacement(alpha, page, stencil, cfg)
        ok = ok_all.reshape(5, m).all(axis=0) & (np.abs(cc) <= max_radius)
        F = F_all[:m]
        norm = np.abs(F)

        done = ok & (norm < tol)
        converged[idx[done]] = True
        active[idx[done]] = False
        active[idx[~ok]] = False

        worse = ok & ~done & (norm > previous_norm[idx]) & (halvings[idx] < 6)
        for i in idx[worse]:
            c[i] = previous[i] + 0.5 * (c[i] - previous[i])
            halvings[i] += 1

        step_mask = ok & ~done & ~worse
        if not step_mask.any():
            continue
        J = _stencil_jacobian(F_all, m, h)[step_mask]
        rhs = -np.column_stack([F[step_mask].real, F[step_mask].imag])
        try:
            delta = np.linalg.solve(J, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            delta = np.array([np.linalg.lstsq(Ji, ri, rcond=None)[0] for Ji, ri in zip(J, rhs)])
        size = np.linalg.norm(delta, axis=1)
        delta *= np.minimum(1.0, max_step / np.maximum(size, 1e-300))[:, None]

        chosen = idx[step_mask]
        stalled = (size < 1e-13) & (norm[step_mask] < 1e-8)
        converged[chosen[stalled]] = True
        active[chosen[stalled]] = False

        previous[chosen] = c[chosen]
        previous_norm[chosen] = norm[step_mask]
        halvings[chosen] = 0
        c[chosen] = c[chosen] + delta[:, 0] + 1j * delta[:, 1]

    return c, converged


def lift_winding(orbit: PeriodicOrbit, alpha: ContactForm, cfg: IntegratorConfig = DEFAULT_CONFIG,
                 samples: int = 256, chart_margin: float = 0.05) -> int:
    """Número de voltas do levantamento do ângulo de fibra de Darboux ao longo da órbita"""
    times = orbit.period * np.arange(samples + 1) / samples
    path = trajectory(alpha, orbit.seed, times, cfg)
    angle, modulus = fiber_angle(path, orbit.seed)
    if np.min(modulus) < chart_margin:
        raise ChartEscape(f"Órbita de período {orbit.period:.6f} sai da carta de Darboux")
    lifted = np.unwrap(2 * np.pi * angle) / (2 * np.pi)
    return int(round(alpha.lens_order * (lifted[-1] - lifted[0])))


def class_h_test(orbit: PeriodicOrbit, alpha: ContactForm, cfg: IntegratorConfig = DEFAULT_CONFIG) -> bool:
    orbit.lift_winding = lift_winding(orbit, alpha, cfg)
    orbit.class_h = orbit.lift_winding == 1
    return orbit.class_h


class _OrbitCache:
    def __init__(self, alpha: ContactForm, cfg: IntegratorConfig, samples: int):
        self.alpha, self.cfg, self.samples = alpha, cfg, samples
        self._paths: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def path(self, orbit: PeriodicOrbit) -> Tuple[np.ndarray, np.ndarray]:
        key = id(orbit)
        if key not in self._paths:
            times = orbit.period * np.arange(self.samples) / self.samples
            self._paths[key] = (times, trajectory(self.alpha, orbit.seed, times, self.cfg))
        return self._paths[key]

    def fill(self, orbits: Sequence[PeriodicOrbit]) -> np.ndarray:
        """Integra todas as órbitas num único lote; retorna os caminhos com shape (n, samples, 4)"""
        if not orbits:
            return np.empty((0, self.samples, 4))
        k = np.arange(self.samples) / self.samples
        times = np.concatenate([o.period * k for o in orbits])
        seeds = np.repeat(np.stack([o.seed for o in orbits]), self.samples, axis=0)
        paths = integrate(self.alpha, seeds, times, self.cfg).reshape(len(orbits), self.samples, 4)
        for orbit, path, t in zip(orbits, paths, times.reshape(len(orbits), self.samples)):
            self._paths[id(orbit)] = (t, path)
        return paths


def coarse_distances(paths: np.ndarray, seeds: np.ndarray, p: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Distância amostral D[a, b] da semente de b (e suas imagens pelo recobrimento) ao caminho de a.

    Também retorna o maior passo entre amostras consecutivas de cada caminho, que limita o erro
    da versão amostral em relação à distância contínua.
    """
    images = np.stack([deck(seeds, p, j) for j in range(p)], axis=1)
    diff = paths[:, None, None, :, :] - images[None, :, :, None, :]
    D = np.min(np.linalg.norm(diff, axis=-1), axis=(2, 3))
    closed = np.concatenate([paths, paths[:, :1]], axis=1)
    spacing = np.max(np.linalg.norm(np.diff(closed, axis=1), axis=-1), axis=1)
    return D, spacing


def deduplicate(alpha: ContactForm, candidates: Sequence[PeriodicOrbit], cfg: IntegratorConfig = DEFAULT_CONFIG,
                dedup_tol: float = 1e-5, period_tol: float = 1e-6, samples: int = 64) -> List[PeriodicOrbit]:
    """Remove candidatos que são a mesma órbita; só pares próximos na malha amostral são refinados"""
    if not candidates:
        return []
    cache = _OrbitCache(alpha, cfg, samples)
    paths = cache.fill(candidates)
    periods = np.array([o.period for o in candidates])
    D, spacing = coarse_distances(paths, np.stack([o.seed for o in candidates]), alpha.lens_order)
    near = (np.abs(periods[:, None] - periods[None, :]) < period_tol) & (D <= spacing[:, None] + dedup_tol)

    kept: List[int] = []
    for i in range(len(candidates)):
        suspects = [k for k in kept if near[k, i]]
        if not any(orbit_distance(alpha, candidates[k], candidates[i], cfg, cache) < dedup_tol
                   for k in suspects):
            kept.append(i)
    logger.debug(f"Deduplicação: {len(candidates)} candidato(s), {int(near.sum()) - len(candidates)} "
                 f"par(es) refinados no máximo, {len(kept)} órbita(s)")
    return [candidates[i] for i in kept]


def orbit_distance(alpha: ContactForm, a: PeriodicOrbit, b: PeriodicOrbit,
                   cfg: IntegratorConfig = DEFAULT_CONFIG, cache: Optional[_OrbitCache] = None,
                   samples: int = 64) -> float:
    """Distância mínima sobre deslocamentos no tempo entre a semente de b e a órbita de a"""
    cache = cache or _OrbitCache(alpha, cfg, samples)
    times, path = cache.path(a)
    step = a.period / len(times)
    best = np.inf
    for j in range(alpha.lens_order):
        target = deck(b.seed, alpha.lens_order, j)[0]
        distances = np.linalg.norm(path - target, axis=1)
        k = int(np.argmin(distances))
        if distances[k] > 0.3:
            best = min(best, float(distances[k]))
            continue
        result = minimize_scalar(
            lambda t: float(np.linalg.norm(integrate(alpha, a.seed, t, cfg) - target)),
            bounds=(times[k] - step, times[k] + step), method="bounded", options={"xatol": 1e-12},
        )
        best = min(best, float(result.fun))
    return best


def find_orbits(alpha: ContactForm, t_cap: float = 1.5, seeds: Union[int, np.ndarray] = 4,
                cfg: IntegratorConfig = DEFAULT_CONFIG, tol: float = 1e-10, dedup_tol: float = 1e-5,
                pages: Sequence[Page] = (STANDARD_PAGE, SWAPPED_PAGE)) -> List[PeriodicOrbit]:
    """Órbitas periódicas de período ≤ T_cap como pontos fixos do retorno em duas páginas"""
    if not 1.0 < t_cap < 2.0:
        raise ValueError(f"T_cap precisa estar em (1, 2): {t_cap}")
    p = alpha.lens_order
    candidates: List[PeriodicOrbit] = []
    dropped = 0

    for page in pages:
        start = seed_grid(seeds) if isinstance(seeds, int) else np.asarray(seeds, dtype=complex)
        c, converged = newton_on_page(alpha, page, start, cfg, tol=tol)
        dropped += int((~converged).sum())
        if not converged.any():
            continue
        x = page.embed(c[converged])
        batch = section_return(alpha, x, cfg, page, strict=False)
        keep = batch.returned & (batch.times <= t_cap)
        if not keep.any():
            continue
        closed = integrate(alpha, x[keep], batch.times[keep], cfg)
        residuals = np.linalg.norm(closed - deck(x[keep], p), axis=1)
        for xi, T, res in zip(x[keep], batch.times[keep], residuals):
            candidates.append(PeriodicOrbit(seed=xi, period=float(T), closure_residual=float(res),
                                            lens_order=p, page=page.name))

    if dropped:
        logger.warning(f"{dropped} semente(s) de Newton descartadas sem convergência")

    orbits = deduplicate(alpha, candidates, cfg, dedup_tol)

    for orbit in orbits:
        try:
            class_h_test(orbit, alpha, cfg)
        except ChartEscape as e:
            logger.warning(f"Teste de classe falhou: {e}")
            orbit.class_h = False
    logger.info(f"{len(orbits)} órbita(s) distintas, {sum(o.class_h for o in orbits)} na classe 𝔥")
    return orbits


def t_min_max(orbits: Sequence[PeriodicOrbit]) -> Tuple[float, float]:
    periods = [o.period for o in orbits if o.class_h]
    if not periods:
        raise EmptyOrbitSet("Nenhuma órbita da classe 𝔥 encontrada abaixo de T_cap")
    return min(periods), max(periods)
