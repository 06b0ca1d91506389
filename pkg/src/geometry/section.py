"""Superfície de seção global N → S³/L(p,1), forma λ = S^*α, tempo e mapa de retorno.

O disco N usa duas cartas: o colar (r, θ) com r = 0 na borda e a carta central w,
ligadas por w = √(a² − r²)·e^{−2πiθ}, a = √(2p).
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from src.geometry.alignment import AlignmentFailure, alignment_map
from src.geometry.forms3d import (
    REFERENCE_POINT,
    TWO_PI,
    ContactForm,
    GeometryError,
    PullbackField,
    contact_volume,
    deck,
    from_complex,
    to_complex,
)
from src.geometry.reebflow import (
    DEFAULT_CONFIG,
    STANDARD_PAGE,
    IntegratorConfig,
    NoReturn,
    PeriodicOrbit,
    integrate,
    newton_on_page,
    orbit_period,
    section_return,
)
from src.utils.quadrature import gauss_legendre, quadratic_extrapolation, spectral_derivative, wrap_unit

logger = logging.getLogger(__name__)

__all__ = [
    "AlignmentFailure", "NotNormalized", "DiscModel", "DiscGrid", "LambdaField", "ReturnData",
    "CalabiResult", "FixedPointReport", "embed", "normalize", "pull_lambda", "return_map",
    "action_and_calabi", "fixed_point_orbit_check", "loop_exactness", "exactness_residual",
    "boundary_circle_map", "grid_frame", "fiber_closure_residual",
]


class NotNormalized(GeometryError):
    """A fibra de referência não é órbita da forma"""
    pass


@dataclass(frozen=True)
class DiscModel:
    """Modelo polar do disco N com k = t_Σ = ∫_N dλ_*"""

    t_sigma: int = 1

    @property
    def a_max(self) -> float:
        return float(np.sqrt(2.0 * self.t_sigma))

    def embed(self, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """S(r, θ) = (√(1 − r²/2p)·e^{−2πiθ}, r/√(2p))"""
        r, theta = np.broadcast_arrays(np.atleast_1d(np.asarray(r, float)), np.atleast_1d(np.asarray(theta, float)))
        k = self.t_sigma
        z1 = np.sqrt(np.clip(1.0 - r ** 2 / (2 * k), 0.0, None)) * np.exp(-TWO_PI * 1j * theta)
        z2 = r / np.sqrt(2 * k) + 0j
        return from_complex(z1, z2)

    def embed_jacobian(self, r: np.ndarray, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        r, theta = np.broadcast_arrays(np.atleast_1d(np.asarray(r, float)), np.atleast_1d(np.asarray(theta, float)))
        k = self.t_sigma
        c = np.sqrt(np.clip(1.0 - r ** 2 / (2 * k), 0.0, None))
        phase = np.exp(-TWO_PI * 1j * theta)
        s_r = from_complex(-r / (2 * k * np.maximum(c, 1e-300)) * phase, np.full(r.shape, 1.0 / np.sqrt(2 * k)) + 0j)
        s_theta = from_complex(-TWO_PI * 1j * c * phase, np.zeros(r.shape, dtype=complex))
        return s_r, s_theta

    def embed_center(self, w: np.ndarray) -> np.ndarray:
        """Carta central: (w/√(2p), √(1 − |w|²/2p))"""
        w = np.atleast_2d(np.asarray(w, dtype=float))
        k = self.t_sigma
        z1 = (w[:, 0] + 1j * w[:, 1]) / np.sqrt(2 * k)
        z2 = np.sqrt(np.clip(1.0 - np.sum(w ** 2, axis=1) / (2 * k), 0.0, None)) + 0j
        return from_complex(z1, z2)

    def center_jacobian(self, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        w = np.atleast_2d(np.asarray(w, dtype=float))
        k = self.t_sigma
        d = np.maximum(np.sqrt(np.clip(1.0 - np.sum(w ** 2, axis=1) / (2 * k), 0.0, None)), 1e-300)
        s = 1.0 / np.sqrt(2 * k)
        ones = np.full(len(w), s)
        s_w1 = from_complex(ones + 0j, -w[:, 0] / (2 * k * d) + 0j)
        s_w2 = from_complex(1j * ones, -w[:, 1] / (2 * k * d) + 0j)
        return s_w1, s_w2

    def to_center(self, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
        r, theta = np.broadcast_arrays(np.atleast_1d(r), np.atleast_1d(theta))
        w = np.sqrt(np.clip(self.a_max ** 2 - r ** 2, 0.0, None)) * np.exp(-TWO_PI * 1j * theta)
        return np.column_stack([w.real, w.imag])

    def to_collar(self, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        w = np.atleast_2d(np.asarray(w, dtype=float))
        rho2 = np.sum(w ** 2, axis=1)
        r = np.sqrt(np.clip(self.a_max ** 2 - rho2, 0.0, None))
        theta = (-np.arctan2(w[:, 1], w[:, 0]) / TWO_PI) % 1.0
        return r, theta

    def lambda_star(self, r: np.ndarray) -> np.ndarray:
        """Coeficiente de dθ em λ_* = (−t_Σ + ½r²)dθ"""
        return -self.t_sigma + 0.5 * np.asarray(r) ** 2

    @staticmethod
    def lambda_star_center(w: np.ndarray) -> np.ndarray:
        """(λ_w₁, λ_w₂) de (1/4π)(w₁dw₂ − w₂dw₁)"""
        w = np.atleast_2d(np.asarray(w, dtype=float))
        return np.column_stack([-w[:, 1], w[:, 0]]) / (2 * TWO_PI)

    def overlap_residual(self, n: int = 32) -> float:
        """Compara λ_* nas duas cartas numa malha da região de sobreposição"""
        r = np.linspace(0.05, 0.95, n) * self.a_max
        theta = np.arange(n) / n
        R, TH = [a.ravel() for a in np.meshgrid(r, theta, indexing="ij")]
        w = self.to_center(R, TH)
        lam = self.lambda_star_center(w)
        rho = np.sqrt(self.a_max ** 2 - R ** 2)
        phase = np.column_stack([np.cos(TWO_PI * TH), -np.sin(TWO_PI * TH)])
        dw_dr = -(R / rho)[:, None] * phase
        dw_dtheta = TWO_PI * np.column_stack([w[:, 1], -w[:, 0]])
        along_r = np.sum(lam * dw_dr, axis=1)
        along_theta = np.sum(lam * dw_dtheta, axis=1)
        return float(max(np.max(np.abs(along_r)), np.max(np.abs(along_theta - self.lambda_star(R)))))


def embed(r: np.ndarray, theta: np.ndarray, p: int = 1) -> np.ndarray:
    return DiscModel(p).embed(r, theta)


@dataclass
class DiscGrid:
    """Malha tensorial Gauss–Legendre em r × uniforme em θ"""

    model: DiscModel
    n_r: int = 32
    n_theta: int = 64
    r: np.ndarray = field(init=False)
    theta: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        self.r, wr = gauss_legendre(self.n_r, 0.0, self.model.a_max)
        self.theta = np.arange(self.n_theta) / self.n_theta
        self.weights = wr[:, None] * np.full((1, self.n_theta), 1.0 / self.n_theta)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_r, self.n_theta

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.r, self.theta, indexing="ij")

    def points(self) -> np.ndarray:
        R, TH = self.mesh()
        return self.model.embed(R.ravel(), TH.ravel())


@dataclass
class LambdaField:
    """Valores nodais de λ = S^*α: componentes em dr, dθ e a densidade de dλ em dr∧dθ"""

    lam_r: np.ndarray
    lam_theta: np.ndarray
    density: np.ndarray


def fiber_closure_residual(alpha: ContactForm, cfg: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """|Φ₁(z_*) − deck·z_*| para a fibra de referência"""
    x = integrate(alpha, REFERENCE_POINT, 1.0, cfg)
    return float(np.linalg.norm(x - deck(REFERENCE_POINT, alpha.lens_order)[0]))


def pull_lambda(alpha: ContactForm, grid: DiscGrid, cfg: IntegratorConfig = DEFAULT_CONFIG,
                tol: float = 1e-8) -> LambdaField:
    residual = fiber_closure_residual(alpha, cfg)
    if residual > tol:
        raise NotNormalized(f"Fibra de referência não fecha em tempo 1: resíduo {residual:.3e}")
    R, TH = grid.mesh()
    x = grid.model.embed(R.ravel(), TH.ravel())
    s_r, s_theta = grid.model.embed_jacobian(R.ravel(), TH.ravel())
    shape = grid.shape
    return LambdaField(
        alpha.evaluate(x, s_r).reshape(shape),
        alpha.evaluate(x, s_theta).reshape(shape),
        alpha.differential(x, s_r, s_theta).reshape(shape),
    )


def boundary_lambda(alpha: ContactForm, theta: np.ndarray, model: Optional[DiscModel] = None) -> np.ndarray:
    """λ(∂_θ) em r = 0; igual a −t_Σ para forma normalizada"""
    model = model or DiscModel(alpha.lens_order)
    theta = np.atleast_1d(theta)
    _, s_theta = model.embed_jacobian(np.zeros_like(theta), theta)
    return alpha.evaluate(model.embed(np.zeros_like(theta), theta), s_theta)


def normalize(alpha: ContactForm, orbit: PeriodicOrbit, cfg: IntegratorConfig = DEFAULT_CONFIG,
              tol: float = 1e-8, max_deviation: float = 0.15) -> ContactForm:
    """(1/T(γ))·F^*α com F = U∘Ψ levando a fibra de referência sobre γ"""
    if not orbit.class_h:
        raise AlignmentFailure("Normalização exige uma órbita da classe 𝔥")
    mapping = alignment_map(alpha, orbit, cfg, tol, max_deviation)
    normalized = ContactForm(
        PullbackField(alpha.base, mapping, 1.0 / orbit.period),
        lens_order=alpha.lens_order,
        kind="normalized",
        amplitude=alpha.amplitude,
        reference_period=orbit.period,
        normalization=mapping,
        source=alpha,
    )
    residual = fiber_closure_residual(normalized, cfg)
    if residual > tol:
        raise AlignmentFailure(f"Forma normalizada com resíduo de fechamento {residual:.3e} na fibra")
    logger.info(f"Forma normalizada em T = {orbit.period:.10f} (resíduo {residual:.2e})")
    return normalized


@dataclass
class ReturnData:
    grid: DiscGrid
    alpha: ContactForm
    tau: np.ndarray
    R: np.ndarray
    Theta: np.ndarray
    images: np.ndarray
    lam: LambdaField
    boundary_tau: np.ndarray
    boundary_shift: np.ndarray
    boundary_residual: float

    @property
    def reference_period(self) -> float:
        return self.alpha.reference_period

    @property
    def section_volume(self) -> float:
        """∫_N τ dλ"""
        return float(np.sum(self.tau * self.lam.density * self.grid.weights))


def return_map(alpha: ContactForm, grid: Optional[DiscGrid] = None,
               cfg: IntegratorConfig = DEFAULT_CONFIG) -> ReturnData:
    """τ e P nos nós; valores de borda por extrapolação quadrática em r"""
    p = alpha.lens_order
    grid = grid or DiscGrid(DiscModel(p))
    if grid.model.t_sigma != p:
        raise ValueError(f"Modelo de disco com t_Σ = {grid.model.t_sigma} para forma com p = {p}")
    lam = pull_lambda(alpha, grid, cfg)

    batch = section_return(alpha, grid.points(), cfg, STANDARD_PAGE)
    shape = grid.shape
    tau = batch.times.reshape(shape)
    z1, z2 = to_complex(batch.points)
    R = (np.sqrt(2 * p) * np.abs(z2)).reshape(shape)
    Theta = ((-np.angle(z1) / TWO_PI) % 1.0).reshape(shape)

    shift = wrap_unit(Theta - grid.theta[None, :])
    boundary_tau = quadratic_extrapolation(grid.r, tau, 0.0)
    boundary_shift = quadratic_extrapolation(grid.r, shift, 0.0)
    residual = float(np.max(np.abs(boundary_tau - 1.0 + p * boundary_shift)))
    logger.info(f"Mapa de retorno em {tau.size} nós: τ ∈ [{tau.min():.8f}, {tau.max():.8f}], "
                f"resíduo de borda {residual:.2e}")
    return ReturnData(grid, alpha, tau, R, Theta, batch.points.reshape(shape + (4,)), lam,
                      boundary_tau, boundary_shift, residual)


@dataclass
class CalabiResult:
    sigma: np.ndarray
    cal: float
    section_volume: float
    volume: float
    identity_residual: float
    volume_residual: float


def action_and_calabi(rd: ReturnData, volume: Optional[float] = None, volume_nodes: int = 48) -> CalabiResult:
    """σ = τ − 1, CAL = ½∫σ dλ e o resíduo de Vol(α) = T²(2·CAL + t_Σ)"""
    T = rd.reference_period
    p = rd.alpha.lens_order
    sigma = rd.tau - 1.0
    cal = 0.5 * float(np.sum(sigma * rd.lam.density * rd.grid.weights))
    if volume is None:
        source = rd.alpha.source
        volume = contact_volume(source, volume_nodes) if source is not None \
            else contact_volume(rd.alpha, volume_nodes) * T ** 2
    identity = abs(volume - T ** 2 * (2.0 * cal + p))
    normalized_volume = volume / T ** 2
    relative = abs(normalized_volume - rd.section_volume) / normalized_volume
    logger.info(f"CAL = {cal:.3e}, resíduo da identidade de volume {identity:.2e}")
    return CalabiResult(sigma, cal, rd.section_volume, float(volume), float(identity), float(relative))


@dataclass
class FixedPointReport:
    fixed: np.ndarray
    frame: pd.DataFrame


def _page_to_collar(c: np.ndarray, p: int) -> Tuple[np.ndarray, np.ndarray]:
    r = np.sqrt(2 * p) * np.sqrt(np.clip(1.0 - np.abs(c) ** 2, 0.0, None))
    theta = (-np.angle(c) / TWO_PI) % 1.0
    return r, theta


def _local_minima(values: np.ndarray) -> np.ndarray:
    """Mínimos discretos fora da primeira linha; a última linha (perto do centro) só olha para dentro"""
    inner = values[1:]
    outer = np.vstack([values[2:], np.full((1, values.shape[1]), np.inf)])
    mask = np.zeros_like(values, dtype=bool)
    mask[1:] = ((inner <= values[:-1]) & (inner <= outer)
                & (inner <= np.roll(inner, 1, axis=1)) & (inner <= np.roll(inner, -1, axis=1)))
    return mask


def fixed_point_orbit_check(rd: ReturnData, cfg: IntegratorConfig = DEFAULT_CONFIG, tol: float = 1e-7,
                            candidate_tol: float = 0.1, max_report: int = 64) -> FixedPointReport:
    """Pontos fixos de P, fechamento em τ(q) e T(γ_q)/T_ref contra 1 + σ(q)"""
    p = rd.alpha.lens_order
    R, TH = rd.grid.mesh()
    x = rd.grid.points().reshape(rd.grid.shape + (4,))
    displacement = np.linalg.norm(rd.images - x, axis=-1)
    fixed = displacement < tol

    rows = [(R[i, j], TH[i, j], rd.tau[i, j], displacement[i, j], "grid")
            for i, j in zip(*np.nonzero(fixed))]

    candidates = _local_minima(displacement) & (displacement < candidate_tol) & ~fixed
    if candidates.any():
        c0 = to_complex(x[candidates])[0]
        polished, converged = newton_on_page(rd.alpha, STANDARD_PAGE, c0, cfg)
        unique = []
        for c in polished[converged]:
            if all(abs(c - u) > 1e-6 for u in unique):
                unique.append(c)
        if unique:
            c = np.array(unique)
            batch = section_return(rd.alpha, STANDARD_PAGE.embed(c), cfg, strict=False)
            r, theta = _page_to_collar(c, p)
            moved = np.linalg.norm(batch.points - STANDARD_PAGE.embed(c), axis=1)
            rows.extend((r[k], theta[k], batch.times[k], moved[k], "polished")
                        for k in range(len(c)) if batch.returned[k])

    if len(rows) > max_report:
        keep = np.unique(np.linspace(0, len(rows) - 1, max_report).round().astype(int))
        rows = [rows[k] for k in keep]

    source = rd.alpha.source or rd.alpha
    T = rd.reference_period
    mapping = rd.alpha.normalization
    records = []
    for r, theta, tau, moved, origin in rows:
        point = rd.grid.model.embed(r, theta)
        record = {"r": r, "theta": theta, "tau": tau, "sigma": tau - 1.0, "displacement": moved,
                  "origin": origin, "closure_residual": np.nan, "period_ratio": np.nan}
        try:
            closed = integrate(rd.alpha, point, tau, cfg)
            record["closure_residual"] = float(np.linalg.norm(closed - deck(point, p)))
            start = mapping.apply(point) if mapping is not None else point
            period, _ = orbit_period(source, start[0], T * tau, cfg)
            record["period_ratio"] = period / T
        except NoReturn as e:
            logger.warning(f"Ponto fixo em (r={r:.4f}, θ={theta:.4f}) sem fechamento: {e}")
        records.append(record)

    frame = pd.DataFrame.from_records(records, columns=[
        "r", "theta", "tau", "sigma", "displacement", "origin", "closure_residual", "period_ratio"])
    frame["ratio_error"] = (frame["period_ratio"] - (1.0 + frame["sigma"])).abs()
    frame["ok"] = (frame["closure_residual"] < tol) & (frame["ratio_error"] < 1e-6)
    if len(frame) and not frame["ok"].all():
        logger.warning(f"{int((~frame['ok']).sum())} ponto(s) fixo(s) falharam na verificação de período")
    return FixedPointReport(fixed, frame)


def loop_exactness(alpha: ContactForm, n_loops: int = 20, samples: int = 64, seed: int = 0,
                   cfg: IntegratorConfig = DEFAULT_CONFIG) -> np.ndarray:
    """|∮_{P∘ℓ} α − ∮_ℓ α| para laços circulares aleatórios na carta central"""
    model = DiscModel(alpha.lens_order)
    a = model.a_max
    rng = np.random.default_rng(seed)
    radius = rng.uniform(0.05, 0.3, n_loops) * a
    reach = 0.85 * a - radius
    center_r = rng.uniform(0.0, 1.0, n_loops) * reach
    center_angle = rng.uniform(0.0, TWO_PI, n_loops)

    s = np.arange(samples) / samples
    w1 = center_r * np.cos(center_angle) + radius * np.cos(TWO_PI * s)[:, None]
    w2 = center_r * np.sin(center_angle) + radius * np.sin(TWO_PI * s)[:, None]
    points = model.embed_center(np.column_stack([w1.ravel(), w2.ravel()]))
    batch = section_return(alpha, points, cfg)

    shape = (samples, n_loops, 4)
    source = points.reshape(shape)
    image = batch.points.reshape(shape)

    def circulation(curve: np.ndarray) -> np.ndarray:
        velocity = spectral_derivative(curve, 1.0)
        values = alpha.evaluate(curve.reshape(-1, 4), velocity.reshape(-1, 4))
        return values.reshape(samples, n_loops).mean(axis=0)

    return np.abs(circulation(image) - circulation(source))


def exactness_residual(rd: ReturnData, nodes: int = 24, h: float = 1e-4, seed: int = 0,
                       cfg: IntegratorConfig = DEFAULT_CONFIG) -> float:
    """max |P^*λ − λ − dτ| em nós interiores, por diferenças centradas (carta w para r > 0.9a)"""
    model = rd.grid.model
    a = model.a_max
    rng = np.random.default_rng(seed)
    R, TH = rd.grid.mesh()
    interior = np.flatnonzero((R.ravel() > 10 * h))
    chosen = rng.choice(interior, size=min(nodes, interior.size), replace=False)
    r, theta = R.ravel()[chosen], TH.ravel()[chosen]

    base, stencil, tangents = [], [], []
    for ri, ti in zip(r, theta):
        if ri > 0.9 * a:
            w = model.to_center(ri, ti)[0]
            base.append(model.embed_center(w)[0])
            tangents.extend(model.center_jacobian(w))
            for e in np.eye(2):
                stencil.extend([model.embed_center(w + h * e)[0], model.embed_center(w - h * e)[0]])
        else:
            base.append(model.embed(ri, ti)[0])
            tangents.extend(model.embed_jacobian(ri, ti))
            stencil.extend([model.embed(ri + h, ti)[0], model.embed(ri - h, ti)[0],
                            model.embed(ri, ti + h)[0], model.embed(ri, ti - h)[0]])

    base = np.array(base)
    m = len(base)
    tangents = np.concatenate(tangents).reshape(m, 2, 4)
    batch = section_return(rd.alpha, np.vstack([base, np.array(stencil)]), cfg)
    image = batch.points[:m]
    tau_st = batch.times[m:].reshape(m, 2, 2)
    img_st = batch.points[m:].reshape(m, 2, 2, 4)

    worst = 0.0
    for k in range(2):
        pushed = (img_st[:, k, 0] - img_st[:, k, 1]) / (2 * h)
        dtau = (tau_st[:, k, 0] - tau_st[:, k, 1]) / (2 * h)
        lam = rd.alpha.evaluate(base, tangents[:, k])
        pulled = rd.alpha.evaluate(image, pushed)
        worst = max(worst, float(np.max(np.abs(pulled - lam - dtau))))
    return worst


@dataclass
class BoundaryCircle:
    rotation_number: float
    orientation_preserving: bool


def boundary_circle_map(rd: ReturnData) -> BoundaryCircle:
    """Estimativa do número de rotação de P|∂N a partir dos deslocamentos extrapolados"""
    lifted = rd.grid.theta + rd.boundary_shift
    steps = np.diff(np.append(lifted, lifted[0] + 1.0))
    return BoundaryCircle(float(np.mean(rd.boundary_shift)), bool(np.all(steps > 0)))


def grid_frame(rd: ReturnData, sigma: Optional[np.ndarray] = None,
               fixed: Optional[np.ndarray] = None) -> pd.DataFrame:
    """Campos nodais com colunas r, theta, tau, sigma, fixed_flag"""
    R, TH = rd.grid.mesh()
    sigma = rd.tau - 1.0 if sigma is None else sigma
    fixed = np.zeros(rd.grid.shape, dtype=bool) if fixed is None else fixed
    return pd.DataFrame({
        "r": R.ravel(),
        "theta": TH.ravel(),
        "tau": rd.tau.ravel(),
        "sigma": sigma.ravel(),
        "fixed_flag": fixed.ravel().astype(int),
    })
