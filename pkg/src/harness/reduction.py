"""Verificação de ponta a ponta da redução: sinal de CAL ⇒ ponto fixo interior com sinal de σ."""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd

from src.config import ExperimentConfig
from src.geometry.forms3d import GeometryError
from src.geometry.reebflow import PeriodicOrbit, find_orbits
from src.geometry.section import (
    DiscGrid,
    DiscModel,
    action_and_calabi,
    fixed_point_orbit_check,
    normalize,
    return_map,
)
from src.harness.perturbations import build_form, integrator_config
from src.harness.sweep import class_h_extremes

logger = logging.getLogger(__name__)

ZOLL_SPREAD = 1e-9


@dataclass
class SectionWitness:
    r: float
    theta: float
    sigma: float
    period_ratio: float
    ratio_error: float
    census_period: Optional[float] = None


@dataclass
class BranchReport:
    """Normalização numa órbita de referência (T_min ou T_max) e as implicações de sinal"""

    branch: str
    reference_period: float
    cal: float
    identity_residual: float
    fixed_points: pd.DataFrame
    negative: Optional[SectionWitness] = None
    positive: Optional[SectionWitness] = None
    discrepancies: List[str] = field(default_factory=list)

    @property
    def implication_holds(self) -> bool:
        """CAL ≤ 0 ⇒ ∃ q com σ(q) < 0 e CAL ≥ 0 ⇒ ∃ q com σ(q) > 0"""
        return (self.cal > 0 or self.negative is not None) and (self.cal < 0 or self.positive is not None)


@dataclass
class ReductionReport:
    eps: float
    lens_order: int
    vacuous: bool
    census: pd.DataFrame
    branches: List[BranchReport] = field(default_factory=list)
    identity_displacement: Optional[float] = None
    message: str = ""

    @property
    def discrepancies(self) -> List[str]:
        return [d for b in self.branches for d in b.discrepancies]

    @property
    def consistent(self) -> bool:
        return not self.discrepancies and all(b.implication_holds for b in self.branches)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for b in self.branches:
            for sign, w in (("negative", b.negative), ("positive", b.positive)):
                rows.append({
                    "branch": b.branch, "reference_period": b.reference_period, "cal": b.cal,
                    "identity_residual": b.identity_residual, "witness": sign,
                    "found": w is not None,
                    "r": w.r if w else np.nan, "theta": w.theta if w else np.nan,
                    "sigma": w.sigma if w else np.nan, "period_ratio": w.period_ratio if w else np.nan,
                    "ratio_error": w.ratio_error if w else np.nan,
                    "census_period": w.census_period if w and w.census_period is not None else np.nan,
                    "implication_holds": b.implication_holds,
                })
        return pd.DataFrame(rows)


def census_frame(orbits: List[PeriodicOrbit]) -> pd.DataFrame:
    return pd.DataFrame([{
        "period": o.period, "class_h": o.class_h, "lift_winding": o.lift_winding,
        "closure_residual": o.closure_residual, "page": o.page,
    } for o in orbits], columns=["period", "class_h", "lift_winding", "closure_residual", "page"])


def _witness(frame: pd.DataFrame, sign: float, census: List[PeriodicOrbit],
             reference: float) -> Optional[SectionWitness]:
    """Ponto fixo verificado com o σ mais extremo do sinal pedido"""
    rows = frame[frame["ok"] & (sign * frame["sigma"] > 0)]
    if rows.empty:
        return None
    row = rows.loc[(sign * rows["sigma"]).idxmax()]
    period = reference * row["period_ratio"]
    matches = [o.period for o in census if abs(o.period - period) < 1e-6]
    return SectionWitness(float(row["r"]), float(row["theta"]), float(row["sigma"]),
                          float(row["period_ratio"]), float(row["ratio_error"]),
                          matches[0] if matches else None)


def _branch(name: str, alpha, orbit: PeriodicOrbit, orbits: List[PeriodicOrbit],
            config: ExperimentConfig) -> BranchReport:
    cfg = integrator_config(config)
    p = config.lens_order
    normalized = normalize(alpha, orbit, cfg)
    grid = DiscGrid(DiscModel(p), config.grid.n_r, config.grid.n_theta)
    rd = return_map(normalized, grid, cfg)
    calabi = action_and_calabi(rd, volume_nodes=config.grid.volume_nodes)
    report = fixed_point_orbit_check(rd, cfg)

    branch = BranchReport(name, orbit.period, calabi.cal, calabi.identity_residual, report.frame,
                          _witness(report.frame, -1.0, orbits, orbit.period),
                          _witness(report.frame, 1.0, orbits, orbit.period))
    if name == "systolic" and branch.negative is not None:
        branch.discrepancies.append(
            f"ponto fixo com σ = {branch.negative.sigma:.3e} < 0 na normalização em T_min: "
            f"órbita mais curta que T_min fora do censo")
    if (name == "diastolic" and branch.positive is not None
            and orbit.period * branch.positive.period_ratio <= config.thresholds.t_cap):
        branch.discrepancies.append(
            f"ponto fixo com σ = {branch.positive.sigma:.3e} > 0 na normalização em T_max: "
            f"órbita mais longa que T_max abaixo de T_cap fora do censo")
    for witness in (branch.negative, branch.positive):
        if witness is not None and witness.census_period is None:
            logger.warning(f"[{name}] testemunha com período {orbit.period * witness.period_ratio:.10f} "
                           f"ausente do censo de órbitas")
    if not branch.implication_holds:
        branch.discrepancies.append(f"CAL = {branch.cal:+.3e} sem testemunha do sinal correspondente")
    logger.info(f"[{name}] T_ref = {orbit.period:.10f}, CAL = {branch.cal:+.3e}, "
                f"testemunhas: σ<0 {'sim' if branch.negative else 'não'}, σ>0 {'sim' if branch.positive else 'não'}")
    return branch


def verify_reduction(config: ExperimentConfig, eps: Optional[float] = None) -> ReductionReport:
    """Normaliza em T_min e em T_max e confere as implicações CAL ↔ pontos fixos"""
    p = config.lens_order
    if eps is None:
        nonzero = [e for e in config.perturbation.amplitudes if e != 0.0]
        eps = nonzero[0] if nonzero else 0.0
    cfg = integrator_config(config)
    th = config.thresholds
    alpha = build_form(config.perturbation, eps, p)

    try:
        orbits = find_orbits(alpha, th.t_cap, config.grid.orbit_seeds, cfg, th.newton_tol, th.dedup_tol)
        shortest, longest = class_h_extremes(orbits)
    except (GeometryError, ValueError) as e:
        logger.error(f"Redução em ε = {eps:+.4f} interrompida: {e}")
        return ReductionReport(eps, p, False, pd.DataFrame(), message=f"{type(e).__name__}: {e}")
    census = census_frame(orbits)

    if longest.period - shortest.period < ZOLL_SPREAD:
        cfg_grid = DiscGrid(DiscModel(p), config.grid.n_r, config.grid.n_theta)
        rd = return_map(normalize(alpha, shortest, cfg), cfg_grid, cfg)
        x = cfg_grid.points().reshape(cfg_grid.shape + (4,))
        moved = float(np.max(np.linalg.norm(rd.images - x, axis=-1)))
        logger.info(f"Forma de Zoll (ε = {eps:+.4f}): P = id a {moved:.2e}, implicação vazia")
        return ReductionReport(eps, p, True, census, identity_displacement=moved,
                               message="Zoll: P = id, implicação vazia")

    report = ReductionReport(eps, p, False, census)
    for name, orbit in (("systolic", shortest), ("diastolic", longest)):
        try:
            report.branches.append(_branch(name, alpha, orbit, orbits, config))
        except GeometryError as e:
            logger.error(f"[{name}] normalização falhou: {e}")
            report.message += f"{name}: {type(e).__name__}: {e}; "
    return report
