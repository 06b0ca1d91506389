"""Varredura em ε: órbitas, razões sistólica/diastólica, identidade de Calabi e veredito."""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.config import ExperimentConfig
from src.geometry.forms3d import (
    ContactForm,
    GeometryError,
    c3_minus_distance,
    ratios,
    volume_estimate,
    zoll_form,
)
from src.geometry.reebflow import IntegratorConfig, PeriodicOrbit, find_orbits, t_min_max
from src.geometry.section import DiscGrid, DiscModel, action_and_calabi, grid_frame, normalize, return_map
from src.harness.perturbations import build_form, check_generators, integrator_config
from src.storage.records import ResultRecord, Verdict

logger = logging.getLogger(__name__)

EXIT_CONSISTENT = 0
EXIT_OUT_OF_REGIME = 2
EXIT_VIOLATION = 3


@dataclass
class SweepPoint:
    record: ResultRecord
    grid: Optional[pd.DataFrame] = None


def error_estimate(rho: float, period: float, closure: float, volume: float, volume_error: float,
                   cfg: IntegratorConfig) -> float:
    """Propagação linear: δρ/ρ = 2 δT/T + δVol/Vol"""
    period_error = closure + cfg.rel_tol * period + cfg.abs_tol
    volume_error = volume_error + 1e-12 * volume
    return float(rho * (2.0 * period_error / period + volume_error / volume))


def verdict(record: ResultRecord, safety: float = 10.0, out_of_regime: bool = False) -> Verdict:
    """Regra monotônica: violação só com margem acima de safety × erro estimado"""
    if out_of_regime or record.sys_margin is None or record.dia_margin is None:
        return Verdict.OUT_OF_REGIME
    tolerance = safety * (record.error_estimate or 0.0)
    if record.sys_margin < -tolerance or record.dia_margin < -tolerance:
        return Verdict.VIOLATION
    if record.sys_margin > tolerance and record.dia_margin > tolerance:
        return Verdict.STRICT_INEQUALITY
    return Verdict.ZOLL_EQUALITY


def class_h_extremes(orbits: Sequence[PeriodicOrbit]):
    """Órbitas da classe 𝔥 de menor e maior período"""
    admissible = [o for o in orbits if o.class_h]
    return min(admissible, key=lambda o: o.period), max(admissible, key=lambda o: o.period)


def _base_record(config: ExperimentConfig, eps: float) -> Dict:
    spec = config.perturbation
    return {
        "eps": float(eps),
        "lens_order": config.lens_order,
        "generator": spec.generator_label,
        "kind": spec.kind,
        "inverse_t_sigma": 1.0 / config.lens_order,
    }


def evaluate_point(config: ExperimentConfig, eps: float, with_grid: bool = False) -> SweepPoint:
    """Um ponto da varredura; falhas geométricas viram out_of_regime com mensagem"""
    p = config.lens_order
    cfg = integrator_config(config)
    th = config.thresholds
    fields = _base_record(config, eps)

    alpha: ContactForm = build_form(config.perturbation, eps, p)
    distance = c3_minus_distance(alpha, zoll_form(p))
    fields["c3_distance"] = distance
    note = ""
    outside = distance > th.eps_max
    if outside:
        note = f"distância C³₋ {distance:.3e} acima de ε_max = {th.eps_max}"
        logger.warning(f"ε = {eps:+.4f}: {note}; ponto marcado como out_of_regime")

    try:
        estimate = volume_estimate(alpha, config.grid.volume_nodes, richardson=True)
        orbits = find_orbits(alpha, th.t_cap, config.grid.orbit_seeds, cfg, th.newton_tol, th.dedup_tol)
        t_min, t_max = t_min_max(orbits)
        rho_sys, rho_dia = ratios(alpha, orbits, estimate.value)
        shortest, longest = class_h_extremes(orbits)

        normalized = normalize(alpha, shortest, cfg)
        grid = DiscGrid(DiscModel(p), config.grid.n_r, config.grid.n_theta)
        rd = return_map(normalized, grid, cfg)
        calabi = action_and_calabi(rd, volume=estimate.value)
    except (GeometryError, ValueError, np.linalg.LinAlgError) as e:
        logger.error(f"ε = {eps:+.4f}: ponto fora do regime ({type(e).__name__}: {e})")
        message = f"{type(e).__name__}: {e}"
        fields.update(verdict=Verdict.OUT_OF_REGIME, message=f"{message}; {note}" if note else message)
        return SweepPoint(ResultRecord(**fields))

    inverse = 1.0 / p
    err = max(
        error_estimate(rho_sys, t_min, shortest.closure_residual, estimate.value, estimate.error, cfg),
        error_estimate(rho_dia, t_max, longest.closure_residual, estimate.value, estimate.error, cfg),
    )
    fields.update(
        t_min=t_min, t_max=t_max, volume=estimate.value, rho_sys=rho_sys, rho_dia=rho_dia,
        cal=calabi.cal, calabi_identity_residual=calabi.identity_residual,
        volume_residual=calabi.volume_residual, boundary_residual=rd.boundary_residual,
        sys_margin=inverse - rho_sys, dia_margin=rho_dia - inverse, error_estimate=err,
        orbit_count=len(orbits), verdict=Verdict.OUT_OF_REGIME, message=note,
    )
    record = ResultRecord(**fields)
    record.verdict = verdict(record, th.safety_factor, outside)
    if record.verdict is Verdict.VIOLATION:
        logger.error(f"ε = {eps:+.4f}: VIOLAÇÃO numérica (ρ_sys = {rho_sys:.10f}, ρ_dia = {rho_dia:.10f}, "
                     f"1/p = {inverse:.10f}, erro {err:.2e})")
    logger.info(f"ε = {eps:+.4f}: ρ_sys = {rho_sys:.8f}, ρ_dia = {rho_dia:.8f}, "
                f"CAL = {calabi.cal:+.3e} → {record.verdict.value}")

    frame = None
    if with_grid:
        x = grid.points().reshape(grid.shape + (4,))
        fixed = np.linalg.norm(rd.images - x, axis=-1) < 1e-7
        frame = grid_frame(rd, calabi.sigma, fixed)
    return SweepPoint(record, frame)


def run_sweep(config: ExperimentConfig, workers: Optional[int] = None,
              grids: Optional[Dict[str, pd.DataFrame]] = None) -> List[ResultRecord]:
    """Avalia cada ε do cronograma; o resultado segue a ordem do cronograma"""
    check_generators(config)
    amplitudes = list(config.perturbation.amplitudes)
    workers = workers or config.workers
    task = partial(evaluate_point, config, with_grid=grids is not None)

    logger.info(f"Varredura com {len(amplitudes)} amplitude(s), p = {config.lens_order}, {workers} worker(s)")
    if workers > 1 and len(amplitudes) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(amplitudes))) as pool:
            points = list(pool.map(task, amplitudes))
    else:
        points = [task(eps) for eps in amplitudes]

    if grids is not None:
        for eps, point in zip(amplitudes, points):
            if point.grid is not None:
                grids[f"section_eps_{eps:+.4f}"] = point.grid
    return [point.record for point in points]


def exit_code(records: Sequence[ResultRecord]) -> int:
    """0 = consistente, 2 = há out_of_regime, 3 = há violação"""
    verdicts = {r.verdict for r in records}
    if Verdict.VIOLATION in verdicts:
        return EXIT_VIOLATION
    if Verdict.OUT_OF_REGIME in verdicts:
        return EXIT_OUT_OF_REGIME
    return EXIT_CONSISTENT
