"""Bateria aleatória de invariantes das aplicações de disco exatas."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from src.config import ExperimentConfig
from src.discmaps.chart import DiscMapError
from src.discmaps.maps import gen_from_map, map_from_gen, rotation_map
from src.discmaps.paths import (
    WitnessNotFound,
    calabi,
    generated_path,
    hj_residual,
    quasi_autonomous_path,
    sign_witness,
)
from src.discmaps.vfunction import GeneratingSpec, random_spec, vnorm

logger = logging.getLogger(__name__)

ROUND_TRIP_TOL = 1e-8
HJ_TOL = 1e-6
RADIAL_HJ_TOL = 1e-10
QUASI_TOL = 1e-9
CALABI_TOL = 1e-6
ROTATION_TOL = 1e-9

CHECKS = ("round_trip_generating", "round_trip_map", "hamilton_jacobi", "hamilton_jacobi_radial",
          "quasi_autonomy", "argmin_drift", "calabi", "witness_negative", "witness_positive")


@dataclass
class SuiteReport:
    trials: pd.DataFrame
    rotation: pd.DataFrame
    counts: Dict[str, Tuple[int, int]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        rotation_ok = bool(self.rotation["ok"].all()) if len(self.rotation) else True
        return rotation_ok and all(ok == total for ok, total in self.counts.values())

    def summary(self) -> Dict[str, Dict[str, int]]:
        return {name: {"passed": ok, "total": total} for name, (ok, total) in self.counts.items()}


def _sample_grid(k: float, n_r: int = 16, n_theta: int = 24) -> Tuple[np.ndarray, np.ndarray]:
    r = np.linspace(0.0, np.sqrt(2.0 * k), n_r)
    theta = np.arange(n_theta) / n_theta
    return [x.ravel() for x in np.meshgrid(r, theta, indexing="ij")]


def _witness_ok(phi, G) -> Tuple[bool, float]:
    """(testemunha encontrada, CAL(φ)); o ramo é decidido pelo sinal de CAL"""
    cal = phi.calabi()
    try:
        witness = sign_witness(phi, G)
    except (WitnessNotFound, DiscMapError) as e:
        logger.warning(f"Testemunha não encontrada (CAL = {cal:+.3e}): {e}")
        return False, cal
    return witness is not None, cal


def run_trial(G: GeneratingSpec, times: int = 8) -> Dict[str, float]:
    """Todas as verificações para um G; os valores são resíduos (ou 0/1 para testemunhas)"""
    r, theta = _sample_grid(G.k)
    phi = map_from_gen(G)
    back = gen_from_map(phi)
    generating_error = float(np.max(np.abs(back(r, theta) - G.value(r, theta))))
    rebuilt = map_from_gen(back, G.k, check=False)
    map_error = phi.sup_distance(rebuilt, n_r=12, n_theta=16)

    path = generated_path(G)
    hj = hj_residual(G, n_times=times, path=path)
    quasi = quasi_autonomous_path(G, n_times=times)
    cal = calabi(phi, path, n_times=times)

    minus = -G
    found_plus, cal_plus = _witness_ok(phi, G)
    found_minus, cal_minus = _witness_ok(map_from_gen(minus), minus)
    negative = [found for found, c in ((found_plus, cal_plus), (found_minus, cal_minus)) if c <= 0]
    positive = [found for found, c in ((found_plus, cal_plus), (found_minus, cal_minus)) if c > 0]

    return {
        "v_norm": vnorm(G),
        "round_trip_generating": generating_error,
        "round_trip_map": map_error,
        "hamilton_jacobi": hj,
        "quasi_autonomy": max(quasi.min_drift, quasi.max_drift),
        "argmin_drift": quasi.argmin_drift,
        "argmin_bound": 2.0 * quasi.spacing,
        "cal": cal.value,
        "calabi": cal.difference,
        "witness_negative": float(all(negative)) if negative else np.nan,
        "witness_positive": float(all(positive)) if positive else np.nan,
    }


def rotation_table(eps_values, k: float = 1.0) -> pd.DataFrame:
    """Família de rotações: σ = εk, CAL = ½εk² contra a forma fechada"""
    rows = []
    r, theta = _sample_grid(k)
    for eps in eps_values:
        phi = rotation_map(eps, k)
        G = GeneratingSpec(k, (0.5 * eps,))
        from_generating = map_from_gen(G)
        sigma_error = float(np.max(np.abs(from_generating.sigma(r, theta) - eps * k)))
        cal = from_generating.calabi()
        rows.append({
            "eps": eps, "sigma_expected": eps * k, "sigma_error": sigma_error,
            "cal": cal, "cal_expected": 0.5 * eps * k ** 2, "cal_error": abs(cal - 0.5 * eps * k ** 2),
            "map_error": phi.sup_distance(from_generating),
        })
    table = pd.DataFrame(rows, columns=["eps", "sigma_expected", "sigma_error", "cal", "cal_expected",
                                        "cal_error", "map_error"])
    table["ok"] = (table["sigma_error"] < ROTATION_TOL) & (table["cal_error"] < ROTATION_TOL) \
        & (table["map_error"] < ROUND_TRIP_TOL)
    return table


def discmap_suite(config: ExperimentConfig) -> SuiteReport:
    """Round trips 𝒢/ℰ, Hamilton–Jacobi, quase-autonomia, Calabi e testemunhas de sinal"""
    s = config.discmaps
    rng = np.random.default_rng(config.seed)
    if s.v_norm >= config.thresholds.v_norm_max:
        logger.warning(f"‖G‖_𝕍 = {s.v_norm} acima do limiar {config.thresholds.v_norm_max}")

    rows: List[Dict[str, float]] = []
    for trial in range(s.trials):
        G = random_spec(rng, s.k, s.v_norm)
        radial = random_spec(rng, s.k, s.v_norm, modes=0)
        try:
            row = run_trial(G, s.times)
        except DiscMapError as e:
            logger.error(f"Tentativa {trial}: {type(e).__name__}: {e}")
            row = {name: np.nan for name in CHECKS}
            row["argmin_bound"] = np.nan
            row.update(witness_negative=0.0, witness_positive=0.0)
        row["hamilton_jacobi_radial"] = hj_residual(radial, n_times=s.times)
        row["trial"] = trial
        rows.append(row)
        logger.debug(f"Tentativa {trial}: {row}")

    trials = pd.DataFrame(rows)
    tolerances = {
        "round_trip_generating": ROUND_TRIP_TOL, "round_trip_map": ROUND_TRIP_TOL,
        "hamilton_jacobi": HJ_TOL, "hamilton_jacobi_radial": RADIAL_HJ_TOL,
        "quasi_autonomy": QUASI_TOL, "calabi": CALABI_TOL,
    }
    counts: Dict[str, Tuple[int, int]] = {}
    for name, tol in tolerances.items():
        counts[name] = (int((trials[name] < tol).sum()), len(trials))
    stationary = trials["argmin_drift"] <= trials["argmin_bound"]
    counts["argmin_drift"] = (int(stationary.sum()), len(trials))
    for name in ("witness_negative", "witness_positive"):
        column = trials[name].dropna()
        counts[name] = (int((column == 1.0).sum()), len(column))

    report = SuiteReport(trials, rotation_table(s.rotation_eps, s.k), counts)
    for name, (ok, total) in counts.items():
        log = logger.info if ok == total else logger.warning
        log(f"{name}: {ok}/{total}")
    return report
