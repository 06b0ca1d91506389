import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np
import pandas as pd

# Configurações iniciais
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.config import ConfigError, ExperimentConfig, load_config, load_settings, setup_logging
from src.geometry.forms3d import GeometryError, contact_volume, ratios
from src.geometry.reebflow import find_orbits, t_min_max
from src.geometry.section import (
    DiscGrid,
    DiscModel,
    action_and_calabi,
    boundary_circle_map,
    exactness_residual,
    fixed_point_orbit_check,
    grid_frame,
    loop_exactness,
    normalize,
    return_map,
)
from src.harness.perturbations import build_form, check_generators, integrator_config
from src.harness.reduction import census_frame, verify_reduction
from src.harness.suite import discmap_suite
from src.harness.sweep import EXIT_CONSISTENT, EXIT_OUT_OF_REGIME, EXIT_VIOLATION, class_h_extremes, exit_code, run_sweep
from src.storage.writer import IoError, ReportWriter, emit

logger = logging.getLogger(__name__)

EXIT_CONFIG = 1


def parse_eps(text: Optional[str]) -> Optional[List[float]]:
    """'0,0.01,-0.03' → [0.0, 0.01, -0.03]"""
    if text is None:
        return None
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ConfigError(f"--eps inválido: {text}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zoll_lab",
                                     description="Laboratório numérico de dinâmica de Reeb perto de formas de Zoll")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="arquivo YAML/JSON do experimento")
    common.add_argument("--out", help="diretório de saída")
    common.add_argument("--seed", type=int)
    common.add_argument("--p", type=int, help="ordem do espaço lenticular L(p,1)")
    common.add_argument("--eps", help="lista de amplitudes separadas por vírgula")
    common.add_argument("--workers", type=int)
    common.add_argument("--log-level", dest="log_level")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ratio", parents=[common], help="razões sistólica e diastólica por ε")
    sub.add_parser("orbits", parents=[common], help="censo de órbitas periódicas abaixo de T_cap")
    sub.add_parser("section", parents=[common], help="mapa de retorno, identidades e pontos fixos")
    sub.add_parser("discmap", parents=[common], help="bateria aleatória de aplicações de disco")
    sub.add_parser("sweep", parents=[common], help="varredura completa com vereditos")
    sub.add_parser("reduction", parents=[common], help="implicações CAL ↔ pontos fixos")
    return parser


def resolve_config(args: argparse.Namespace, settings: dict) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    out = args.out or (settings['out'] if not args.config else None)
    workers = args.workers or (settings['workers'] if settings['workers'] > 1 else None)
    return config.with_overrides(p=args.p, seed=args.seed, eps=parse_eps(args.eps), out=out, workers=workers)


def command_ratio(config: ExperimentConfig, writer: ReportWriter) -> int:
    check_generators(config)
    cfg = integrator_config(config)
    th = config.thresholds
    rows = []
    for eps in config.perturbation.amplitudes:
        alpha = build_form(config.perturbation, eps, config.lens_order)
        try:
            orbits = find_orbits(alpha, th.t_cap, config.grid.orbit_seeds, cfg, th.newton_tol, th.dedup_tol)
            volume = contact_volume(alpha, config.grid.volume_nodes)
            t_min, t_max = t_min_max(orbits)
            rho_sys, rho_dia = ratios(alpha, orbits, volume)
        except GeometryError as e:
            logger.error(f"ε = {eps:+.4f}: {e}")
            rows.append({"eps": eps, "message": str(e)})
            continue
        rows.append({"eps": eps, "t_min": t_min, "t_max": t_max, "volume": volume,
                     "rho_sys": rho_sys, "rho_dia": rho_dia, "inverse_t_sigma": 1.0 / config.lens_order})
    frame = pd.DataFrame(rows)
    writer.write_table("ratios", frame)
    print(frame.to_string(index=False))
    return EXIT_OUT_OF_REGIME if "message" in frame else EXIT_CONSISTENT


def command_orbits(config: ExperimentConfig, writer: ReportWriter) -> int:
    check_generators(config)
    cfg = integrator_config(config)
    th = config.thresholds
    frames = []
    for eps in config.perturbation.amplitudes:
        alpha = build_form(config.perturbation, eps, config.lens_order)
        orbits = find_orbits(alpha, th.t_cap, config.grid.orbit_seeds, cfg, th.newton_tol, th.dedup_tol)
        frame = census_frame(orbits)
        frame.insert(0, "eps", eps)
        frames.append(frame)
    census = pd.concat(frames, ignore_index=True)
    writer.write_table("orbits", census)
    print(census.to_string(index=False))
    return EXIT_CONSISTENT


def command_section(config: ExperimentConfig, writer: ReportWriter) -> int:
    check_generators(config)
    cfg = integrator_config(config)
    th = config.thresholds
    p = config.lens_order
    rows = []
    for eps in config.perturbation.amplitudes:
        alpha = build_form(config.perturbation, eps, p)
        try:
            orbits = find_orbits(alpha, th.t_cap, config.grid.orbit_seeds, cfg, th.newton_tol, th.dedup_tol)
            shortest, _ = class_h_extremes(orbits)
            normalized = normalize(alpha, shortest, cfg)
        except (GeometryError, ValueError) as e:
            logger.error(f"ε = {eps:+.4f}: normalização falhou: {e}")
            rows.append({"eps": eps, "message": str(e)})
            continue
        rd = return_map(normalized, DiscGrid(DiscModel(p), config.grid.n_r, config.grid.n_theta), cfg)
        calabi = action_and_calabi(rd, volume_nodes=config.grid.volume_nodes)
        report = fixed_point_orbit_check(rd, cfg)
        circle = boundary_circle_map(rd)
        rows.append({
            "eps": eps, "reference_period": shortest.period, "cal": calabi.cal,
            "identity_residual": calabi.identity_residual, "volume_residual": calabi.volume_residual,
            "boundary_residual": rd.boundary_residual,
            "loop_exactness": float(np.max(loop_exactness(normalized, seed=config.seed, cfg=cfg))),
            "exactness_residual": exactness_residual(rd, seed=config.seed, cfg=cfg),
            "fixed_points": len(report.frame), "fixed_points_ok": int(report.frame["ok"].sum()),
            "boundary_rotation": circle.rotation_number,
        })
        if config.output.grids:
            writer.write_grid(f"section_eps_{eps:+.4f}", grid_frame(rd, calabi.sigma, report.fixed))
            writer.write_grid(f"fixed_points_eps_{eps:+.4f}", report.frame)
    frame = pd.DataFrame(rows)
    writer.write_table("section", frame)
    print(frame.to_string(index=False))
    return EXIT_OUT_OF_REGIME if "message" in frame else EXIT_CONSISTENT


def command_discmap(config: ExperimentConfig, writer: ReportWriter) -> int:
    report = discmap_suite(config)
    writer.write_table("discmap_trials", report.trials)
    writer.write_table("rotation", report.rotation)
    code = EXIT_CONSISTENT if report.passed else EXIT_VIOLATION
    writer.write_summary(config.echo(), [], code, {"discmap": report.summary()})
    print(report.rotation.to_string(index=False))
    for name, (ok, total) in report.counts.items():
        print(f"{name}: {ok}/{total}")
    return code


def command_sweep(config: ExperimentConfig, writer: ReportWriter) -> int:
    grids = {} if config.output.grids else None
    records = run_sweep(config, grids=grids)
    code = exit_code(records)
    emit(records, writer.directory, config.echo(), code, grids)
    for record in records:
        print(f"ε = {record.eps:+.4f}  ρ_sys = {record.rho_sys}  ρ_dia = {record.rho_dia}  "
              f"→ {record.verdict.value}")
    return code


def command_reduction(config: ExperimentConfig, writer: ReportWriter) -> int:
    check_generators(config)
    report = verify_reduction(config)
    writer.write_table("census", report.census)
    if report.branches:
        writer.write_table("reduction", report.to_frame())
    code = EXIT_CONSISTENT if report.consistent else EXIT_VIOLATION
    if report.message and not report.vacuous:
        code = max(code, EXIT_OUT_OF_REGIME)
    writer.write_summary(config.echo(), [], code, {"reduction": {
        "eps": report.eps, "vacuous": report.vacuous, "identity_displacement": report.identity_displacement,
        "discrepancies": report.discrepancies, "message": report.message,
    }})
    print(report.message or ("consistente" if report.consistent else "; ".join(report.discrepancies)))
    return code


COMMANDS = {
    "ratio": command_ratio,
    "orbits": command_orbits,
    "section": command_section,
    "discmap": command_discmap,
    "sweep": command_sweep,
    "reduction": command_reduction,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = load_settings()
    except EnvironmentError as e:
        print(f"Erro de ambiente: {e}", file=sys.stderr)
        return EXIT_CONFIG
    setup_logging(args.log_level or settings['log_level'])

    try:
        config = resolve_config(args, settings)
        writer = ReportWriter(config.output.directory)
        return COMMANDS[args.command](config, writer)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except IoError as e:
        logger.error(f"Erro de gravação: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
