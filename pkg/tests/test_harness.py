import numpy as np
import pytest

from src.config import ConfigError, ExperimentConfig, PerturbationSpec
from src.geometry.forms3d import zoll_form
from src.geometry.reebflow import IntegratorConfig, PeriodicOrbit
from src.harness.perturbations import build_form, check_generators, deck_invariance_residual
from src.harness.reduction import census_frame, verify_reduction
from src.harness.suite import discmap_suite, rotation_table
from src.harness.sweep import (
    EXIT_CONSISTENT,
    EXIT_OUT_OF_REGIME,
    EXIT_VIOLATION,
    class_h_extremes,
    error_estimate,
    evaluate_point,
    exit_code,
    run_sweep,
    verdict,
)
from src.storage.records import ResultRecord, Verdict


def _record(sys_margin, dia_margin, err=1e-9, v=Verdict.OUT_OF_REGIME):
    return ResultRecord(eps=0.01, lens_order=1, inverse_t_sigma=1.0, sys_margin=sys_margin,
                        dia_margin=dia_margin, error_estimate=err, verdict=v)


@pytest.mark.parametrize("sys_margin,dia_margin,expected", [
    (0.01, 0.01, Verdict.STRICT_INEQUALITY),
    (1e-12, -1e-12, Verdict.ZOLL_EQUALITY),
    (0.0, 0.0, Verdict.ZOLL_EQUALITY),
    (-0.01, 0.01, Verdict.VIOLATION),
    (0.01, -0.01, Verdict.VIOLATION),
    (None, 0.01, Verdict.OUT_OF_REGIME),
])
def test_verdict_rule(sys_margin, dia_margin, expected):
    assert verdict(_record(sys_margin, dia_margin)) is expected


def test_verdict_respects_safety_factor():
    # margem de 5e-9 com erro 1e-9: estrita com fator 2, indistinguível com fator 10
    record = _record(5e-9, 5e-9)
    assert verdict(record, safety=2.0) is Verdict.STRICT_INEQUALITY
    assert verdict(record, safety=10.0) is Verdict.ZOLL_EQUALITY


def test_verdict_flag_forces_out_of_regime():
    assert verdict(_record(0.01, 0.01), out_of_regime=True) is Verdict.OUT_OF_REGIME
    assert verdict(_record(-0.01, 0.01), out_of_regime=True) is Verdict.OUT_OF_REGIME


def test_exit_codes():
    strict = _record(0.01, 0.01, v=Verdict.STRICT_INEQUALITY)
    zoll = _record(0.0, 0.0, v=Verdict.ZOLL_EQUALITY)
    out = _record(None, None, v=Verdict.OUT_OF_REGIME)
    bad = _record(-0.01, 0.01, v=Verdict.VIOLATION)
    assert exit_code([strict, zoll]) == EXIT_CONSISTENT
    assert exit_code([strict, out]) == EXIT_OUT_OF_REGIME
    assert exit_code([out, bad, strict]) == EXIT_VIOLATION


def test_error_estimate_linear_propagation():
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-10)
    rho, period, closure, volume, volume_error = 0.9, 0.95, 1e-11, 1.0, 1e-10
    expected = rho * (2.0 * (closure + 1e-10 * period + 1e-10) / period + (volume_error + 1e-12) / volume)
    assert error_estimate(rho, period, closure, volume, volume_error, cfg) == pytest.approx(expected, rel=1e-12)


def test_class_h_extremes_ignores_other_classes():
    seed = np.zeros(2)
    orbits = [PeriodicOrbit(seed, 0.9, class_h=False), PeriodicOrbit(seed, 0.95, class_h=True),
              PeriodicOrbit(seed, 1.05, class_h=True), PeriodicOrbit(seed, 1.4, class_h=False)]
    shortest, longest = class_h_extremes(orbits)
    assert (shortest.period, longest.period) == (0.95, 1.05)
    with pytest.raises(ValueError):
        class_h_extremes([PeriodicOrbit(seed, 1.0, class_h=False)])


def test_census_frame_columns():
    frame = census_frame([PeriodicOrbit(np.zeros(2), 1.0, class_h=True, lift_winding=1)])
    assert list(frame.columns) == ["period", "class_h", "lift_winding", "closure_residual", "page"]
    assert census_frame([]).empty


def test_build_form_at_zero_is_zoll(sphere_points, tangent_vectors):
    alpha = build_form(PerturbationSpec(preset="height"), 0.0, 2)
    np.testing.assert_allclose(alpha.evaluate(sphere_points, tangent_vectors),
                               zoll_form(2).evaluate(sphere_points, tangent_vectors), atol=1e-14)


def test_build_form_rejects_non_harmonic_terms():
    spec = PerturbationSpec(preset=None, terms=[(1.0, [2, 0, 0, 0])])
    with pytest.raises(ConfigError, match="harmônico"):
        build_form(spec, 0.01)


def test_build_form_accepts_non_harmonic_exact_shift():
    spec = PerturbationSpec(kind="exact", preset=None, terms=[(1.0, [2, 0, 0, 0])])
    build_form(spec, 0.01)


def test_build_form_rejects_unknown_preset():
    with pytest.raises(ConfigError):
        build_form(PerturbationSpec(preset="banana"), 0.01)


def test_build_form_requires_deck_invariance_for_lens():
    with pytest.raises(ConfigError, match="L\\(3,1\\)"):
        build_form(PerturbationSpec(preset="mixed"), 0.01, 3)
    build_form(PerturbationSpec(preset="height"), 0.01, 3)


def test_check_generators_uses_largest_amplitude():
    config = ExperimentConfig.model_validate({
        "lens_order": 3, "perturbation": {"preset": "mixed", "amplitudes": [0.0, 0.02]},
    })
    with pytest.raises(ConfigError):
        check_generators(config)


def test_deck_invariance_residual_of_zoll():
    assert deck_invariance_residual(zoll_form(3)) < 1e-14


def test_rotation_table_matches_closed_form():
    table = rotation_table([-0.05, 0.01, 0.05], k=1.0)
    assert table["ok"].all()
    np.testing.assert_allclose(table["cal"], 0.5 * table["eps"], atol=1e-9)


@pytest.mark.slow
def test_discmap_suite_small(small_config):
    report = discmap_suite(small_config)
    assert len(report.trials) == 2
    assert report.passed
    assert set(report.summary()) >= {"round_trip_generating", "hamilton_jacobi", "calabi"}


@pytest.mark.slow
def test_zoll_point_is_equality(small_config):
    point = evaluate_point(small_config, 0.0)
    record = point.record
    assert record.verdict is Verdict.ZOLL_EQUALITY
    assert record.rho_sys == pytest.approx(1.0, abs=1e-8)
    assert record.rho_dia == pytest.approx(1.0, abs=1e-8)
    assert record.c3_distance < 1e-12
    assert record.message == ""


@pytest.mark.slow
def test_height_point_above_eps_max_is_out_of_regime(small_config):
    config = small_config.model_copy(update={
        "thresholds": small_config.thresholds.model_copy(update={"eps_max": 1e-6}),
    })
    point = evaluate_point(config, 0.05, with_grid=True)
    record = point.record
    assert record.verdict is Verdict.OUT_OF_REGIME
    assert "ε_max" in record.message
    assert record.rho_sys < 1.0 < record.rho_dia
    assert record.cal > 0
    assert list(point.grid.columns) == ["r", "theta", "tau", "sigma", "fixed_flag"]


@pytest.mark.slow
def test_run_sweep_keeps_schedule_order(small_config):
    grids = {}
    records = run_sweep(small_config, grids=grids)
    assert [r.eps for r in records] == [0.0, 0.05]
    assert set(grids) == {"section_eps_+0.0000", "section_eps_+0.0500"}
    assert exit_code(records) == EXIT_CONSISTENT


@pytest.mark.slow
def test_reduction_is_vacuous_for_zoll(small_config):
    report = verify_reduction(small_config, eps=0.0)
    assert report.vacuous
    assert report.consistent
    assert report.identity_displacement < 1e-6


def _passing_trial(drift, bound):
    return {
        "v_norm": 0.01, "round_trip_generating": 0.0, "round_trip_map": 0.0, "hamilton_jacobi": 0.0,
        "quasi_autonomy": 0.0, "argmin_drift": drift, "argmin_bound": bound, "cal": 1e-3, "calabi": 0.0,
        "witness_negative": np.nan, "witness_positive": 1.0,
    }


@pytest.mark.parametrize("drift,passed", [(0.05, True), (0.5, False)])
def test_suite_counts_moving_minimizer_as_failure(monkeypatch, small_config, drift, passed):
    monkeypatch.setattr("src.harness.suite.run_trial", lambda G, times: _passing_trial(drift, 0.2))
    report = discmap_suite(small_config)
    assert report.counts["argmin_drift"] == (2 if passed else 0, 2)
    assert report.passed is passed
