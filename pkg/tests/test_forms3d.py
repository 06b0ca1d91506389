import numpy as np
import pytest

from src.geometry.forms3d import (
    HOPF_JACOBIAN,
    REFERENCE_POINT,
    ZOLL_DENSITY,
    DegenerateContact,
    EmptyOrbitSet,
    OutOfChart,
    add_exact,
    c3_minus_distance,
    contact_check,
    contact_density,
    contact_volume,
    darboux_chart,
    deck,
    hopf_grid,
    one_form_shift,
    quaternion_frame,
    ratios,
    reeb_at,
    rescale,
    scaled_perturbation,
    volume_estimate,
    zoll_form,
)
from src.geometry.reebflow import PeriodicOrbit
from src.utils.polynomials import Polynomial4, preset


def test_invalid_lens_order():
    with pytest.raises(ValueError):
        zoll_form(0)


def test_quaternion_frame_is_orthonormal_and_tangent(sphere_points):
    frame = quaternion_frame(sphere_points)
    gram = np.einsum("nik,njk->nij", frame, frame)
    np.testing.assert_allclose(gram, np.broadcast_to(np.eye(3), gram.shape), atol=1e-12)
    np.testing.assert_allclose(np.einsum("nik,nk->ni", frame, sphere_points), 0.0, atol=1e-12)


def test_zoll_reeb_field_at_reference_point():
    np.testing.assert_allclose(reeb_at(zoll_form(1), REFERENCE_POINT), [0.0, 2 * np.pi, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(reeb_at(zoll_form(2), REFERENCE_POINT), [0.0, np.pi, 0.0, 0.0], atol=1e-12)


def test_reeb_is_normalized_and_in_kernel(height_form, sphere_points, tangent_vectors):
    reeb = reeb_at(height_form, sphere_points)
    np.testing.assert_allclose(height_form.evaluate(sphere_points, reeb), 1.0, atol=1e-12)
    np.testing.assert_allclose(height_form.differential(sphere_points, reeb, tangent_vectors), 0.0, atol=1e-11)


def test_zoll_density_is_constant(sphere_points):
    np.testing.assert_allclose(contact_density(zoll_form(1), sphere_points), ZOLL_DENSITY, rtol=1e-12)


def test_hopf_grid_weights_sum_to_sphere_area():
    _, w = hopf_grid(8)
    assert w.sum() == pytest.approx(HOPF_JACOBIAN, rel=1e-12)
    with pytest.raises(ValueError):
        hopf_grid(4, rule="simpson")


@pytest.mark.parametrize("p", [1, 2, 3])
def test_zoll_volume_equals_lens_order(p):
    assert contact_volume(zoll_form(p), 16) == pytest.approx(p, rel=1e-12)


def test_height_volume_closed_form(height_form):
    estimate = volume_estimate(height_form, 24)
    assert estimate.value == pytest.approx(1.0 + 0.05 ** 2 / 3.0, rel=1e-10)
    assert estimate.error < 1e-10


def test_rescale_multiplies_volume_by_square():
    assert contact_volume(rescale(zoll_form(1), 1.5), 16) == pytest.approx(2.25, rel=1e-12)


def test_exact_shift_keeps_volume_and_reeb_direction(sphere_points):
    base = scaled_perturbation(preset("height"), 0.03)
    shifted = add_exact(base, preset("cross"), 0.05)
    assert contact_volume(shifted, 24) == pytest.approx(contact_volume(base, 24), rel=1e-10)
    r1, r2 = reeb_at(base, sphere_points), reeb_at(shifted, sphere_points)
    cos = np.einsum("ij,ij->i", r1, r2) / (np.linalg.norm(r1, axis=1) * np.linalg.norm(r2, axis=1))
    np.testing.assert_allclose(cos, 1.0, atol=1e-12)


def test_deck_invariance_of_lens_zoll(sphere_points, tangent_vectors):
    alpha = zoll_form(3)
    np.testing.assert_allclose(alpha.evaluate(deck(sphere_points, 3), deck(tangent_vectors, 3)),
                               alpha.evaluate(sphere_points, tangent_vectors), atol=1e-12)


def test_reeb_rejects_degenerate_point():
    # (1 − f)α_* se anula ao longo de z₂ = 0
    alpha = scaled_perturbation(preset("height"), -1.0)
    with pytest.raises(DegenerateContact):
        reeb_at(alpha, REFERENCE_POINT)


def test_contact_check():
    assert contact_check(zoll_form(1)).ok
    check = contact_check(scaled_perturbation(preset("height"), 0.1))
    assert check.ok and check.min_density < ZOLL_DENSITY < check.max_density


def test_ratios_use_class_h_only():
    orbits = [PeriodicOrbit(REFERENCE_POINT, 0.9, class_h=True), PeriodicOrbit(REFERENCE_POINT, 1.1, class_h=True),
              PeriodicOrbit(REFERENCE_POINT, 0.5, class_h=False)]
    rho_sys, rho_dia = ratios(zoll_form(1), orbits, volume=1.0)
    assert rho_sys == pytest.approx(0.81)
    assert rho_dia == pytest.approx(1.21)
    with pytest.raises(EmptyOrbitSet):
        ratios(zoll_form(1), orbits[2:], volume=1.0)


def test_c3_distance_vanishes_and_is_linear():
    zoll = zoll_form(1)
    assert c3_minus_distance(zoll, zoll_form(1)) == 0.0
    small = c3_minus_distance(scaled_perturbation(preset("cross"), 0.01), zoll)
    large = c3_minus_distance(scaled_perturbation(preset("cross"), 0.02), zoll)
    assert small > 0.0
    assert large == pytest.approx(2.0 * small, rel=1e-6)


@pytest.mark.parametrize("name", ["height", "cross", "mixed"])
def test_c3_distance_grows_under_grid_refinement(name):
    alpha = scaled_perturbation(preset(name), 0.03)
    values = [c3_minus_distance(alpha, zoll_form(1), level=level) for level in (1, 2, 3)]
    assert values[0] > 0.0
    assert values[0] <= values[1] <= values[2]


@pytest.mark.parametrize("name", ["height", "cross", "mixed"])
@pytest.mark.parametrize("eps", [0.05, -0.05])
def test_sweep_amplitudes_stay_below_configured_threshold(name, eps):
    # as varreduras em configs/ usam eps_max = 0.5
    assert c3_minus_distance(scaled_perturbation(preset(name), eps), zoll_form(1)) < 0.5


def test_one_form_shift_requires_four_components():
    with pytest.raises(ValueError):
        one_form_shift([preset("cross")] * 3, 0.01)


@pytest.mark.parametrize("p", [1, 2])
def test_darboux_chart_pullback(p):
    chart = darboux_chart(p)
    assert chart.pullback_residual(n=6) < 1e-10
    x = np.array([[0.3, -0.2], [0.0, 0.5]])
    phi = np.array([0.1, 0.7])
    back_x, back_phi = chart.inverse(chart.forward(x, phi))
    np.testing.assert_allclose(back_x, x, atol=1e-12)
    np.testing.assert_allclose(back_phi, phi, atol=1e-12)


def test_darboux_charts_compare_by_value():
    assert darboux_chart(2) == darboux_chart(2)
    assert darboux_chart(1) != darboux_chart(3)
    assert len({darboux_chart(1), darboux_chart(1)}) == 1


def test_darboux_chart_rejects_points_outside():
    with pytest.raises(OutOfChart):
        darboux_chart(1).inverse(np.array([[0.0, 0.0, 1.0, 0.0]]))


def test_polynomial_exact_shift_with_zero_amplitude_matches_base(sphere_points, tangent_vectors):
    base = zoll_form(1)
    shifted = add_exact(base, Polynomial4([(1.0, (1, 1, 0, 0))]), 0.0)
    np.testing.assert_allclose(shifted.evaluate(sphere_points, tangent_vectors),
                               base.evaluate(sphere_points, tangent_vectors), atol=0.0)
