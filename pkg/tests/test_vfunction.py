import numpy as np
import pandas as pd
import pytest

from src.discmaps.vfunction import (
    AngularTerm,
    GeneratingSpec,
    NonVanishingBoundary,
    VFunction,
    hat_divide,
    radial_split,
    random_spec,
    vnorm,
)


@pytest.fixture
def spec():
    return GeneratingSpec(1.0, (0.01, -0.02, 0.005),
                          (AngularTerm(0.003, 1, "cos"), AngularTerm(-0.002, 2, "sin")))


@pytest.fixture
def points(rng):
    rho = rng.uniform(0.01, np.sqrt(2.0), 64)
    theta = rng.uniform(0.0, 1.0, 64)
    return rho, theta


def test_angular_term_validation():
    with pytest.raises(ValueError):
        AngularTerm(1.0, 0)
    with pytest.raises(ValueError):
        AngularTerm(1.0, 1, "tan")


def test_vanishes_with_differential_on_boundary(spec):
    theta = np.linspace(0.0, 1.0, 9)
    zero = np.zeros_like(theta)
    np.testing.assert_allclose(spec.value(zero, theta), 0.0, atol=1e-15)
    np.testing.assert_allclose(spec.derivative(1, 0)(zero, theta), 0.0, atol=1e-15)
    np.testing.assert_allclose(spec.derivative(0, 1)(zero, theta), 0.0, atol=1e-15)


def test_radial_near_center(spec):
    rho = np.full(5, 0.8 * spec.radius + 0.2 * spec.rho_plateau)
    theta = np.linspace(0.0, 1.0, 5)
    np.testing.assert_allclose(spec.derivative(0, 1)(rho, theta), 0.0, atol=1e-15)
    np.testing.assert_allclose(spec.value(rho, theta), spec.value(rho[0], 0.0))


def test_split_consistency(spec, points):
    rho, theta = points
    g_rho, g_theta = spec.split(rho, theta)
    np.testing.assert_allclose(spec.derivative(1, 0)(rho, theta), rho * g_rho, atol=1e-14)
    np.testing.assert_allclose(spec.derivative(0, 1)(rho, theta), rho ** 2 * g_theta, atol=1e-14)


def test_split_theta_slope(spec, points):
    rho, theta = points
    h = 1e-6
    fd = (spec.split(rho + h, theta)[1] - spec.split(rho - h, theta)[1]) / (2 * h)
    np.testing.assert_allclose(spec.split_theta_slope(rho, theta), fd, atol=1e-8)


def test_hat_split_matches_closed_form(spec, rng):
    rho = rng.uniform(0.0, 0.9 * spec.rho_plateau, 32)
    theta = rng.uniform(0.0, 1.0, 32)
    generic = VFunction(spec.value, spec.k, spec.derivative)
    assert not generic.has_split
    for mine, closed in zip(radial_split(generic, rho, theta), spec.split(rho, theta)):
        np.testing.assert_allclose(mine, closed, atol=1e-12)


def test_hat_divide_with_finite_differences():
    f = VFunction(lambda r, t: np.asarray(r) ** 2 * np.sin(2 * np.pi * np.asarray(t)))
    r = np.array([0.0, 0.3, 1.2])
    theta = np.array([0.1, 0.4, 0.8])
    np.testing.assert_allclose(hat_divide(f, r, theta), r * np.sin(2 * np.pi * theta), atol=1e-9)


def test_hat_divide_rejects_non_vanishing_boundary():
    with pytest.raises(NonVanishingBoundary):
        hat_divide(lambda r, t: 1.0 + np.asarray(r), np.array([0.5]), np.array([0.0]))


def test_scaling_and_negation(spec, points):
    rho, theta = points
    np.testing.assert_allclose((-spec).value(rho, theta), -spec.value(rho, theta))
    np.testing.assert_allclose(spec.scaled(0.5).value(rho, theta), 0.5 * spec.value(rho, theta))
    assert GeneratingSpec(1.0).is_zero()
    assert vnorm(GeneratingSpec(1.0)) == 0.0


def test_vnorm_is_homogeneous(spec):
    assert vnorm(spec.scaled(3.0)) == pytest.approx(3.0 * vnorm(spec), rel=1e-12)


def test_random_spec_has_requested_norm(rng):
    G = random_spec(rng, k=1.5, norm=0.02)
    assert G.k == 1.5
    assert len(G.angular) == 4
    assert vnorm(G) == pytest.approx(0.02, rel=1e-10)
    radial = random_spec(rng, norm=0.01, modes=0)
    assert radial.angular == ()


def test_dict_round_trip(spec):
    assert GeneratingSpec.from_dict(spec.to_dict()) == spec


def test_frame_interpolation(spec):
    r = np.linspace(0.0, spec.radius, 41)
    theta = np.arange(48) / 48
    frame = VFunction.from_spec(spec).to_frame(r, theta)
    assert isinstance(frame, pd.DataFrame) and len(frame) == 41 * 48
    g = VFunction.from_frame(frame, spec.k)
    off_r, off_t = np.array([0.31, 0.77]), np.array([0.123, 0.987])
    np.testing.assert_allclose(g(off_r, off_t), spec.value(off_r, off_t), atol=1e-5)
