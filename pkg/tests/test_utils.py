import numpy as np
import pytest

from src.utils.polynomials import PRESETS, Polynomial4, preset
from src.utils.quadrature import (
    gauss_legendre,
    periodic_nodes,
    quadratic_extrapolation,
    spectral_derivative,
    wrap_unit,
)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_are_harmonic(name):
    assert preset(name).is_harmonic()


def test_unknown_preset():
    with pytest.raises(ValueError, match="desconhecido"):
        preset("cubic")


def test_invalid_exponents():
    with pytest.raises(ValueError):
        Polynomial4([(1.0, (1, 0, 0))])
    with pytest.raises(ValueError):
        Polynomial4([(1.0, (1, 0, -1, 0))])


def test_terms_are_merged_and_zero_dropped():
    poly = Polynomial4([(1.0, (1, 0, 0, 0)), (2.0, (1, 0, 0, 0)), (0.5, (0, 1, 0, 0)), (-0.5, (0, 1, 0, 0))])
    assert poly.terms() == [(3.0, (1, 0, 0, 0))]
    assert Polynomial4.zero().degree == 0
    np.testing.assert_array_equal(Polynomial4.zero().value(np.ones((3, 4))), np.zeros(3))


def test_cross_value_and_gradient():
    x = np.array([[1.0, 2.0, 3.0, 4.0]])
    cross = preset("cross")
    np.testing.assert_allclose(cross.value(x), [1 * 3 + 2 * 4])
    np.testing.assert_allclose(cross.gradient(x), [[3.0, 4.0, 1.0, 2.0]])
    np.testing.assert_allclose(cross.directional(x, np.array([[1.0, 0.0, 0.0, 0.0]])), [3.0])


def test_laplacian_of_non_harmonic():
    square = Polynomial4([(1.0, (2, 0, 0, 0))])
    assert not square.is_harmonic()
    assert square.laplacian().terms() == [(2.0, (0, 0, 0, 0))]


def test_deck_invariance():
    assert preset("height").is_deck_invariant(3)
    assert preset("quartic").is_deck_invariant(5)
    assert preset("mixed").is_deck_invariant(1)
    assert not preset("mixed").is_deck_invariant(3)


def test_sup_on_sphere_of_height():
    assert preset("height").sup_on_sphere() == pytest.approx(1.0, abs=0.02)


def test_gauss_legendre_is_exact_for_quintic():
    x, w = gauss_legendre(3, 0.0, 2.0)
    assert np.sum(w * x ** 5) == pytest.approx(2.0 ** 6 / 6.0, rel=1e-13)


def test_periodic_nodes_midpoint():
    x, w = periodic_nodes(4)
    np.testing.assert_allclose(x, [0.125, 0.375, 0.625, 0.875])
    assert w.sum() == pytest.approx(1.0)


def test_wrap_unit():
    np.testing.assert_allclose(wrap_unit(np.array([0.75, 0.25, -0.6, 1.0])), [-0.25, 0.25, 0.4, 0.0])


def test_spectral_derivative_of_sine():
    s = np.arange(32) / 32
    samples = np.column_stack([np.sin(2 * np.pi * s), np.cos(4 * np.pi * s)])
    expected = np.column_stack([2 * np.pi * np.cos(2 * np.pi * s), -4 * np.pi * np.sin(4 * np.pi * s)])
    np.testing.assert_allclose(spectral_derivative(samples), expected, atol=1e-10)


def test_quadratic_extrapolation_is_exact_for_parabola():
    x = np.array([0.1, 0.2, 0.4, 0.8])
    y = 3.0 - 2.0 * x + 5.0 * x ** 2
    assert quadratic_extrapolation(x, y, 0.0) == pytest.approx(3.0, abs=1e-12)
