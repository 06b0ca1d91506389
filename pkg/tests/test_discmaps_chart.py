import numpy as np
import pytest

from src.discmaps.chart import (
    DivisionAtBinding,
    NegativeRadicand,
    OutOfDomain,
    chart_identity_residual,
    k_primitive,
    weinstein_inverse,
    weinstein_map,
)


def test_weinstein_map_values():
    rho, vartheta, p_rho, p_vartheta = weinstein_map(0.5, 0.3, 1.0, 0.1)
    assert (rho, vartheta) == (1.0, 0.3)
    assert p_rho == pytest.approx(0.2)
    assert p_vartheta == pytest.approx(0.375)


def test_weinstein_inverse_undoes_map():
    point = weinstein_map(np.array([0.5, 1.2]), np.array([0.3, 0.9]), np.array([1.0, 0.4]), np.array([0.1, 0.7]))
    r, theta, R, Theta = weinstein_inverse(*point)
    np.testing.assert_allclose(r, [0.5, 1.2], atol=1e-14)
    np.testing.assert_allclose(theta, [0.3, 0.9])
    np.testing.assert_allclose(R, [1.0, 0.4])
    np.testing.assert_allclose(Theta, [0.1, 0.7], atol=1e-14)


def test_domain_is_not_reduced_modulo_one():
    with pytest.raises(OutOfDomain):
        weinstein_map(0.5, 0.0, 1.0, 0.6)
    with pytest.raises(OutOfDomain):
        weinstein_map(0.5, 0.95, 1.0, 0.05)
    with pytest.raises(OutOfDomain):
        k_primitive(0.5, 0.0, 1.0, -0.5)


def test_inverse_errors():
    with pytest.raises(NegativeRadicand):
        weinstein_inverse(0.5, 0.0, 0.0, 0.2)
    with pytest.raises(DivisionAtBinding):
        weinstein_inverse(0.0, 0.1, 0.0, 0.0)


def test_k_primitive():
    assert k_primitive(0.3, 0.2, 1.0, 0.1, k=2.0) == pytest.approx(1.5 * 0.1)


@pytest.mark.parametrize("k", [1.0, 2.0])
def test_chart_pulls_back_canonical_form(k):
    assert chart_identity_residual(samples=100, k=k, seed=5) < 1e-12
