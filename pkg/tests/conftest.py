import logging

import numpy as np
import pytest

from src.config import ExperimentConfig
from src.geometry.forms3d import scaled_perturbation, zoll_form
from src.utils.polynomials import preset


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: integrações completas (órbitas, seção, varredura)")


@pytest.fixture(autouse=True)
def _quiet_logging(caplog):
    caplog.set_level(logging.WARNING)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def zoll():
    return zoll_form(1)


@pytest.fixture
def height_form():
    """(1 + εf)α_* com f = |z₁|² − |z₂|² e ε = 0.05: fibras z₂ = 0 e z₁ = 0 com períodos 1 ± ε"""
    return scaled_perturbation(preset("height"), 0.05, 1)


@pytest.fixture
def sphere_points(rng):
    x = rng.normal(size=(200, 4))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


@pytest.fixture
def tangent_vectors(rng, sphere_points):
    v = rng.normal(size=sphere_points.shape)
    return v - np.einsum("ij,ij->i", v, sphere_points)[:, None] * sphere_points


@pytest.fixture
def small_config():
    """Configuração reduzida para testes de ponta a ponta"""
    return ExperimentConfig.model_validate({
        "lens_order": 1,
        "seed": 3,
        "perturbation": {"preset": "height", "amplitudes": [0.0, 0.05]},
        "grid": {"n_r": 10, "n_theta": 16, "volume_nodes": 24, "orbit_seeds": 2},
        "discmaps": {"trials": 2, "times": 4, "rotation_eps": [-0.01, 0.05]},
        "thresholds": {"eps_max": 0.5},
    })
