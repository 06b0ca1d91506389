import numpy as np
import pytest

from src.discmaps.maps import (
    DiscPoint,
    DomainOverflow,
    NonMonotone,
    boundary_second_derivative_check,
    critical_points,
    fixed_points,
    gen_from_map,
    identity_map,
    map_from_gen,
    radial_twist,
    rotation_map,
)
from src.discmaps.paths import (
    calabi,
    generated_path,
    hamiltonian_of_path,
    hj_residual,
    local_spacing,
    path_action,
    quasi_autonomous_path,
    sign_witness,
)
from src.discmaps.vfunction import AngularTerm, GeneratingSpec, random_spec


@pytest.fixture
def G(rng):
    return random_spec(rng, k=1.0, norm=0.01)


@pytest.fixture
def collar_points(rng):
    return rng.uniform(0.0, np.sqrt(2.0), 40), rng.uniform(0.0, 1.0, 40)


@pytest.mark.parametrize("eps,k", [(0.05, 1.0), (-0.01, 1.0), (0.02, 2.0)])
def test_rotation_family(eps, k):
    phi = rotation_map(eps, k)
    r, theta = np.array([0.0, 0.4, np.sqrt(2 * k)]), np.array([0.1, 0.5, 0.9])
    np.testing.assert_allclose(phi.sigma(r, theta), eps * k)
    assert phi.calabi() == pytest.approx(0.5 * eps * k ** 2, rel=1e-12)

    generated = map_from_gen(GeneratingSpec(k, (0.5 * eps,)))
    np.testing.assert_allclose(generated.sigma(r, theta), eps * k, atol=1e-12)
    assert generated.sup_distance(phi) < 1e-10


def test_identity_map():
    phi = identity_map()
    assert phi.is_identity()
    assert sign_witness(phi) is None
    assert phi.calabi() == 0.0


def test_generated_map_is_exact_and_area_preserving(G):
    phi = map_from_gen(G)
    assert phi.area_residual() < 1e-6
    assert phi.boundary_action_residual() < 1e-10
    assert np.max(phi.loop_exactness(n_loops=6, samples=48)) < 1e-7
    assert boundary_second_derivative_check(G, phi) < 1e-10


def test_inverse_and_inverted(G, collar_points):
    phi = map_from_gen(G)
    r, theta = collar_points
    R, Theta = phi.apply(r, theta)
    back_r, back_theta = phi.inverse(R, Theta)
    np.testing.assert_allclose(back_r, r, atol=1e-10)
    np.testing.assert_allclose(back_theta, theta, atol=1e-10)
    inverse = phi.inverted()
    np.testing.assert_allclose(inverse.sigma(R, Theta), -phi.sigma(r, theta), atol=1e-10)


def test_generating_function_round_trip(G, collar_points):
    phi = map_from_gen(G)
    back = gen_from_map(phi)
    r, theta = collar_points
    np.testing.assert_allclose(back(r, theta), G.value(r, theta), atol=1e-8)
    rebuilt = map_from_gen(back, G.k, check=False)
    assert phi.sup_distance(rebuilt, n_r=8, n_theta=12) < 1e-8


def test_radial_twist_matches_generated_map():
    spec = GeneratingSpec(1.0, (0.01, -0.004))
    assert radial_twist((0.01, -0.004)).sup_distance(map_from_gen(spec)) < 1e-10


def test_non_monotone_generating_function():
    with pytest.raises(NonMonotone):
        map_from_gen(GeneratingSpec(1.0, (), (AngularTerm(50.0, 1),)))


def test_domain_overflow():
    with pytest.raises(DomainOverflow):
        gen_from_map(rotation_map(0.6))


def test_rotation_has_only_the_center_as_fixed_point():
    points = fixed_points(rotation_map(0.1))
    assert len(points) == 1
    assert points[0].r == pytest.approx(np.sqrt(2.0), abs=1e-8)
    assert points[0].value == pytest.approx(0.1)


def test_critical_points_of_monotone_radial_function():
    # G = 0.01ρ⁴ é monótona em ρ: só o centro é crítico
    points = critical_points(GeneratingSpec(1.0, (0.0, 0.0, 0.01)))
    assert len(points) == 1
    assert points[0].r == pytest.approx(np.sqrt(2.0), abs=1e-6)
    assert points[0].value == pytest.approx(0.04, abs=1e-8)


def test_radial_hamilton_jacobi_is_exact(rng):
    radial = random_spec(rng, norm=0.01, modes=0)
    assert hj_residual(radial, n_times=4) < 1e-10


def test_hamilton_jacobi(G):
    path = generated_path(G)
    assert hj_residual(G, n_times=4, path=path) < 1e-6
    assert path.symplectic_residual(0.5, n_r=4, n_theta=8) < 1e-5


def test_quasi_autonomy(G):
    quasi = quasi_autonomous_path(G, n_times=4)
    assert quasi.min_drift < 1e-9
    assert quasi.max_drift < 1e-9
    assert not quasi.degenerate
    assert quasi.spacing > 0.0
    assert quasi.argmin_stationary


def test_quasi_autonomy_of_zero_function():
    assert quasi_autonomous_path(GeneratingSpec(1.0)).degenerate


def test_local_spacing_at_boundary_and_center():
    r_nodes = np.linspace(0.1, 1.3, 7)
    boundary = DiscPoint(np.array([np.nan, np.nan]), 0.0, 0.0, 0.0)
    gaps = np.diff(np.concatenate([[0.0], r_nodes, [np.sqrt(2.0)]]))
    assert local_spacing(boundary, 1.0, r_nodes, 16) == pytest.approx(gaps.max())

    center = DiscPoint(np.array([0.0, 0.0]), np.sqrt(2.0), 0.0, 0.0)
    innermost = np.sqrt(2.0 - 1.3 ** 2)
    expected = np.hypot(innermost, 2.0 * np.pi * innermost / 16)
    assert local_spacing(center, 1.0, r_nodes, 16) == pytest.approx(expected)


def test_calabi_of_path_matches_action_integral(G):
    phi = map_from_gen(G)
    value = calabi(phi, generated_path(G), n_times=4)
    assert value.difference < 1e-6
    assert np.isnan(calabi(phi).path_value)


def test_path_of_rotations_has_rotation_calabi():
    eps, k = 0.04, 1.0
    path = hamiltonian_of_path(lambda t: rotation_map(t * eps, k), k)
    assert path.calabi(n_times=4, n_r=16, n_theta=8) == pytest.approx(0.5 * eps * k ** 2, abs=1e-8)


def test_path_action_reproduces_the_action(G, collar_points):
    r, theta = collar_points
    np.testing.assert_allclose(path_action(generated_path(G), r, theta), map_from_gen(G).sigma(r, theta), atol=1e-8)


def test_path_action_at_a_fixed_point_is_the_mean_hamiltonian(G):
    path = generated_path(G)
    witness = sign_witness(map_from_gen(G), G)
    q = witness.point
    mean = path_action(path, q.r, q.theta)
    assert float(mean) == pytest.approx(witness.sigma, abs=1e-8)
    assert np.sign(path.orbit_values(0.5, q.r, q.theta)[0]) == np.sign(witness.sigma)


@pytest.mark.parametrize("eps", [0.05, -0.05])
def test_rotation_sign_witness(eps):
    witness = sign_witness(rotation_map(eps))
    assert np.sign(witness.sigma) == np.sign(eps)
    assert witness.sigma == pytest.approx(eps)
    assert witness.displacement < 1e-8


def test_sign_witness_follows_calabi_sign(G):
    for spec in (G, -G):
        phi = map_from_gen(spec)
        witness = sign_witness(phi, spec)
        if phi.calabi() <= 0:
            assert witness.sigma < 0
        else:
            assert witness.sigma > 0


@pytest.mark.slow
def test_vector_field_reconstructs_the_map(G):
    path = generated_path(G)
    r0, theta0 = 0.7, 0.3
    R, Theta = path.phi(1.0).apply(r0, theta0)
    end = path.reconstruct(r0, theta0)
    assert end[0] == pytest.approx(float(R), abs=1e-7)
    assert end[1] == pytest.approx(float(Theta), abs=1e-7)


@pytest.mark.slow
def test_sign_witness_over_random_trials():
    rng = np.random.default_rng(2024)
    branches = {"negative": 0, "positive": 0}
    for _ in range(100):
        G = random_spec(rng, k=1.0, norm=0.01)
        for spec in (G, -G):
            phi = map_from_gen(spec)
            witness = sign_witness(phi, spec)
            if phi.calabi() <= 0:
                assert witness.sigma < 0
                branches["negative"] += 1
            else:
                assert witness.sigma > 0
                branches["positive"] += 1
    assert sum(branches.values()) == 200
    assert min(branches.values()) > 0


@pytest.mark.slow
def test_quasi_autonomy_over_random_trials():
    rng = np.random.default_rng(2025)
    for _ in range(100):
        quasi = quasi_autonomous_path(random_spec(rng, k=1.0, norm=0.01), n_times=4)
        assert quasi.min_drift < 1e-9
        assert quasi.max_drift < 1e-9
        assert quasi.argmin_stationary
