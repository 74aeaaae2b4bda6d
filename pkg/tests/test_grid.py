import numpy as np
import pytest

from morse_maslov.exceptions import InputError, SymmetryError
from morse_maslov.grid import PotentialField, build_square_grid, sample_potential


@pytest.mark.parametrize("d", [1, 2])
def test_quadrature_measures(d):
    g = build_square_grid(d, 9)
    assert g.volume == pytest.approx(2.0**d)
    # d=1: two boundary points of unit measure; d=2: perimeter 8
    assert g.boundary_weights.sum() == pytest.approx(2.0 if d == 1 else 8.0)
    assert g.n_nodes == 9**d
    assert len(g.interior_nodes) + len(g.boundary_nodes) == g.n_nodes


def test_star_shaped_normals():
    g = build_square_grid(2, 7)
    assert np.allclose(g.nu_dot_x, 1.0)
    assert np.allclose(np.linalg.norm(g.normals, axis=1), 1.0)
    corner = g.node_index((0, 0))
    j = list(g.boundary_nodes).index(corner)
    assert np.allclose(g.normals[j], [-1 / np.sqrt(2), -1 / np.sqrt(2)])


def test_index_round_trip():
    g = build_square_grid(2, 5)
    for node in (0, 7, 24):
        assert g.node_index(g.multi_index(node)) == node


@pytest.mark.parametrize("n", [4, 3, 1])
def test_grid_size_validated(n):
    with pytest.raises(InputError):
        build_square_grid(2, n)


def test_dimension_validated():
    with pytest.raises(InputError):
        build_square_grid(3, 9)


def test_polynomial_potential_and_radial_derivative():
    V = PotentialField.polynomial([((0, 0), [[1.0]]), ((2, 1), [[3.0]])])
    x = np.array([[0.5, -0.4]])
    assert V.evaluate(x)[0, 0, 0] == pytest.approx(1.0 + 3.0 * 0.25 * -0.4)
    # Euler: grad V . x = (degree) * homogeneous part
    assert V.radial_derivative(x)[0, 0, 0] == pytest.approx(3 * 3.0 * 0.25 * -0.4)
    assert np.allclose(V.at_origin(2), [[1.0]])


def test_numerical_radial_derivative_matches_analytic():
    f = lambda X: np.sin(X[..., 0])[..., None, None] * np.ones((1, 1))
    V = PotentialField.pointwise(f, 1)
    x = np.array([[0.3, 0.7]])
    assert V.radial_derivative(x)[0, 0, 0] == pytest.approx(np.cos(0.3) * 0.3, rel=1e-8)


def test_asymmetric_potential_rejected():
    with pytest.raises(SymmetryError):
        PotentialField.constant([[0.0, 1.0], [0.0, 0.0]]).evaluate(np.zeros((1, 2)))


def test_sample_potential_scales_argument():
    V = PotentialField.polynomial([((1, 0), [[1.0]])])
    g = build_square_grid(2, 5)
    vals = sample_potential(V, g, 0.5)
    assert np.allclose(vals[:, 0, 0], 0.5 * g.coords[:, 0])
