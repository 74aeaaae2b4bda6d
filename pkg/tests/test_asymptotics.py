import numpy as np
import pytest

from morse_maslov.assembly import BoundaryCondition, PencilFamily
from morse_maslov.asymptotics import (
    compute_boundary_form,
    eigenvalue_expansion_fit,
    near_zero_group,
    verify_small_tau_morse,
)
from morse_maslov.exceptions import HypothesisError, InputError
from morse_maslov.grid import PotentialField, build_square_grid


@pytest.fixture(scope="module")
def grid():
    return build_square_grid(2, 9)


def test_boundary_form_scalar_robin(grid):
    data = compute_boundary_form(BoundaryCondition.robin(0.3), grid,
                                 PotentialField.constant([[1.0]]))
    assert data.B[0, 0] == pytest.approx(0.3 * 8.0)
    assert data.mor_minus_B == 1 and data.kernel_basis.shape[1] == 0


def test_boundary_form_mixed(grid):
    V = PotentialField.constant([[0.5, 0.2], [0.2, -1.0]])
    data = compute_boundary_form(BoundaryCondition.robin(np.diag([0.3, 0.0])), grid, V)
    assert np.allclose(data.Q0, np.diag([0.0, 1.0]))
    assert data.QVQ[0, 0] == pytest.approx(-1.0)
    assert data.predicted_morse == 2


def test_dirichlet_has_no_boundary_form(grid):
    with pytest.raises(InputError):
        compute_boundary_form(BoundaryCondition.dirichlet(), grid, PotentialField.constant([[1.0]]))


def test_constant_potential_exact_identity(grid):
    v = np.array([[2.0, -0.5], [-0.5, -1.0]])
    fam = PencilFamily(grid, PotentialField.constant(v), BoundaryCondition.neumann())
    group, rest = near_zero_group(fam, 0.1)
    assert np.abs(group - 0.01 * np.linalg.eigvalsh(v)).max() < 1e-13
    assert rest.min() > 1.0


def test_degenerate_qvq_rejected(grid):
    with pytest.raises(HypothesisError):
        verify_small_tau_morse(grid, PotentialField.constant([[0.0]]),
                               BoundaryCondition.neumann(), [0.1, 0.05])


def test_slope_fit_scalar_robin(grid):
    V = PotentialField.polynomial([((0, 0), [[-2.0]]), ((1, 1), [[1.0]])])
    rep = eigenvalue_expansion_fit(grid, V, BoundaryCondition.robin(-0.2))
    assert rep["slopes"][0] == pytest.approx(0.4, rel=1e-6)


def test_tau_grid_must_be_geometric(grid):
    with pytest.raises(InputError):
        eigenvalue_expansion_fit(grid, PotentialField.constant([[1.0]]),
                                 BoundaryCondition.neumann(), [0.1, 0.07, 0.01])


def test_small_tau_morse_threshold(grid):
    V = PotentialField.polynomial([((0, 0), [[-8.0]]), ((2, 0), [[3.0]])])
    rep = verify_small_tau_morse(grid, V, BoundaryCondition.robin(0.3),
                                 [2.0**-p for p in range(2, 9)])
    assert rep["pass"] and rep["expected"] == 1
    assert all(r["morse"] == 1 for r in rep["checked"])
