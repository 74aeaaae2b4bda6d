import numpy as np
import pytest

from morse_maslov.assembly import (
    SEGMENTS,
    BoundaryCondition,
    GammaPath,
    PencilFamily,
    assemble_pencil,
    auto_lambda,
    build_stiffness_mass,
    kernel_basis,
    morse_index,
    weak_neumann_trace,
)
from morse_maslov.exceptions import InputError, PreconditionError
from morse_maslov.grid import PotentialField, build_square_grid


def _box_dirichlet(n):
    h = 2.0 / (n - 1)
    k = np.arange(1, n - 1)
    e = (4 / h**2) * np.sin(k * np.pi * h / 4) ** 2
    return np.sort((e[:, None] + e[None, :]).ravel())


def test_dirichlet_spectrum_matches_separable_oracle():
    g = build_square_grid(2, 11)
    fam = PencilFamily(g, PotentialField.constant([[0.0]]), BoundaryCondition.dirichlet())
    assert np.allclose(fam.eigenvalues(0.0, 1.0), _box_dirichlet(11), rtol=0, atol=1e-10)


def test_neumann_constants_in_kernel():
    g = build_square_grid(2, 9)
    sm = build_stiffness_mass(g, 2)
    assert np.abs(sm.K @ sm.constant_vectors()).max() < 1e-12
    fam = PencilFamily(g, PotentialField.constant(np.zeros((2, 2))), BoundaryCondition.neumann())
    mu = fam.eigenvalues(0.0, 1.0)
    assert np.sum(np.abs(mu) < 1e-10) == 2


def test_lambda_is_a_mass_shift():
    g = build_square_grid(2, 9)
    V = PotentialField.polynomial([((0, 0), [[-3.0]]), ((1, 1), [[2.0]])])
    fam = PencilFamily(g, V, BoundaryCondition.robin(0.4))
    t, lam = 0.7, -2.5
    mu0 = fam.eigenvalues(0.0, t)
    assert np.allclose(fam.eigenvalues(lam, t), mu0 - lam * t * t)


def test_path_geometry():
    path = GammaPath(0.2, 5.0)
    assert path.evaluate(-5.0) == (-5.0, 0.2, "Sigma1")
    assert path.evaluate(0.0)[2] == "Sigma2"
    lam, t, seg = path.evaluate(0.8 + 2.0)
    assert (lam, t, seg) == (pytest.approx(-2.0), 1.0, "Sigma3")
    lam, t, seg = path.evaluate(path.s_max)
    assert (lam, seg) == (-5.0, "Sigma4") and t == pytest.approx(0.2)
    assert [path.segment_of(path.segment_bounds(s)[0]) for s in SEGMENTS] == list(SEGMENTS)
    with pytest.raises(InputError):
        path.evaluate(path.s_max + 1)


@pytest.mark.parametrize("tau", [0.0, 1.5, -0.1])
def test_tau_validated(tau):
    with pytest.raises(InputError):
        GammaPath(tau, 1.0)


def test_morse_index_and_kernel():
    g = build_square_grid(2, 9)
    fam = PencilFamily(g, PotentialField.constant([[-30.0]]), BoundaryCondition.dirichlet())
    path = GammaPath(0.1, 10.0)
    p = assemble_pencil(g, fam.field, fam.bc, path, 0.9, family=fam)
    mor, mu = morse_index(p)
    assert mor == int(np.sum(_box_dirichlet(9) < 30.0))
    assert kernel_basis(p).shape[1] == 0


def test_weak_neumann_trace_requires_solution():
    g = build_square_grid(2, 7)
    fam = PencilFamily(g, PotentialField.constant([[0.0]]), BoundaryCondition.neumann())
    A = fam.free_operator(0.0, 1.0)
    ones = np.ones(g.n_nodes)
    assert np.abs(weak_neumann_trace(ones, A, fam.sm)).max() < 1e-12
    with pytest.raises(PreconditionError):
        weak_neumann_trace(g.coords[:, 0] ** 2, A, fam.sm)


def test_green_identity_for_robin_operator():
    g = build_square_grid(2, 7)
    fam = PencilFamily(g, PotentialField.constant([[1.0]]), BoundaryCondition.robin(0.7))
    A = fam.operator(0.0, 0.5)
    assert np.allclose(A, A.T, atol=1e-12)


def test_indefinite_dirichlet_based_rejected():
    g = build_square_grid(2, 7)
    with pytest.raises(InputError):
        PencilFamily(g, PotentialField.constant([[1.0]]),
                     BoundaryCondition.dirichlet_based(theta_prime=1.0))


def test_auto_lambda_clears_spectrum():
    g = build_square_grid(2, 9)
    fam = PencilFamily(g, PotentialField.constant([[-20.0]]), BoundaryCondition.neumann())
    L, c = auto_lambda(fam, 0.2)
    assert c < 0
    for t in np.linspace(0.2, 1.0, 9):
        assert fam.eigenvalues(-L, t).min() > 0


def test_sigma4_mirror_shift():
    g = build_square_grid(2, 7)
    fam = PencilFamily(g, PotentialField.polynomial([((0, 0), [[-5.0]]), ((0, 2), [[2.0]])]),
                       BoundaryCondition.robin(0.5))
    path = GammaPath(0.2, 7.0)
    s = path.segment_bounds("Sigma4")[0] + 0.3
    lam, t, _ = path.evaluate(s)
    lam2, t2, _ = path.evaluate(path.mirror(s))
    assert t == pytest.approx(t2) and lam2 == 0.0
    diff = fam.operator(lam, t) - fam.operator(lam2, t2)
    assert np.allclose(diff, 7.0 * t * t * np.diag(fam.mass), atol=1e-10)


def test_solution_traces_are_isotropic():
    g = build_square_grid(2, 9)
    fam = PencilFamily(g, PotentialField.polynomial([((1, 0), [[2.0]])]), BoundaryCondition.neumann())
    A = fam.free_operator(0.3, 0.8)
    sm = fam.sm
    _, _, Vt = np.linalg.svd(A[sm.interior_dofs])
    Z = Vt[len(sm.interior_dofs):].T
    gD, gN = Z[sm.boundary_dofs], weak_neumann_trace(Z, A, sm)
    W = gN.T @ (sm.boundary_mass[:, None] * gD)
    assert np.abs(W - W.T).max() <= 1e-11 * np.abs(W).max()
