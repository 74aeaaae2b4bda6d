import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from morse_maslov.exceptions import InputError, SymmetryError, SymplecticConsistencyError
from morse_maslov.maslov import PHASE_TOL, eigenphases
from morse_maslov.symplectic import (
    LagrangianFrame,
    SymplecticSpace,
    build_graph_lagrangian,
    dirichlet_subspace,
    intersection_dim,
    neumann_subspace,
    orth_projection,
    principal_angles,
    souriau_unitary,
    symplectic_form,
)


def _space(m, rng):
    return SymplecticSpace(m, rng.uniform(0.5, 2.0, m))


def _sym_in(space, rng, rank=None):
    """Random operator A with diag(w) A symmetric, optionally of given rank."""
    m = space.half_dim
    X = rng.standard_normal((m, m if rank is None else rank))
    S = X @ X.T if rank is not None else X + X.T
    return S / space.pairing_weights[:, None]


def test_form_is_antisymmetric():
    rng = np.random.default_rng(0)
    sp = _space(5, rng)
    x, y = rng.standard_normal(10), rng.standard_normal(10)
    assert symplectic_form(x, y, sp) == pytest.approx(-symplectic_form(y, x, sp))
    assert symplectic_form(x, x, sp) == pytest.approx(0.0, abs=1e-14)


def test_space_rejects_bad_weights():
    with pytest.raises(InputError):
        SymplecticSpace(3, [1.0, 0.0, 1.0])
    with pytest.raises(InputError):
        SymplecticSpace(0, [])


def test_graph_frame_is_lagrangian():
    rng = np.random.default_rng(1)
    sp = _space(6, rng)
    F = build_graph_lagrangian(_sym_in(sp, rng), "graph", sp)
    assert F.is_lagrangian
    assert F.isotropy_defect(F.basis) < 1e-13
    P = orth_projection(F)
    assert np.allclose(P @ P, P, atol=1e-12)


def test_graph_rejects_nonsymmetric_operator():
    rng = np.random.default_rng(2)
    sp = _space(4, rng)
    with pytest.raises(SymmetryError):
        build_graph_lagrangian(rng.standard_normal((4, 4)), "graph", sp)


def test_non_isotropic_frame_rejected():
    sp = SymplecticSpace(1, [1.0])
    with pytest.raises(SymplecticConsistencyError):
        LagrangianFrame.from_vectors(sp, np.eye(2))


def test_reference_subspaces_are_transversal():
    sp = SymplecticSpace(3, [1.0, 2.0, 0.5])
    k, _ = intersection_dim(neumann_subspace(sp), dirichlet_subspace(sp))
    assert k == 0
    assert intersection_dim(neumann_subspace(sp), neumann_subspace(sp))[0] == 3


def test_graph_and_inverse_graph_coincide():
    rng = np.random.default_rng(3)
    sp = _space(5, rng)
    A = _sym_in(sp, rng)
    while np.abs(np.linalg.eigvals(A)).min() < 1e-2:
        A = _sym_in(sp, rng)
    F1 = build_graph_lagrangian(A, "graph", sp)
    F2 = build_graph_lagrangian(np.linalg.inv(A), "inverse_graph", sp)
    assert principal_angles(F1, F2).max() < 1e-12


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 6), data=st.data())
def test_souriau_minus_one_multiplicity_equals_intersection(seed, m, data):
    """dim ker(W + I) equals the intersection dimension for random Lagrangian pairs."""
    rng = np.random.default_rng(seed)
    sp = _space(m, rng)
    AG = _sym_in(sp, rng)
    G = build_graph_lagrangian(AG, "graph", sp)
    k = data.draw(st.integers(0, m))
    # Gr(AG + D) meets Gr(AG) exactly in ker D, which has dimension k
    D = _sym_in(sp, rng, rank=m - k) if k < m else np.zeros((m, m))
    F = build_graph_lagrangian(AG + D, "graph", sp)
    U = souriau_unitary(F, G)
    phases = eigenphases(U)
    n_minus_one = int(np.sum(np.abs(phases) <= PHASE_TOL))
    dim, _ = intersection_dim(F, G)
    assert dim == n_minus_one
    # the angle between the graphs along ran D is of order sigma(D) / (1 + |AG|^2)
    gap = np.linalg.svd(D, compute_uv=False)[:m - k].min(initial=np.inf)
    if gap > 1e-2 * (1.0 + np.linalg.norm(AG, 2) ** 2):
        assert dim == k
