import numpy as np
import pytest

from morse_maslov.assembly import BoundaryCondition, GammaPath, PencilFamily
from morse_maslov.dtn import (
    TraceMaps,
    dirichlet_to_neumann,
    dump_dtn_trace,
    graph_projection,
    upsilon_frame,
)
from morse_maslov.exceptions import BothSpectraHit, DirichletSpectrumHit
from morse_maslov.grid import PotentialField, build_square_grid
from morse_maslov.symplectic import orth_projection, principal_angles


@pytest.fixture(scope="module")
def maps():
    g = build_square_grid(2, 9)
    V = PotentialField.polynomial([((0, 0), [[-4.0, 0.5], [0.5, 2.0]]), ((2, 0), np.eye(2))])
    return TraceMaps(PencilFamily(g, V, BoundaryCondition.neumann()))


def test_one_dimensional_dtn_of_laplacian():
    g = build_square_grid(1, 5)
    path = GammaPath(0.5, 1.0)
    fam = PencilFamily(g, PotentialField.constant([[0.0]]), BoundaryCondition.neumann())
    N = dirichlet_to_neumann(g, fam.field, path, 0.5, family=fam)
    # linear solutions u = a + b x have outward derivative +-b; N f = -gamma_N u
    assert np.allclose(N.matrix, [[-0.5, 0.5], [0.5, -0.5]])


@pytest.mark.parametrize("lam,t", [(0.0, 1.0), (-3.0, 0.4), (1.5, 0.8)])
def test_dtn_ntd_inverse_and_symmetric(maps, lam, t):
    d, m = maps.dtn(lam, t), maps.ntd(lam, t)
    assert d.sym_defect < 1e-12 and m.sym_defect < 1e-12
    assert np.abs(d.matrix @ (-m.matrix) - np.eye(maps.sm.m)).max() < 1e-9
    F1, F2 = maps._frame_from(d), maps._frame_from(m)
    assert principal_angles(F1, F2).max() < 1e-9
    assert F1.isotropy_defect(F1.basis) < 1e-12


def test_closed_form_projector(maps):
    d = maps.dtn(0.0, 0.6)
    Ns = d.rescaled()
    F = maps._frame_from(d)
    assert np.abs(graph_projection(Ns, maps.space) - orth_projection(F)).max() < 1e-12


def test_dirichlet_spectrum_hit_detected():
    g = build_square_grid(2, 9)
    V = PotentialField.polynomial([((2, 0), [[3.0]]), ((0, 1), [[1.0]])])
    tm = TraceMaps(PencilFamily(g, V, BoundaryCondition.neumann()))
    lam = tm._decomp("interior", 1.0)[0][0]
    with pytest.raises(DirichletSpectrumHit):
        tm.dtn(lam, 1.0)
    # the NtD map survives, so the frame still exists
    F, used = tm.frame(lam, 1.0)
    assert used.kind == "NtD" and F.is_lagrangian


def test_both_spectra_hit_and_solution_frame():
    # constant V on the box: Dirichlet eigenvalues are Neumann eigenvalues too
    g = build_square_grid(2, 9)
    tm = TraceMaps(PencilFamily(g, PotentialField.constant([[0.0]]), BoundaryCondition.neumann()))
    h = 2.0 / 8
    lam = 2 * (4 / h**2) * np.sin(np.pi * h / 4) ** 2
    with pytest.raises(BothSpectraHit):
        tm.frame(lam, 1.0)
    assert tm.solution_frame(lam, 1.0).is_lagrangian
    # away from the spectra it reproduces the DtN graph
    F_dtn, _ = tm.frame(lam + 0.37, 1.0)
    assert principal_angles(F_dtn, tm.solution_frame(lam + 0.37, 1.0)).max() < 1e-9


def test_upsilon_frame_is_lagrangian(maps):
    path = GammaPath(0.3, 4.0)
    F = upsilon_frame(maps.family.grid, maps.family.field, path, 0.2, family=maps.family)
    assert F.is_lagrangian


def test_dump_trace(tmp_path, maps):
    p = tmp_path / "dtn.csv"
    dump_dtn_trace([maps.dtn(0.0, 0.5, s=0.2), maps.dtn(0.0, 0.6)], str(p))
    lines = p.read_text().splitlines()
    assert lines[0] == "s,lambda,t,sigma_min_interior,sym_defect" and len(lines) == 3
