import numpy as np
import pytest

from morse_maslov.assembly import BoundaryCondition
from morse_maslov.exceptions import InputError
from morse_maslov.grid import PotentialField, build_square_grid
from morse_maslov.maslov import (
    MaslovProblem,
    branch_derivatives,
    crossing_form,
    detect_crossings,
    eigenphases,
    maslov_closed_loop,
    maslov_index_crossing_form,
    maslov_index_spectral_flow,
    spectral_flow,
    write_crossing_table,
    write_eigenvalue_trace,
    write_phase_trace,
)


@pytest.fixture(scope="module")
def dirichlet_problem():
    g = build_square_grid(2, 9)
    V = PotentialField.polynomial([((0, 0), [[-25.0]]), ((2, 0), [[4.0]])])
    return MaslovProblem(g, V, BoundaryCondition.dirichlet(), 0.15)


@pytest.fixture(scope="module")
def robin_problem():
    g = build_square_grid(2, 9)
    V = PotentialField.polynomial([((0, 0), [[-8.0]]), ((2, 0), [[3.0]])])
    return MaslovProblem(g, V, BoundaryCondition.robin(0.3), 0.1)


def test_spectral_flow_of_rotating_phase():
    # a single eigenvalue e^{i(pi + theta(s))} that passes -1 once, counterclockwise
    def U(s):
        return np.array([[np.exp(1j * (np.pi + s))]])

    flow, _ = spectral_flow(U, -1.0, 1.0, n_samples=10)
    assert flow == 1
    flow, _ = spectral_flow(lambda s: U(-s), -1.0, 1.0, n_samples=10)
    assert flow == -1


def test_eigenphases_of_minus_identity():
    assert np.allclose(eigenphases(-np.eye(3, dtype=complex)), 0.0)


def test_crossing_form_matches_branch_slopes(dirichlet_problem):
    recs = detect_crossings(dirichlet_problem, "Sigma2", 150)
    assert recs
    for rec in recs:
        m = np.linalg.eigvalsh(crossing_form(dirichlet_problem, rec, "mqq"))
        d = branch_derivatives(dirichlet_problem, rec) / rec.t
        assert np.allclose(m, d, rtol=1e-4)
        assert np.all(m < 0)


def test_boundary_route_agrees_in_sign(dirichlet_problem):
    for rec in detect_crossings(dirichlet_problem, "Sigma2", 150):
        hen = np.linalg.eigvalsh(crossing_form(dirichlet_problem, rec, "henF"))
        assert np.all(hen < 0)


def test_boundary_route_restrictions(robin_problem):
    rec = detect_crossings(robin_problem, "Sigma2", 150)[0]
    with pytest.raises(InputError):
        crossing_form(robin_problem, rec, "henF")
    assert np.all(np.linalg.eigvalsh(crossing_form(robin_problem, rec, "henF1")) < 0)


@pytest.mark.parametrize("method", ["crossing-form", "spectral-flow"])
def test_closed_loop_vanishes(robin_problem, method):
    total, result = maslov_closed_loop(robin_problem, method, n_samples=150)
    assert total == 0
    assert result.index("Sigma4") == 0


def test_segment_methods_agree(dirichlet_problem):
    for seg in ("Sigma1", "Sigma2", "Sigma3"):
        cf = maslov_index_crossing_form(dirichlet_problem, seg, 150)
        sf = maslov_index_spectral_flow(dirichlet_problem, seg, 150)
        assert cf.index(seg) == sf.index(seg)
        for rec in cf.crossings:
            assert rec.kernel_dim == rec.intersection_dim


def test_csv_writers(tmp_path, robin_problem):
    cf = maslov_index_crossing_form(robin_problem, "Sigma2", 100)
    sf = maslov_index_spectral_flow(robin_problem, "Sigma2", 100)
    write_crossing_table(cf.crossings, tmp_path / "c.csv")
    write_eigenvalue_trace(robin_problem, tmp_path / "mu.csv", n_samples=10)
    write_phase_trace(sf, tmp_path / "p.csv")
    head = (tmp_path / "c.csv").read_text().splitlines()[0]
    assert head == "s_star,segment,lambda,t,kernel_dim,signature,contribution"
    assert len((tmp_path / "mu.csv").read_text().splitlines()) == 41
    assert (tmp_path / "p.csv").stat().st_size > 0
