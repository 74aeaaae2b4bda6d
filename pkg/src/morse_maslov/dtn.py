"""Discrete Dirichlet-to-Neumann and Neumann-to-Dirichlet maps and the trace path.

Both maps are built from the free operator ``A = K + M_vol V_s`` (no boundary
condition).  With the weak Neumann trace ``M_b gamma_N u = (A u)|_boundary``:

* DtN: ``N f = -gamma_N u`` where ``u`` solves the interior rows with
  ``gamma_D u = f``, i.e. ``N = -M_b^{-1} S`` with the Schur complement
  ``S = A_BB - A_BI A_II^{-1} A_IB``;
* NtD: ``M g = gamma_D u`` where ``A u = gamma_D^T M_b g``, i.e.
  ``M = (A^{-1})_BB M_b``.

The trace path is ``Upsilon(s) = {(gamma_D u, t^{-1} gamma_N u)}``, the graph of
``N_s = -N / t`` or equivalently the inverse graph of ``t M``.
"""

import csv
from collections import OrderedDict
from dataclasses import dataclass, field
import os

import numpy as np
import scipy.linalg

from ._validation import relative_asymmetry
from .exceptions import BothSpectraHit, DirichletSpectrumHit, NeumannSpectrumHit
from .symplectic import LagrangianFrame, SymplecticSpace, build_graph_lagrangian

SINGULAR_TOL = 1e-10
PREFER_DTN_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class DtNMap:
    """A boundary map at one path point.

    Attributes
    ----------
    matrix : ndarray, shape (m, m)
    kind : {"DtN", "NtD"}
    s, lam, t : float
    conditioning : float
        Smallest over largest eigenvalue magnitude of the inverted block.
    sigma_min : float
        Smallest eigenvalue magnitude of the inverted block (mass-scaled).
    """

    matrix: np.ndarray = field(repr=False)
    kind: str
    s: float
    lam: float
    t: float
    conditioning: float
    sigma_min: float
    boundary_mass: np.ndarray = field(repr=False)

    @property
    def sym_defect(self):
        return relative_asymmetry(self.matrix, self.boundary_mass)

    def rescaled(self):
        """``N_s = -N / t`` for a DtN map, ``t M`` (the inverse-graph generator) for NtD."""
        if self.kind == "DtN":
            return -self.matrix / self.t
        return self.t * self.matrix


class TraceMaps:
    """DtN/NtD factory for one :class:`~morse_maslov.assembly.PencilFamily`.

    As in the pencil family, ``lambda`` enters as a mass shift, so one
    eigendecomposition per ``t`` of the interior block and of the full free
    operator serves the whole horizontal line.
    """

    def __init__(self, family, cache_size=48):
        self.family = family
        sm = family.sm
        self.sm = sm
        self.space = SymplecticSpace(sm.m, sm.boundary_mass)
        self._I, self._B = sm.interior_dofs, sm.boundary_dofs
        self._K_BI = sm.K[np.ix_(self._B, self._I)]
        self._cache = {"interior": OrderedDict(), "free": OrderedDict()}
        self._cache_size = cache_size

    def _decomp(self, kind, t):
        key = round(float(t), 13)
        store = self._cache[kind]
        hit = store.get(key)
        if hit is not None:
            store.move_to_end(key)
            return hit
        A = self.family.free_operator(0.0, t)
        mass = self.sm.mass
        if kind == "interior":
            A = A[np.ix_(self._I, self._I)]
            mass = mass[self._I]
        r = 1.0 / np.sqrt(mass)
        At = r[:, None] * A * r[None, :]
        mu, Q = scipy.linalg.eigh(0.5 * (At + At.T), check_finite=False)
        X = r[:, None] * Q
        if kind == "interior":
            hit = (mu, self._K_BI @ X)
        else:
            hit = (mu, X[self._B])
        store[key] = hit
        while len(store) > self._cache_size:
            store.popitem(last=False)
        return hit

    @staticmethod
    def _condition(mu):
        a = np.abs(mu)
        return float(a.min() / a.max()), float(a.min()), int(np.argmin(a))

    def dtn(self, lam, t, s=None, check=True):
        """Dirichlet-to-Neumann map ``N`` at ``(lambda, t)``."""
        mu0, C = self._decomp("interior", t)
        mu = mu0 - lam * t * t
        cond, smin, j = self._condition(mu)
        if check and cond < SINGULAR_TOL:
            raise DirichletSpectrumHit(float(mu[j]), s)
        A_BB = self.family.free_operator(lam, t)[np.ix_(self._B, self._B)]
        with np.errstate(divide="ignore", invalid="ignore"):
            # only reachable unchecked; callers inspect ``conditioning`` first
            S = A_BB - (C / mu) @ C.T
        wb = self.sm.boundary_mass
        return DtNMap(-S / wb[:, None], "DtN", s, lam, t, cond, smin, wb)

    def ntd(self, lam, t, s=None, check=True):
        """Neumann-to-Dirichlet map ``M`` at ``(lambda, t)``."""
        nu0, R = self._decomp("free", t)
        nu = nu0 - lam * t * t
        cond, smin, j = self._condition(nu)
        if check and cond < SINGULAR_TOL:
            raise NeumannSpectrumHit(float(nu[j]), s)
        wb = self.sm.boundary_mass
        with np.errstate(divide="ignore", invalid="ignore"):
            Minv_BB = (R / nu) @ R.T
        return DtNMap(Minv_BB * wb[None, :], "NtD", s, lam, t, cond, smin, wb)

    def frame(self, lam, t, s=None, prefer=None):
        """Lagrangian frame of ``Upsilon`` at ``(lambda, t)``.

        The DtN graph is used when its conditioning is at least
        ``PREFER_DTN_TOL``; otherwise the better conditioned of the two maps.

        Returns
        -------
        frame : LagrangianFrame
        used : DtNMap
        """
        if prefer in ("DtN", "NtD"):
            m = self.dtn(lam, t, s) if prefer == "DtN" else self.ntd(lam, t, s)
            return self._frame_from(m), m
        d = self.dtn(lam, t, s, check=False)
        if d.conditioning >= PREFER_DTN_TOL:
            return self._frame_from(d), d
        n = self.ntd(lam, t, s, check=False)
        best = d if d.conditioning >= n.conditioning else n
        if best.conditioning < SINGULAR_TOL:
            raise BothSpectraHit(
                f"0 is both a Dirichlet and a Neumann eigenvalue at s={s} "
                f"(conditioning {d.conditioning:.2e} / {n.conditioning:.2e}); perturb s"
            )
        return self._frame_from(best), best

    def solution_frame(self, lam, t):
        """Frame of ``Upsilon`` straight from the discrete solution space.

        ``K_s`` is the null space of the interior rows of the free operator;
        each solution contributes ``(gamma_D u, t^{-1} gamma_N u)``.  This works
        where neither map exists (0 both a Dirichlet and a Neumann eigenvalue).
        """
        A = self.family.free_operator(lam, t)
        rows = A[self._I]
        _, sv, Vt = np.linalg.svd(rows)
        Z = Vt[rows.shape[0]:].T
        if Z.shape[1] != self.sm.m:
            raise BothSpectraHit(f"interior rows are rank deficient at lambda={lam}, t={t}")
        gD = Z[self._B]
        gN = (A[self._B] @ Z) / self.sm.boundary_mass[:, None]
        F = LagrangianFrame.from_vectors(self.space, np.vstack([gD, gN / t]), "explicit")
        return F

    def _frame_from(self, m):
        mode = "graph" if m.kind == "DtN" else "inverse_graph"
        return build_graph_lagrangian(m.rescaled(), mode, self.space)


def _maps(grid, field, path, family=None, bc=None):
    if family is None:
        from .assembly import BoundaryCondition, PencilFamily

        family = PencilFamily(grid, field, bc or BoundaryCondition.neumann())
    return TraceMaps(family)


def dirichlet_to_neumann(grid, field, path, s, family=None):
    """DtN map ``N_{L_s}`` at path parameter ``s``."""
    lam, t, _ = path.evaluate(s)
    return _maps(grid, field, path, family).dtn(lam, t, s)


def neumann_to_dirichlet(grid, field, path, s, family=None):
    """NtD map ``M_{L_s}`` at path parameter ``s``."""
    lam, t, _ = path.evaluate(s)
    return _maps(grid, field, path, family).ntd(lam, t, s)


def upsilon_frame(grid, field, path, s, family=None):
    """Frame of ``Upsilon(s)`` (the better conditioned of the two constructions)."""
    lam, t, _ = path.evaluate(s)
    return _maps(grid, field, path, family).frame(lam, t, s)[0]


def graph_projection(Ns, space):
    """Closed-form orthogonal projector onto ``Gr(N_s)`` in normalized coordinates.

    With ``Nt = D N_s D^{-1}`` and ``R = (I + Nt^2)^{-1}`` the blocks are
    ``[[R, R Nt], [Nt R, Nt^2 R]]``.
    """
    sw = space.sqrt_weights
    Nt = sw[:, None] * Ns / sw[None, :]
    Nt = 0.5 * (Nt + Nt.T)
    m = Nt.shape[0]
    R = np.linalg.inv(np.eye(m) + Nt @ Nt)
    return np.block([[R, R @ Nt], [Nt @ R, Nt @ Nt @ R]])


def dump_dtn_trace(maps, path):
    """Write ``s, lambda, t, sigma_min_interior, sym_defect`` rows for DtN maps to CSV."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "lambda", "t", "sigma_min_interior", "sym_defect"])
        for m in maps:
            w.writerow(["" if m.s is None else repr(float(m.s)), repr(float(m.lam)), repr(float(m.t)),
                        repr(m.sigma_min), repr(m.sym_defect)])
    os.replace(tmp, path)
