"""Estimator-style front ends.

The objects follow the scikit-learn conventions for parameters
(``get_params``/``set_params``, no work in ``__init__``) and for fitted state
(trailing-underscore attributes, ``check_is_fitted``).  The thing being
"fitted" is a potential ``V``; there is no ``y``.
"""

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .assembly import SEGMENTS, BoundaryCondition, PencilFamily, default_zero_tol
from .asymptotics import compute_boundary_form, eigenvalue_expansion_fit, verify_small_tau_morse
from .exceptions import InputError
from .grid import PotentialField, build_square_grid
from .maslov import MaslovProblem, maslov_index_crossing_form, maslov_index_spectral_flow


def check_potential(V, d=None):
    """Coerce ``V`` to a :class:`PotentialField`.

    Accepts a field, a scalar, a constant square matrix, or a callable
    ``x -> (N, N)`` (then ``d`` is needed to probe ``N``).
    """
    if isinstance(V, PotentialField):
        return V
    if isinstance(V, numbers.Real):
        return PotentialField.constant([[float(V)]])
    if callable(V):
        if d is None:
            raise InputError("a callable potential needs the spatial dimension d")
        N = np.atleast_2d(np.asarray(V(np.zeros(d)), dtype=float)).shape[0]
        return PotentialField.pointwise(V, N)
    arr = np.atleast_2d(np.asarray(V, dtype=float))
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InputError(f"constant potential must be a square matrix, got shape {arr.shape}")
    return PotentialField.constant(arr)


def check_boundary_condition(bc):
    """Coerce ``"dirichlet"``, ``"neumann"``, ``("robin", theta)`` or a BoundaryCondition."""
    if isinstance(bc, BoundaryCondition):
        return bc
    if bc == "dirichlet":
        return BoundaryCondition.dirichlet()
    if bc == "neumann":
        return BoundaryCondition.neumann()
    if isinstance(bc, (tuple, list)) and len(bc) == 2 and bc[0] == "robin":
        return BoundaryCondition.robin(bc[1])
    raise InputError(f"unrecognized boundary condition {bc!r}")


class MorseMaslovIndex(BaseEstimator):
    """Morse index of ``L_G`` and Maslov indices of the trace path for a potential.

    Parameters
    ----------
    d : {1, 2}, default=2
    n : int, default=17
        Odd number of grid nodes per side.
    bc : str, tuple or BoundaryCondition, default="dirichlet"
    tau : float, default=0.1
    Lambda : float or "auto", default="auto"
    n_samples : int, default=200
        Samples per segment for both Maslov methods.
    methods : tuple of str, default=("crossing-form", "spectral-flow")

    Attributes
    ----------
    morse_index_ : int
        ``Mor(L_G)``.
    maslov_ : dict
        ``{method: {segment: index}}``.
    loop_total_ : dict
        ``{method: total over Gamma}``.
    crossings_ : list of CrossingRecord
    correction_ : int or None
        ``Mor(-B) + Mor(Q0 V(0) Q0)`` for Neumann-based conditions.
    predicted_morse_ : int
        Index predicted from the Maslov data.
    Lambda_ : float
    """

    def __init__(self, d=2, n=17, bc="dirichlet", tau=0.1, Lambda="auto", n_samples=200,
                 methods=("crossing-form", "spectral-flow")):
        self.d = d
        self.n = n
        self.bc = bc
        self.tau = tau
        self.Lambda = Lambda
        self.n_samples = n_samples
        self.methods = methods

    def fit(self, X, y=None):
        """Compute all indices for the potential ``X``."""
        grid = build_square_grid(self.d, self.n)
        field = check_potential(X, self.d)
        bc = check_boundary_condition(self.bc)
        problem = MaslovProblem(grid, field, bc, self.tau, self.Lambda)
        mu = problem.family.eigenvalues(0.0, 1.0)
        self.morse_index_ = int(np.sum(mu < -default_zero_tol(mu)))
        self.maslov_, self.loop_total_ = {}, {}
        self.crossings_ = []
        for method in self.methods:
            per = {}
            for seg in SEGMENTS:
                if method == "crossing-form":
                    r = maslov_index_crossing_form(problem, seg, self.n_samples)
                    self.crossings_.extend(r.segments[seg].crossings)
                elif method == "spectral-flow":
                    r = maslov_index_spectral_flow(problem, seg, self.n_samples)
                else:
                    raise InputError(f"unknown method {method!r}")
                per[seg] = r.index(seg)
            self.maslov_[method] = per
            self.loop_total_[method] = int(sum(per.values()))
        self.correction_ = None
        mas2 = self.maslov_[self.methods[0]]["Sigma2"]
        if bc.is_neumann_based:
            self.correction_ = compute_boundary_form(bc, grid, field).predicted_morse
            self.predicted_morse_ = -mas2 + self.correction_
        else:
            self.predicted_morse_ = -mas2
        self.Lambda_ = problem.Lambda
        self.N_ = field.N
        return self

    @property
    def theorem_holds_(self):
        check_is_fitted(self, "morse_index_")
        return self.morse_index_ == self.predicted_morse_


class SmallTauExpansion(BaseEstimator):
    """Small-tau expansion of the eigenvalues of ``L_{0,G}(tau)`` for a Neumann-based condition.

    Parameters
    ----------
    d, n : int
    bc : str, tuple or BoundaryCondition, default="neumann"
    tau_grid : sequence of float or None
        Geometric grid with ratio 2 (default ``2**-4 ... 2**-9``).

    Attributes
    ----------
    slopes_, curvatures_ : ndarray
        Extrapolated per-branch coefficients.
    expected_slopes_, expected_curvatures_ : ndarray
    report_ : dict
        Full fit report.
    morse_report_ : dict
        Small-tau Morse decomposition check on ``tau_grid``.
    """

    def __init__(self, d=2, n=17, bc="neumann", tau_grid=None):
        self.d = d
        self.n = n
        self.bc = bc
        self.tau_grid = tau_grid

    def fit(self, X, y=None):
        grid = build_square_grid(self.d, self.n)
        field = check_potential(X, self.d)
        bc = check_boundary_condition(self.bc)
        rep = eigenvalue_expansion_fit(grid, field, bc, self.tau_grid)
        self.report_ = rep
        self.slopes_ = np.asarray(rep["slopes"])
        self.curvatures_ = np.asarray(rep["curvatures"])
        self.expected_slopes_ = np.asarray(rep["expected_slopes"])
        self.expected_curvatures_ = np.asarray(rep["expected_curvatures"])
        self.morse_report_ = verify_small_tau_morse(grid, field, bc, rep["tau"])
        return self

    def predict(self, tau):
        """Two-term approximation of the near-zero branches (sorted by slope)."""
        check_is_fitted(self, "slopes_")
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        return tau[:, None] * self.slopes_[None, :] + tau[:, None] ** 2 * self.curvatures_[None, :]


def pencil_family(d, n, V, bc):
    """Convenience: a :class:`PencilFamily` from loose inputs."""
    return PencilFamily(build_square_grid(d, n), check_potential(V, d),
                        check_boundary_condition(bc))
