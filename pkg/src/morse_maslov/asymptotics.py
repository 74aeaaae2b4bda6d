"""Boundary matrix ``B``, the projection ``Q0`` and the small-tau eigenvalue expansion.

For a Neumann-based condition the operator ``L_{0,G}(tau)`` has ``N``
eigenvalues that emanate from the zero eigenvalue of the Neumann Laplacian
(the constants).  In the mass-orthonormal constant basis ``e_j / sqrt|Omega|``
they behave like ``tau * eig(-B) / |Omega| + tau^2 * eig(Q0 V(0) Q0) + o(tau^2)``,
the second term being relevant on ``ker B``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .assembly import PencilFamily
from .exceptions import HypothesisError, InputError

KERNEL_TOL = 1e-10
SEPARATION_RATIO = 0.1


@dataclass(frozen=True, eq=False)
class BoundaryFormData:
    """``B``, ``Q0`` and ``V(0)`` for a Neumann-based condition.

    Attributes
    ----------
    B : ndarray, shape (N, N)
    Q0 : ndarray, shape (N, N)
        Orthogonal projection onto ``ker B``.
    kernel_basis : ndarray, shape (N, r)
        Orthonormal basis of ``ker B``.
    V0 : ndarray, shape (N, N)
    QVQ : ndarray, shape (r, r)
        ``Q0 V(0) Q0`` restricted to ``ran Q0``.
    volume : float
        Discrete ``|Omega|``.
    """

    B: np.ndarray = field(repr=False)
    Q0: np.ndarray = field(repr=False)
    kernel_basis: np.ndarray = field(repr=False)
    V0: np.ndarray = field(repr=False)
    QVQ: np.ndarray = field(repr=False)
    volume: float

    @property
    def mor_minus_B(self):
        return int(np.sum(np.linalg.eigvalsh(-self.B) < -self._btol))

    @property
    def _btol(self):
        return KERNEL_TOL * max(1.0, np.linalg.norm(self.B, 2))

    @property
    def mor_QVQ(self):
        if self.QVQ.size == 0:
            return 0
        return int(np.sum(np.linalg.eigvalsh(self.QVQ) < 0))

    @property
    def v_nondegenerate(self):
        if self.QVQ.size == 0:
            return True
        ev = np.linalg.eigvalsh(self.QVQ)
        return bool(np.abs(ev).min() > KERNEL_TOL * max(1.0, np.abs(self.V0).max()))

    @property
    def predicted_morse(self):
        """``Mor(-B) + Mor(Q0 V(0) Q0)``."""
        return self.mor_minus_B + self.mor_QVQ

    def expected_slopes(self):
        return np.sort(np.linalg.eigvalsh(-self.B) / self.volume)

    def expected_curvatures(self):
        if self.QVQ.size == 0:
            return np.zeros(0)
        return np.sort(np.linalg.eigvalsh(self.QVQ))


def compute_boundary_form(bc, grid, field):
    """Build :class:`BoundaryFormData`; ``B_ij = (1 e_i)^T M_b Theta (1 e_j)``."""
    if not bc.is_neumann_based:
        raise InputError("the boundary form B is defined for Neumann-based conditions only")
    N = field.N
    Theta = bc.boundary_operator(grid, N)
    wb = np.repeat(grid.boundary_weights, N)
    E = np.kron(np.ones((grid.n_boundary, 1)), np.eye(N))
    B = E.T @ (wb[:, None] * Theta) @ E
    B = 0.5 * (B + B.T)
    ev, Q = np.linalg.eigh(B)
    ker = np.abs(ev) <= KERNEL_TOL * max(1.0, np.abs(ev).max())
    Z = Q[:, ker]
    V0 = field.at_origin(grid.d)
    QVQ = Z.T @ V0 @ Z
    return BoundaryFormData(B, Z @ Z.T, Z, V0, 0.5 * (QVQ + QVQ.T), grid.volume)


def near_zero_group(family, tau):
    """The ``N`` eigenvalues of ``L_{0,G}(tau)`` closest to 0 and the rest of the spectrum.

    The group is refined by Rayleigh-Ritz on the span of its eigenvectors,
    which removes the ``eps * ||A||`` roundoff of the full eigensolve (the
    quotient error is quadratic in the eigenvector error).
    """
    mu, X = family.eigensystem(0.0, tau)
    N = family.N
    order = np.argsort(np.abs(mu))
    Xg = X[:, order[:N]]
    A = family.operator(0.0, tau)
    H = Xg.T @ A @ Xg
    M = Xg.T @ (family.mass[:, None] * Xg) if family.mass_diagonal else Xg.T @ family.mass @ Xg
    group = scipy.linalg.eigh(0.5 * (H + H.T), 0.5 * (M + M.T), eigvals_only=True)
    return np.sort(group), np.sort(mu[order[N:]])


def verify_small_tau_morse(grid, field, bc, tau_list):
    """Check ``Mor(L_{0,G}(tau)) = Mor(-B) + Mor(Q0 V(0) Q0)`` along ``tau_list``.

    Returns
    -------
    dict
        ``expected``, ``rows`` (one per tau with ``morse``, ``group``, ``gap``,
        ``separated``), ``threshold`` (largest tau from which all smaller listed
        values are separated) and ``checked`` (the three smallest separated tau).

    Raises
    ------
    HypothesisError
        If ``Q0 V(0) Q0`` is degenerate on ``ran Q0``.
    """
    data = compute_boundary_form(bc, grid, field)
    if not data.v_nondegenerate:
        raise HypothesisError(
            "Q0 V(0) Q0 is degenerate on ran(Q0); the small-tau decomposition needs a "
            "nondegenerate form there"
        )
    family = PencilFamily(grid, field, bc)
    rows = []
    for tau in sorted(float(t) for t in tau_list):
        group, rest = near_zero_group(family, tau)
        g_max = np.abs(group).max()
        r_min = np.abs(rest).min()
        morse = int(np.sum(family.eigenvalues(0.0, tau) < 0))
        rows.append({
            "tau": tau,
            "morse": morse,
            "group": group.tolist(),
            "gap": float(r_min - g_max),
            "separated": bool(g_max < SEPARATION_RATIO * r_min),
            "group_negative": int(np.sum(group < 0)),
        })
    threshold = None
    for row in rows:
        if not row["separated"]:
            break
        threshold = row["tau"]
    sep = [r for r in rows if r["separated"]]
    checked = sep[:3]
    return {
        "expected": data.predicted_morse,
        "mor_minus_B": data.mor_minus_B,
        "mor_QVQ": data.mor_QVQ,
        "rows": rows,
        "threshold": threshold,
        "checked": checked,
        "pass": bool(len(checked) == 3 and all(r["morse"] == data.predicted_morse
                                                 for r in checked)),
    }


def _richardson(values, ratio=2.0, order_start=1):
    """Richardson table on values at ``h, h/r, h/r^2, ...``; returns the last diagonal entry."""
    T = [np.asarray(values, dtype=float)]
    p = order_start
    while T[-1].size > 1:
        prev = T[-1]
        f = ratio**p
        T.append((f * prev[1:] - prev[:-1]) / (f - 1.0))
        p += 1
    return float(T[-1][0]), T


def eigenvalue_expansion_fit(grid, field, bc, tau_grid=None):
    """Fit slopes and curvatures of the near-zero branches of ``L_{0,G}(tau)``.

    Parameters
    ----------
    tau_grid : sequence of float
        Geometric with ratio 2, e.g. ``2**-p`` for ``p = 4..9`` (the default).

    Returns
    -------
    dict
        ``tau``, ``branches`` (len(tau) x N), fitted ``slopes`` and
        ``curvatures`` per branch, the targets and relative errors.
    """
    if tau_grid is None:
        tau_grid = [2.0**-p for p in range(4, 10)]
    taus = np.sort(np.asarray(tau_grid, dtype=float))[::-1]
    ratios = taus[:-1] / taus[1:]
    if taus.size < 3 or not np.allclose(ratios, 2.0, rtol=1e-12):
        raise InputError("tau_grid must be geometric with ratio 2 and at least 3 values")
    data = compute_boundary_form(bc, grid, field)
    family = PencilFamily(grid, field, bc)
    branches = np.array([near_zero_group(family, t)[0] for t in taus])
    # branch order is by value; flag near-collisions
    gaps = np.diff(branches, axis=1)
    scale = np.abs(branches).max(axis=1, keepdims=True)
    collisions = [(int(i), int(j), int(j) + 1) for i, j in zip(*np.nonzero(gaps <= 1e-12 * scale))]
    slopes, curvs = [], []
    for j in range(family.N):
        lam = branches[:, j]
        slope, _ = _richardson(lam / taus, order_start=1)
        c = 2.0 * (lam[:-1] - 2.0 * lam[1:]) / taus[:-1] ** 2
        curv, _ = _richardson(c, order_start=1)
        slopes.append(slope)
        curvs.append(curv)
    slopes, curvs = np.array(slopes), np.array(curvs)
    exp_slopes = data.expected_slopes()
    order = np.argsort(slopes)
    slope_abs = np.abs(slopes[order] - exp_slopes)
    # relative error against nonzero targets, absolute against zero targets
    slope_err = np.where(np.abs(exp_slopes) > 0, slope_abs / np.where(exp_slopes == 0, 1, np.abs(exp_slopes)), slope_abs)
    zero_branches = [int(j) for j in order[np.isclose(exp_slopes, 0.0, atol=1e-12)]]
    exp_curv = data.expected_curvatures()
    fit_curv = np.sort(curvs[zero_branches]) if zero_branches else np.zeros(0)
    curv_err = np.abs(fit_curv - exp_curv) / np.maximum(np.abs(exp_curv), 1.0)
    return {
        "tau": taus.tolist(),
        "branches": branches.tolist(),
        "slopes": slopes.tolist(),
        "curvatures": curvs.tolist(),
        "expected_slopes": exp_slopes.tolist(),
        "slope_abs_error": slope_abs.tolist(),
        "slope_rel_error": slope_err.tolist(),
        "zero_slope_branches": zero_branches,
        "expected_curvatures": exp_curv.tolist(),
        "fitted_zero_slope_curvatures": fit_curv.tolist(),
        "curvature_rel_error": curv_err.tolist(),
        "collisions": collisions,
        "volume": data.volume,
        "B": data.B.tolist(),
    }
