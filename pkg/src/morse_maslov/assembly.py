"""Discrete operators for ``-Delta + V_s`` on the grid, boundary couplings and the path Gamma.

Degrees of freedom are ordered ``node * N + component``.  The boundary
trace ``gamma_D`` picks the boundary nodes in ``grid.boundary_nodes`` order, so
boundary coordinates are ``boundary_position * N + component``.
"""

from collections import OrderedDict
from dataclasses import dataclass, field
import numbers

import numpy as np
import scipy.linalg

from ._validation import check_positive, check_square, check_tau, relative_asymmetry
from .exceptions import InputError, PreconditionError, SymmetryError
from .grid import sample_potential, sample_radial_derivative

SEGMENTS = ("Sigma1", "Sigma2", "Sigma3", "Sigma4")
SEGMENT_RATES = {
    "Sigma1": (1.0, 0.0),
    "Sigma2": (0.0, 1.0),
    "Sigma3": (-1.0, 0.0),
    "Sigma4": (0.0, -1.0),
}
ZERO_TOL_REL = 1e-8


# ---------------------------------------------------------------- stiffness / mass


@dataclass(frozen=True, eq=False)
class StiffnessMass:
    """Natural (Neumann) stiffness form and lumped masses for an ``N``-component system.

    Attributes
    ----------
    K : ndarray, shape (n_dofs, n_dofs)
        ``phi^T K u`` is the discrete gradient pairing ``(grad phi, grad u)_h``.
    mass : ndarray, shape (n_dofs,)
        Diagonal of the volume mass ``M_vol``.
    boundary_mass : ndarray, shape (m,)
        Diagonal of ``M_b`` on boundary coordinates.
    boundary_dofs, interior_dofs : ndarray of int
        ``gamma_D u = u[boundary_dofs]``.
    """

    grid: object
    N: int
    K: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    boundary_mass: np.ndarray = field(repr=False)
    boundary_dofs: np.ndarray = field(repr=False)
    interior_dofs: np.ndarray = field(repr=False)

    @property
    def n_dofs(self):
        return self.mass.size

    @property
    def m(self):
        return self.boundary_dofs.size

    def trace(self, u):
        """Dirichlet trace ``gamma_D u`` (vector or column stack)."""
        return np.asarray(u)[self.boundary_dofs]

    def extend(self, f):
        """``gamma_D^T f``: zero extension of boundary data to all dofs."""
        f = np.asarray(f, dtype=float)
        out = np.zeros((self.n_dofs,) + f.shape[1:])
        out[self.boundary_dofs] = f
        return out

    def constant_vectors(self):
        """Columns ``e_j`` repeated on every node (the constants subspace S)."""
        return np.kron(np.ones((self.grid.n_nodes, 1)), np.eye(self.N))


def _stiffness_1d(n, h):
    D = np.zeros((n, n))
    idx = np.arange(n - 1)
    D[idx, idx] += 1.0 / h
    D[idx + 1, idx + 1] += 1.0 / h
    D[idx, idx + 1] -= 1.0 / h
    D[idx + 1, idx] -= 1.0 / h
    return D


def build_stiffness_mass(grid, N=1):
    """Assemble :class:`StiffnessMass` for ``grid`` and system dimension ``N``.

    Edge ``(i, i+1)`` along axis ``a`` carries weight ``prod_{b != a} w_b / h``
    with the 1D trapezoid weights ``w``, so the interior rows reduce to the
    5-point stencil scaled by ``h^d``.
    """
    N = int(N)
    if N < 1:
        raise InputError(f"system dimension N must be >= 1, got {N}")
    n, h, d = grid.n, grid.h, grid.d
    w1 = np.full(n, h)
    w1[[0, -1]] = h / 2
    D1, W1 = _stiffness_1d(n, h), np.diag(w1)
    if d == 1:
        K = D1
    else:
        K = np.kron(D1, W1) + np.kron(W1, D1)
    K = np.kron(K, np.eye(N)) if N > 1 else K
    mass = np.repeat(grid.volume_weights, N)
    bdofs = (grid.boundary_nodes[:, None] * N + np.arange(N)).ravel()
    idofs = (grid.interior_nodes[:, None] * N + np.arange(N)).ravel()
    bmass = np.repeat(grid.boundary_weights, N)
    for arr in (K, mass, bdofs, idofs, bmass):
        arr.setflags(write=False)
    return StiffnessMass(grid, N, K, mass, bmass, bdofs, idofs)


def block_potential(sm, blocks):
    """Dense ``M_vol * blockdiag(blocks)`` for per-node ``N x N`` blocks."""
    N, nn = sm.N, sm.grid.n_nodes
    out = np.zeros((sm.n_dofs, sm.n_dofs))
    weighted = blocks * sm.grid.volume_weights[:, None, None]
    base = np.arange(nn) * N
    for a in range(N):
        for b in range(N):
            out[base + a, base + b] = weighted[:, a, b]
    return out


# ---------------------------------------------------------------- path


@dataclass(frozen=True)
class GammaPath:
    """Counterclockwise boundary of ``[-Lambda, 0] x [tau, 1]`` in the ``(lambda, t)`` plane.

    ``s`` runs over ``[-Lambda, 2 (1 - tau) + Lambda]``; segments are half-open
    on the right except the last, so a junction belongs to the segment it starts.
    """

    tau: float
    Lambda: float

    def __post_init__(self):
        object.__setattr__(self, "tau", check_tau(self.tau))
        object.__setattr__(self, "Lambda", check_positive(self.Lambda, "Lambda"))

    @property
    def s_min(self):
        return -self.Lambda

    @property
    def s_max(self):
        return 2.0 * (1.0 - self.tau) + self.Lambda

    def segment_bounds(self, segment):
        tau, L = self.tau, self.Lambda
        bounds = {
            "Sigma1": (-L, 0.0),
            "Sigma2": (0.0, 1.0 - tau),
            "Sigma3": (1.0 - tau, 1.0 - tau + L),
            "Sigma4": (1.0 - tau + L, 2.0 * (1.0 - tau) + L),
        }
        try:
            return bounds[segment]
        except KeyError:
            raise InputError(f"unknown segment {segment!r}") from None

    def segment_of(self, s):
        s = float(s)
        if not self.s_min <= s <= self.s_max:
            raise InputError(f"s={s} outside [{self.s_min}, {self.s_max}]")
        for seg in SEGMENTS[:-1]:
            if s < self.segment_bounds(seg)[1]:
                return seg
        return "Sigma4"

    def evaluate(self, s, segment=None):
        """Return ``(lambda(s), t(s), segment_id)``."""
        s = float(s)
        seg = self.segment_of(s) if segment is None else segment
        lo, hi = self.segment_bounds(seg)
        if not lo - 1e-12 * max(1.0, abs(lo)) <= s <= hi + 1e-12 * max(1.0, abs(hi)):
            raise InputError(f"s={s} is not on segment {seg}")
        tau, L = self.tau, self.Lambda
        if seg == "Sigma1":
            return s, tau, seg
        if seg == "Sigma2":
            return 0.0, s + tau, seg
        if seg == "Sigma3":
            return -s + 1.0 - tau, 1.0, seg
        return -L, -s + 2.0 - tau + L, seg

    @staticmethod
    def rates(segment):
        """``(d lambda / ds, d t / ds)`` on a segment."""
        return SEGMENT_RATES[segment]

    def mirror(self, s):
        """Point on Sigma2 with the same ``t`` as ``s`` on Sigma4."""
        _, t, seg = self.evaluate(s)
        if seg != "Sigma4":
            raise InputError("mirror is defined for Sigma4 points")
        return t - self.tau


def gamma_path_eval(path, s):
    return path.evaluate(s)


# ---------------------------------------------------------------- boundary conditions


def _theta_blocks(spec, grid, N):
    """Per-boundary-node ``N x N`` blocks for a scalar, matrix or field spec."""
    nb = grid.n_boundary
    if isinstance(spec, numbers.Real):
        return np.broadcast_to(float(spec) * np.eye(N), (nb, N, N)).copy()
    if callable(spec):
        pts = grid.coords[grid.boundary_nodes]
        blocks = np.stack([np.atleast_2d(np.asarray(spec(x), dtype=float)) for x in pts])
        if blocks.shape != (nb, N, N):
            raise InputError(f"theta field must return {N}x{N} matrices")
        return blocks
    C = check_square(np.atleast_2d(np.asarray(spec, dtype=float)), "theta")
    if C.shape[0] != N:
        raise InputError(f"theta matrix must be {N}x{N}, got {C.shape}")
    return np.broadcast_to(C, (nb, N, N)).copy()


def _blocks_to_operator(blocks):
    nb, N, _ = blocks.shape
    T = np.zeros((nb * N, nb * N))
    for i in range(nb):
        T[i * N:(i + 1) * N, i * N:(i + 1) * N] = blocks[i]
    return T


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    """Boundary subspace ``G``: Neumann-based ``Gr(Theta)`` or Dirichlet-based ``Gr'(Theta')``.

    Parameters
    ----------
    kind : {"neumann_based", "dirichlet_based"}
    theta : float, (N, N) array, callable or None
        Local coefficient (constant per boundary node or a field ``x -> (N, N)``).
        ``None`` means zero.
    operator : (m, m) array, optional
        Full boundary operator in raw boundary coordinates; overrides ``theta``.
    label : str
    """

    kind: str
    theta: object = None
    operator: object = field(default=None, repr=False)
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("neumann_based", "dirichlet_based"):
            raise InputError(f"unknown boundary condition kind {self.kind!r}")

    @classmethod
    def dirichlet(cls):
        return cls("dirichlet_based", None, label="dirichlet")

    @classmethod
    def neumann(cls):
        return cls("neumann_based", None, label="neumann")

    @classmethod
    def robin(cls, theta):
        """``gamma_N u = t theta gamma_D u`` with scalar, matrix or field ``theta``."""
        return cls("neumann_based", theta, label="robin")

    @classmethod
    def neumann_based(cls, operator):
        return cls("neumann_based", None, operator=np.asarray(operator, dtype=float),
                   label="neumann_based")

    @classmethod
    def dirichlet_based(cls, theta_prime=None, operator=None):
        op = None if operator is None else np.asarray(operator, dtype=float)
        return cls("dirichlet_based", theta_prime, operator=op, label="dirichlet_based")

    @property
    def is_neumann_based(self):
        return self.kind == "neumann_based"

    @property
    def is_pure_dirichlet(self):
        return self.kind == "dirichlet_based" and self.operator is None and (
            self.theta is None or (isinstance(self.theta, numbers.Real) and self.theta == 0)
        )

    def boundary_operator(self, grid, N):
        """Raw ``m x m`` operator (``Theta`` or ``Theta'``), validated M_b-symmetric."""
        m = grid.n_boundary * N
        if self.operator is not None:
            T = check_square(self.operator, "boundary operator", size=m)
        elif self.theta is None:
            T = np.zeros((m, m))
        else:
            T = _blocks_to_operator(_theta_blocks(self.theta, grid, N))
        w = np.repeat(grid.boundary_weights, N)
        defect = relative_asymmetry(T, w)
        if defect > 1e-10:
            raise SymmetryError("boundary operator is not M_b-symmetric", defect)
        return T


# ---------------------------------------------------------------- pencil family


def _reduce(X, P):
    """``P^T X P`` where P is None, an index array, or a dense basis."""
    if P is None:
        return X
    if P.ndim == 1:
        return X[np.ix_(P, P)]
    return P.T @ X @ P


class PencilFamily:
    """All pencils ``A(lambda, t)`` for fixed grid, potential and boundary condition.

    ``A(lambda, t) = P^T (K + t^2 MV(t) - t C - lambda t^2 M) P`` where ``C`` is
    the Robin coupling ``gamma_D^T M_b Theta gamma_D`` and ``P`` restricts to the
    Dirichlet-based constraint space.  Since ``lambda`` enters as a multiple of
    the mass, one generalized eigendecomposition per ``t`` serves every
    ``lambda``; these are cached.

    Parameters
    ----------
    grid : GridDomain
    field : PotentialField
    bc : BoundaryCondition
    cache_size : int
        Number of eigenvector sets retained (eigenvalues are cached separately).
    """

    def __init__(self, grid, field, bc, cache_size=48):
        self.grid, self.field, self.bc = grid, field, bc
        self.N = field.N
        self.sm = build_stiffness_mass(grid, self.N)
        self.theta_operator = bc.boundary_operator(grid, self.N)
        sm = self.sm
        wb = sm.boundary_mass
        self.coupling = np.zeros((sm.n_dofs, sm.n_dofs))
        if bc.is_neumann_based:
            self.P = None
            self.coupling[np.ix_(sm.boundary_dofs, sm.boundary_dofs)] = (
                wb[:, None] * self.theta_operator
            )
        else:
            self.P, robin = self._dirichlet_reduction(self.theta_operator, wb)
            if robin is not None:
                self.coupling[np.ix_(sm.boundary_dofs, sm.boundary_dofs)] = wb[:, None] * robin
        self.robin_operator = (
            self.theta_operator if bc.is_neumann_based else getattr(self, "_robin", None)
        )
        M_full = np.diag(sm.mass)
        self.mass_diagonal = self.P is None or self.P.ndim == 1
        self.mass = sm.mass if self.P is None else (
            sm.mass[self.P] if self.P.ndim == 1 else _reduce(M_full, self.P)
        )
        self._vals = {}
        self._vecs = OrderedDict()
        self._cache_size = int(cache_size)
        self._mv = {}

    # -- Dirichlet-based reduction
    def _dirichlet_reduction(self, theta_prime, wb):
        sm = self.sm
        if not np.any(theta_prime):
            self._robin = None
            return sm.interior_dofs, None
        D = np.sqrt(wb)
        Tt = D[:, None] * theta_prime / D[None, :]
        Tt = 0.5 * (Tt + Tt.T)
        sig, Q = np.linalg.eigh(Tt)
        scale = max(1.0, np.abs(sig).max())
        if sig.max() > 1e-10 * scale:
            raise InputError(
                "Dirichlet-based condition requires a nonpositive Theta' "
                f"(largest eigenvalue {sig.max():.3e}); the indefinite case is outside "
                "the verified scope"
            )
        rng = np.abs(sig) > 1e-10 * scale
        Qr, sr = Q[:, rng], sig[rng]
        # Theta'^+ in raw coordinates: D^-1 Qr diag(1/sr) Qr^T D
        robin = (Qr / sr / D[:, None]) @ (Qr.T * D[None, :])
        self._robin = robin
        n = sm.n_dofs
        cols = [np.eye(n)[:, sm.interior_dofs]]
        Bcols = np.zeros((n, Qr.shape[1]))
        Bcols[sm.boundary_dofs] = Qr / D[:, None]
        cols.append(Bcols)
        return np.hstack(cols), robin

    @property
    def n_reduced(self):
        return self.mass.shape[0]

    def expand(self, c):
        """Map reduced coordinates to full node vectors."""
        if self.P is None:
            return np.asarray(c)
        c = np.asarray(c)
        if self.P.ndim == 1:
            out = np.zeros((self.sm.n_dofs,) + c.shape[1:])
            out[self.P] = c
            return out
        return self.P @ c

    # -- assembly
    def potential_matrix(self, t):
        key = float(t)
        mv = self._mv.get(key)
        if mv is None:
            mv = block_potential(self.sm, sample_potential(self.field, self.grid, t))
            if len(self._mv) > 8:
                self._mv.clear()
            self._mv[key] = mv
        return mv

    def free_operator(self, lam, t):
        """``K + M_vol V_s`` on all dofs with ``V_s = t^2 (V(t x) - lambda)``."""
        A = self.sm.K + t * t * self.potential_matrix(t)
        A[np.diag_indices_from(A)] -= lam * t * t * self.sm.mass
        return A

    def operator(self, lam, t):
        """Reduced pencil matrix ``A(lambda, t)``."""
        A = self.free_operator(lam, t) - t * self.coupling
        return _reduce(A, self.P)

    def free_derivative(self, lam, t, lam_dot, t_dot):
        """``d/ds (K + M_vol V_s) = M_vol dV_s/ds`` for rates ``(lam_dot, t_dot)``."""
        dV = np.zeros((self.sm.n_dofs, self.sm.n_dofs))
        if t_dot != 0.0:
            radial = block_potential(self.sm, sample_radial_derivative(self.field, self.grid, t))
            dV += t_dot * (2.0 * t * self.potential_matrix(t) + t * t * radial)
        dV[np.diag_indices_from(dV)] -= (lam_dot * t * t + 2.0 * t * t_dot * lam) * self.sm.mass
        return dV

    def derivative(self, lam, t, lam_dot, t_dot):
        """Reduced ``dA/ds``."""
        dA = self.free_derivative(lam, t, lam_dot, t_dot) - t_dot * self.coupling
        return _reduce(dA, self.P)

    # -- spectra
    def _eig(self, A, vectors):
        if self.mass_diagonal:
            r = 1.0 / np.sqrt(self.mass)
            At = r[:, None] * A * r[None, :]
            At = 0.5 * (At + At.T)
            if not vectors:
                return scipy.linalg.eigh(At, eigvals_only=True, check_finite=False)
            mu, Q = scipy.linalg.eigh(At, check_finite=False)
            return mu, r[:, None] * Q
        A = 0.5 * (A + A.T)
        if not vectors:
            return scipy.linalg.eigh(A, self.mass, eigvals_only=True, check_finite=False)
        return scipy.linalg.eigh(A, self.mass, check_finite=False)

    def _base_key(self, t):
        return round(float(t), 13)

    def eigenvalues(self, lam, t):
        """Sorted generalized eigenvalues of ``(A(lambda, t), M)``."""
        key = self._base_key(t)
        mu = self._vals.get(key)
        if mu is None:
            if key in self._vecs:
                mu = self._vecs[key][0]
            else:
                mu = self._eig(self.operator(0.0, t), vectors=False)
            if len(self._vals) > 20000:
                self._vals.clear()
            self._vals[key] = mu
        return mu - lam * t * t

    def eigensystem(self, lam, t):
        """Eigenvalues and M-orthonormal eigenvectors (reduced coordinates)."""
        key = self._base_key(t)
        hit = self._vecs.get(key)
        if hit is None:
            hit = self._eig(self.operator(0.0, t), vectors=True)
            self._vecs[key] = hit
            self._vals[key] = hit[0]
            while len(self._vecs) > self._cache_size:
                self._vecs.popitem(last=False)
        else:
            self._vecs.move_to_end(key)
        return hit[0] - lam * t * t, hit[1]


# ---------------------------------------------------------------- pencil objects


@dataclass(frozen=True, eq=False)
class SchrodingerPencil:
    """Assembled operator ``A(s)`` realizing the form of ``L_{s,G}(tau)`` at one path point."""

    family: PencilFamily = field(repr=False)
    s: float
    lam: float
    t: float
    segment: str

    @property
    def A(self):
        return self.family.operator(self.lam, self.t)

    @property
    def mass(self):
        return self.family.mass

    def eigenvalues(self):
        return self.family.eigenvalues(self.lam, self.t)

    def eigensystem(self):
        return self.family.eigensystem(self.lam, self.t)


def assemble_pencil(grid, field, bc, path, s, family=None):
    """Pencil ``A(s)`` at path parameter ``s``."""
    fam = family if family is not None else PencilFamily(grid, field, bc)
    lam, t, seg = path.evaluate(s)
    return SchrodingerPencil(fam, float(s), lam, t, seg)


def default_zero_tol(eigenvalues):
    return ZERO_TOL_REL * max(1.0, float(np.abs(eigenvalues).max()))


def morse_index(pencil, zero_tol=None):
    """Number of eigenvalues below ``-zero_tol`` and the sorted eigenvalues."""
    mu = np.sort(pencil.eigenvalues())
    tol = default_zero_tol(mu) if zero_tol is None else float(zero_tol)
    return int(np.sum(mu < -tol)), mu


def kernel_basis(pencil, zero_tol=None):
    """M_vol-orthonormal basis (full node vectors, as columns) of the numerical kernel."""
    mu, X = pencil.eigensystem()
    tol = default_zero_tol(mu) if zero_tol is None else float(zero_tol)
    sel = np.abs(mu) <= tol
    return pencil.family.expand(X[:, sel])


def weak_neumann_trace(u, free_operator, sm, tol=1e-9):
    """Weak Neumann trace ``M_b^{-1} (A_free u)|_boundary`` of a discrete weak solution.

    Parameters
    ----------
    u : ndarray, shape (n_dofs,) or (n_dofs, k)
    free_operator : ndarray
        ``K + M_vol V_s`` on all dofs (no boundary condition).
    sm : StiffnessMass
    tol : float
        Relative tolerance on the interior residual.
    """
    u = np.asarray(u, dtype=float)
    r = free_operator @ u
    scale = np.abs(free_operator).max() * max(np.abs(u).max(), 1e-300)
    res = np.abs(r[sm.interior_dofs]).max() if sm.interior_dofs.size else 0.0
    if res > tol * scale:
        raise PreconditionError(
            f"u is not a discrete weak solution (interior residual {res / scale:.2e})"
        )
    rb = r[sm.boundary_dofs]
    return rb / (sm.boundary_mass[:, None] if rb.ndim == 2 else sm.boundary_mass)


def auto_lambda(family, tau, n_samples=64):
    """``Lambda = (|c_tau| + 1) / tau^2`` with ``c_tau`` the lowest eigenvalue sampled on Sigma2.

    Returns
    -------
    Lambda : float
    c_tau : float
    """
    tau = check_tau(tau)
    ts = np.linspace(tau, 1.0, max(2, int(n_samples)))
    c = min(float(family.eigenvalues(0.0, t)[0]) for t in ts)
    return (abs(c) + 1.0) / tau**2, c
