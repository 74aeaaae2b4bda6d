"""Finite-dimensional symplectic boundary space.

A boundary vector is a pair ``(f, g)`` of Dirichlet and Neumann traces, each
of length ``m``, stacked as a ``2m`` vector.  The duality pairing between the
two components is the weighted sum ``<g, f>_w = sum_b w_b f_b g_b`` with the
boundary quadrature weights ``w``.

Internally all frames and projectors live in *normalized* coordinates
``(sqrt(w) f, sqrt(w) g)``.  In these coordinates the pairing is the Euclidean
dot product, the Riesz map is the identity and the complex structure is the
standard block matrix ``J = [[0, -I], [I, 0]]``.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_symmetric, check_vector
from .exceptions import InputError, SymplecticConsistencyError

ISOTROPY_TOL = 1e-10
ORTHONORMAL_TOL = 1e-12
INTERSECTION_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class SymplecticSpace:
    """Boundary space R^m x R^m with the weighted symplectic form.

    Parameters
    ----------
    half_dim : int
        Number ``m`` of scalar boundary degrees of freedom.
    pairing_weights : array_like, shape (m,)
        Strictly positive boundary quadrature masses.
    """

    half_dim: int
    pairing_weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = int(self.half_dim)
        if m <= 0:
            raise InputError(f"half_dim must be positive, got {self.half_dim}")
        w = check_vector(self.pairing_weights, m, "pairing_weights")
        if np.any(w <= 0):
            raise InputError("pairing weights must be strictly positive")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "half_dim", m)
        object.__setattr__(self, "pairing_weights", w)

    @property
    def dim(self):
        return 2 * self.half_dim

    @property
    def sqrt_weights(self):
        return np.sqrt(self.pairing_weights)

    def omega_matrix(self):
        """Matrix ``J_c`` with ``omega(x, y) = x^T J_c y`` in raw coordinates."""
        m = self.half_dim
        W = np.diag(self.pairing_weights)
        Z = np.zeros((m, m))
        return np.block([[Z, W], [-W, Z]])

    def complex_structure(self):
        """Standard complex structure in normalized coordinates."""
        m = self.half_dim
        I, Z = np.eye(m), np.zeros((m, m))
        return np.block([[Z, -I], [I, Z]])

    def normalize(self, x):
        """Map raw ``(f, g)`` coordinates (vector or column stack) to normalized ones."""
        d = np.concatenate([self.sqrt_weights, self.sqrt_weights])
        x = np.asarray(x, dtype=float)
        return d[:, None] * x if x.ndim == 2 else d * x

    def denormalize(self, x):
        d = np.concatenate([self.sqrt_weights, self.sqrt_weights])
        x = np.asarray(x, dtype=float)
        return x / d[:, None] if x.ndim == 2 else x / d


def _check_pair(x, y, space):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] != space.dim or y.shape[0] != space.dim:
        raise InputError(
            f"symplectic vectors must have leading dimension {space.dim}, "
            f"got {x.shape} and {y.shape}"
        )
    return x, y


def symplectic_form(x, y, space):
    """Evaluate ``omega(x, y) = <g_y, f_x>_w - <g_x, f_y>_w`` in raw coordinates.

    Column stacks are accepted; the result is then the matrix of pairwise
    values ``omega(x_i, y_j)``.
    """
    x, y = _check_pair(x, y, space)
    m, w = space.half_dim, space.pairing_weights
    fx, gx = x[:m], x[m:]
    fy, gy = y[:m], y[m:]
    if x.ndim == 1 and y.ndim == 1:
        return float(np.dot(fx * w, gy) - np.dot(gx * w, fy))
    fx, gx = np.atleast_2d(fx.T).T, np.atleast_2d(gx.T).T
    fy, gy = np.atleast_2d(fy.T).T, np.atleast_2d(gy.T).T
    return (w[:, None] * fx).T @ gy - (w[:, None] * gx).T @ fy


def _normalized_omega(X, Y):
    m = X.shape[0] // 2
    return X[:m].T @ Y[m:] - X[m:].T @ Y[:m]


@dataclass(frozen=True, eq=False)
class LagrangianFrame:
    """Orthonormal frame of an isotropic subspace, stored in normalized coordinates.

    Parameters
    ----------
    space : SymplecticSpace
    basis : ndarray, shape (2m, k)
        Columns orthonormal in the Euclidean (normalized) metric.
    tag : {"graph-of-operator", "inverse-graph", "explicit"}
    """

    space: SymplecticSpace
    basis: np.ndarray = field(repr=False)
    tag: str = "explicit"

    def __post_init__(self):
        B = np.asarray(self.basis, dtype=float)
        if B.ndim != 2 or B.shape[0] != self.space.dim:
            raise InputError(f"frame basis must be ({self.space.dim}, k), got {B.shape}")
        if self.tag not in ("graph-of-operator", "inverse-graph", "explicit"):
            raise InputError(f"unknown frame tag {self.tag!r}")
        k = B.shape[1]
        ortho = np.abs(B.T @ B - np.eye(k)).max() if k else 0.0
        if ortho > ORTHONORMAL_TOL * max(1, k):
            raise SymplecticConsistencyError(f"frame columns not orthonormal ({ortho:.2e})")
        iso = self.isotropy_defect(B)
        if iso > ISOTROPY_TOL:
            raise SymplecticConsistencyError(f"frame is not isotropic ({iso:.2e})")
        B = B.copy()
        B.setflags(write=False)
        object.__setattr__(self, "basis", B)

    @staticmethod
    def isotropy_defect(B):
        if B.shape[1] == 0:
            return 0.0
        return float(np.abs(_normalized_omega(B, B)).max())

    @classmethod
    def from_vectors(cls, space, vectors, tag="explicit", normalized=False):
        """Orthonormalize a spanning set given in raw (or normalized) coordinates."""
        X = np.asarray(vectors, dtype=float)
        if not normalized:
            X = space.normalize(X)
        U, sv, _ = np.linalg.svd(X, full_matrices=False)
        rank = int(np.sum(sv > sv.max() * 1e-12)) if sv.size else 0
        return cls(space, U[:, :rank], tag)

    @property
    def k(self):
        return self.basis.shape[1]

    @property
    def is_lagrangian(self):
        return self.k == self.space.half_dim

    @property
    def raw_basis(self):
        """Basis in raw coordinates (orthonormal in the w-weighted metric)."""
        return self.space.denormalize(self.basis)


def _graph_basis(At):
    """Exactly orthonormal, exactly isotropic basis of {(f, At f)} for symmetric At."""
    lam, U = np.linalg.eigh(At)
    scale = 1.0 / np.sqrt(1.0 + lam**2)
    return np.vstack([U * scale, U * (lam * scale)])


def build_graph_lagrangian(A, mode, space, tol=1e-8):
    """Lagrangian frame of the graph ``{(f, A f)}`` or inverse graph ``{(A g, g)}``.

    Parameters
    ----------
    A : ndarray, shape (m, m)
        Boundary operator; ``diag(w) @ A`` must be symmetric.
    mode : {"graph", "inverse_graph"}
    space : SymplecticSpace
    tol : float
        Relative symmetry tolerance.
    """
    w = space.pairing_weights
    A = check_symmetric(A, "boundary operator", weights=w, tol=tol)
    if A.shape[0] != space.half_dim:
        raise InputError(f"operator must be {space.half_dim}x{space.half_dim}")
    sw = space.sqrt_weights
    At = sw[:, None] * A / sw[None, :]
    At = 0.5 * (At + At.T)
    B = _graph_basis(At)
    if mode == "graph":
        return LagrangianFrame(space, B, "graph-of-operator")
    if mode == "inverse_graph":
        m = space.half_dim
        return LagrangianFrame(space, np.vstack([B[m:], B[:m]]), "inverse-graph")
    raise InputError(f"mode must be 'graph' or 'inverse_graph', got {mode!r}")


def neumann_subspace(space):
    """H_N = {(f, 0)}."""
    return build_graph_lagrangian(np.zeros((space.half_dim,) * 2), "graph", space)


def dirichlet_subspace(space):
    """H_D = {(0, g)}."""
    return build_graph_lagrangian(np.zeros((space.half_dim,) * 2), "inverse_graph", space)


def _check_same_space(F1, F2):
    if F1.space.dim != F2.space.dim or not np.array_equal(
        F1.space.pairing_weights, F2.space.pairing_weights
    ):
        raise InputError("frames live in different symplectic spaces")


def principal_cosines(F1, F2):
    """Cosines of the principal angles between span(F1) and span(F2), descending."""
    _check_same_space(F1, F2)
    return np.linalg.svd(F1.basis.T @ F2.basis, compute_uv=False)


def principal_angles(F1, F2):
    """Principal angles between two equal-dimension frames, ascending.

    Computed from sines (singular values of ``(I - Pi_1) B_2``), which keeps
    full relative accuracy for tiny angles.
    """
    _check_same_space(F1, F2)
    if F1.k != F2.k:
        raise InputError("principal_angles needs frames of equal dimension")
    R = F2.basis - F1.basis @ (F1.basis.T @ F2.basis)
    sines = np.linalg.svd(R, compute_uv=False)
    return np.sort(np.arcsin(np.clip(sines, 0.0, 1.0)))


def intersection_dim(F1, F2, tol=INTERSECTION_TOL):
    """Dimension and normalized-coordinate basis of ``span(F1) ∩ span(F2)``.

    A principal-angle cosine ``>= 1 - tol`` counts as an intersection direction.
    """
    _check_same_space(F1, F2)
    U, sv, _ = np.linalg.svd(F1.basis.T @ F2.basis)
    k = int(np.sum(sv >= 1.0 - tol))
    return k, F1.basis @ U[:, :k]


def orth_projection(F, coordinates="normalized"):
    """Orthogonal projector onto span(F).

    In normalized coordinates this is ``B B^T``; with ``coordinates="raw"`` the
    same projector is expressed in raw coordinates, where it is self-adjoint in
    the w-weighted metric.
    """
    P = F.basis @ F.basis.T
    if coordinates == "normalized":
        return P
    if coordinates == "raw":
        d = np.concatenate([F.space.sqrt_weights] * 2)
        return P * (d[None, :] / d[:, None])
    raise InputError(f"unknown coordinates {coordinates!r}")


def souriau_unitary(F, G_ref, tol=1e-9):
    """Complex m x m unitary ``W = (I - 2 Pi_F)(2 Pi_G - I)``.

    The real 2m x 2m operator commutes with the complex structure for any pair of
    Lagrangian frames; it is folded into a complex matrix via
    ``(f, g) -> f + i g``.  Eigenvalue -1 multiplicity equals
    ``intersection_dim(F, G_ref)``.
    """
    _check_same_space(F, G_ref)
    if not (F.is_lagrangian and G_ref.is_lagrangian):
        raise SymplecticConsistencyError("souriau_unitary needs two Lagrangian frames")
    m = F.space.half_dim
    I = np.eye(2 * m)
    W = (I - 2.0 * orth_projection(F)) @ (2.0 * orth_projection(G_ref) - I)
    J = F.space.complex_structure()
    comm = np.abs(W @ J - J @ W).max()
    if comm > tol:
        raise SymplecticConsistencyError(f"W does not commute with J ({comm:.2e})")
    U = W[:m, :m] + 1j * W[m:, :m]
    unit = np.abs(U.conj().T @ U - np.eye(m)).max()
    if unit > tol:
        raise SymplecticConsistencyError(f"W is not unitary ({unit:.2e})")
    return U
