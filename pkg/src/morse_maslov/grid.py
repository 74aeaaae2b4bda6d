"""Uniform tensor grids on the box [-1, 1]^d and matrix-valued potentials."""

from dataclasses import dataclass, field
import numpy as np

from ._validation import check_grid_size, check_square
from .exceptions import InputError, SymmetryError


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Discretized star-shaped reference domain ``[-1, 1]^d``.

    Nodes are ordered lexicographically (``numpy.indices`` order).  All
    boundary arrays are aligned with ``boundary_nodes``.

    Attributes
    ----------
    d, n : int
        Spatial dimension and nodes per side.
    h : float
        Grid spacing ``2 / (n - 1)``.
    coords : ndarray, shape (n**d, d)
    interior_nodes, boundary_nodes : ndarray of int
    volume_weights : ndarray, shape (n**d,)
        Trapezoidal cell masses.
    boundary_weights : ndarray, shape (n_boundary,)
        Boundary quadrature masses; a box corner collects ``h/2`` from each of
        its two faces.
    normals : ndarray, shape (n_boundary, d)
        Outward unit normals (normalized face average at corners).
    nu_dot_x : ndarray, shape (n_boundary,)
        Face-averaged ``nu . x``; identically 1 on the unit box.
    faces : list of tuple
        Per boundary node, the ``(axis, side)`` pairs of the faces it lies on.
    """

    d: int
    n: int
    h: float
    coords: np.ndarray = field(repr=False)
    interior_nodes: np.ndarray = field(repr=False)
    boundary_nodes: np.ndarray = field(repr=False)
    volume_weights: np.ndarray = field(repr=False)
    boundary_weights: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)
    nu_dot_x: np.ndarray = field(repr=False)
    faces: tuple = field(repr=False)

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    @property
    def n_boundary(self):
        return self.boundary_nodes.size

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def volume(self):
        return float(self.volume_weights.sum())

    @property
    def perimeter(self):
        return float(self.boundary_weights.sum())

    def node_index(self, multi_index):
        return int(np.ravel_multi_index(tuple(multi_index), self.shape))

    def multi_index(self, node):
        return np.unravel_index(int(node), self.shape)


def build_square_grid(d, n):
    """Build the uniform grid on ``[-1, 1]^d`` with ``n`` (odd) nodes per side."""
    d, n = check_grid_size(d, n)
    h = 2.0 / (n - 1)
    x1 = np.linspace(-1.0, 1.0, n)
    x1[n // 2] = 0.0
    w1 = np.full(n, h)
    w1[[0, -1]] = h / 2

    idx = np.indices((n,) * d).reshape(d, -1).T
    coords = x1[idx]
    volume = np.prod(w1[idx], axis=1)

    on_face = (idx == 0) | (idx == n - 1)
    is_boundary = on_face.any(axis=1)
    boundary_nodes = np.flatnonzero(is_boundary)
    interior_nodes = np.flatnonzero(~is_boundary)

    b_weights, normals, ndx, faces = [], [], [], []
    for node in boundary_nodes:
        mi = idx[node]
        node_faces = []
        for axis in range(d):
            if mi[axis] == 0:
                node_faces.append((axis, -1))
            elif mi[axis] == n - 1:
                node_faces.append((axis, +1))
        # face measure: product of 1D trapezoid weights along the face directions
        weight = 0.0
        nu = np.zeros(d)
        for axis, side in node_faces:
            tangential = [a for a in range(d) if a != axis]
            weight += np.prod([w1[mi[a]] for a in tangential]) if tangential else 1.0
            nu[axis] += side
        nu /= len(node_faces)
        # nu . x averaged over the meeting faces; each face has nu . x = |x_axis| = 1
        ndx.append(np.mean([side * coords[node, axis] for axis, side in node_faces]))
        normals.append(nu / np.linalg.norm(nu))
        b_weights.append(weight)
        faces.append(tuple(node_faces))

    if d == 1:
        # a point boundary carries unit counting measure
        b_weights = [1.0 for _ in boundary_nodes]

    grid = GridDomain(
        d=d,
        n=n,
        h=h,
        coords=coords,
        interior_nodes=interior_nodes,
        boundary_nodes=boundary_nodes,
        volume_weights=volume,
        boundary_weights=np.asarray(b_weights, dtype=float),
        normals=np.asarray(normals),
        nu_dot_x=np.asarray(ndx, dtype=float),
        faces=tuple(faces),
    )
    for arr in (grid.coords, grid.interior_nodes, grid.boundary_nodes, grid.volume_weights,
                grid.boundary_weights, grid.normals, grid.nu_dot_x):
        arr.setflags(write=False)
    return grid


class PotentialField:
    """Matrix-valued potential ``x -> V(x)`` with symmetric ``N x N`` values.

    Parameters
    ----------
    func : callable
        Maps an array of points, shape ``(P, d)``, to values of shape
        ``(P, N, N)``.  Use :meth:`pointwise` to wrap a per-point function.
    N : int
        System dimension.
    radial_derivative : callable, optional
        Maps points ``(P, d)`` to ``grad V(x) . x`` with shape ``(P, N, N)``.
        Finite differences in the scaling parameter are used when omitted.
    name : str, optional
    """

    def __init__(self, func, N, radial_derivative=None, name=None):
        self.func = func
        self.N = int(N)
        self._radial = radial_derivative
        self.name = name or getattr(func, "__name__", "potential")
        self._cache = {}

    def __repr__(self):
        return f"PotentialField(name={self.name!r}, N={self.N})"

    @classmethod
    def pointwise(cls, f, N, **kwargs):
        """Wrap ``f(x) -> (N, N)`` for a single point ``x``."""

        def func(X):
            return np.stack([np.asarray(f(x), dtype=float).reshape(N, N) for x in X])

        kwargs.setdefault("name", getattr(f, "__name__", "pointwise"))
        return cls(func, N, **kwargs)

    @classmethod
    def constant(cls, C):
        C = np.atleast_2d(np.asarray(C, dtype=float))
        C = check_square(C, "constant potential")
        N = C.shape[0]

        def func(X):
            return np.broadcast_to(C, (len(X), N, N)).copy()

        def radial(X):
            return np.zeros((len(X), N, N))

        return cls(func, N, radial_derivative=radial, name="constant")

    @classmethod
    def polynomial(cls, terms, N=None):
        """Polynomial potential ``V(x) = sum_k C_k * prod_a x_a**p_{k,a}``.

        Parameters
        ----------
        terms : list of (powers, matrix)
            ``powers`` is a length-d tuple of non-negative integers.
        """
        parsed = []
        for powers, mat in terms:
            mat = np.atleast_2d(np.asarray(mat, dtype=float))
            parsed.append((np.asarray(powers, dtype=int), check_square(mat, "coefficient")))
        if not parsed:
            raise InputError("polynomial potential needs at least one term")
        N = parsed[0][1].shape[0] if N is None else N

        def func(X):
            X = np.asarray(X, dtype=float)
            out = np.zeros((len(X), N, N))
            for p, C in parsed:
                mono = np.prod(X[:, : len(p)] ** p, axis=1)
                out += mono[:, None, None] * C
            return out

        def radial(X):
            # Euler: grad(x^p) . x = |p| x^p
            X = np.asarray(X, dtype=float)
            out = np.zeros((len(X), N, N))
            for p, C in parsed:
                mono = np.prod(X[:, : len(p)] ** p, axis=1)
                out += (p.sum() * mono)[:, None, None] * C
            return out

        return cls(func, N, radial_derivative=radial, name="polynomial")

    def evaluate(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        vals = np.asarray(self.func(X), dtype=float).reshape(len(X), self.N, self.N)
        defect = np.abs(vals - np.swapaxes(vals, 1, 2)).max() if vals.size else 0.0
        scale = max(1.0, np.abs(vals).max() if vals.size else 0.0)
        if defect > 1e-12 * scale:
            raise SymmetryError("potential evaluator returned a non-symmetric matrix",
                                defect / scale)
        return 0.5 * (vals + np.swapaxes(vals, 1, 2))

    def at_origin(self, d):
        return self.evaluate(np.zeros((1, d)))[0]

    def radial_derivative(self, X):
        """``grad V(x) . x`` at the points X, i.e. ``d/dt V(t x)`` at ``t = 1``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self._radial is not None:
            return np.asarray(self._radial(X), dtype=float).reshape(len(X), self.N, self.N)
        # five-point stencil in the scaling parameter
        eps = 1e-3
        f = {k: self.evaluate((1.0 + k * eps) * X) for k in (-2, -1, 1, 2)}
        return (f[-2] - 8 * f[-1] + 8 * f[1] - f[2]) / (12 * eps)


def sample_potential(field, grid, t):
    """Per-node blocks ``V(t x_i)``, shape ``(n_nodes, N, N)`` (cached per grid and t)."""
    t = float(t)
    if not 0.0 < t <= 1.0:
        raise InputError(f"scale t must lie in (0, 1], got {t}")
    key = (id(grid), grid.d, grid.n, t)
    cached = field._cache.get(key)
    if cached is None:
        cached = field.evaluate(t * grid.coords)
        cached.setflags(write=False)
        if len(field._cache) > 4096:
            field._cache.clear()
        field._cache[key] = cached
    return cached


def sample_radial_derivative(field, grid, t):
    """Per-node blocks of ``d/dt V(t x) = grad V(t x) . x``."""
    t = float(t)
    return field.radial_derivative(t * grid.coords) / t

