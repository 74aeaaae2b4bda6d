"""Conjugate points, crossing forms and the Maslov index of the trace path along Gamma.

Two independent routes are provided:

* crossing forms: locate the parameters where the pencil ``A(s)`` is singular,
  evaluate the crossing form on the kernel and add signatures with the
  endpoint conventions (interior ``n_+ - n_-``, initial ``-n_-``, final ``n_+``);
* spectral flow: follow the eigenphases of the unitary ``W_s`` built from
  ``Upsilon(s)`` and the reference subspace ``G`` and count passages through -1.
"""

import csv
from dataclasses import dataclass, field
import os

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .assembly import SEGMENTS, GammaPath, PencilFamily, auto_lambda, default_zero_tol
from .dtn import TraceMaps
from .grid import sample_potential
from .exceptions import (
    BothSpectraHit,
    CrossingResolutionError,
    DegenerateCrossingError,
    InputError,
    PhaseTrackingError,
)
from .symplectic import (
    INTERSECTION_TOL,
    build_graph_lagrangian,
    intersection_dim,
    souriau_unitary,
)

PHASE_TOL = 2.0 * np.arccos(1.0 - INTERSECTION_TOL)
FORM_TOL = 1e-6
MAX_PHASE_STEP = np.pi / 4


class MaslovProblem:
    """Grid, potential, boundary condition and path, with shared caches.

    Parameters
    ----------
    grid : GridDomain
    field : PotentialField
    bc : BoundaryCondition
    tau : float
        Lower scale in (0, 1).
    Lambda : float or "auto"
        Width of the rectangle; ``"auto"`` uses :func:`~morse_maslov.assembly.auto_lambda`.
    """

    def __init__(self, grid, field, bc, tau, Lambda="auto"):
        self.grid, self.field, self.bc = grid, field, bc
        self.family = PencilFamily(grid, field, bc)
        self.maps = TraceMaps(self.family)
        self.c_tau = None
        if isinstance(Lambda, str):
            if Lambda != "auto":
                raise InputError(f"Lambda must be a number or 'auto', got {Lambda!r}")
            Lambda, self.c_tau = auto_lambda(self.family, tau)
        self.path = GammaPath(tau, Lambda)
        self.space = self.maps.space
        op = self.family.theta_operator
        mode = "graph" if bc.is_neumann_based else "inverse_graph"
        self.G = build_graph_lagrangian(op, mode, self.space)

    @property
    def tau(self):
        return self.path.tau

    @property
    def Lambda(self):
        return self.path.Lambda

    def point(self, s, segment=None):
        return self.path.evaluate(s, segment)

    def eigenvalues(self, s, segment=None):
        lam, t, _ = self.point(s, segment)
        return self.family.eigenvalues(lam, t)

    def zero_tol(self, s, segment=None):
        return default_zero_tol(self.eigenvalues(s, segment))

    def frame(self, s, segment=None):
        """Frame of ``Upsilon(s)``; falls back to the solution-space construction
        where neither the DtN nor the NtD map exists."""
        lam, t, _ = self.point(s, segment)
        try:
            return self.maps.frame(lam, t, s)[0]
        except BothSpectraHit:
            return self.maps.solution_frame(lam, t)


# ---------------------------------------------------------------- records


@dataclass(eq=False)
class CrossingRecord:
    """A conjugate point on one segment.

    Attributes
    ----------
    s_star : float
    segment : str
    lam, t : float
    kernel_dim : int
        Pencil kernel dimension (``|mu| <= zero_tol``).
    position : {"interior", "initial", "final"}
    detection_route : str
    form : ndarray or None
        Crossing form on the kernel.
    intersection_dim : int or None
        ``dim Upsilon(s*) ∩ G`` from the frames.
    """

    s_star: float
    segment: str
    lam: float
    t: float
    kernel_dim: int
    position: str = "interior"
    detection_route: str = "pencil-eigenvalue"
    form: np.ndarray = field(default=None, repr=False)
    form_eigenvalues: np.ndarray = field(default=None, repr=False)
    intersection_dim: int = None
    degenerate: bool = False
    kernel: np.ndarray = field(default=None, repr=False)
    branch_derivatives: np.ndarray = field(default=None, repr=False)

    @property
    def n_plus(self):
        return int(np.sum(self.form_eigenvalues > 0)) if self.form_eigenvalues is not None else 0

    @property
    def n_minus(self):
        return int(np.sum(self.form_eigenvalues < 0)) if self.form_eigenvalues is not None else 0

    @property
    def signature(self):
        return self.n_plus - self.n_minus

    @property
    def contribution(self):
        if self.position == "initial":
            return -self.n_minus
        if self.position == "final":
            return self.n_plus
        return self.signature


@dataclass(eq=False)
class SegmentResult:
    segment: str
    index: int
    crossings: list = field(default_factory=list)
    trace: dict = field(default=None, repr=False)


@dataclass(eq=False)
class MaslovResult:
    """Per-segment Maslov indices for one method."""

    method: str
    segments: dict = field(default_factory=dict)

    @property
    def total(self):
        return int(sum(r.index for r in self.segments.values()))

    @property
    def crossings(self):
        out = []
        for seg in SEGMENTS:
            if seg in self.segments:
                out.extend(self.segments[seg].crossings)
        return out

    def index(self, segment):
        return self.segments[segment].index


# ---------------------------------------------------------------- detection


def _segment_samples(problem, segment, n_samples):
    a, b = problem.path.segment_bounds(segment)
    return np.linspace(a, b, int(n_samples) + 1)


def detect_crossings(problem, segment, n_samples=200, refine_tol=1e-10):
    """Locate conjugate points on a segment from the pencil eigenvalues.

    Sign changes of each sorted eigenvalue branch between samples are refined
    with Brent's method (a safeguarded bisection); local near-zero dips are
    probed by bounded minimization.  Roots that coincide are merged, and
    roots within tolerance of a segment end become endpoint crossings.

    Returns
    -------
    list of CrossingRecord
        Sorted by ``s_star``; forms are not yet evaluated.
    """
    a, b = problem.path.segment_bounds(segment)
    if b <= a:
        return []
    ss = _segment_samples(problem, segment, n_samples)
    E = np.array([problem.eigenvalues(s, segment) for s in ss])
    ztol = np.array([default_zero_tol(e) for e in E])

    def branch(k):
        return lambda s: problem.eigenvalues(s, segment)[k]

    roots = []  # (s, k, degenerate)
    endpoint_hits = {0: set(np.flatnonzero(np.abs(E[0]) <= ztol[0])),
                     len(ss) - 1: set(np.flatnonzero(np.abs(E[-1]) <= ztol[-1]))}
    for j in range(1, len(ss) - 1):
        for k in np.flatnonzero(np.abs(E[j]) <= ztol[j]):
            roots.append((ss[j], int(k), False))

    for j in range(len(ss) - 1):
        e0, e1 = E[j], E[j + 1]
        z0, z1 = np.abs(e0) <= ztol[j], np.abs(e1) <= ztol[j + 1]
        change = (np.sign(e0) != np.sign(e1)) & ~z0 & ~z1
        for k in np.flatnonzero(change):
            r = brentq(branch(k), ss[j], ss[j + 1], xtol=refine_tol, rtol=4 * np.finfo(float).eps)
            roots.append((r, int(k), False))

    # near-zero dips without a sign change at the samples
    for j in range(1, len(ss) - 1):
        em, e0, ep = E[j - 1], E[j], E[j + 1]
        same = (np.sign(em) == np.sign(e0)) & (np.sign(e0) == np.sign(ep))
        dip = (np.abs(e0) < np.abs(em)) & (np.abs(e0) < np.abs(ep)) & same
        var = np.abs(em - e0) + np.abs(ep - e0)
        cand = np.flatnonzero(dip & (np.abs(e0) < 0.25 * var) & (np.abs(e0) > ztol[j]))
        for k in cand:
            sg = np.sign(e0[k])
            f = branch(k)
            opt = minimize_scalar(lambda s: sg * f(s), bounds=(ss[j - 1], ss[j + 1]),
                                  method="bounded", options={"xatol": refine_tol})
            val = f(opt.x)
            tol = default_zero_tol(problem.eigenvalues(opt.x, segment))
            if abs(val) <= tol:
                roots.append((float(opt.x), int(k), True))
            elif np.sign(val) != sg:
                roots.append((brentq(f, ss[j - 1], opt.x, xtol=refine_tol), int(k), False))
                roots.append((brentq(f, opt.x, ss[j + 1], xtol=refine_tol), int(k), False))

    # cluster coincident roots
    roots.sort()
    clusters = []
    scale = max(1.0, abs(a), abs(b))
    for r in roots:
        if clusters and r[0] - clusters[-1][-1][0] <= 1e3 * refine_tol * scale:
            clusters[-1].append(r)
        else:
            clusters.append([r])

    records = []
    for idx, hits in endpoint_hits.items():
        if hits:
            records.append(_make_record(problem, segment, ss[idx],
                                        "initial" if idx == 0 else "final", hits))
    for cl in clusters:
        s_star = float(np.mean([r[0] for r in cl]))
        ks = {r[1] for r in cl}
        degenerate = any(r[2] for r in cl)
        # merge into an endpoint when the endpoint itself is already a kernel point
        pos = "interior"
        for idx, end in ((0, a), (len(ss) - 1, b)):
            lam_t = problem.eigenvalues(end, segment)
            if abs(s_star - end) <= 1e3 * refine_tol * scale or np.all(
                np.abs(lam_t[list(ks)]) <= default_zero_tol(lam_t)
            ):
                pos = "initial" if idx == 0 else "final"
        if pos != "interior":
            rec = next((r for r in records if r.position == pos), None)
            if rec is None:
                records.append(_make_record(problem, segment, a if pos == "initial" else b,
                                            pos, ks))
            continue
        rec = _make_record(problem, segment, s_star, "interior", ks)
        rec.degenerate = degenerate
        records.append(rec)
    records.sort(key=lambda r: r.s_star)
    return records


def _make_record(problem, segment, s, position, indices):
    lam, t, _ = problem.point(s, segment)
    mu, X = problem.family.eigensystem(lam, t)
    tol = default_zero_tol(mu)
    sel = set(np.flatnonzero(np.abs(mu) <= tol)) | set(int(k) for k in indices)
    sel = np.array(sorted(sel), dtype=int)
    return CrossingRecord(
        s_star=float(s), segment=segment, lam=lam, t=t, kernel_dim=int(sel.size),
        position=position, kernel=X[:, sel],
    )


# ---------------------------------------------------------------- crossing forms


_ONE_SIDED = {
    2: np.array([3.0, -4.0, 1.0]) / 2.0,
    4: np.array([25.0, -48.0, 36.0, -16.0, 3.0]) / 12.0,
}


def _boundary_gradient(grid, sm, u, order=4):
    """Gradient reconstruction at boundary nodes.

    Normal components use one-sided differences of the given order
    (``order=2``: ``(3 u_b - 4 u_{b-1} + u_{b-2}) / 2h``); tangential components
    use centered differences along the boundary.

    Returns an array of shape ``(n_boundary, d, N)``.
    """
    if order not in _ONE_SIDED:
        raise InputError(f"normal derivative order must be 2 or 4, got {order}")
    coef = _ONE_SIDED[order]
    N, n, h, d = sm.N, grid.n, grid.h, grid.d
    U = np.asarray(u).reshape((n,) * d + (N,))
    out = np.zeros((grid.n_boundary, d, N))
    for b, node in enumerate(grid.boundary_nodes):
        mi = grid.multi_index(node)
        for axis in range(d):
            i = mi[axis]

            def line(idx):
                m2 = list(mi)
                m2[axis] = idx
                return U[tuple(m2)]

            if i == 0:
                out[b, axis] = -sum(c * line(j) for j, c in enumerate(coef)) / h
            elif i == n - 1:
                out[b, axis] = sum(c * line(n - 1 - j) for j, c in enumerate(coef)) / h
            else:
                out[b, axis] = (line(i + 1) - line(i - 1)) / (2 * h)
    return out


def crossing_form(problem, record, route="mqq", normal_order=4):
    """Crossing form on the kernel at a crossing.

    Parameters
    ----------
    route : {"mqq", "henF", "henF1"}
        ``mqq`` is the general formula
        ``(1/t) <dV_s/ds u, u> - (t'/t^2) <gamma_N u, gamma_D u>`` with the weak
        Neumann trace.  ``henF`` (Dirichlet, Sigma2) and ``henF1`` (Sigma2) are
        the boundary-integral forms built from a reconstructed normal derivative.
    normal_order : {2, 4}
        Order of the one-sided normal-derivative stencil for the boundary routes.

    Returns
    -------
    ndarray, shape (k, k)
    """
    fam, sm, grid = problem.family, problem.family.sm, problem.grid
    seg, lam, t = record.segment, record.lam, record.t
    lam_dot, t_dot = GammaPath.rates(seg)
    U = fam.expand(record.kernel)
    k = U.shape[1]
    if k == 0:
        return np.zeros((0, 0))
    if route == "mqq":
        dV = fam.free_derivative(lam, t, lam_dot, t_dot)
        m = (U.T @ dV @ U) / t
        if t_dot != 0.0:
            A = fam.free_operator(lam, t)
            gN = (A @ U)[sm.boundary_dofs] / sm.boundary_mass[:, None]
            gD = U[sm.boundary_dofs]
            m -= (t_dot / t**2) * (gN.T @ (sm.boundary_mass[:, None] * gD))
        return 0.5 * (m + m.T)
    if route not in ("henF", "henF1"):
        raise InputError(f"unknown crossing-form route {route!r}")
    if seg != "Sigma2":
        raise InputError(f"route {route} applies to Sigma2 crossings only")
    if route == "henF" and not problem.bc.is_pure_dirichlet:
        raise InputError("route henF requires the Dirichlet condition")
    wb, ndx, nu = grid.boundary_weights, grid.nu_dot_x, grid.normals
    grads = [_boundary_gradient(grid, sm, U[:, i], normal_order) for i in range(k)]
    gN = [np.einsum("bd,bdn->bn", nu, gr) for gr in grads]
    if route == "henF":
        m = np.array([[-np.sum(wb * ndx * np.sum(gN[i] * gN[j], axis=1)) for j in range(k)]
                      for i in range(k)]) / t**2
        return 0.5 * (m + m.T)
    N, d = sm.N, grid.d
    x = grid.coords[grid.boundary_nodes]
    ub = [U[sm.boundary_dofs, i].reshape(-1, N) for i in range(k)]
    Vs = t * t * (sample_potential(problem.field, grid, t)[grid.boundary_nodes]
                  - lam * np.eye(N))
    m = np.zeros((k, k))
    for i in range(k):
        xg_i = np.einsum("bd,bdn->bn", x, grads[i])
        for j in range(k):
            xg_j = np.einsum("bd,bdn->bn", x, grads[j])
            integrand = (
                np.einsum("bdn,bdn->b", grads[i], grads[j]) * ndx
                - (np.sum(xg_i * gN[j], axis=1) + np.sum(xg_j * gN[i], axis=1))
                + (1 - d) * 0.5 * (np.sum(gN[i] * ub[j], axis=1) + np.sum(gN[j] * ub[i], axis=1))
                + np.einsum("bn,bnm,bm->b", ub[i], Vs, ub[j]) * ndx
            )
            m[i, j] = np.sum(wb * integrand)
    m /= t**2
    return 0.5 * (m + m.T)


def branch_derivatives(problem, record, delta=None):
    """Central-difference slopes of the eigenvalue branches through 0, sorted.

    The ``k`` eigenvalues of smallest magnitude at ``s* + delta`` and
    ``s* - delta`` are sorted and combined as
    ``(mu(s*+delta) - mu(s*-delta)) / (2 delta)`` branchwise; endpoint
    crossings use the one-sided difference inside the segment.
    """
    a, b = problem.path.segment_bounds(record.segment)
    s0, k = record.s_star, record.kernel_dim
    if delta is None:
        delta = 1e-6 * max(1.0, b - a)

    def near(s):
        mu = problem.eigenvalues(s, record.segment)
        return np.sort(mu[np.argsort(np.abs(mu))[:k]])

    mu0 = near(s0)
    fwd = bwd = None
    if s0 + delta <= b:
        fwd = (near(s0 + delta) - mu0) / delta
    if s0 - delta >= a:
        # reversing sorted order keeps branches aligned through a simple crossing
        bwd = np.sort((mu0 - near(s0 - delta)) / delta)
    if fwd is None:
        return bwd
    if bwd is None:
        return np.sort(fwd)
    return np.sort(0.5 * (np.sort(fwd) + bwd))


def _evaluate_forms(problem, records, route, check_intersection, with_derivatives):
    for rec in records:
        rec.form = crossing_form(problem, rec, route)
        ev = np.linalg.eigvalsh(rec.form) if rec.form.size else np.zeros(0)
        rec.form_eigenvalues = ev
        scale = max(1.0, np.abs(ev).max()) if ev.size else 1.0
        if ev.size and np.abs(ev).min() <= FORM_TOL * scale:
            rec.degenerate = True
        if check_intersection:
            try:
                F = problem.frame(rec.s_star, rec.segment)
                rec.intersection_dim = intersection_dim(F, problem.G)[0]
                rec.detection_route = "pencil-eigenvalue+frame-intersection"
            except BothSpectraHit:
                rec.intersection_dim = None
        if with_derivatives:
            rec.branch_derivatives = branch_derivatives(problem, rec)


def maslov_index_crossing_form(problem, segment, n_samples=200, refine_tol=1e-10,
                               route="mqq", check_intersection=True, with_derivatives=True,
                               allow_degenerate=False):
    """Maslov index of ``Upsilon`` restricted to a segment via crossing forms.

    Raises
    ------
    DegenerateCrossingError
        If any crossing form is singular (unless ``allow_degenerate``).
    """
    records = detect_crossings(problem, segment, n_samples, refine_tol)
    _evaluate_forms(problem, records, route, check_intersection, with_derivatives)
    for rec in records:
        if rec.degenerate and not allow_degenerate:
            raise DegenerateCrossingError(rec.s_star, rec.form_eigenvalues)
    index = int(sum(r.contribution for r in records))
    return MaslovResult("crossing-form", {segment: SegmentResult(segment, index, records)})


# ---------------------------------------------------------------- spectral flow


def eigenphases(W):
    """Phases ``arg(-w)`` of the eigenvalues of ``W``; -1 maps to phase 0."""
    return np.angle(-np.linalg.eigvals(W))


def _circ(a, b):
    return np.angle(np.exp(1j * (b - a)))


def _match(p0, p1):
    D = np.abs(_circ(p0[:, None], p1[None, :]))
    r, c = linear_sum_assignment(D)
    order = np.empty_like(c)
    order[r] = c
    step = _circ(p0, p1[order])
    return order, step


def _choose_eps(p0, step, phase_tol):
    """Largest-gap ``eps`` such that no arc passes through ``+eps`` or ``-eps``."""
    lo_lim, hi_lim = 4.0 * phase_tol, np.pi / 2
    p1 = p0 + step
    lo, hi = np.minimum(p0, p1), np.maximum(p0, p1)
    margin = 0.25 * phase_tol
    blocks = []
    for a, b in zip(lo, hi):
        blocks.append((a - margin, b + margin))
        blocks.append((-b - margin, -a + margin))
    blocks = sorted((max(a, lo_lim), min(b, hi_lim)) for a, b in blocks if b > lo_lim and a < hi_lim)
    best, best_w, cur = None, 0.0, lo_lim
    for a, b in blocks:
        if a > cur and a - cur > best_w:
            best, best_w = 0.5 * (a + cur), a - cur
        cur = max(cur, b)
    if hi_lim - cur > best_w:
        best, best_w = 0.5 * (hi_lim + cur), hi_lim - cur
    return best, best_w


def spectral_flow(unitary_at, a, b, n_samples=200, phase_tol=PHASE_TOL, max_depth=12,
                  perturb=None):
    """Signed count of eigenvalues of ``unitary_at(s)`` passing -1 counterclockwise.

    ``k(s, eps)`` counts eigenphases (measured from -1) in ``[-phase_tol, eps]``
    and the flow is ``sum_j k(s_j, eps_j) - k(s_{j-1}, eps_j)``.

    Parameters
    ----------
    unitary_at : callable
        ``s -> W_s`` (square complex unitary).
    perturb : callable, optional
        ``s -> s'`` used when ``unitary_at`` raises :class:`BothSpectraHit`
        at an interior sample.

    Returns
    -------
    flow : int
    trace : dict
        Sample points and eigenphases.
    """

    def phases(s, interior):
        try:
            return s, eigenphases(unitary_at(s))
        except BothSpectraHit:
            if not interior or perturb is None:
                raise
            s2 = perturb(s)
            return s2, eigenphases(unitary_at(s2))

    ss = list(np.linspace(a, b, int(n_samples) + 1))
    pts = [phases(s, 0 < i < len(ss) - 1) for i, s in enumerate(ss)]
    flow = 0
    out_s, out_p = [pts[0][0]], [pts[0][1]]
    stack = [(pts[i], pts[i + 1], 0) for i in range(len(pts) - 1)][::-1]
    min_width = 1e-3
    while stack:
        (s0, p0), (s1, p1), depth = stack.pop()
        order, step = _match(p0, p1)
        eps, width = _choose_eps(p0, step, phase_tol)
        if np.abs(step).max() > MAX_PHASE_STEP or eps is None or width < min_width:
            if depth >= max_depth:
                raise PhaseTrackingError(
                    f"eigenphases not resolved on [{s0:.6g}, {s1:.6g}] after {depth} refinements"
                )
            sm_ = phases(0.5 * (s0 + s1), True)
            stack.append((sm_, (s1, p1), depth + 1))
            stack.append(((s0, p0), sm_, depth + 1))
            continue
        k0 = int(np.sum((p0 >= -phase_tol) & (p0 <= eps)))
        k1 = int(np.sum((p1 >= -phase_tol) & (p1 <= eps)))
        flow += k1 - k0
        out_s.append(s1)
        out_p.append(p1)
    return flow, {"s": np.array(out_s), "phases": out_p}


def maslov_index_spectral_flow(problem, segment, n_samples=200):
    """Maslov index on a segment from the Souriau unitary ``W_s``."""
    a, b = problem.path.segment_bounds(segment)
    if b <= a:
        return MaslovResult("spectral-flow", {segment: SegmentResult(segment, 0, [])})

    def W(s):
        return souriau_unitary(problem.frame(s, segment), problem.G)

    def perturb(s):
        return min(b, s + 1e-7 * max(1.0, b - a))

    flow, trace = spectral_flow(W, a, b, n_samples, perturb=perturb)
    return MaslovResult("spectral-flow", {segment: SegmentResult(segment, flow, [], trace)})


def maslov_closed_loop(problem, method="crossing-form", n_samples=200, **kwargs):
    """Sum of the four segment indices (expected 0).

    Returns
    -------
    total : int
    result : MaslovResult
    """
    result = MaslovResult(method)
    for seg in SEGMENTS:
        if method == "crossing-form":
            r = maslov_index_crossing_form(problem, seg, n_samples, **kwargs)
        elif method == "spectral-flow":
            r = maslov_index_spectral_flow(problem, seg, n_samples)
        else:
            raise InputError(f"unknown method {method!r}")
        result.segments[seg] = r.segments[seg]
    return result.total, result


# ---------------------------------------------------------------- CSV output


def _atomic_csv(path, header, rows):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    os.replace(tmp, path)


def write_crossing_table(records, path):
    """CSV: ``s_star, segment, lambda, t, kernel_dim, signature, contribution``."""
    rows = [[repr(r.s_star), r.segment, repr(float(r.lam)), repr(float(r.t)), r.kernel_dim,
             r.signature, r.contribution] for r in records]
    _atomic_csv(path, ["s_star", "segment", "lambda", "t", "kernel_dim", "signature",
                       "contribution"], rows)


def write_eigenvalue_trace(problem, path, n_samples=100, n_eigs=6):
    """CSV: ``s, mu_min`` plus the lowest ``n_eigs`` eigenvalues along the whole loop."""
    rows = []
    for seg in SEGMENTS:
        for s in _segment_samples(problem, seg, n_samples)[:-1]:
            mu = problem.eigenvalues(s, seg)
            rows.append([repr(float(s)), seg, repr(float(mu[np.argmin(np.abs(mu))]))]
                        + [repr(float(v)) for v in mu[:n_eigs]])
    _atomic_csv(path, ["s", "segment", "mu_min"] + [f"mu_{i}" for i in range(n_eigs)], rows)


def write_phase_trace(result, path):
    """CSV: ``s, segment, phase_0, ...`` from spectral-flow traces."""
    rows, width = [], 0
    for seg, r in result.segments.items():
        if not r.trace:
            continue
        for s, p in zip(r.trace["s"], r.trace["phases"]):
            p = np.sort(p)
            width = max(width, p.size)
            rows.append([repr(float(s)), seg] + [repr(float(v)) for v in p])
    _atomic_csv(path, ["s", "segment"] + [f"phase_{i}" for i in range(width)], rows)
