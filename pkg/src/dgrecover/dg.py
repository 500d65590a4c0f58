"""Discontinuous Lagrange spaces, interior-penalty assembly, solve and norms."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Triangulation
from .problem import BenchmarkCase, Coefficients
from .quadrature import edge_rule, triangle_rule

log = logging.getLogger(__name__)

__all__ = [
    "DgSpace",
    "DgSolution",
    "SchemeParams",
    "SparseSystem",
    "SolverError",
    "ErrorNorms",
    "assemble_system",
    "solve",
    "evaluate",
    "error_norms",
    "jump_norms",
    "energy_norm",
    "interpolate",
]


class SolverError(RuntimeError):
    """Linear solve failed; ``residual`` holds the achieved relative residual."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


def _lagrange_nodes(degree):
    if degree == 1:
        return np.eye(3)
    if degree == 2:
        # vertices, then midpoints of the edges opposite vertex 0, 1, 2
        mids = np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]])
        return np.vstack([np.eye(3), mids])
    raise ValueError(f"unsupported polynomial degree {degree}; use 1 or 2")


class DgSpace:
    """Piecewise ``P_degree`` functions without inter-element continuity.

    Degrees of freedom are Lagrange values numbered in one block per element:
    element ``t`` owns dofs ``t*nb ... t*nb + nb - 1``.
    """

    def __init__(self, mesh: Triangulation, degree: int = 1):
        self.mesh = mesh
        self.degree = int(degree)
        self.nodes = _lagrange_nodes(self.degree)
        self.nb = len(self.nodes)

    @property
    def ndofs(self) -> int:
        return self.mesh.n_triangles * self.nb

    def __repr__(self):
        return f"DgSpace(P{self.degree}, {self.mesh.n_triangles} elements)"

    def basis(self, bary):
        """Basis values ``(..., nb)`` and derivatives w.r.t. barycentrics ``(..., nb, 3)``."""
        lam = np.asarray(bary, dtype=float)
        shape = lam.shape[:-1]
        if self.degree == 1:
            return lam.copy(), np.broadcast_to(np.eye(3), shape + (3, 3)).copy()
        vals = np.empty(shape + (6,))
        dl = np.zeros(shape + (6, 3))
        for k in range(3):
            vals[..., k] = lam[..., k] * (2.0 * lam[..., k] - 1.0)
            dl[..., k, k] = 4.0 * lam[..., k] - 1.0
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            vals[..., 3 + k] = 4.0 * lam[..., i] * lam[..., j]
            dl[..., 3 + k, i] = 4.0 * lam[..., j]
            dl[..., 3 + k, j] = 4.0 * lam[..., i]
        return vals, dl

    def physical_gradients(self, dl, tri=None):
        """Map barycentric derivatives to physical gradients.

        With ``tri=None``, ``dl`` has shape ``(nq, nb, 3)`` shared by all
        elements and the result is ``(nt, nq, nb, 2)``; otherwise ``dl`` is
        ``(n, nq, nb, 3)`` for the triangles ``tri``.
        """
        gl = self.mesh.lambda_gradients
        if tri is None:
            return np.einsum("qim,tmd->tqid", dl, gl)
        return np.einsum("nqim,nmd->nqid", dl, gl[tri])

    def points(self, bary) -> np.ndarray:
        """Physical coordinates ``(nt, nq, 2)`` of shared barycentric points."""
        return np.einsum("qk,tkd->tqd", np.asarray(bary), self.mesh.corners)

    def dof_indices(self) -> np.ndarray:
        return np.arange(self.ndofs).reshape(-1, self.nb)


@dataclass(frozen=True, eq=False)
class DgSolution:
    """Coefficient blocks ``(nt, nb)`` of a discrete field on a :class:`DgSpace`."""

    space: DgSpace
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float).reshape(self.space.mesh.n_triangles, self.space.nb)
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficients")
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def zeros(cls, space: DgSpace) -> "DgSolution":
        return cls(space, np.zeros((space.mesh.n_triangles, space.nb)))

    @property
    def vector(self) -> np.ndarray:
        return self.coefficients.ravel()

    def values(self, bary) -> np.ndarray:
        """Values ``(nt, nq)`` at shared barycentric points."""
        phi, _ = self.space.basis(bary)
        return self.coefficients @ phi.T

    def gradients(self, bary) -> np.ndarray:
        """Gradients ``(nt, nq, 2)`` at shared barycentric points."""
        _, dl = self.space.basis(bary)
        g = self.space.physical_gradients(dl)
        return np.einsum("ti,tqid->tqd", self.coefficients, g)

    def traces(self, tri, bary):
        """Values ``(n, nq)`` and gradients ``(n, nq, 2)`` at per-element points."""
        phi, dl = self.space.basis(bary)
        g = self.space.physical_gradients(dl, tri)
        c = self.coefficients[tri]
        return np.einsum("ni,nqi->nq", c, phi), np.einsum("ni,nqid->nqd", c, g)

    def vertex_gradients(self) -> np.ndarray:
        """Gradient of each local polynomial at its element's vertices ``(nt, 3, 2)``."""
        return self.gradients(np.eye(3))


def evaluate(solution: DgSolution, element: int, point, tol: float = 1e-10):
    """Value and gradient of the local polynomial of ``element`` at ``point``."""
    mesh = solution.space.mesh
    lam = mesh.barycentric(np.array([element]), np.asarray(point, dtype=float)[None, None, :])
    if lam.min() < -tol:
        raise ValueError(f"point {point} lies outside element {element}")
    v, g = solution.traces(np.array([element]), lam)
    return float(v[0, 0]), g[0, 0].copy()


def interpolate(space: DgSpace, func) -> DgSolution:
    """Elementwise Lagrange interpolant of ``func(x, y)``."""
    pts = space.points(space.nodes)
    return DgSolution(space, func(pts[..., 0], pts[..., 1]))


@dataclass(frozen=True)
class SchemeParams:
    """Interior-penalty parameters.

    The penalty on edge ``e`` is ``penalty * gamma_a / h_e`` plus
    ``|beta . n_e| / 2`` when ``upwind`` is set.
    """

    theta: float = 1.0
    penalty: float = 10.0
    gamma_a: float = 1.0
    upwind: bool = True
    weights: tuple[float, float] = (0.5, 0.5)

    def __post_init__(self):
        if self.penalty <= 0:
            raise ValueError("penalty scale must be positive")
        if self.gamma_a <= 0:
            raise ValueError("gamma_a must be positive")
        wp, wm = self.weights
        if wp < 0 or wm < 0 or abs(wp + wm - 1.0) > 1e-14:
            raise ValueError("edge weights must be nonnegative and sum to one")


@dataclass(frozen=True, eq=False)
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    space: DgSpace
    symmetric: bool


def _edge_sides(space, edges, side, rule):
    """Traces of basis functions on the given edges from side ``side``."""
    mesh = space.mesh
    tri = mesh.edge_triangles[edges, side]
    ends = mesh.edges[edges]
    a = mesh.vertices[ends[:, 0]]
    b = mesh.vertices[ends[:, 1]]
    x = a[:, None, :] + rule.points[None, :, None] * (b - a)[:, None, :]
    lam = mesh.barycentric(tri, x)
    phi, dl = space.basis(lam)
    grad = space.physical_gradients(dl, tri)
    return tri, x, phi, grad


def _quad_degree(space, degree):
    return min(10, 2 * space.degree + 2) if degree is None else int(degree)


def assemble_system(
    space: DgSpace,
    coeffs: Coefficients,
    scheme: SchemeParams,
    f,
    degree: int | None = None,
    rhs_degree: int | None = None,
) -> SparseSystem:
    """Assemble the interior-penalty form and the load vector.

    Row ``i`` / column ``j`` of the matrix holds ``B_h(phi_j, phi_i)``.
    Volume and edge terms use quadrature of ``degree`` (default
    ``2 * degree + 2``); the load vector uses ``rhs_degree`` (default
    ``2 * degree + 4``).
    """
    mesh = space.mesh
    nb = space.nb
    qdeg = _quad_degree(space, degree)
    rule = triangle_rule(qdeg)
    X = space.points(rule.points)
    x, y = X[..., 0], X[..., 1]
    phi, dl = space.basis(rule.points)
    G = space.physical_gradients(dl)
    a = coeffs.a(mesh.tags)
    wA = 2.0 * mesh.areas[:, None] * rule.weights[None, :]

    aG = np.einsum("tde,tqje->tqjd", a, G)
    K = np.einsum("tq,tqid,tqjd->tij", wA, G, aG)
    react = coeffs.mu(x, y) - coeffs.div_beta(x, y)
    K += np.einsum("tq,qi,qj->tij", wA * react, phi, phi)
    bG = np.einsum("tqd,tqid->tqi", coeffs.beta(x, y), G)
    K -= np.einsum("tq,qj,tqi->tij", wA, phi, bG)

    dofs = space.dof_indices()
    rows = [np.repeat(dofs, nb, axis=1).ravel()]
    cols = [np.tile(dofs, (1, nb)).ravel()]
    vals = [K.ravel()]

    erule = edge_rule(qdeg)
    theta = float(scheme.theta)
    sig = (1.0, -1.0)
    for boundary in (False, True):
        edges = np.flatnonzero(mesh.boundary_edges == boundary)
        if len(edges) == 0:
            continue
        n = mesh.edge_normals[edges]
        he = mesh.edge_lengths[edges]
        wq = he[:, None] * erule.weights[None, :]
        sides = [0] if boundary else [0, 1]
        tr = [_edge_sides(space, edges, s, erule) for s in sides]
        xq = tr[0][1]
        bn = np.einsum("nqd,nd->nq", coeffs.beta(xq[..., 0], xq[..., 1]), n)
        gam = scheme.penalty * scheme.gamma_a / he[:, None] + (0.5 * np.abs(bn) if scheme.upwind else 0.0)
        flux = []
        for tri, _, _, grad in tr:
            an = np.einsum("nde,nd->ne", a[tri], n)
            flux.append(np.einsum("nqid,nd->nqi", grad, an))
        om = (1.0,) if boundary else scheme.weights
        mean = (1.0,) if boundary else (0.5, 0.5)
        for si in range(len(sides)):
            for sj in range(len(sides)):
                pi, pj = tr[si][2], tr[sj][2]
                ss = sig[si] * sig[sj]
                blk = -theta * om[si] * sig[sj] * np.einsum("nq,nqi,nqj->nij", wq, flux[si], pj)
                blk -= om[sj] * sig[si] * np.einsum("nq,nqj,nqi->nij", wq, flux[sj], pi)
                blk += ss * np.einsum("nq,nqi,nqj->nij", wq * gam, pi, pj)
                blk += mean[sj] * sig[si] * np.einsum("nq,nqi,nqj->nij", wq * bn, pi, pj)
                ri = dofs[tr[si][0]]
                cj = dofs[tr[sj][0]]
                rows.append(np.repeat(ri, nb, axis=1).ravel())
                cols.append(np.tile(cj, (1, nb)).ravel())
                vals.append(blk.ravel())

    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.ndofs, space.ndofs),
    )
    A.sum_duplicates()

    rdeg = min(10, 2 * space.degree + 4) if rhs_degree is None else int(rhs_degree)
    rrule = triangle_rule(rdeg)
    Xr = space.points(rrule.points)
    phir, _ = space.basis(rrule.points)
    wr = 2.0 * mesh.areas[:, None] * rrule.weights[None, :]
    F = np.einsum("tq,qi->ti", wr * f(Xr[..., 0], Xr[..., 1]), phir)
    symmetric = theta == 1.0 and coeffs.beta_sup == 0.0
    return SparseSystem(A, F.ravel(), space, symmetric)


def solve(system: SparseSystem, tol: float = 1e-10, refinement_steps: int = 3) -> DgSolution:
    """Sparse LU solve with a residual check and iterative refinement."""
    A = system.matrix
    b = system.rhs
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return DgSolution.zeros(system.space)
    try:
        lu = spla.splu(A.tocsc())
    except RuntimeError as exc:
        raise SolverError(f"sparse LU failed: {exc}") from exc
    x = lu.solve(b)
    res = np.linalg.norm(b - A @ x) / nb
    steps = 0
    while not res <= tol and steps < refinement_steps:
        x = x + lu.solve(b - A @ x)
        res = np.linalg.norm(b - A @ x) / nb
        steps += 1
    if not res <= tol:
        log.info("LU residual %.2e above tolerance, trying GMRES", res)
        x, info = spla.gmres(A, b, x0=x, rtol=tol, atol=0.0, M=spla.LinearOperator(A.shape, lu.solve), maxiter=50)
        res = np.linalg.norm(b - A @ x) / nb
        if not res <= tol:
            raise SolverError(f"linear solve did not reach tolerance {tol:.1e} (residual {res:.2e})", res)
    if not np.all(np.isfinite(x)):
        raise SolverError("solution contains non-finite values", res)
    return DgSolution(system.space, x)


def jump_norms(solution: DgSolution, degree: int | None = None) -> np.ndarray:
    """``h_e^{-1} ||[u_h]||_e^2`` per edge (boundary edges use the trace)."""
    space = solution.space
    mesh = space.mesh
    rule = edge_rule(_quad_degree(space, degree))
    out = np.zeros(mesh.n_edges)
    for boundary in (False, True):
        edges = np.flatnonzero(mesh.boundary_edges == boundary)
        if len(edges) == 0:
            continue
        tri, _, phi, _ = _edge_sides(space, edges, 0, rule)
        jump = np.einsum("ni,nqi->nq", solution.coefficients[tri], phi)
        if not boundary:
            tri2, _, phi2, _ = _edge_sides(space, edges, 1, rule)
            jump = jump - np.einsum("ni,nqi->nq", solution.coefficients[tri2], phi2)
        # h_e^{-1} * h_e * sum w q^2
        out[edges] = (jump**2) @ rule.weights
    return out


def energy_norm(solution: DgSolution, coeffs: Coefficients, degree: int | None = None, exact=None) -> np.ndarray:
    """Elementwise squared energy norm of ``exact - u_h`` (or of ``u_h`` alone)."""
    space = solution.space
    mesh = space.mesh
    rule = triangle_rule(min(10, 2 * space.degree + 4) if degree is None else degree)
    X = space.points(rule.points)
    x, y = X[..., 0], X[..., 1]
    v = solution.values(rule.points)
    g = solution.gradients(rule.points)
    if exact is not None:
        u, grad_u = exact
        v = u(x, y) - v
        g = grad_u(x, y) - g
    a = coeffs.a(mesh.tags)
    ag = np.einsum("tde,tqe->tqd", a, g)
    dens = (g * ag).sum(-1) + coeffs.zero_order(x, y) * v * v
    return 2.0 * mesh.areas * (dens @ rule.weights)


@dataclass(frozen=True)
class ErrorNorms:
    energy: float
    jump: float

    @property
    def dg(self) -> float:
        return self.energy + self.jump


def error_norms(solution: DgSolution, case: BenchmarkCase, degree: int | None = None) -> ErrorNorms:
    """Energy-norm error, jump seminorm and their sum (the DG-norm error)."""
    space = solution.space
    if degree is None:
        degree = min(10, 2 * space.degree + 4 + case.error_quadrature_boost)
    e2 = energy_norm(solution, case.coefficients, degree, exact=(case.u, case.grad_u))
    j2 = jump_norms(solution)
    return ErrorNorms(float(np.sqrt(e2.sum())), float(np.sqrt(j2.sum())))
