"""Oswald interpolation and the H(div)-conforming averaged gradient."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dg import DgSolution, DgSpace
from .mesh import Triangulation
from .problem import Coefficients

log = logging.getLogger(__name__)

__all__ = [
    "OswaldInterpolant",
    "RecoveredGradient",
    "oswald_interpolate",
    "recover_gradient",
    "crosspoint_project",
    "divergence",
    "node_cases",
]


@dataclass(frozen=True, eq=False)
class OswaldInterpolant:
    """Continuous nodal field: vertex values and, for degree 2, edge-midpoint values."""

    mesh: Triangulation
    degree: int
    vertex_values: np.ndarray
    edge_values: np.ndarray | None = None

    def to_dg(self, space: DgSpace | None = None) -> DgSolution:
        """The same function written in the discontinuous basis."""
        space = DgSpace(self.mesh, self.degree) if space is None else space
        if space.degree != self.degree:
            raise ValueError("space degree does not match the interpolant")
        blocks = [self.vertex_values[self.mesh.triangles]]
        if self.degree == 2:
            blocks.append(self.edge_values[self.mesh.tri_edges])
        return DgSolution(space, np.hstack(blocks))


def _weighted_average(n, idx, vals, weights):
    num = np.bincount(idx, weights * vals, minlength=n)
    den = np.bincount(idx, weights, minlength=n)
    return num / den


def oswald_interpolate(solution: DgSolution) -> OswaldInterpolant:
    """Area-weighted nodal averages of ``u_h``, set to zero on the boundary."""
    space = solution.space
    mesh = space.mesh
    c = solution.coefficients
    w = np.repeat(mesh.areas, 3)
    vert = _weighted_average(mesh.n_vertices, mesh.triangles.ravel(), c[:, :3].ravel(), w)
    vert[mesh.boundary_vertices] = 0.0
    edge = None
    if space.degree == 2:
        edge = _weighted_average(mesh.n_edges, mesh.tri_edges.ravel(), c[:, 3:].ravel(), w)
        edge[mesh.boundary_edges] = 0.0
    return OswaldInterpolant(mesh, space.degree, vert, edge)


def crosspoint_project(values, normals, cyclic: bool = True) -> np.ndarray:
    """Closest vectors (in the summed squared norm) with continuous normal parts.

    ``values`` is ``(n, 2)``, one vector per sector in angular order and
    ``normals[i]`` is the unit normal of the interface between sectors ``i``
    and ``i + 1``. With ``cyclic`` the last interface closes the loop
    (``n`` constraints); otherwise there are ``n - 1`` (a chain ending on
    the boundary). The result satisfies ``(g[i+1] - g[i]) . normals[i] = 0``.
    """
    v = np.asarray(values, dtype=float)
    nrm = np.asarray(normals, dtype=float)
    n = len(v)
    m = n if cyclic else n - 1
    if n < 2:
        raise ValueError("need at least two sectors")
    if nrm.shape != (m, 2):
        raise ValueError(f"expected {m} interface normals, got {nrm.shape[0]}")
    C = np.zeros((m, 2 * n))
    for i in range(m):
        j = (i + 1) % n
        C[i, 2 * j : 2 * j + 2] = nrm[i]
        C[i, 2 * i : 2 * i + 2] -= nrm[i]
    flat = v.ravel()
    # the constraint set is a subspace containing all constant fields, so the
    # pseudo-inverse projection is exact even when C is rank deficient
    g = flat - np.linalg.pinv(C) @ (C @ flat)
    return g.reshape(n, 2)


def _rot90(d):
    return np.array([-d[1], d[0]])


def _fan(mesh: Triangulation, x: int):
    """Triangles around ``x`` in counterclockwise order, with the far edge endpoint."""
    tris = mesh.vertex_triangle[x].indices
    t = mesh.triangles[tris]
    k = np.argmax(t == x, axis=1)
    p = t[np.arange(len(t)), (k + 1) % 3]
    q = t[np.arange(len(t)), (k + 2) % 3]
    by_p = {int(pp): i for i, pp in enumerate(p)}
    starts = np.flatnonzero(~np.isin(p, q))
    boundary = len(starts) > 0
    cur = int(starts[0]) if boundary else 0
    order = []
    for _ in range(len(tris)):
        order.append(cur)
        nxt = by_p.get(int(q[cur]))
        if nxt is None or nxt == order[0]:
            break
        cur = nxt
    if len(order) != len(tris):
        raise ValueError(f"patch of node {x} is not a simple fan")
    order = np.array(order)
    return tris[order], q[order], boundary


def node_cases(mesh: Triangulation) -> np.ndarray:
    """Recovery case (1, 3 or 4) of every vertex; boundary single-tag nodes are case 1."""
    nv = mesh.n_vertices
    tags = mesh.tags
    J = int(tags.max()) + 1
    seen = np.zeros((nv, J), dtype=bool)
    seen[mesh.triangles.ravel(), np.repeat(tags, 3)] = True
    ntags = seen.sum(1)
    case = np.ones(nv, dtype=np.int64)
    multi = ntags > 1
    case[multi] = 4
    ie = np.flatnonzero(mesh.interface_edges)
    cnt = np.bincount(mesh.edges[ie].ravel(), minlength=nv)
    cand = np.flatnonzero((ntags == 2) & (cnt == 2) & ~mesh.boundary_vertices)
    if len(cand):
        # two interface edges per candidate: check collinearity
        ends = mesh.edges[ie]
        own = np.concatenate([ends[:, 0], ends[:, 1]])
        other = np.concatenate([ends[:, 1], ends[:, 0]])
        order = np.argsort(own, kind="stable")
        own, other = own[order], other[order]
        start = np.searchsorted(own, cand)
        x = mesh.vertices[cand]
        d1 = mesh.vertices[other[start]] - x
        d2 = mesh.vertices[other[start + 1]] - x
        cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        scale = np.hypot(*d1.T) * np.hypot(*d2.T)
        straight = (np.abs(cross) <= 1e-10 * scale) & ((d1 * d2).sum(1) < 0)
        case[cand[straight]] = 3
    return case


@dataclass(frozen=True, eq=False)
class RecoveredGradient:
    """Piecewise-linear field given by its values at the vertices of every element.

    ``nodal[x, j]`` is the value attached to vertex ``x`` for subdomain ``j``
    (NaN where ``x`` does not touch ``j``); ``element_values[t, k]`` is the
    value at local vertex ``k`` of ``t``.
    """

    mesh: Triangulation
    nodal: np.ndarray
    element_values: np.ndarray
    cases: np.ndarray

    def values(self, bary) -> np.ndarray:
        """Values ``(nt, nq, 2)`` at shared barycentric points."""
        return np.einsum("qk,tkd->tqd", np.asarray(bary), self.element_values)

    def traces(self, tri, bary) -> np.ndarray:
        """Values ``(n, nq, 2)`` at per-element barycentric points."""
        return np.einsum("nqk,nkd->nqd", bary, self.element_values[tri])

    def divergence(self) -> np.ndarray:
        """Elementwise constant divergence ``(nt,)``."""
        return np.einsum("tkd,tkd->t", self.element_values, self.mesh.lambda_gradients)

    def cell_averages(self) -> np.ndarray:
        return self.element_values.mean(axis=1)


def divergence(G: RecoveredGradient, element: int) -> float:
    """Divergence of ``G`` on one element."""
    return float(np.einsum("kd,kd->", G.element_values[element], G.mesh.lambda_gradients[element]))


def recover_gradient(solution: DgSolution, coeffs: Coefficients) -> RecoveredGradient:
    """Average ``a grad u_h`` at the vertices, subdomain by subdomain.

    Vertices inside one subdomain (including boundary ones) take the
    area-weighted mean over the patch. Non-corner interface vertices share
    the patch mean of the normal component and keep per-side tangential
    means. Subdomain corners use :func:`crosspoint_project` on per-sector
    means, cyclically inside the domain and as a chain on the boundary.
    """
    space = solution.space
    if space.degree > 2:
        raise ValueError("recovery is implemented for degree 1 and 2")
    mesh = space.mesh
    nv = mesh.n_vertices
    tags = mesh.tags
    J = int(tags.max()) + 1
    a = coeffs.a(tags)
    # a_T grad u_T at the element vertices, (nt, 3, 2)
    flux = np.einsum("tde,tke->tkd", a, solution.vertex_gradients())
    w = np.repeat(mesh.areas, 3)
    vid = mesh.triangles.ravel()
    tid = np.repeat(tags, 3)
    key = vid * J + tid
    S = np.stack(
        [np.bincount(key, w * flux[..., d].ravel(), minlength=nv * J) for d in range(2)], axis=-1
    ).reshape(nv, J, 2)
    A = np.bincount(key, w, minlength=nv * J).reshape(nv, J)
    with np.errstate(invalid="ignore", divide="ignore"):
        nodal = S / A[..., None]
    nodal[A == 0] = np.nan

    cases = node_cases(mesh)
    c3 = np.flatnonzero(cases == 3)
    if len(c3):
        ie = np.flatnonzero(mesh.interface_edges)
        ends = mesh.edges[ie]
        own = np.concatenate([ends[:, 0], ends[:, 1]])
        other = np.concatenate([ends[:, 1], ends[:, 0]])
        order = np.argsort(own, kind="stable")
        own, other = own[order], other[order]
        d = mesh.vertices[other[np.searchsorted(own, c3)]] - mesh.vertices[c3]
        t = d / np.hypot(d[:, 0], d[:, 1])[:, None]
        n = np.column_stack([-t[:, 1], t[:, 0]])
        full = S[c3].sum(1) / A[c3].sum(1)[:, None]
        fn = (full * n).sum(1)
        local = nodal[c3]
        lt = np.einsum("xjd,xd->xj", local, t)
        nodal[c3] = fn[:, None, None] * n[:, None, :] + lt[..., None] * t[:, None, :]

    for x in np.flatnonzero(cases == 4):
        nodal[x] = np.nan
        tris, far, boundary = _fan(mesh, int(x))
        tt = tags[tris]
        if not boundary:
            # rotate so that the walk begins at a sector boundary
            change = np.flatnonzero(tt != np.roll(tt, 1))
            shift = int(change[0])
            tris, far, tt = np.roll(tris, -shift), np.roll(far, -shift), np.roll(tt, -shift)
        cuts = np.flatnonzero(tt[1:] != tt[:-1]) + 1
        groups = np.split(np.arange(len(tris)), cuts)
        sector_tags = [int(tt[g[0]]) for g in groups]
        if len(set(sector_tags)) != len(sector_tags):
            raise ValueError(f"subdomain appears in several sectors around node {x}")
        k = np.argmax(mesh.triangles[tris] == x, axis=1)
        ft = flux[tris, k]
        ar = mesh.areas[tris]
        v = np.array([(ar[g, None] * ft[g]).sum(0) / ar[g].sum() for g in groups])
        last = [g[-1] for g in groups] if not boundary else [g[-1] for g in groups[:-1]]
        normals = []
        for i in last:
            dvec = mesh.vertices[far[i]] - mesh.vertices[x]
            normals.append(_rot90(dvec / np.hypot(*dvec)))
        g = crosspoint_project(v, np.array(normals).reshape(-1, 2), cyclic=not boundary)
        for j, gj in zip(sector_tags, g):
            nodal[x, j] = gj

    ev = nodal[mesh.triangles, tags[:, None]]
    if not np.all(np.isfinite(ev)):
        raise ValueError("recovered gradient has undefined nodal values")
    return RecoveredGradient(mesh, nodal, ev, cases)
