"""Conforming triangulations, newest-vertex bisection and mesh hierarchies.

Triangles are stored counterclockwise with the *newest vertex* in local
position 0, so the refinement edge of every triangle is its local edge 0
(the edge opposite vertex 0). Local edge ``i`` is always the edge opposite
local vertex ``i``.

Vertex numbering is persistent under refinement: new vertices are appended,
so the node set of a coarser level is a prefix of the finer one.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "DomainSpec",
    "Triangulation",
    "MeshHierarchy",
    "Patch",
    "PatchMap",
    "create_mesh",
    "refine",
    "bisect",
    "patches",
    "tilde_nodes",
    "eval_hat",
    "node_diameters",
    "unit_square",
    "quadrant_square",
]


class MeshError(ValueError):
    """Raised for invalid geometry or topology."""


def _readonly(arr):
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DomainSpec:
    """Rectangular domain tiled by axis-aligned rectangular subdomains.

    ``subdomains[j] = (xmin, xmax, ymin, ymax)`` is tagged ``j``.
    """

    bounds: tuple[float, float, float, float]
    subdomains: tuple[tuple[float, float, float, float], ...]

    def validate(self):
        x0, x1, y0, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            raise MeshError(f"degenerate domain bounds {self.bounds}")
        total = 0.0
        for j, (a, b, c, d) in enumerate(self.subdomains):
            if not (b > a and d > c):
                raise MeshError(f"degenerate subdomain {j}: {(a, b, c, d)}")
            if a < x0 or b > x1 or c < y0 or d > y1:
                raise MeshError(f"subdomain {j} leaves the domain bounds")
            total += (b - a) * (d - c)
        for i in range(len(self.subdomains)):
            for j in range(i + 1, len(self.subdomains)):
                a, b, c, d = self.subdomains[i]
                e, f, g, h = self.subdomains[j]
                ox = min(b, f) - max(a, e)
                oy = min(d, h) - max(c, g)
                if ox > 0 and oy > 0:
                    raise MeshError(f"subdomains {i} and {j} overlap")
        area = (x1 - x0) * (y1 - y0)
        if abs(total - area) > 1e-12 * area:
            raise MeshError("subdomains do not tile the domain")


def unit_square() -> DomainSpec:
    return DomainSpec((0.0, 1.0, 0.0, 1.0), ((0.0, 1.0, 0.0, 1.0),))


def quadrant_square() -> DomainSpec:
    """``(-1, 1)^2`` split into the four quadrants, counterclockwise from ``x, y > 0``."""
    return DomainSpec(
        (-1.0, 1.0, -1.0, 1.0),
        (
            (0.0, 1.0, 0.0, 1.0),
            (-1.0, 0.0, 0.0, 1.0),
            (-1.0, 0.0, -1.0, 0.0),
            (0.0, 1.0, -1.0, 0.0),
        ),
    )


@dataclass(frozen=True, eq=False)
class Triangulation:
    """A conforming triangulation with per-triangle subdomain tags.

    Derived topology (edges, incidences, normals, boundary flags) is computed
    lazily and cached; all arrays are read-only.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=np.int64)
        g = np.asarray(self.tags, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise MeshError("vertices must have shape (nv, 2)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must have shape (nt, 3)")
        if len(t) == 0:
            raise MeshError("empty mesh")
        if g.shape != (len(t),):
            raise MeshError("one tag per triangle required")
        object.__setattr__(self, "vertices", _readonly(v))
        object.__setattr__(self, "triangles", _readonly(t))
        object.__setattr__(self, "tags", _readonly(g))
        if np.any(self.signed_areas <= 0.0):
            raise MeshError("triangles must have strictly positive (counterclockwise) area")

    # -- sizes -------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_subdomains(self) -> int:
        return int(self.tags.max()) + 1

    # -- geometry ----------------------------------------------------------
    @cached_property
    def corners(self) -> np.ndarray:
        """Vertex coordinates per triangle, shape ``(nt, 3, 2)``."""
        return _readonly(self.vertices[self.triangles])

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return _readonly(0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]))

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def barycenters(self) -> np.ndarray:
        return _readonly(self.corners.mean(axis=1))

    @cached_property
    def lambda_gradients(self) -> np.ndarray:
        """Gradients of the barycentric coordinates, shape ``(nt, 3, 2)``."""
        p = self.corners
        # inward normal of the opposite edge, scaled by 1 / (2|T|)
        g = np.empty_like(p)
        for i in range(3):
            d = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
            g[:, i, 0] = -d[:, 1]
            g[:, i, 1] = d[:, 0]
        g /= (2.0 * self.areas)[:, None, None]
        return _readonly(g)

    @cached_property
    def inverse_maps(self) -> np.ndarray:
        """Per-triangle ``(2, 2)`` inverse of the affine reference map."""
        p = self.corners
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        return _readonly(np.linalg.inv(jac))

    def barycentric(self, tri: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Barycentric coordinates of points ``x[..., 2]`` in triangles ``tri``.

        ``tri`` has shape ``(n,)`` and ``x`` shape ``(n, ..., 2)``.
        """
        tri = np.asarray(tri)
        x = np.asarray(x, dtype=float)
        p0 = self.vertices[self.triangles[tri, 0]]
        inv = self.inverse_maps[tri]
        extra = x.ndim - 2
        p0 = p0.reshape(p0.shape[:1] + (1,) * extra + (2,))
        inv = inv.reshape(inv.shape[:1] + (1,) * extra + (2, 2))
        ref = np.einsum("...ij,...j->...i", inv, x - p0)
        return np.concatenate([1.0 - ref.sum(axis=-1, keepdims=True), ref], axis=-1)

    @cached_property
    def edge_lengths_per_triangle(self) -> np.ndarray:
        p = self.corners
        out = np.empty((self.n_triangles, 3))
        for i in range(3):
            d = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
            out[:, i] = np.hypot(d[:, 0], d[:, 1])
        return _readonly(out)

    @cached_property
    def diameters(self) -> np.ndarray:
        """Element diameters ``h_T`` (longest edge)."""
        return _readonly(self.edge_lengths_per_triangle.max(axis=1))

    @cached_property
    def inradii(self) -> np.ndarray:
        perim = self.edge_lengths_per_triangle.sum(axis=1)
        return _readonly(2.0 * self.areas / perim)

    @cached_property
    def min_angles(self) -> np.ndarray:
        p = self.corners
        out = np.full(self.n_triangles, np.pi)
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            w = p[:, (i + 2) % 3] - p[:, i]
            c = (u * w).sum(1) / (np.hypot(*u.T) * np.hypot(*w.T))
            out = np.minimum(out, np.arccos(np.clip(c, -1.0, 1.0)))
        return _readonly(out)

    def shape_regularity(self) -> float:
        """``max_T h_T / rho_T`` with ``rho_T`` the inscribed diameter."""
        return float(np.max(self.diameters / (2.0 * self.inradii)))

    # -- topology ----------------------------------------------------------
    @cached_property
    def _topology(self):
        t = self.triangles
        nv = self.n_vertices
        loc = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)  # (nt,3,2)
        lo = loc.min(axis=2).ravel()
        hi = loc.max(axis=2).ravel()
        keys = lo * nv + hi
        uniq, inv, counts = np.unique(keys, return_inverse=True, return_counts=True)
        if counts.max() > 2:
            raise MeshError("an edge is shared by more than two triangles")
        edges = np.column_stack([uniq // nv, uniq % nv])
        tri_edges = inv.reshape(-1, 3)
        order = np.argsort(inv, kind="stable")
        sorted_e = inv[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = sorted_e[1:] != sorted_e[:-1]
        edge_tris = np.full((len(uniq), 2), -1, dtype=np.int64)
        edge_local = np.full((len(uniq), 2), -1, dtype=np.int64)
        slots = np.where(first, 0, 1)
        edge_tris[sorted_e, slots] = order // 3
        edge_local[sorted_e, slots] = order % 3
        return edges, tri_edges, edge_tris, edge_local

    @property
    def edges(self) -> np.ndarray:
        """Edge endpoint pairs ``(ne, 2)``, sorted within each pair."""
        return _readonly(self._topology[0])

    @property
    def tri_edges(self) -> np.ndarray:
        """Edge index of local edge ``i`` (opposite vertex ``i``), ``(nt, 3)``."""
        return _readonly(self._topology[1])

    @property
    def edge_triangles(self) -> np.ndarray:
        """Incident triangles ``(T+, T-)`` per edge; ``-1`` marks a boundary side."""
        return _readonly(self._topology[2])

    @property
    def edge_local_index(self) -> np.ndarray:
        """Local edge index of the edge in ``T+`` and ``T-``."""
        return _readonly(self._topology[3])

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return _readonly(self.edge_triangles[:, 1] < 0)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        flag = np.zeros(self.n_vertices, dtype=bool)
        flag[self.edges[self.boundary_edges].ravel()] = True
        return _readonly(flag)

    @cached_property
    def interface_edges(self) -> np.ndarray:
        et = self.edge_triangles
        inner = et[:, 1] >= 0
        out = np.zeros(self.n_edges, dtype=bool)
        out[inner] = self.tags[et[inner, 0]] != self.tags[et[inner, 1]]
        return _readonly(out)

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return _readonly(np.hypot(d[:, 0], d[:, 1]))

    @cached_property
    def edge_normals(self) -> np.ndarray:
        """Unit normal ``n_e``, outward with respect to ``T+``."""
        et = self.edge_triangles[:, 0]
        li = self.edge_local_index[:, 0]
        t = self.triangles[et]
        a = self.vertices[t[np.arange(len(et)), (li + 1) % 3]]
        b = self.vertices[t[np.arange(len(et)), (li + 2) % 3]]
        d = b - a
        # ccw traversal a -> b: outward normal is (dy, -dx)
        n = np.column_stack([d[:, 1], -d[:, 0]])
        return _readonly(n / np.hypot(n[:, 0], n[:, 1])[:, None])

    @cached_property
    def vertex_triangle(self) -> sp.csr_matrix:
        """Sparse incidence ``(nv, nt)``; entry 1 where the vertex belongs to the triangle."""
        nt = self.n_triangles
        rows = self.triangles.ravel()
        cols = np.repeat(np.arange(nt), 3)
        m = sp.csr_matrix((np.ones(3 * nt), (rows, cols)), shape=(self.n_vertices, nt))
        m.sort_indices()
        return m

    def total_area(self) -> float:
        return float(self.areas.sum())

    def check_conforming(self) -> int:
        """Return the number of hanging nodes (vertices lying inside an edge)."""
        count = 0
        v = self.vertices
        scale = np.ptp(v, axis=0).max()
        ends = self.edges
        a = v[ends[:, 0]]
        b = v[ends[:, 1]]
        for k in range(self.n_vertices):
            d = b - a
            w = v[k] - a
            cross = d[:, 0] * w[:, 1] - d[:, 1] * w[:, 0]
            s = (d * w).sum(1) / (d * d).sum(1)
            on = (np.abs(cross) <= 1e-12 * scale * np.hypot(d[:, 0], d[:, 1])) & (s > 1e-12) & (s < 1 - 1e-12)
            count += int(on.sum())
        return count


def create_mesh(domain: DomainSpec, target_h: float) -> Triangulation:
    """Structured interface-aligned triangulation of ``domain``.

    Grid lines include all subdomain boundaries; every interval is split into
    pieces no longer than ``target_h``. Each cell is cut by its
    lower-left/upper-right diagonal, which is the refinement edge of both
    halves (newest vertex at the right angle).
    """
    domain.validate()
    if not target_h > 0:
        raise MeshError("target_h must be positive")
    x0, x1, y0, y1 = domain.bounds

    def lines(lo, hi, cuts):
        pts = np.unique(np.concatenate([[lo, hi], cuts]))
        out = [pts[:1]]
        for a, b in zip(pts[:-1], pts[1:]):
            n = max(1, int(np.ceil((b - a) / target_h - 1e-12)))
            out.append(np.linspace(a, b, n + 1)[1:])
        return np.concatenate(out)

    sx = [c for s in domain.subdomains for c in s[:2]]
    sy = [c for s in domain.subdomains for c in s[2:]]
    xs = lines(x0, x1, np.array(sx))
    ys = lines(y0, y1, np.array(sy))
    nx, ny = len(xs) - 1, len(ys) - 1
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    I, J = I.ravel(), J.ravel()
    ll, lr, ur, ul = vid(I, J), vid(I + 1, J), vid(I + 1, J + 1), vid(I, J + 1)
    lower = np.column_stack([lr, ur, ll])
    upper = np.column_stack([ul, ll, ur])
    tris = np.empty((2 * len(I), 3), dtype=np.int64)
    tris[0::2] = lower
    tris[1::2] = upper
    cx = 0.5 * (xs[I] + xs[I + 1])
    cy = 0.5 * (ys[J] + ys[J + 1])
    cell_tag = np.full(len(I), -1)
    for j, (a, b, c, d) in enumerate(domain.subdomains):
        inside = (cx > a) & (cx < b) & (cy > c) & (cy < d)
        cell_tag[inside] = j
    if np.any(cell_tag < 0):
        raise MeshError("subdomains do not tile the domain")
    tags = np.repeat(cell_tag, 2)
    return Triangulation(verts, tris, tags)


@dataclass(frozen=True, eq=False)
class Bisection:
    """Result of one bisection step on a triangulation."""

    mesh: Triangulation
    parent: np.ndarray  # parent triangle (in the old mesh) of every new triangle
    bisected_edges: np.ndarray  # (nb, 2) old-vertex pairs
    midpoints: np.ndarray  # (nb,) new vertex index of each bisected edge


def _closure(mesh: Triangulation, marked: np.ndarray) -> np.ndarray:
    t2e = mesh.tri_edges
    edge_mark = np.zeros(mesh.n_edges, dtype=bool)
    edge_mark[t2e[marked, 0]] = True
    while True:
        touched = edge_mark[t2e].any(axis=1)
        new = touched & ~edge_mark[t2e[:, 0]]
        if not new.any():
            return edge_mark
        edge_mark[t2e[new, 0]] = True


def _as_mask(n: int, marked) -> np.ndarray:
    if marked is None or (isinstance(marked, str) and marked.upper() == "ALL"):
        return np.ones(n, dtype=bool)
    arr = np.asarray(marked)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ValueError("boolean mark mask has the wrong length")
        return arr.copy()
    mask = np.zeros(n, dtype=bool)
    if arr.size:
        if arr.min() < 0 or arr.max() >= n:
            raise ValueError("marked element index out of range")
        mask[arr.astype(np.int64)] = True
    return mask


def bisect(mesh: Triangulation, marked="ALL") -> Bisection:
    """Newest-vertex bisection of the marked triangles plus conformity closure."""
    mask = _as_mask(mesh.n_triangles, marked)
    edge_mark = _closure(mesh, mask)
    bis = np.flatnonzero(edge_mark)
    nv = mesh.n_vertices
    mid_of_edge = np.full(mesh.n_edges, -1, dtype=np.int64)
    mid_of_edge[bis] = nv + np.arange(len(bis))
    ends = mesh.edges[bis]
    new_vertices = 0.5 * (mesh.vertices[ends[:, 0]] + mesh.vertices[ends[:, 1]])
    vertices = np.vstack([mesh.vertices, new_vertices])

    tri = mesh.triangles.copy()
    parent = np.arange(mesh.n_triangles)
    # old edge id of the refinement edge and of local edges 1, 2 (-1 if new)
    loc_edges = mesh.tri_edges.copy()
    for _ in range(3):
        e0 = loc_edges[:, 0]
        sel = np.flatnonzero((e0 >= 0) & edge_mark[np.maximum(e0, 0)])
        if len(sel) == 0:
            break
        v0, v1, v2 = tri[sel, 0], tri[sel, 1], tri[sel, 2]
        m = mid_of_edge[e0[sel]]
        c1 = np.column_stack([m, v0, v1])
        c2 = np.column_stack([m, v2, v0])
        none = np.full(len(sel), -1)
        e1 = np.column_stack([loc_edges[sel, 2], none, none])
        e2 = np.column_stack([loc_edges[sel, 1], none, none])
        tri[sel] = c1
        loc_edges[sel] = e1
        tri = np.vstack([tri, c2])
        loc_edges = np.vstack([loc_edges, e2])
        parent = np.concatenate([parent, parent[sel]])
    new_mesh = Triangulation(vertices, tri, mesh.tags[parent])
    return Bisection(new_mesh, _readonly(parent), _readonly(ends), _readonly(mid_of_edge[bis]))


@dataclass(frozen=True, eq=False)
class MeshHierarchy:
    """Nested triangulations ``T_0, ..., T_L`` generated by bisection.

    ``parents[k]`` maps every triangle of level ``k+1`` to its ancestor in
    level ``k``; ``bisected[k]`` and ``midpoints[k]`` record which level-``k``
    edges were split and the vertex created on each.
    """

    levels: tuple[Triangulation, ...]
    parents: tuple[np.ndarray, ...] = ()
    bisected: tuple[np.ndarray, ...] = ()
    midpoints: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        if not self.levels:
            raise MeshError("empty hierarchy")
        n = len(self.levels) - 1
        if not (len(self.parents) == len(self.bisected) == len(self.midpoints) == n):
            raise MeshError("inconsistent hierarchy bookkeeping")

    @classmethod
    def from_mesh(cls, mesh: Triangulation) -> "MeshHierarchy":
        return cls((mesh,))

    @property
    def finest(self) -> Triangulation:
        return self.levels[-1]

    @property
    def coarsest(self) -> Triangulation:
        return self.levels[0]

    @property
    def L(self) -> int:
        return len(self.levels) - 1

    def n_nodes(self, level: int) -> int:
        return self.levels[self._check_level(level)].n_vertices

    def _check_level(self, level: int) -> int:
        if not 0 <= level <= self.L:
            raise IndexError(f"level {level} outside 0..{self.L}")
        return level

    def ancestor(self, level: int) -> np.ndarray:
        """Level-``level`` ancestor of every finest triangle."""
        self._check_level(level)
        anc = np.arange(self.finest.n_triangles)
        for k in range(self.L - 1, level - 1, -1):
            anc = self.parents[k][anc]
        return anc


def refine(hierarchy: MeshHierarchy | Triangulation, marked="ALL") -> MeshHierarchy:
    """Append a bisection-refined finest level to the hierarchy.

    ``marked`` is ``"ALL"``, a boolean mask or an index array of finest-level
    triangles.
    """
    if isinstance(hierarchy, Triangulation):
        hierarchy = MeshHierarchy.from_mesh(hierarchy)
    b = bisect(hierarchy.finest, marked)
    return MeshHierarchy(
        hierarchy.levels + (b.mesh,),
        hierarchy.parents + (b.parent,),
        hierarchy.bisected + (b.bisected_edges,),
        hierarchy.midpoints + (b.midpoints,),
    )


def refine_uniform(hierarchy: MeshHierarchy | Triangulation, rounds: int = 2) -> MeshHierarchy:
    """Bisect every element ``rounds`` times (two rounds quadruple the count)."""
    if isinstance(hierarchy, Triangulation):
        hierarchy = MeshHierarchy.from_mesh(hierarchy)
    for _ in range(rounds):
        hierarchy = refine(hierarchy, "ALL")
    return hierarchy


def tilde_nodes(hierarchy: MeshHierarchy, level: int) -> np.ndarray:
    """Nodes whose level-``level`` hat function is new.

    Level 0 returns all coarse nodes. Otherwise: the vertices created at this
    level plus the older vertices whose hat function changed, i.e. the
    endpoints of the edges bisected when passing from ``level - 1``.
    """
    hierarchy._check_level(level)
    if level == 0:
        return np.arange(hierarchy.levels[0].n_vertices)
    k = level - 1
    return np.union1d(hierarchy.midpoints[k], hierarchy.bisected[k].ravel())


def _locate(mesh: Triangulation, x: np.ndarray, candidates=None, tol=1e-12):
    cand = np.arange(mesh.n_triangles) if candidates is None else np.asarray(candidates)
    lam = mesh.barycentric(cand, np.broadcast_to(x, (len(cand), 2))[:, None, :])[:, 0, :]
    inside = np.all(lam >= -tol, axis=1)
    return cand[inside], lam[inside]


def eval_hat(hierarchy: MeshHierarchy, level: int, z: int, x) -> float:
    """Value of the level-``level`` hat function of node ``z`` at point ``x``."""
    mesh = hierarchy.levels[hierarchy._check_level(level)]
    if not 0 <= z < mesh.n_vertices:
        raise IndexError(f"node {z} is not a level-{level} node")
    x = np.asarray(x, dtype=float)
    cand = mesh.vertex_triangle[z].indices
    tris, lam = _locate(mesh, x, cand)
    if len(tris) == 0:
        if len(_locate(hierarchy.coarsest, x)[0]) == 0:
            raise ValueError(f"point {x} lies outside the domain")
        return 0.0
    loc = np.flatnonzero(mesh.triangles[tris[0]] == z)[0]
    return float(np.clip(lam[0, loc], 0.0, 1.0))


def node_diameters(mesh: Triangulation, chunk: int = 4096) -> np.ndarray:
    """Diameter ``h_x`` of every node patch (max pairwise vertex distance)."""
    inc = mesh.vertex_triangle
    valence = np.diff(inc.indptr)
    vmax = int(valence.max())
    nv = mesh.n_vertices
    pad = np.full((nv, vmax), -1, dtype=np.int64)
    rows = np.repeat(np.arange(nv), valence)
    cols = np.arange(len(inc.indices)) - np.repeat(inc.indptr[:-1], valence)
    pad[rows, cols] = inc.indices
    out = np.empty(nv)
    for s in range(0, nv, chunk):
        p = pad[s : s + chunk]
        pts = mesh.corners[np.maximum(p, 0)].reshape(len(p), -1, 2)
        valid = np.repeat(p >= 0, 3, axis=1)
        pts = np.where(valid[..., None], pts, np.nan)
        d = pts[:, :, None, :] - pts[:, None, :, :]
        dist = np.hypot(d[..., 0], d[..., 1])
        out[s : s + chunk] = np.nanmax(dist.reshape(len(p), -1), axis=1)
    return out


@dataclass(frozen=True, eq=False)
class Patch:
    """Elements around a node (``kind='node'``) or touching an element (``'element'``)."""

    center: int
    kind: str
    elements: np.ndarray
    diameter: float


@dataclass(frozen=True, eq=False)
class PatchMap:
    mesh: Triangulation
    node_diameter: np.ndarray = field(repr=False)

    def node(self, x: int) -> Patch:
        els = self.mesh.vertex_triangle[x].indices.copy()
        return Patch(int(x), "node", els, float(self.node_diameter[x]))

    def element(self, t: int) -> Patch:
        inc = self.mesh.vertex_triangle
        els = np.unique(np.concatenate([inc[v].indices for v in self.mesh.triangles[t]]))
        pts = self.mesh.corners[els].reshape(-1, 2)
        d = pts[:, None, :] - pts[None, :, :]
        return Patch(int(t), "element", els, float(np.hypot(d[..., 0], d[..., 1]).max()))

    def element_sizes(self) -> np.ndarray:
        """``|omega_T|`` (number of elements touching ``T``) for every element."""
        inc = self.mesh.vertex_triangle
        touch = (inc.T @ inc).tocsr()
        return np.diff(touch.indptr)


def patches(mesh: Triangulation) -> PatchMap:
    return PatchMap(mesh, _readonly(node_diameters(mesh)))
