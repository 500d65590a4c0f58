"""Independent symbolic oracles: exact integration of polynomials with sympy.

Geometry is taken from raw vertex coordinates only, so nothing here relies on
the package's quadrature, basis or topology code.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import sympy as sp

x, y = sp.symbols("x y", real=True)
s, t = sp.symbols("s t", real=True)


def rat(v):
    if isinstance(v, sp.Basic):
        return v
    return sp.Rational(str(float(v))) if float(v) != int(v) else sp.Integer(int(v))


def _key(verts):
    return tuple((rat(a), rat(b)) for a, b in verts)


@lru_cache(maxsize=None)
def _tri_moment(a, b, key):
    (x0, y0), (x1, y1), (x2, y2) = key
    X = x0 + s * (x1 - x0) + t * (x2 - x0)
    Y = y0 + s * (y1 - y0) + t * (y2 - y0)
    jac = sp.Abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
    e = sp.expand(X**a * Y**b)
    return jac * sp.integrate(sp.integrate(e, (t, 0, 1 - s)), (s, 0, 1))


@lru_cache(maxsize=None)
def _seg_moment(a, b, key):
    (ax, ay), (bx, by) = key
    X = ax + s * (bx - ax)
    Y = ay + s * (by - ay)
    length = sp.sqrt((bx - ax) ** 2 + (by - ay) ** 2)
    return length * sp.integrate(sp.expand(X**a * Y**b), (s, 0, 1))


def _by_monomials(expr, moment, key):
    poly = sp.Poly(sp.expand(expr), x, y)
    return sp.expand(sum(c * moment(a, b, key) for (a, b), c in poly.terms()))


def tri_integral(expr, verts):
    """Exact integral of a polynomial in ``x, y`` (other symbols allowed) over a triangle."""
    return _by_monomials(expr, _tri_moment, _key(verts))


def seg_integral(expr, a, b):
    """Exact integral along the segment from ``a`` to ``b`` (arc length)."""
    return _by_monomials(expr, _seg_moment, _key((a, b)))


def linear_hats(verts):
    """The three barycentric coordinates of a triangle as polynomials in ``x, y``."""
    P = list(_key(verts))
    out = []
    for k in range(3):
        (xa, ya), (xb, yb) = P[(k + 1) % 3], P[(k + 2) % 3]
        num = (xb - xa) * (y - ya) - (yb - ya) * (x - xa)
        den = num.subs({x: P[k][0], y: P[k][1]}, simultaneous=True)
        out.append(sp.expand(num / den))
    return out


def lagrange_basis(verts, degree):
    lam = linear_hats(verts)
    if degree == 1:
        return lam
    quad = [sp.expand(l * (2 * l - 1)) for l in lam]
    mids = [sp.expand(4 * lam[(k + 1) % 3] * lam[(k + 2) % 3]) for k in range(3)]
    return quad + mids


def grad(e):
    return sp.Matrix([sp.diff(e, x), sp.diff(e, y)])


def outward_normal(verts, k):
    """Exact unit outward normal of the edge opposite local vertex ``k``."""
    P = [sp.Matrix(p) for p in _key(verts)]
    a, b = P[(k + 1) % 3], P[(k + 2) % 3]
    d = b - a
    n = sp.Matrix([d[1], -d[0]])
    if n.dot(P[k] - a) > 0:
        n = -n
    return n / sp.sqrt(n.dot(n))


def edges_of(tris):
    """Map from an edge (frozenset of endpoint keys) to ``[(triangle, local k), ...]``."""
    out = {}
    for ti, verts in enumerate(tris):
        key = _key(verts)
        for k in range(3):
            e = frozenset((key[(k + 1) % 3], key[(k + 2) % 3]))
            out.setdefault(e, []).append((ti, k))
    return out


def _P(e):
    return sp.Poly(sp.expand(e), x, y)


def _integrate_poly(P, moment, key):
    return sum(c * moment(a, b, key) for (a, b), c in P.terms())


def brute_force_bh(tris, a_mats, beta, mu, div_beta, theta, penalty, gamma_a, upwind=True, degree=1):
    """Matrix ``M[i, j] = B_h(phi_j, phi_i)`` of the interior-penalty form.

    ``tris`` lists vertex triples in the mesh's local order (which fixes the
    dof order), ``a_mats`` one 2x2 matrix per triangle, ``beta`` a constant
    vector and ``mu``, ``div_beta`` polynomials in ``x, y``. Every term is
    integrated exactly, pair by pair, with jumps ``[q] = q+ n+ + q- n-`` and
    unweighted means.
    """
    nb = 3 if degree == 1 else 6
    nt = len(tris)
    n = nt * nb
    beta = [rat(b) for b in beta]
    A = [[[rat(a_mats[t][i][j]) for j in range(2)] for i in range(2)] for t in range(nt)]
    keys = [_key(v) for v in tris]
    phi = [[_P(b) for b in lagrange_basis(v, degree)] for v in tris]
    dphi = [[(p.diff(x), p.diff(y)) for p in row] for row in phi]
    react = _P(mu - div_beta)
    M = [[sp.Integer(0)] * n for _ in range(n)]

    def flux(t, i, nv):
        # (a grad phi) . n
        gx, gy = dphi[t][i]
        return gx * (A[t][0][0] * nv[0] + A[t][1][0] * nv[1]) + gy * (A[t][0][1] * nv[0] + A[t][1][1] * nv[1])

    for t in range(nt):
        for i in range(nb):
            for j in range(nb):
                gu, gv = dphi[t][j], dphi[t][i]
                agu = (A[t][0][0] * gu[0] + A[t][0][1] * gu[1], A[t][1][0] * gu[0] + A[t][1][1] * gu[1])
                dens = agu[0] * gv[0] + agu[1] * gv[1] + react * phi[t][j] * phi[t][i]
                dens -= phi[t][j] * (beta[0] * gv[0] + beta[1] * gv[1])
                M[t * nb + i][t * nb + j] += _integrate_poly(dens, _tri_moment, keys[t])

    for e, sides in edges_of(tris).items():
        pa, pb = sorted(e)
        nvec = outward_normal(tris[sides[0][0]], sides[0][1])
        nv = (nvec[0], nvec[1])
        h = sp.sqrt((pa[0] - pb[0]) ** 2 + (pa[1] - pb[1]) ** 2)
        bn = beta[0] * nv[0] + beta[1] * nv[1]
        gam = rat(penalty) * rat(gamma_a) / h + (sp.Abs(bn) / 2 if upwind else 0)
        ts = [t for t, _ in sides]
        sign = [1, -1][: len(ts)]
        wt = sp.Integer(1) if len(ts) == 1 else sp.Rational(1, 2)
        key = (pa, pb)
        for si, tu in enumerate(ts):  # side of the trial function phi_j
            for sv_, tv in enumerate(ts):  # side of the test function phi_i
                for i in range(nb):
                    for j in range(nb):
                        ju = sign[si] * phi[tu][j]  # scalar jump factor along n
                        jv = sign[sv_] * phi[tv][i]
                        dens = -(rat(theta) * wt * flux(tv, i, nv) * ju + wt * flux(tu, j, nv) * jv)
                        dens += gam * ju * jv + wt * phi[tu][j] * bn * jv
                        M[tv * nb + i][tu * nb + j] += _integrate_poly(dens, _seg_moment, key)
    return np.array([[as_float(v) for v in row] for row in M])


def as_float(v) -> float:
    return float(sp.N(v, 30))


def _area(verts):
    return tri_integral(sp.Integer(1), verts)


def _boundary_info(tris):
    """Boundary edges (frozensets of vertex ids) and boundary vertex ids of a small mesh."""
    count = {}
    for tr in tris:
        for k in range(3):
            e = frozenset((int(tr[(k + 1) % 3]), int(tr[(k + 2) % 3])))
            count[e] = count.get(e, 0) + 1
    bedges = {e for e, c in count.items() if c == 1}
    return count, bedges, set().union(*bedges)


def single_domain_indicators(vertices, tris, coefs, A, zero_order, degree=1):
    """Symbolic indicators for one subdomain with constant diffusion ``A``.

    The recovered flux takes at every vertex the area-weighted mean of
    ``A grad u_T``, the conforming interpolant the area-weighted mean of the
    traces at interior vertices and edge midpoints (zero on the boundary).
    Returns ``cf2, nc2_full, nc2, je2`` with ``je2`` keyed by the vertex-id
    pair of each edge.
    """
    A = sp.Matrix(A)
    Ainv = A.inv()
    V = [vertices[tr] for tr in tris]
    U = [sum(rat(c) * phi for c, phi in zip(coefs[t], lagrange_basis(V[t], degree))) for t in range(len(tris))]
    areas = [_area(v) for v in V]
    count, bedges, bverts = _boundary_info(tris)

    def at(e, p):
        return e.subs({x: rat(p[0]), y: rat(p[1])}, simultaneous=True)

    def vmean(node_pts, members, fn):
        vals = [areas[t] * fn(t, node_pts) for t in members]
        acc = vals[0]
        for v in vals[1:]:
            acc = acc + v
        return acc / sum(areas[t] for t in members)

    # recovered flux at each vertex
    Gv = {}
    for v in range(len(vertices)):
        members = [t for t, tr in enumerate(tris) if v in tr]
        if members:
            Gv[v] = vmean(vertices[v], members, lambda t, p: (A * grad(U[t])).applyfunc(lambda e: at(e, p)))
    # conforming interpolant
    Iv = {v: (sp.Integer(0) if v in bverts else vmean(vertices[v], [t for t, tr in enumerate(tris) if v in tr],
                                                      lambda t, p: at(U[t], p))) for v in Gv}
    Ie = {}
    if degree == 2:
        for e in count:
            a, b = sorted(e)
            mid = (vertices[a] + vertices[b]) / 2
            if e in bedges:
                Ie[e] = sp.Integer(0)
            else:
                members = [t for t, tr in enumerate(tris) if set(e) <= set(int(i) for i in tr)]
                Ie[e] = vmean(mid, members, lambda t, p: at(U[t], p))
    cf2, full, nc2 = [], [], []
    for t, tr in enumerate(tris):
        lam = linear_hats(V[t])
        G = sum((Gv[int(v)] * lam[k] for k, v in enumerate(tr)), sp.zeros(2, 1))
        basis = lagrange_basis(V[t], degree)
        Is = sum(Iv[int(v)] * basis[k] for k, v in enumerate(tr))
        if degree == 2:
            Is += sum(Ie[frozenset((int(tr[(k + 1) % 3]), int(tr[(k + 2) % 3])))] * basis[3 + k] for k in range(3))
        d = A * grad(U[t]) - G
        D = Is - U[t]
        cf2.append(tri_integral((d.T * Ainv * d)[0], V[t]))
        z = tri_integral(zero_order * D**2, V[t])
        nc2.append(z)
        full.append(tri_integral((grad(D).T * A * grad(D))[0], V[t]) + z)
    je2 = {}
    for e in count:
        a, b = sorted(e)
        pa, pb = vertices[a], vertices[b]
        sides = [t for t, tr in enumerate(tris) if set(e) <= set(int(i) for i in tr)]
        jump = U[sides[0]] - (U[sides[1]] if len(sides) == 2 else 0)
        length = sp.sqrt(sum((rat(p) - rat(q)) ** 2 for p, q in zip(pa, pb)))
        je2[(a, b)] = seg_integral(jump**2, pa, pb) / length
    return cf2, full, nc2, je2


def rho_oracle(vertices, tris, r_exprs):
    """``(rbar_x, rho_x^2)`` per vertex for the elementwise residual polynomials ``r_exprs``."""
    _, _, bverts = _boundary_info(tris)
    out = {}
    for v in range(len(vertices)):
        members = [t for t, tr in enumerate(tris) if v in tr]
        if not members:
            continue
        hats = [linear_hats(vertices[tris[t]])[list(tris[t]).index(v)] for t in members]
        if v in bverts:
            rbar = sp.Integer(0)
        else:
            rbar = (sum(tri_integral(r_exprs[t] * l, vertices[tris[t]]) for t, l in zip(members, hats))
                    / sum(tri_integral(l, vertices[tris[t]]) for t, l in zip(members, hats)))
        pts = {int(i) for t in members for i in tris[t]}
        hx2 = max(sum((rat(p) - rat(q)) ** 2 for p, q in zip(vertices[i], vertices[j])) for i in pts for j in pts)
        w = sum(tri_integral((r_exprs[t] - rbar) ** 2 * l, vertices[tris[t]]) for t, l in zip(members, hats))
        out[v] = (rbar, hx2 * w)
    return out


def hat_load_oracle(vertices, tris, G_nodal, I_nodal, beta, mu, f, hat_nodal):
    """``<R, lambda> = int G . grad lambda + (beta . grad I + mu I - f) lambda``.

    ``G_nodal[t]`` (3x2), ``I_nodal`` per vertex and ``hat_nodal[t]`` (3,) give
    the piecewise-linear fields by their values at the corners of each triangle.
    """
    beta = sp.Matrix([rat(b) for b in beta])
    total = sp.Integer(0)
    for t, tr in enumerate(tris):
        verts = vertices[tr]
        lam = linear_hats(verts)
        G = sum((sp.Matrix([rat(c) for c in G_nodal[t][k]]) * lam[k] for k in range(3)), sp.zeros(2, 1))
        I = sum(rat(I_nodal[v]) * lam[k] for k, v in enumerate(tr))
        phi = sum(rat(hat_nodal[t][k]) * lam[k] for k in range(3))
        total += tri_integral((G.T * grad(phi))[0] + ((beta.T * grad(I))[0] + mu * I - f) * phi, verts)
    return total
