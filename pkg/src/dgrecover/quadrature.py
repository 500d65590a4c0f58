"""Quadrature rules on the reference triangle and on segments.

Triangle rules are stored in barycentric coordinates with weights that sum
to the reference measure 1/2, so that on a physical element ``T``

    int_T f  ~=  2 |T| sum_q w_q f(x_q).

Edge rules live on ``[0, 1]`` with weights summing to 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

MAX_TRIANGLE_DEGREE = 10
MAX_EDGE_DEGREE = 21


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Points, weights and declared polynomial exactness of a rule.

    For triangle rules ``points`` has shape ``(nq, 3)`` (barycentric) and the
    weights sum to 1/2. For edge rules ``points`` has shape ``(nq,)`` with
    values in ``[0, 1]`` and the weights sum to 1.
    """

    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    def __post_init__(self):
        for arr in (self.points, self.weights):
            arr.flags.writeable = False

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def reference_points(self) -> np.ndarray:
        """Triangle points in reference coordinates ``(xi, eta)``."""
        return self.points[:, 1:]


def _orbit3(a, b):
    # permutations of (a, b, b)
    return [(a, b, b), (b, a, b), (b, b, a)]


def _symmetric_rule(orbits, degree):
    pts, wts = [], []
    for w, orbit in orbits:
        for p in orbit:
            pts.append(p)
            wts.append(w)
    return QuadratureRule(np.array(pts, dtype=float), 0.5 * np.array(wts), degree)


def _collapsed_gauss(degree):
    # Duffy-collapsed product of Gauss-Jacobi(1, 0) and Gauss-Legendre points
    n = (degree + 2) // 2
    xa, wa = roots_jacobi(n, 1.0, 0.0)
    xb, wb = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (xa + 1.0)
    t = 0.5 * (xb + 1.0)
    ws = wa / 4.0
    wt = wb / 2.0
    S, Tt = np.meshgrid(s, t, indexing="ij")
    xi = (1.0 - S) * Tt
    eta = S
    w = np.outer(ws, wt)
    xi, eta, w = xi.ravel(), eta.ravel(), w.ravel()
    pts = np.column_stack([1.0 - xi - eta, xi, eta])
    return QuadratureRule(pts, w, 2 * n - 1)


def _make_triangle_rules():
    third = 1.0 / 3.0
    rules = {
        1: _symmetric_rule([(1.0, [(third, third, third)])], 1),
        2: _symmetric_rule([(third, [(0.0, 0.5, 0.5), (0.5, 0.0, 0.5), (0.5, 0.5, 0.0)])], 2),
    }
    a1, w1 = 0.44594849091596488632, 0.22338158967801146570
    a2, w2 = 0.09157621350977074346, 0.10995174365532186764
    deg4 = _symmetric_rule(
        [(w1, _orbit3(1.0 - 2 * a1, a1)), (w2, _orbit3(1.0 - 2 * a2, a2))], 4
    )
    rules[3] = rules[4] = deg4
    b1, v1 = 0.47014206410511508977, 0.13239415278850618074
    b2, v2 = 0.10128650732345633880, 0.12593918054482715260
    rules[5] = _symmetric_rule(
        [
            (0.225, [(third, third, third)]),
            (v1, _orbit3(1.0 - 2 * b1, b1)),
            (v2, _orbit3(1.0 - 2 * b2, b2)),
        ],
        5,
    )
    for d in range(6, MAX_TRIANGLE_DEGREE + 1):
        rules[d] = _collapsed_gauss(d)
    return rules


_TRIANGLE_RULES = _make_triangle_rules()


def triangle_rule(degree: int) -> QuadratureRule:
    """Return a rule exact for polynomials of total degree ``degree``.

    Degree 1 is the centroid rule and degree 2 the edge-midpoint rule.
    Higher degrees use symmetric Dunavant rules (up to 5) and collapsed
    Gauss products beyond; every shipped rule has positive weights.
    """
    if not 1 <= degree <= MAX_TRIANGLE_DEGREE:
        raise ValueError(f"triangle rule degree must be in [1, {MAX_TRIANGLE_DEGREE}], got {degree}")
    return _TRIANGLE_RULES[int(degree)]


def edge_rule(degree: int) -> QuadratureRule:
    """Gauss-Legendre rule on ``[0, 1]`` exact up to ``degree``."""
    if not 1 <= degree <= MAX_EDGE_DEGREE:
        raise ValueError(f"edge rule degree must be in [1, {MAX_EDGE_DEGREE}], got {degree}")
    n = (int(degree) + 2) // 2
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w, 2 * n - 1)


def integrate(rule: QuadratureRule, entity, integrand: Callable) -> float:
    """Integrate ``integrand(x, y)`` over a triangle or a segment.

    ``entity`` is a ``(3, 2)`` array of triangle vertices or a ``(2, 2)``
    array of segment endpoints. The integrand receives coordinate arrays
    and must return an array of the same shape.
    """
    verts = np.asarray(entity, dtype=float)
    if verts.shape == (3, 2):
        pts = rule.points @ verts
        d1, d2 = verts[1] - verts[0], verts[2] - verts[0]
        jac = abs(d1[0] * d2[1] - d1[1] * d2[0])
        if jac == 0.0:
            raise ValueError("degenerate triangle")
        vals = np.asarray(integrand(pts[:, 0], pts[:, 1]), dtype=float)
        return float(jac * np.dot(rule.weights, vals))
    if verts.shape == (2, 2):
        if rule.points.ndim != 1:
            raise ValueError("segment integration needs an edge rule")
        pts = verts[0] + np.outer(rule.points, verts[1] - verts[0])
        length = float(np.hypot(*(verts[1] - verts[0])))
        if length == 0.0:
            raise ValueError("degenerate segment")
        vals = np.asarray(integrand(pts[:, 0], pts[:, 1]), dtype=float)
        return float(length * np.dot(rule.weights, vals))
    raise ValueError(f"entity must be a triangle (3, 2) or a segment (2, 2), got {verts.shape}")
