"""Coefficients, coefficient bounds and the manufactured benchmark cases.

All callbacks are vectorized: they take coordinate arrays ``x, y`` of equal
shape and return arrays of that shape (scalars) or of shape ``(..., 2)``
(vectors).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import DomainSpec, quadrant_square, unit_square

__all__ = [
    "Coefficients",
    "CoefficientBounds",
    "BenchmarkCase",
    "AngularProfile",
    "coefficient_bounds",
    "make_case",
    "case_names",
    "singular_exponent",
    "angular_profile",
    "truncation",
]


def constant_field(value: float) -> Callable:
    def f(x, y):
        return np.full(np.shape(x), float(value))

    return f


def constant_vector(bx: float, by: float) -> Callable:
    def f(x, y):
        out = np.empty(np.shape(x) + (2,))
        out[..., 0] = bx
        out[..., 1] = by
        return out

    return f


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Piecewise-constant SPD diffusion, convection field and reaction.

    ``diffusion[j]`` is the matrix on subdomain ``j``. ``zero_order_inf`` and
    ``reaction_ratio_sup`` are the analytic values of
    ``inf (mu - div(beta)/2)`` and ``sup |mu| / (mu - div(beta)/2)`` over the
    domain, when known.
    """

    diffusion: np.ndarray
    beta: Callable
    mu: Callable
    div_beta: Callable
    zero_order_inf: float | None = None
    reaction_ratio_sup: float | None = None
    beta_sup: float | None = None
    mu_sup: float | None = None

    def __post_init__(self):
        a = np.asarray(self.diffusion, dtype=float)
        if a.ndim == 2:
            a = a[None]
        if a.ndim != 3 or a.shape[1:] != (2, 2):
            raise ValueError("diffusion must be a sequence of 2x2 matrices")
        if not np.allclose(a, np.swapaxes(a, 1, 2), rtol=0, atol=1e-14 * np.abs(a).max()):
            raise ValueError("diffusion matrices must be symmetric")
        eig = np.linalg.eigvalsh(a)
        if np.any(eig <= 0):
            raise ValueError("diffusion matrices must be positive definite")
        a.flags.writeable = False
        eig.flags.writeable = False
        object.__setattr__(self, "diffusion", a)
        object.__setattr__(self, "_eig", eig)

    @property
    def eigenvalues(self) -> np.ndarray:
        """``(J, 2)`` ascending eigenvalues per subdomain."""
        return self._eig

    def a(self, tags) -> np.ndarray:
        return self.diffusion[np.asarray(tags)]

    def zero_order(self, x, y) -> np.ndarray:
        """``mu - div(beta)/2``."""
        return self.mu(x, y) - 0.5 * self.div_beta(x, y)

    def convection_free(self) -> bool:
        return self.beta_sup == 0.0


@dataclass(frozen=True)
class CoefficientBounds:
    c_a: float
    C_a: float
    c_beta_mu: float
    M: float

    @property
    def kappa(self) -> float:
        return self.C_a / self.c_a


def _reaction_ratio(mu, zero_order):
    mu = np.abs(np.asarray(mu, dtype=float))
    z = np.asarray(zero_order, dtype=float)
    ratio = np.where(z > 0, mu / np.where(z > 0, z, 1.0), 0.0)
    if np.any((z <= 0) & (mu > 0)):
        raise ValueError("mu must vanish where mu - div(beta)/2 = 0")
    return max(1.0, float(ratio.max(initial=0.0)))


def coefficient_bounds(coeffs: Coefficients, tags=None, points=None) -> CoefficientBounds:
    """Eigenvalue extremes of ``a`` and reaction bounds over a region.

    ``tags`` lists the subdomains meeting the region (``None`` means the
    whole domain). ``points`` are optional ``(n, 2)`` sample points of the
    region; without them the analytic infimum and ratio stored on
    ``coeffs`` are used.
    """
    eig = coeffs.eigenvalues
    if tags is None:
        sel = eig
    else:
        tags = np.unique(np.asarray(tags, dtype=np.int64))
        if tags.size == 0:
            raise ValueError("empty region")
        sel = eig[tags]
    c_a, C_a = float(sel[:, 0].min()), float(sel[:, 1].max())
    if points is not None:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        if len(p) == 0:
            raise ValueError("empty region")
        z = coeffs.zero_order(p[:, 0], p[:, 1])
        c_bm = float(z.min())
        M = _reaction_ratio(coeffs.mu(p[:, 0], p[:, 1]), z)
    else:
        if coeffs.zero_order_inf is None or coeffs.reaction_ratio_sup is None:
            raise ValueError("sample points needed: coefficients carry no analytic bounds")
        c_bm = float(coeffs.zero_order_inf)
        M = float(coeffs.reaction_ratio_sup)
    if c_bm < 0:
        raise ValueError("mu - div(beta)/2 must be nonnegative")
    return CoefficientBounds(c_a, C_a, c_bm, M)


@dataclass(frozen=True, eq=False)
class BenchmarkCase:
    """A manufactured problem with exact solution, gradient and source."""

    name: str
    coefficients: Coefficients
    u: Callable
    grad_u: Callable
    f: Callable
    domain: DomainSpec
    initial_h: float
    params: dict = field(default_factory=dict)
    penalty: float = 10.0
    gamma_a: float = 1.0
    # extra quadrature degree for exact-error integrals
    error_quadrature_boost: int = 0
    laplacian: Callable | None = None

    def residual(self, x, y, tags) -> np.ndarray:
        """Strong PDE residual ``-div(a grad u) + beta.grad u + mu u - f``."""
        if self.laplacian is None:
            raise ValueError("case carries no Laplacian")
        c = self.coefficients
        eps = c.diffusion[np.asarray(tags), 0, 0]
        g = self.grad_u(x, y)
        b = c.beta(x, y)
        return -eps * self.laplacian(x, y) + (b * g).sum(-1) + c.mu(x, y) * self.u(x, y) - self.f(x, y)


# -- homogeneous case ---------------------------------------------------------


def _homogeneous(epsilon=1e-2, penalty=250.0, gamma_a=None):
    epsilon = float(epsilon)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")

    def factors(x, y):
        t = np.tanh(10.0 - 20.0 * x)
        g = 1.0 - t
        g1 = 20.0 * (1.0 - t * t)
        g2 = 800.0 * t * (1.0 - t * t)
        p = 0.5 * x * (x - 1.0)
        p1 = x - 0.5
        P = p * g
        P1 = p1 * g + p * g1
        P2 = g + 2.0 * p1 * g1 + p * g2
        q = y * (y - 1.0)
        q1 = 2.0 * y - 1.0
        return P, P1, P2, q, q1

    def u(x, y):
        P, _, _, q, _ = factors(x, y)
        return P * q

    def grad_u(x, y):
        P, P1, _, q, q1 = factors(x, y)
        return np.stack([P1 * q, P * q1], axis=-1)

    def lap(x, y):
        P, _, P2, q, _ = factors(x, y)
        return P2 * q + 2.0 * P

    def f(x, y):
        P, P1, P2, q, _ = factors(x, y)
        return -epsilon * (P2 * q + 2.0 * P) + P1 * q + P * q

    coeffs = Coefficients(
        epsilon * np.eye(2),
        constant_vector(1.0, 0.0),
        constant_field(1.0),
        constant_field(0.0),
        zero_order_inf=1.0,
        reaction_ratio_sup=1.0,
        beta_sup=1.0,
        mu_sup=1.0,
    )
    return BenchmarkCase(
        "homogeneous",
        coeffs,
        u,
        grad_u,
        f,
        unit_square(),
        initial_h=1.0 / 16.0,
        params={"epsilon": epsilon},
        penalty=float(penalty),
        gamma_a=epsilon if gamma_a is None else float(gamma_a),
        laplacian=lap,
    )


# -- singular interface case --------------------------------------------------


def singular_exponent(C: float) -> float:
    """Exponent ``alpha`` solving ``tan(alpha pi / 4) = C**-0.5``."""
    C = float(C)
    if not C > 0:
        raise ValueError("contrast C must be positive")
    return 4.0 / np.pi * np.arctan(C**-0.5)


@dataclass(frozen=True, eq=False)
class AngularProfile:
    """``phi(theta) = A_k cos(alpha theta) + B_k sin(alpha theta)`` on quadrant ``k``.

    Quadrant ``k`` covers ``theta in [k pi/2, (k+1) pi/2]`` and has diffusion
    ``eps[k]``. Normalized so that ``phi(pi/4) = 1``.
    """

    alpha: float
    A: np.ndarray
    B: np.ndarray
    eps: np.ndarray

    def phi(self, theta, k):
        a = self.alpha
        return self.A[k] * np.cos(a * theta) + self.B[k] * np.sin(a * theta)

    def dphi(self, theta, k):
        a = self.alpha
        return a * (self.B[k] * np.cos(a * theta) - self.A[k] * np.sin(a * theta))

    def interface_system(self) -> np.ndarray:
        return _interface_matrix(self.alpha, self.eps)


def _interface_matrix(alpha, eps):
    def row(k, t, flux):
        r = np.zeros(8)
        if flux:
            r[2 * k] = -alpha * np.sin(alpha * t) * eps[k]
            r[2 * k + 1] = alpha * np.cos(alpha * t) * eps[k]
        else:
            r[2 * k] = np.cos(alpha * t)
            r[2 * k + 1] = np.sin(alpha * t)
        return r

    M = np.zeros((8, 8))
    for j in range(4):
        k = (j + 1) % 4
        t = (j + 1) * np.pi / 2
        tk = t if k else 0.0
        M[2 * j] = row(j, t, False) - row(k, tk, False)
        M[2 * j + 1] = row(j, t, True) - row(k, tk, True)
    return M


def angular_profile(C: float, alpha: float | None = None) -> AngularProfile:
    """Coefficients of the piecewise trigonometric angular factor.

    Solves the homogeneous 8x8 system of value and flux continuity on the
    four axis half-lines (``eps = (C, 1, C, 1)``) for its null vector.
    """
    if alpha is None:
        alpha = singular_exponent(C)
    eps = np.array([C, 1.0, C, 1.0], dtype=float)
    M = _interface_matrix(alpha, eps)
    _, s, vt = np.linalg.svd(M)
    if s[-1] > 1e-10 * s[0] or s[-2] < 1e-8 * s[0]:
        raise ValueError("interface system does not have a one-dimensional null space")
    v = vt[-1]
    A, B = v[0::2].copy(), v[1::2].copy()
    norm = A[0] * np.cos(alpha * np.pi / 4) + B[0] * np.sin(alpha * np.pi / 4)
    A /= norm
    B /= norm
    return AngularProfile(float(alpha), A, B, eps)


def truncation(r):
    """C^1 cutoff: 1 on ``[0, 1/3]``, 0 beyond ``2/3``; returns value, first and second derivative."""
    r = np.asarray(r, dtype=float)
    mid = (r > 1.0 / 3.0) & (r < 2.0 / 3.0)
    s = r - 2.0 / 3.0
    val = np.where(r <= 1.0 / 3.0, 1.0, np.where(mid, s * s * (54.0 * r - 9.0), 0.0))
    d1 = np.where(mid, 2.0 * s * (54.0 * r - 9.0) + 54.0 * s * s, 0.0)
    d2 = np.where(mid, 2.0 * (54.0 * r - 9.0) + 216.0 * s, 0.0)
    return val, d1, d2


def _singular(C=5.0, penalty=None, gamma_a=1.0):
    C = float(C)
    if not C > 1:
        raise ValueError("contrast C must exceed 1")
    if penalty is None:
        penalty = 500.0 if C >= 100 else 50.0
    prof = angular_profile(C)
    alpha = prof.alpha
    eps = prof.eps

    def polar(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        th = np.mod(np.arctan2(y, x), 2.0 * np.pi)
        k = np.clip((th // (np.pi / 2)).astype(np.int64), 0, 3)
        return r, th, k

    def pieces(x, y):
        r, th, k = polar(x, y)
        rs = np.where(r > 0, r, 1.0)
        ph = prof.phi(th, k)
        dph = prof.dphi(th, k)
        eta, d1, d2 = truncation(r)
        ra = np.where(r > 0, rs**alpha, 0.0)
        ram1 = np.where(r > 0, rs ** (alpha - 1.0), 0.0)
        return r, rs, th, k, ph, dph, eta, d1, d2, ra, ram1

    def u(x, y):
        _, _, _, _, ph, _, eta, _, _, ra, _ = pieces(x, y)
        return eta * ra * ph

    def grad_u(x, y):
        _, _, th, _, ph, dph, eta, d1, _, ra, ram1 = pieces(x, y)
        radial = d1 * ra * ph + eta * alpha * ram1 * ph
        angular = eta * ram1 * dph
        c, s = np.cos(th), np.sin(th)
        return np.stack([radial * c - angular * s, radial * s + angular * c], axis=-1)

    def lap(x, y):
        r, rs, _, _, ph, _, _, d1, d2, ra, ram1 = pieces(x, y)
        out = 2.0 * d1 * alpha * ram1 * ph + (d2 + d1 / rs) * ra * ph
        return np.where(r > 0, out, 0.0)

    def f(x, y):
        _, _, _, k, *_ = pieces(x, y)
        return -eps[k] * lap(x, y) + grad_u(x, y)[..., 0] + u(x, y)

    coeffs = Coefficients(
        np.array([e * np.eye(2) for e in eps]),
        constant_vector(1.0, 0.0),
        constant_field(1.0),
        constant_field(0.0),
        zero_order_inf=1.0,
        reaction_ratio_sup=1.0,
        beta_sup=1.0,
        mu_sup=1.0,
    )
    return BenchmarkCase(
        "singular",
        coeffs,
        u,
        grad_u,
        f,
        quadrant_square(),
        initial_h=0.25,
        params={"C": C, "alpha": alpha, "profile": prof},
        penalty=float(penalty),
        gamma_a=float(gamma_a),
        error_quadrature_boost=2,
        laplacian=lap,
    )


# -- boundary layer case ------------------------------------------------------


def _boundary_layer(epsilon=1e-2, layer=1e-3, penalty=250.0, gamma_a=None):
    epsilon = float(epsilon)
    d = float(layer)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not d > 0:
        raise ValueError("layer width must be positive")

    def factors(x, y):
        ex = np.exp(-x)
        E = np.exp(-1.0 + (x - 1.0) / d)
        X = x * (ex - E)
        X1 = ex - E - x * (ex + E / d)
        X2 = -2.0 * ex - 2.0 * E / d + x * (ex - E / (d * d))
        Y = 10.0 * y * (1.0 - y)
        Y1 = 10.0 * (1.0 - 2.0 * y)
        return X, X1, X2, Y, Y1

    def u(x, y):
        X, _, _, Y, _ = factors(x, y)
        return X * Y

    def grad_u(x, y):
        X, X1, _, Y, Y1 = factors(x, y)
        return np.stack([X1 * Y, X * Y1], axis=-1)

    def lap(x, y):
        X, _, X2, Y, _ = factors(x, y)
        return X2 * Y - 20.0 * X

    def f(x, y):
        X, X1, X2, Y, _ = factors(x, y)
        return -epsilon * (X2 * Y - 20.0 * X) + X1 * Y

    coeffs = Coefficients(
        epsilon * np.eye(2),
        constant_vector(1.0, 0.0),
        constant_field(0.0),
        constant_field(0.0),
        zero_order_inf=0.0,
        reaction_ratio_sup=1.0,
        beta_sup=1.0,
        mu_sup=0.0,
    )
    return BenchmarkCase(
        "boundary_layer",
        coeffs,
        u,
        grad_u,
        f,
        unit_square(),
        initial_h=1.0 / 8.0,
        params={"epsilon": epsilon, "layer": d},
        penalty=float(penalty),
        gamma_a=epsilon if gamma_a is None else float(gamma_a),
        laplacian=lap,
    )


_CASES = {
    "homogeneous": (_homogeneous, "u = x(x-1)y(y-1)(1-tanh(10-20x))/2 on the unit square, a = eps I, beta = (1,0), mu = 1"),
    "singular": (_singular, "quadrant interface problem on (-1,1)^2 with contrast C, u = eta(r) r^alpha phi(theta)"),
    "boundary_layer": (_boundary_layer, "u = 10y(1-y)x(exp(-x) - exp(-1+(x-1)/layer)), a = eps I, beta = (1,0), mu = 0"),
}


def case_names() -> dict[str, str]:
    return {k: v[1] for k, v in _CASES.items()}


def make_case(name: str, **params) -> BenchmarkCase:
    """Build a benchmark case by name.

    Parameters: ``homogeneous(epsilon)``, ``singular(C)``,
    ``boundary_layer(epsilon, layer)``; each also accepts ``penalty`` and
    ``gamma_a`` overrides of its default interior-penalty settings.
    """
    try:
        builder = _CASES[name][0]
    except KeyError:
        raise ValueError(f"unknown case {name!r}; choose from {sorted(_CASES)}") from None
    params = {k: v for k, v in params.items() if v is not None}
    try:
        return builder(**params)
    except TypeError as exc:
        raise ValueError(f"invalid parameters for case {name!r}: {exc}") from None
