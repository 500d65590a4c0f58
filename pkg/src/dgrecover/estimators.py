"""Local indicators, security terms, oscillations and per-mesh reports."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dg import DgSolution, DgSpace, error_norms, jump_norms
from .mesh import MeshHierarchy, Triangulation, node_diameters, tilde_nodes
from .problem import BenchmarkCase, CoefficientBounds, Coefficients, coefficient_bounds
from .quadrature import triangle_rule
from .recovery import OswaldInterpolant, RecoveredGradient, oswald_interpolate, recover_gradient

__all__ = [
    "LocalIndicators",
    "SecurityTerms",
    "EstimatorReport",
    "local_indicators",
    "element_residual",
    "residual_values",
    "security_rho",
    "security_gamma",
    "hat_loads",
    "oscillation",
    "lower_bound_constants",
    "recovery_error",
    "build_report",
    "convergence_orders",
]


def _rule_degree(solution: DgSolution, degree=None):
    return min(10, 2 * solution.space.degree + 4) if degree is None else int(degree)


def _weights(mesh: Triangulation, rule):
    return 2.0 * mesh.areas[:, None] * rule.weights[None, :]


@dataclass(frozen=True, eq=False)
class LocalIndicators:
    """Elementwise indicators (not squared) and squared edge jumps."""

    eta_CF: np.ndarray
    eta_NC: np.ndarray
    eta_NC2: np.ndarray
    eta_J: np.ndarray
    eta_J_edge2: np.ndarray

    @property
    def marking(self) -> np.ndarray:
        """``eta_CF,T + eta_NC,T + eta_J,T``."""
        return self.eta_CF + self.eta_NC + self.eta_J

    def totals(self) -> dict[str, float]:
        return {
            "eta_CF": float(np.sqrt((self.eta_CF**2).sum())),
            "eta_NC": float(np.sqrt((self.eta_NC**2).sum())),
            "eta_NC2": float(np.sqrt((self.eta_NC2**2).sum())),
            "eta_J": float(np.sqrt(self.eta_J_edge2.sum())),
        }


def local_indicators(
    solution: DgSolution,
    oswald: OswaldInterpolant,
    G: RecoveredGradient,
    coeffs: Coefficients,
    degree: int | None = None,
) -> LocalIndicators:
    """Conforming-flux, nonconforming and jump indicators on every element.

    Interior edge jumps are split evenly between the two neighbours and
    boundary edges count fully, so ``sum_T eta_J,T^2 = sum_e eta_J,e^2``.
    """
    mesh = solution.space.mesh
    rule = triangle_rule(_rule_degree(solution, degree))
    X = solution.space.points(rule.points)
    x, y = X[..., 0], X[..., 1]
    wA = _weights(mesh, rule)
    a = coeffs.a(mesh.tags)
    ainv = np.linalg.inv(a)

    d = np.einsum("tde,tqe->tqd", a, solution.gradients(rule.points)) - G.values(rule.points)
    cf2 = (wA * np.einsum("tqd,tde,tqe->tq", d, ainv, d)).sum(1)

    diff = DgSolution(solution.space, oswald.to_dg(solution.space).coefficients - solution.coefficients)
    zero = (wA * coeffs.zero_order(x, y) * diff.values(rule.points) ** 2).sum(1)
    g = diff.gradients(rule.points)
    grad = (wA * np.einsum("tqd,tde,tqe->tq", g, a, g)).sum(1)

    je2 = jump_norms(solution)
    share = np.where(mesh.boundary_edges, 1.0, 0.5)
    jt2 = (je2 * share)[mesh.tri_edges].sum(1)
    return LocalIndicators(np.sqrt(cf2), np.sqrt(grad + zero), np.sqrt(zero), np.sqrt(jt2), je2)


def residual_values(f, G: RecoveredGradient, oswald_dg: DgSolution, coeffs: Coefficients, bary) -> np.ndarray:
    """``r = f + div G - beta . grad I - mu I`` at shared barycentric points ``(nt, nq)``."""
    X = oswald_dg.space.points(bary)
    x, y = X[..., 0], X[..., 1]
    conv = np.einsum("tqd,tqd->tq", coeffs.beta(x, y), oswald_dg.gradients(bary))
    return f(x, y) + G.divergence()[:, None] - conv - coeffs.mu(x, y) * oswald_dg.values(bary)


def element_residual(element: int, f, G: RecoveredGradient, oswald: OswaldInterpolant, coeffs: Coefficients):
    """Pointwise residual on one element as a callback ``r(points)`` for ``(n, 2)`` points."""
    mesh = G.mesh
    block = oswald.to_dg().coefficients[element]
    div = float(G.divergence()[element])
    space = DgSpace(mesh, oswald.degree)

    def r(points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        lam = mesh.barycentric(np.array([element]), p[None])[0]
        phi, dl = space.basis(lam)
        grads = np.einsum("qim,md->qid", dl, mesh.lambda_gradients[element])
        val = phi @ block
        gr = np.einsum("i,qid->qd", block, grads)
        x, y = p[:, 0], p[:, 1]
        conv = (coeffs.beta(x, y) * gr).sum(-1)
        return f(x, y) + div - conv - coeffs.mu(x, y) * val

    return r


def _node_min(mesh, values):
    out = np.full(mesh.n_vertices, np.inf)
    np.minimum.at(out, mesh.triangles.ravel(), np.repeat(values, 3))
    return out


def _node_max(mesh, values):
    out = np.full(mesh.n_vertices, -np.inf)
    np.maximum.at(out, mesh.triangles.ravel(), np.repeat(values, 3))
    return out


@dataclass(frozen=True, eq=False)
class RhoTerms:
    rbar: np.ndarray
    weighted: np.ndarray  # int_{omega_x} |r - rbar_x|^2 lambda_x
    rho_x: np.ndarray
    alpha_x: np.ndarray
    h_x: np.ndarray
    c_a_x: np.ndarray

    @property
    def rho_bar(self) -> float:
        # same factor h_x / sqrt(c_a) as the alpha_x branch, so that
        # rho_tilde <= rho_bar also holds in floating point
        return float(np.sqrt(((self.h_x / np.sqrt(self.c_a_x)) ** 2 * self.weighted).sum()))

    @property
    def rho_tilde(self) -> float:
        return float(np.sqrt((self.alpha_x**2 * self.weighted).sum()))


def _alpha(c_bm, c_a, h):
    branch = h / np.sqrt(c_a)
    if c_bm <= 0.0:
        return branch
    return np.minimum(1.0 / math.sqrt(c_bm), branch)


def security_rho(mesh: Triangulation, r: np.ndarray, rule, coeffs: Coefficients, c_beta_mu: float, h_x=None) -> RhoTerms:
    """Hat-weighted residual deviations ``rho_x``, ``alpha_x`` and their sums.

    ``r`` holds residual values ``(nt, nq)`` at the points of ``rule``.
    """
    tri = mesh.triangles
    nv = mesh.n_vertices
    wA = _weights(mesh, rule)
    lam = rule.points  # (nq, 3)
    num = np.bincount(tri.ravel(), np.einsum("tq,tq,qk->tk", wA, r, lam).ravel(), minlength=nv)
    den = np.bincount(tri.ravel(), np.repeat(mesh.areas / 3.0, 3), minlength=nv)
    rbar = num / den
    rbar[mesh.boundary_vertices] = 0.0
    dev = r[:, :, None] - rbar[tri][:, None, :]  # (nt, nq, 3)
    part = np.einsum("tq,tqk,qk->tk", wA, dev**2, lam)
    weighted = np.bincount(tri.ravel(), part.ravel(), minlength=nv)
    h_x = node_diameters(mesh) if h_x is None else h_x
    c_a_x = _node_min(mesh, coeffs.eigenvalues[mesh.tags, 0])
    rho_x = h_x * np.sqrt(weighted)
    return RhoTerms(rbar, weighted, rho_x, _alpha(c_beta_mu, c_a_x, h_x), h_x, c_a_x)


def hat_loads(hierarchy: MeshHierarchy, G: RecoveredGradient, oswald_dg: DgSolution, f, coeffs: Coefficients, degree: int) -> list[np.ndarray]:
    """``<R, lambda_{l z}>`` for every level ``l`` and every node of that level.

    The finest-level loads are integrated element by element and coarser
    ones follow from the two-scale relation of hat functions: across one
    bisection pass, ``lambda_{l-1,z} = lambda_{l,z} + sum_m lambda_{l,m}/2``
    over the midpoints ``m`` of bisected edges ending at ``z``.
    """
    mesh = hierarchy.finest
    if mesh is not G.mesh:
        raise ValueError("recovered gradient must live on the finest level")
    rule = triangle_rule(degree)
    X = oswald_dg.space.points(rule.points)
    x, y = X[..., 0], X[..., 1]
    wA = _weights(mesh, rule)
    s = (
        np.einsum("tqd,tqd->tq", coeffs.beta(x, y), oswald_dg.gradients(rule.points))
        + coeffs.mu(x, y) * oswald_dg.values(rule.points)
        - f(x, y)
    )
    Gq = G.values(rule.points)
    loc = np.einsum("tq,tqd,tkd->tk", wA, Gq, mesh.lambda_gradients)
    loc += np.einsum("tq,tq,qk->tk", wA, s, rule.points)
    b = np.bincount(mesh.triangles.ravel(), loc.ravel(), minlength=mesh.n_vertices)
    loads = [b]
    for k in range(hierarchy.L - 1, -1, -1):
        nv = hierarchy.n_nodes(k)
        mids = hierarchy.midpoints[k]
        ends = hierarchy.bisected[k]
        coarse = b[:nv].copy()
        half = 0.5 * b[mids]
        np.add.at(coarse, ends[:, 0], half)
        np.add.at(coarse, ends[:, 1], half)
        b = coarse
        loads.append(b)
    return loads[::-1]


def security_gamma(hierarchy: MeshHierarchy, G, oswald_dg, f, coeffs, degree) -> tuple[list[np.ndarray], float]:
    """Per-level ``gamma_{l z}`` on the new-hat nodes and the global ``gamma_bar``."""
    loads = hat_loads(hierarchy, G, oswald_dg, f, coeffs, degree)
    bnd = hierarchy.finest.boundary_vertices
    total = 0.0
    table = []
    for lev, b in enumerate(loads):
        z = tilde_nodes(hierarchy, lev)
        z = z[~bnd[z]]
        g = np.abs(b[z])
        table.append(g)
        total += float((g**2).sum())
    return table, math.sqrt(total)


@dataclass(frozen=True)
class Oscillation:
    osc: float
    xi: float
    osc_nodes: np.ndarray = field(repr=False)
    osc_elements: np.ndarray = field(repr=False)


def oscillation(mesh: Triangulation, f, coeffs: Coefficients, c_beta_mu: float, degree: int = 6) -> Oscillation:
    """Data oscillation of ``f`` against its elementwise means.

    ``osc`` is the global ``(sum_T h_T^2 ||f - Pi_T f||^2)^(1/2)``, ``xi``
    its robust variant with weights ``alpha_T``; ``osc_nodes`` and
    ``osc_elements`` are the squared patch sums over ``omega_x`` and
    ``omega_T``.
    """
    rule = triangle_rule(degree)
    X = np.einsum("qk,tkd->tqd", rule.points, mesh.corners)
    fv = f(X[..., 0], X[..., 1])
    wA = _weights(mesh, rule)
    mean = (wA * fv).sum(1) / mesh.areas
    dev2 = (wA * (fv - mean[:, None]) ** 2).sum(1)
    hT = mesh.diameters
    o2 = hT**2 * dev2
    aT = _alpha(c_beta_mu, coeffs.eigenvalues[mesh.tags, 0], hT)
    inc = mesh.vertex_triangle
    nodes = inc @ o2
    touch = (inc.T @ inc).tocsr()
    touch.data[:] = 1.0
    elems = touch @ o2
    return Oscillation(float(np.sqrt(o2.sum())), float(np.sqrt((aT**2 * dev2).sum())), nodes, elems)


def lower_bound_constants(mesh: Triangulation, coeffs: Coefficients, bounds: CoefficientBounds, h_x, osc: Oscillation) -> dict[str, float]:
    """Diagnostic constants ``kappa_1``, ``kappa_2``, ``kappa_3`` and ``osc_1``.

    Sup norms of ``beta`` and ``mu`` use the global analytic values stored on
    the coefficients. Terms dividing by ``c_beta_mu = 0`` are infinite.
    """
    eig = coeffs.eigenvalues[mesh.tags]
    cT, CT = eig[:, 0], eig[:, 1]
    kT = CT / cT
    cx = _node_min(mesh, cT)
    Cx = _node_max(mesh, CT)
    Ca = bounds.C_a
    cbm = bounds.c_beta_mu
    bsup = coeffs.beta_sup if coeffs.beta_sup is not None else float("nan")
    msup = coeffs.mu_sup if coeffs.mu_sup is not None else float("nan")
    inv_cbm = 1.0 / math.sqrt(cbm) if cbm > 0 else math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        mu_term = msup * inv_cbm if msup > 0 else 0.0
        k1 = 1.0 + math.sqrt(Ca) + float(np.sqrt(Cx / cx).max())
        k3 = (1.0 + math.sqrt(Ca)) * (
            1.0
            + float((h_x * (bsup / cx + mu_term / np.sqrt(cx))).max())
            + (inv_cbm * (bsup + msup) if (bsup + msup) > 0 else 0.0)
        )
        # per element: max over the element patch of the bracketed term
        inc = mesh.vertex_triangle
        touch = (inc.T @ inc).tocsr()
        hT = mesh.diameters
        inner = np.sqrt(CT)
        bracket = np.empty(mesh.n_triangles)
        for t in range(mesh.n_triangles):
            nb = touch.indices[touch.indptr[t] : touch.indptr[t + 1]]
            bracket[t] = (inner[nb] + hT[t] * (bsup / np.sqrt(cT[nb]) + mu_term)).max()
        k2 = k3 + k1 * (1.0 + float((CT * kT / np.sqrt(cT) + kT / np.sqrt(cT) * bracket).max()))
        osc1 = math.sqrt(float((osc.osc_nodes / cx).sum())) + k1 * math.sqrt(float((kT**2 * osc.osc_elements / cT).sum()))
    return {"kappa_1": k1, "kappa_2": k2, "kappa_3": k3, "osc_1": osc1}


def recovery_error(G: RecoveredGradient, case: BenchmarkCase, degree: int) -> float:
    """``||a^(-1/2) (G - a grad u)||`` against the exact solution."""
    mesh = G.mesh
    rule = triangle_rule(degree)
    X = np.einsum("qk,tkd->tqd", rule.points, mesh.corners)
    a = case.coefficients.a(mesh.tags)
    d = G.values(rule.points) - np.einsum("tde,tqe->tqd", a, case.grad_u(X[..., 0], X[..., 1]))
    dens = np.einsum("tqd,tde,tqe->tq", d, np.linalg.inv(a), d)
    return float(np.sqrt((_weights(mesh, rule) * dens).sum()))


@dataclass(frozen=True, eq=False)
class SecurityTerms:
    rho: RhoTerms
    gamma: list
    gamma_bar: float
    oscillation: Oscillation
    M: float
    constants: dict

    @property
    def rho_bar(self) -> float:
        return self.rho.rho_bar

    @property
    def rho_tilde(self) -> float:
        return self.rho.rho_tilde

    @property
    def xi(self) -> float:
        return self.oscillation.xi


@dataclass(frozen=True, eq=False)
class EstimatorReport:
    """Everything computed on one mesh; ``error_dg`` and friends are NaN without an exact solution."""

    n_elements: int
    local: LocalIndicators
    security: SecurityTerms
    eta_CF: float
    eta_NC: float
    eta_NC2: float
    eta_J: float
    error_energy: float = float("nan")
    error_jump: float = float("nan")
    recov_error: float = float("nan")

    @property
    def eta(self) -> float:
        return self.eta_CF + self.eta_NC + self.eta_NC2 + self.eta_J

    @property
    def error_dg(self) -> float:
        return self.error_energy + self.error_jump

    @property
    def effectivity(self) -> float:
        e = self.error_dg
        if not e > 0:
            return float("nan")
        return self.eta / e

    def row(self) -> dict[str, float]:
        """Table columns without the convergence orders."""
        return {
            "N": self.n_elements,
            "error_DG": self.error_dg,
            "eta": self.eta,
            "Eff": self.effectivity,
            "recov_error": self.recov_error,
            "eta_CF": self.eta_CF,
            "eta_NC": self.eta_NC,
            "eta_NC2": self.eta_NC2,
            "eta_J": self.eta_J,
            "rho_bar": self.security.rho_bar,
            "gamma_bar": self.security.gamma_bar,
            "rho_tilde": self.security.rho_tilde,
            "xi": self.security.xi,
            "M": self.security.M,
        }


def build_report(
    hierarchy: MeshHierarchy,
    solution: DgSolution,
    coeffs: Coefficients,
    f,
    case: BenchmarkCase | None = None,
    degree: int | None = None,
    constants: bool = False,
) -> EstimatorReport:
    """Recover, estimate and (with ``case``) measure the error on the finest mesh.

    ``constants=True`` adds the lower-bound diagnostics, which loop over
    elements in Python and are slow on large meshes.
    """
    mesh = solution.space.mesh
    if mesh is not hierarchy.finest:
        raise ValueError("solution must live on the finest level of the hierarchy")
    deg = _rule_degree(solution, degree)
    bounds = coefficient_bounds(coeffs)
    oswald = oswald_interpolate(solution)
    G = recover_gradient(solution, coeffs)
    local = local_indicators(solution, oswald, G, coeffs, deg)
    tot = local.totals()

    rule = triangle_rule(deg)
    odg = oswald.to_dg(solution.space)
    r = residual_values(f, G, odg, coeffs, rule.points)
    h_x = node_diameters(mesh)
    rho = security_rho(mesh, r, rule, coeffs, bounds.c_beta_mu, h_x)
    gamma, gbar = security_gamma(hierarchy, G, odg, f, coeffs, deg)
    osc = oscillation(mesh, f, coeffs, bounds.c_beta_mu, deg)
    const = lower_bound_constants(mesh, coeffs, bounds, h_x, osc) if constants else {}
    sec = SecurityTerms(rho, gamma, gbar, osc, bounds.M, const)

    extra = {}
    if case is not None:
        edeg = min(10, deg + case.error_quadrature_boost)
        err = error_norms(solution, case, edeg)
        extra = dict(error_energy=err.energy, error_jump=err.jump, recov_error=recovery_error(G, case, edeg))
    return EstimatorReport(mesh.n_triangles, local, sec, tot["eta_CF"], tot["eta_NC"], tot["eta_NC2"], tot["eta_J"], **extra)


def convergence_orders(n_elements, errors) -> list[float | None]:
    """Orders in ``sqrt(1/N)`` between consecutive entries; ``None`` for the first."""
    out: list[float | None] = [None]
    for (n1, e1), (n2, e2) in zip(zip(n_elements, errors), zip(n_elements[1:], errors[1:])):
        if n2 == n1 or not (e1 > 0 and e2 > 0):
            out.append(float("nan"))
        else:
            out.append(math.log(e1 / e2) / math.log(math.sqrt(n2 / n1)))
    return out

