"""Maximum-strategy marking and the solve-estimate-mark-refine loop."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dg import DgSpace, SchemeParams, SolverError, assemble_system, solve
from .estimators import EstimatorReport, LocalIndicators, build_report
from .mesh import MeshHierarchy, create_mesh, refine
from .problem import BenchmarkCase

log = logging.getLogger(__name__)

__all__ = ["AdaptConfig", "AdaptResult", "mark", "refine_marked", "adaptive_loop"]


@dataclass(frozen=True)
class AdaptConfig:
    """Marking fraction and stopping rules.

    The loop stops once the mesh has at least ``max_elements`` triangles,
    after ``max_levels`` solves, or when the estimator drops below
    ``target_eta``. Each marked element is bisected ``bisections`` times per
    step (two passes split it into four, plus the conforming closure).
    """

    fraction: float = 0.75
    max_levels: int = 100
    max_elements: int | None = None
    target_eta: float | None = None
    bisections: int = 2

    def __post_init__(self):
        if not 0.0 < self.fraction < 1.0:
            raise ValueError("marking fraction must lie in (0, 1)")
        if self.max_levels < 1:
            raise ValueError("max_levels must be at least 1")
        if self.bisections not in (1, 2):
            raise ValueError("bisections per step must be 1 or 2")


def mark(indicators: LocalIndicators | np.ndarray, fraction: float = 0.75) -> np.ndarray:
    """Indices of elements with ``eta_T > fraction * max eta_T``."""
    eta = indicators.marking if isinstance(indicators, LocalIndicators) else np.asarray(indicators, dtype=float)
    top = eta.max(initial=0.0)
    if not top > 0.0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(eta > fraction * top)


def refine_marked(hierarchy: MeshHierarchy, marked, bisections: int = 2) -> MeshHierarchy:
    """Bisect the marked elements, then (for two passes) their children."""
    hierarchy = refine(hierarchy, marked)
    if bisections == 2:
        children = np.flatnonzero(np.isin(hierarchy.parents[-1], marked))
        hierarchy = refine(hierarchy, children)
    return hierarchy


@dataclass(frozen=True, eq=False)
class AdaptResult:
    reports: list[EstimatorReport]
    hierarchy: MeshHierarchy
    meshes: list
    solutions: list
    error: SolverError | None = None

    @property
    def completed(self) -> bool:
        return self.error is None


def adaptive_loop(
    case: BenchmarkCase,
    scheme: SchemeParams,
    config: AdaptConfig,
    degree: int = 1,
    hierarchy: MeshHierarchy | None = None,
    refine_step: Callable | None = None,
    keep_solutions: bool = False,
    tol: float = 1e-10,
) -> AdaptResult:
    """Run the adaptive cycle on ``case`` from its initial mesh.

    ``refine_step(hierarchy, report)`` replaces the marking and refinement
    (used for uniform runs). On solver failure the reports gathered so far
    are returned together with the error.
    """
    if hierarchy is None:
        hierarchy = MeshHierarchy.from_mesh(create_mesh(case.domain, case.initial_h))
    reports, meshes, sols = [], [], []
    for level in range(config.max_levels):
        mesh = hierarchy.finest
        t0 = time.perf_counter()
        space = DgSpace(mesh, degree)
        try:
            sol = solve(assemble_system(space, case.coefficients, scheme, case.f), tol=tol)
        except SolverError as exc:
            log.error("solver failed at level %d (N=%d): %s", level, mesh.n_triangles, exc)
            return AdaptResult(reports, hierarchy, meshes, sols, exc)
        rep = build_report(hierarchy, sol, case.coefficients, case.f, case=case)
        reports.append(rep)
        meshes.append(mesh)
        if keep_solutions:
            sols.append(sol)
        log.info(
            "level %d: N=%d err=%.3e eta=%.3e eff=%.3f (%.1fs)",
            level, mesh.n_triangles, rep.error_dg, rep.eta, rep.effectivity, time.perf_counter() - t0,
        )
        if config.max_elements is not None and mesh.n_triangles >= config.max_elements:
            break
        if config.target_eta is not None and rep.eta <= config.target_eta:
            break
        if level == config.max_levels - 1:
            break
        if refine_step is not None:
            hierarchy = refine_step(hierarchy, rep)
            continue
        marked = mark(rep.local, config.fraction)
        if len(marked) == 0:
            break
        hierarchy = refine_marked(hierarchy, marked, config.bisections)
    return AdaptResult(reports, hierarchy, meshes, sols)
