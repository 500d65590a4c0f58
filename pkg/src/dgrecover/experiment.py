"""Benchmark drivers: uniform and adaptive runs producing table rows."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .adapt import AdaptConfig, AdaptResult, adaptive_loop
from .config import RunConfig
from .dg import SchemeParams, SolverError
from .estimators import convergence_orders
from .io import format_table, write_csv, write_vtk_mesh, write_vtk_solution
from .mesh import MeshHierarchy, create_mesh, refine_uniform
from .recovery import recover_gradient

log = logging.getLogger(__name__)

__all__ = ["ExperimentResult", "run_experiment", "table_rows", "select_rows", "write_outputs"]


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    config: RunConfig
    adapt: AdaptResult
    rows: list[dict]
    selected: list[int]

    @property
    def reports(self):
        return self.adapt.reports

    @property
    def error(self) -> SolverError | None:
        return self.adapt.error


def select_rows(n_elements, factor: float) -> list[int]:
    """Indices of the levels to tabulate.

    The first level is always kept; later ones only once the element count
    reaches ``factor`` times the last kept count. The final level is kept
    as well so the table ends on the finest mesh.
    """
    if not n_elements:
        return []
    keep = [0]
    for i, n in enumerate(n_elements[1:], start=1):
        if n >= factor * n_elements[keep[-1]]:
            keep.append(i)
    last = len(n_elements) - 1
    if keep[-1] != last:
        keep.append(last)
    return keep


def table_rows(reports, indices=None) -> list[dict]:
    """Report rows with convergence orders between consecutive selected rows."""
    picked = [reports[i] for i in (range(len(reports)) if indices is None else indices)]
    rows = [r.row() for r in picked]
    N = [r["N"] for r in rows]
    cv_e = convergence_orders(N, [r["error_DG"] for r in rows])
    cv_r = convergence_orders(N, [r["recov_error"] for r in rows])
    for r, a, b in zip(rows, cv_e, cv_r):
        r["CV_error"] = a
        r["CV_recov"] = b
    return rows


def scheme_for(config: RunConfig, case) -> SchemeParams:
    return SchemeParams(theta=config.theta, penalty=case.penalty, gamma_a=case.gamma_a, upwind=config.upwind)


def run_experiment(config: RunConfig, keep_solutions: bool = False) -> ExperimentResult:
    """Run the configured benchmark; a solver failure keeps the rows gathered so far."""
    case = config.make_case()
    scheme = scheme_for(config, case)
    h0 = config.initial_h or case.initial_h
    hierarchy = MeshHierarchy.from_mesh(create_mesh(case.domain, h0))
    if config.mode == "uniform":
        acfg = AdaptConfig(max_levels=config.levels, max_elements=config.max_elements)
        res = adaptive_loop(
            case, scheme, acfg, degree=config.degree, hierarchy=hierarchy,
            refine_step=lambda h, rep: refine_uniform(h, 2),
            keep_solutions=keep_solutions, tol=config.solver_tol,
        )
    else:
        acfg = AdaptConfig(
            fraction=config.fraction, max_levels=config.max_levels,
            max_elements=config.max_elements, bisections=config.bisections,
        )
        res = adaptive_loop(
            case, scheme, acfg, degree=config.degree, hierarchy=hierarchy,
            keep_solutions=keep_solutions, tol=config.solver_tol,
        )
    sel = select_rows([r.n_elements for r in res.reports], config.report_factor)
    return ExperimentResult(config, res, table_rows(res.reports, sel), sel)


def write_outputs(result: ExperimentResult, output_dir=None, vtk: bool | None = None) -> list[Path]:
    """Write the CSV (and per-level VTK files when requested); return the paths."""
    cfg = result.config
    out = Path(output_dir or cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [write_csv(out / f"{cfg.run_name}.csv", result.rows)]
        if cfg.vtk if vtk is None else vtk:
            sols = result.adapt.solutions
            for lev, mesh in enumerate(result.adapt.meshes):
                rep = result.reports[lev]
                paths.append(
                    write_vtk_mesh(
                        out / f"{cfg.run_name}_mesh_{lev:03d}.vtk", mesh,
                        {"eta_T": rep.local.marking}, title=f"{cfg.run_name} level {lev}",
                    )
                )
                if lev < len(sols):
                    G = recover_gradient(sols[lev], cfg.make_case().coefficients)
                    paths.append(write_vtk_solution(out / f"{cfg.run_name}_solution_{lev:03d}.vtk", sols[lev], G))
    except OSError as exc:
        raise OSError(f"cannot write outputs to {out}: {exc.strerror or exc}") from exc
    return paths


def summary(result: ExperimentResult) -> str:
    return format_table(result.rows)
