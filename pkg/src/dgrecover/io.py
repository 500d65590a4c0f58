"""Legacy ASCII VTK meshes and solutions, and the results CSV."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .dg import DgSolution
from .mesh import MeshError, Triangulation
from .recovery import RecoveredGradient

__all__ = [
    "CSV_COLUMNS",
    "write_vtk_mesh",
    "read_vtk_mesh",
    "write_vtk_solution",
    "write_csv",
    "read_csv",
    "format_table",
]

CSV_COLUMNS = (
    "N", "error_DG", "CV_error", "eta", "Eff", "recov_error", "CV_recov",
    "eta_CF", "eta_NC", "eta_NC2", "eta_J", "rho_bar", "gamma_bar", "rho_tilde", "xi", "M",
)

VTK_TRIANGLE = 5


def _header(f, title):
    f.write("# vtk DataFile Version 3.0\n")
    f.write(title.replace("\n", " ")[:255] + "\n")
    f.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")


def _points(f, pts):
    f.write(f"POINTS {len(pts)} double\n")
    for x, y in pts:
        f.write(f"{float(x)!r} {float(y)!r} 0.0\n")


def _cells(f, conn):
    n = len(conn)
    f.write(f"CELLS {n} {4 * n}\n")
    for a, b, c in conn:
        f.write(f"3 {a} {b} {c}\n")
    f.write(f"CELL_TYPES {n}\n")
    f.write(f"{VTK_TRIANGLE}\n" * n)


def _scalars(f, name, values, fmt=repr):
    kind = "int" if np.issubdtype(np.asarray(values).dtype, np.integer) else "double"
    f.write(f"SCALARS {name} {kind} 1\nLOOKUP_TABLE default\n")
    for v in values:
        f.write(f"{fmt(v.item())}\n")


def _vectors(f, name, values):
    f.write(f"VECTORS {name} double\n")
    for x, y in values:
        f.write(f"{float(x)!r} {float(y)!r} 0.0\n")


def write_vtk_mesh(path, mesh: Triangulation, cell_data: dict | None = None, title: str = "dgrecover mesh") -> Path:
    """Write vertices, triangles and the subdomain ``tag`` plus optional cell scalars."""
    path = Path(path)
    with path.open("w") as f:
        _header(f, title)
        _points(f, mesh.vertices)
        _cells(f, mesh.triangles)
        f.write(f"CELL_DATA {mesh.n_triangles}\n")
        _scalars(f, "tag", mesh.tags)
        for name, vals in (cell_data or {}).items():
            vals = np.asarray(vals)
            if vals.ndim == 2:
                _vectors(f, name, vals)
            else:
                _scalars(f, name, vals.astype(float))
    return path


def read_vtk_mesh(path) -> Triangulation:
    """Read a triangle mesh written by :func:`write_vtk_mesh`."""
    toks = Path(path).read_text().split("\n")
    it = iter(toks)
    pts = tris = tags = None
    for line in it:
        words = line.split()
        if not words:
            continue
        if words[0] == "POINTS":
            n = int(words[1])
            pts = np.array([next(it).split()[:2] for _ in range(n)], dtype=float)
        elif words[0] == "CELLS":
            n = int(words[1])
            rows = [next(it).split() for _ in range(n)]
            if any(r[0] != "3" for r in rows):
                raise MeshError("only triangular cells are supported")
            tris = np.array([r[1:4] for r in rows], dtype=np.int64)
        elif words[0] == "SCALARS" and words[1] == "tag":
            next(it)  # LOOKUP_TABLE
            tags = np.array([next(it) for _ in range(len(tris))], dtype=np.int64)
    if pts is None or tris is None:
        raise MeshError(f"{path}: no POINTS/CELLS section")
    if tags is None:
        tags = np.zeros(len(tris), dtype=np.int64)
    return Triangulation(pts, tris, tags)


def write_vtk_solution(path, solution: DgSolution, G: RecoveredGradient | None = None, title: str = "dgrecover solution") -> Path:
    """Write ``u_h`` with corner points duplicated per cell so jumps stay visible.

    Point data holds the vertex values of each local polynomial; ``Gu_h``
    (when given) goes out as per-cell average vectors.
    """
    path = Path(path)
    mesh = solution.space.mesh
    nt = mesh.n_triangles
    pts = mesh.corners.reshape(-1, 2)
    conn = np.arange(3 * nt).reshape(nt, 3)
    with path.open("w") as f:
        _header(f, title)
        _points(f, pts)
        _cells(f, conn)
        f.write(f"CELL_DATA {nt}\n")
        _scalars(f, "tag", mesh.tags)
        if G is not None:
            _vectors(f, "Gu_h", G.cell_averages())
        f.write(f"POINT_DATA {3 * nt}\n")
        _scalars(f, "u_h", solution.coefficients[:, :3].ravel())
    return path


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def write_csv(path, rows: list[dict]) -> Path:
    """One line per row in :data:`CSV_COLUMNS` order; ``None`` stays empty.

    Floats use the shortest representation that round-trips exactly.
    """
    path = Path(path)
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])
    return path


def read_csv(path) -> list[dict]:
    out = []
    with Path(path).open(newline="") as f:
        for rec in csv.DictReader(f):
            row = {}
            for k, v in rec.items():
                if v == "":
                    row[k] = None
                elif k == "N":
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            out.append(row)
    return out


def format_table(rows: list[dict], columns=("N", "error_DG", "CV_error", "eta", "Eff", "recov_error", "CV_recov")) -> str:
    """Fixed-width text table with three significant digits."""
    def cell(c, v):
        if v is None:
            return ""
        if c == "N":
            return str(int(v))
        if c in ("CV_error", "CV_recov", "Eff"):
            return f"{v:.2f}"
        return f"{v:.2e}"

    body = [[cell(c, r.get(c)) for c in columns] for r in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) if body else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)
