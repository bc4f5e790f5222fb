"""Supersampled export of a solution to legacy ASCII VTK and CSV.

DG elements are evaluated on an equispaced (nVis+1)^2 grid through the
Lagrange interpolation matrix.  FV elements are written as their
(N+1)^2 piecewise-constant subcell patches.  Every cell carries the
element id and the element kind (0 DG, 1 FV).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import dg_view
from .basis import build_interpolation_matrix, build_nodes
from .dg import prolong_to_faces
from .equations import Euler, NavierStokes
from .errors import ConfigError

DERIVED = ("p", "s", "omega", "u", "v", "mach")


def _local_gradient(op, f):
    """Physical (d/dx, d/dy) of nodal fields f (..., nE, n, n) by collocation."""
    geo, D = op.geo, op.basis.D
    fxi = np.matmul(D, f)
    feta = np.matmul(f, D.T)
    return ((geo.Ja[:, 0, 0] * fxi + geo.Ja[:, 1, 0] * feta) / geo.J,
            (geo.Ja[:, 0, 1] * fxi + geo.Ja[:, 1, 1] * feta) / geo.J)


class _LiftedVelocity:
    """Operator view whose lifted variables are (u, v, T) for vorticity."""

    def __init__(self, op):
        self._op = op
        self.eq = NavierStokes(gamma=op.eq.gamma, mu=0.0)

    def __getattr__(self, name):
        return getattr(self._op, name)


def vorticity(op, U: np.ndarray, t: float = 0.0) -> np.ndarray:
    """omega = dv/dx - du/dy from BR1-lifted velocity gradients."""
    from .lifting import lift_gradients

    if not isinstance(op.eq, Euler):
        raise ConfigError("vorticity needs the Euler or Navier-Stokes equations")
    view = _LiftedVelocity(op)
    ref, _ = op.side_states(prolong_to_faces(U, op.basis), t)
    gx, gy = lift_gradients(view, U, t, ref)
    return gx[1] - gy[0]


def derived_fields(op, U: np.ndarray, names, is_fv=None, t: float = 0.0) -> dict:
    """Nodal values of conservative variables and the requested derived quantities.

    FV elements yield subcell-mean values; their vorticity comes from the
    DG polynomial equivalent to the subcell data.
    """
    eq = op.eq
    out = {name: U[k] for k, name in enumerate(eq.var_names)}
    for name in names:
        if name in out:
            continue
        if name not in DERIVED:
            raise ConfigError(f"unknown output quantity {name!r} (conservative variables or "
                              f"{', '.join(DERIVED)})")
        if not isinstance(eq, Euler):
            raise ConfigError(f"derived quantity {name!r} needs the Euler or Navier-Stokes equations")
        rho, u, v, p = eq.cons_to_prim(U)
        if name == "p":
            out[name] = p
        elif name == "s":
            out[name] = np.log(p) - eq.gamma * np.log(rho)
        elif name == "u":
            out[name] = u
        elif name == "v":
            out[name] = v
        elif name == "mach":
            out[name] = np.sqrt(u * u + v * v) / np.sqrt(eq.gamma * p / rho)
        elif name == "omega":
            out[name] = vorticity(op, dg_view(op, U, is_fv), t)
    return out


@dataclass
class VisData:
    points: np.ndarray       # (nPoints, 2)
    cells: np.ndarray        # (nCells, 4) point indices, counter-clockwise
    point_data: dict         # name -> (nPoints,)
    cell_elem: np.ndarray    # (nCells,)
    cell_kind: np.ndarray    # (nCells,) 0 DG, 1 FV


def _quads(m: int, offset: int) -> np.ndarray:
    """Counter-clockwise quads of an (m+1)^2 grid indexed [i, j] -> i*(m+1)+j."""
    i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    p = lambda a, b: offset + a * (m + 1) + b  # noqa: E731
    return np.stack([p(i, j), p(i + 1, j), p(i + 1, j + 1), p(i, j + 1)], axis=-1).reshape(-1, 4)


def sample(op, U: np.ndarray, nvis: int, names=(), is_fv=None, t: float = 0.0) -> VisData:
    if int(nvis) != nvis or nvis < 1:
        raise ValueError(f"nvis must be a positive integer, got {nvis}")
    nvis = int(nvis)
    mesh, basis = op.mesh, op.basis
    ne, n = mesh.n_elems, basis.n
    fv = np.zeros(ne, dtype=bool) if is_fv is None else np.asarray(is_fv, dtype=bool)
    fields = derived_fields(op, U, names, fv, t)
    keys = list(op.eq.var_names) + [k for k in names if k not in op.eq.var_names]
    equi = np.linspace(-1.0, 1.0, nvis + 1)
    Vs = build_interpolation_matrix(basis.nodes, equi)
    Vg = build_interpolation_matrix(build_nodes(mesh.ngeo, "LGL")[0], equi)
    xe = np.matmul(np.matmul(Vg, mesh.xgeo), Vg.T)            # (nE, 2, m, m)
    # FV subcell corners from the mapping at equispaced sub-face positions
    sub = np.linspace(-1.0, 1.0, n + 1)
    Vsub = build_interpolation_matrix(build_nodes(mesh.ngeo, "LGL")[0], sub)
    xf = np.matmul(np.matmul(Vsub, mesh.xgeo), Vsub.T)         # (nE, 2, n+1, n+1)
    pts, cells, elem, kind = [], [], [], []
    data = {k: [] for k in keys}
    offset = 0
    for e in range(ne):
        if fv[e]:
            # four private corners per subcell so values stay piecewise constant
            for i in range(n):
                for j in range(n):
                    c = xf[e][:, [i, i + 1, i + 1, i], [j, j, j + 1, j + 1]].T
                    pts.append(c)
                    cells.append(offset + np.arange(4)[None])
                    offset += 4
                    for k in keys:
                        data[k].append(np.full(4, fields[k][e, i, j]))
            elem.append(np.full(n * n, e))
            kind.append(np.ones(n * n, dtype=int))
        else:
            pts.append(xe[e].reshape(2, -1).T)
            cells.append(_quads(nvis, offset))
            offset += (nvis + 1) ** 2
            for k in keys:
                data[k].append((Vs @ fields[k][e] @ Vs.T).ravel())
            elem.append(np.full(nvis * nvis, e))
            kind.append(np.zeros(nvis * nvis, dtype=int))
    return VisData(points=np.concatenate(pts), cells=np.concatenate(cells),
                   point_data={k: np.concatenate(v) for k, v in data.items()},
                   cell_elem=np.concatenate(elem), cell_kind=np.concatenate(kind))


def write_vtk(vis: VisData, path, title: str = "dgflux") -> None:
    npts, ncell = len(vis.points), len(vis.cells)
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {npts} double\n")
        np.savetxt(fh, np.column_stack([vis.points, np.zeros(npts)]), fmt="%.17g")
        fh.write(f"CELLS {ncell} {5 * ncell}\n")
        np.savetxt(fh, np.column_stack([np.full(ncell, 4), vis.cells]), fmt="%d")
        fh.write(f"CELL_TYPES {ncell}\n")
        np.savetxt(fh, np.full(ncell, 9), fmt="%d")
        fh.write(f"CELL_DATA {ncell}\n")
        for name, arr in (("element", vis.cell_elem), ("element_kind", vis.cell_kind)):
            fh.write(f"SCALARS {name} int 1\nLOOKUP_TABLE default\n")
            np.savetxt(fh, arr, fmt="%d")
        fh.write(f"POINT_DATA {npts}\n")
        for name, arr in vis.point_data.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            np.savetxt(fh, arr, fmt="%.17g")


def write_csv(vis: VisData, path) -> None:
    """One row per sample point with its element id and kind."""
    pe = np.empty(len(vis.points), dtype=int)
    pk = np.empty(len(vis.points), dtype=int)
    pe[vis.cells.ravel()] = np.repeat(vis.cell_elem, 4)
    pk[vis.cells.ravel()] = np.repeat(vis.cell_kind, 4)
    names = list(vis.point_data)
    table = np.column_stack([vis.points, pe, pk] + [vis.point_data[k] for k in names])
    header = ",".join(["x", "y", "element", "element_kind"] + names)
    fmt = ["%.17g", "%.17g", "%d", "%d"] + ["%.17g"] * len(names)
    np.savetxt(path, table, delimiter=",", header=header, comments="", fmt=fmt)


def export_visualization(op, U: np.ndarray, nvis: int, path, names=(), is_fv=None, t: float = 0.0,
                         fmt: str | None = None) -> VisData:
    """Write ``path`` as VTK (``.vtk``) or CSV (``.csv``, or ``fmt='csv'``)."""
    vis = sample(op, U, nvis, names, is_fv, t)
    kind = fmt or ("csv" if str(path).lower().endswith(".csv") else "vtk")
    if kind == "csv":
        write_csv(vis, path)
    elif kind == "vtk":
        write_vtk(vis, path)
    else:
        raise ValueError(f"unknown export format {kind!r} (vtk, csv)")
    return vis
