"""Error norms, conservation totals and shock-capturing statistics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import build_interpolation_matrix, build_nodes, get_basis
from .geometry import compute_geometry


def dg_view(op, U: np.ndarray, is_fv=None) -> np.ndarray:
    """Solution with FV elements converted to their DG polynomials."""
    if is_fv is None or not np.any(is_fv) or op.fv is None:
        return U
    out = U.copy()
    ids = np.flatnonzero(is_fv)
    out[:, ids] = op.fv.to_dg(U[:, ids], ids)
    return out


def _quadrature(op, n_quad: int | None):
    """Physical points, weights times J at the solution nodes or at n_quad Gauss points."""
    geo, basis = op.geo, op.basis
    if n_quad is None:
        w = basis.weights
        return geo.x[:, 0], geo.x[:, 1], w[:, None] * w[None, :] * geo.J, None
    xq, wq = build_nodes(n_quad - 1, "LG")
    I = build_interpolation_matrix(basis.nodes, xq)
    gq = compute_geometry(op.mesh, get_basis(n_quad - 1, "LG"))

    def interp(f):
        return np.matmul(np.matmul(I, f), I.T)
    return gq.x[:, 0], gq.x[:, 1], wq[:, None] * wq[None, :] * gq.J, interp


def error_norms(op, U: np.ndarray, exact, t: float, is_fv=None, n_quad: int | None = None):
    """(L2, Linf) per variable; L2 is the domain-averaged root mean square.

    With ``n_quad`` the error is integrated on an n_quad-point Gauss rule
    per direction instead of the solution's own nodes.
    """
    V = dg_view(op, U, is_fv)
    x, y, wJ, interp = _quadrature(op, n_quad)
    if interp is not None:
        V = interp(V)
    err = V - exact(x, y, t)
    vol = wJ.sum()
    l2 = np.sqrt(np.einsum("eij,veij->v", wJ, err * err) / vol)
    linf = np.abs(err).max(axis=(1, 2, 3))
    return l2, linf


def conserved_totals(op, U: np.ndarray, is_fv=None) -> np.ndarray:
    return op.integrate(U, is_fv)


@dataclass
class AnalysisRecord:
    t: float
    step: int
    dt: float
    totals: np.ndarray
    fv_fraction: float
    l2: np.ndarray | None = None
    linf: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def row(self, var_names) -> dict:
        out = {"t": self.t, "step": self.step, "dt": self.dt}
        for k, name in enumerate(var_names):
            if self.l2 is not None:
                out[f"l2_{name}"] = float(self.l2[k])
                out[f"linf_{name}"] = float(self.linf[k])
            out[f"total_{name}"] = float(self.totals[k])
        out["fv_fraction"] = self.fv_fraction
        out.update(self.extra)
        return out


def analyze(op, U, t, step, dt, is_fv=None, exact=None) -> AnalysisRecord:
    frac = 0.0 if is_fv is None else float(np.mean(is_fv))
    rec = AnalysisRecord(t=t, step=step, dt=dt, totals=conserved_totals(op, U, is_fv), fv_fraction=frac)
    if exact is not None:
        rec.l2, rec.linf = error_norms(op, U, exact, t, is_fv)
    return rec


def write_csv(records, var_names, path) -> None:
    import csv

    rows = [r.row(var_names) for r in records]
    if not rows:
        return
    keys = list(rows[0])
    for r in rows[1:]:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def read_csv(path) -> dict:
    """Analysis CSV as a dict of float arrays."""
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    return {k: np.array([float(r[k]) if r.get(k) not in (None, "") else np.nan for r in rows])
            for k in rows[0]}


def eoc(errors, h) -> np.ndarray:
    """Experimental orders of convergence between successive refinements."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(h, dtype=float)
    return np.log(e[1:] / e[:-1]) / np.log(h[1:] / h[:-1])
