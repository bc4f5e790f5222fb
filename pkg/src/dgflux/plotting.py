"""Report figures: error history, FV fraction, density with the DG/FV map."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import PolyCollection  # noqa: E402

from .visualize import sample  # noqa: E402


def plot_error_history(records, var_names, path) -> None:
    t = np.array([r.t for r in records])
    fig, ax = plt.subplots(figsize=(6, 4))
    if records and records[0].l2 is not None:
        l2 = np.array([r.l2 for r in records])
        for k, name in enumerate(var_names):
            ax.semilogy(t, np.maximum(l2[:, k], 1e-300), marker="o", ms=3, label=f"L2 {name}")
        ax.set_ylabel("L2 error")
    else:
        tot = np.array([r.totals for r in records])
        drift = np.abs(tot - tot[:1]) / np.maximum(np.abs(tot[:1]), 1e-300)
        for k, name in enumerate(var_names):
            ax.semilogy(t, np.maximum(drift[:, k], 1e-18), marker="o", ms=3, label=f"total {name}")
        ax.set_ylabel("relative change of conserved total")
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_fv_fraction(records, path) -> None:
    t = np.array([r.t for r in records])
    f = np.array([r.fv_fraction for r in records])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(t, 100.0 * f, marker="o", ms=3)
    ax.set_xlabel("t")
    ax.set_ylabel("FV elements [%]")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_density(op, U, is_fv, path, nvis: int | None = None, title: str = "") -> None:
    nvis = nvis or op.basis.N + 1
    vis = sample(op, U, nvis, (), is_fv)
    name = op.eq.var_names[0]
    vals = vis.point_data[name][vis.cells].mean(axis=1)
    polys = vis.points[vis.cells]
    mesh = op.mesh
    corners = mesh.xlin[:, [0, 1, 3, 2]]
    fv = np.zeros(mesh.n_elems, dtype=bool) if is_fv is None else np.asarray(is_fv, dtype=bool)
    fig, axes = plt.subplots(2, 1, figsize=(8, 7))
    pc = PolyCollection(polys, array=vals, cmap="viridis", edgecolors="none")
    axes[0].add_collection(pc)
    fig.colorbar(pc, ax=axes[0], label=name)
    axes[0].set_title(title or name)
    em = PolyCollection(corners, array=fv.astype(float), cmap="coolwarm", edgecolors="k",
                        linewidths=0.1, clim=(0.0, 1.0))
    axes[1].add_collection(em)
    axes[1].set_title(f"element kind (red: FV, {int(fv.sum())} of {len(fv)})")
    for ax in axes:
        ax.autoscale_view()
        ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(result, out_dir) -> list:
    out = Path(out_dir)
    project = result.sim.config.project
    op = result.sim.op
    paths = [out / f"{project}_error_history.png", out / f"{project}_fv_fraction.png",
             out / f"{project}_density.png"]
    plot_error_history(result.records, op.eq.var_names, paths[0])
    plot_fv_fraction(result.records, paths[1])
    plot_density(op, result.state.U, result.state.is_fv, paths[2], title=f"{op.eq.var_names[0]} at "
                 f"t = {result.state.t:.4g}")
    return paths
