"""Metric terms, Jacobians, face normals and surface elements.

The mapping is interpolated to the Gauss-Lobatto points of degree
M = max(N, 1), differentiated there with the collocation derivative, and
the resulting (exactly polynomial) metric terms are interpolated to the
solution nodes.  For Gauss-Lobatto solution nodes the last step is the
identity; for Gauss nodes it keeps the face normals a function of the
face data alone, so neighbouring elements see identical normals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import NodalBasis, build_diff_matrix, build_interpolation_matrix, build_nodes, equispaced
from .errors import InvalidMeshError
from .mesh import SIDE_MORTAR_CHILD, Mesh, evaluate_mapping

SCALED_JACOBIAN_BUCKETS = ("<0", "0-0.1", "0.1-0.2", "0.2-0.3", ">=0.3")


def reindex(face, flip):
    """Reverse the along-face (last) axis where ``flip`` is 1.

    ``face`` has the side index first; ``flip`` is broadcast per side.
    """
    flip = np.asarray(flip, dtype=bool)
    out = face.copy()
    out[flip] = face[flip][..., ::-1]
    return out


@dataclass(frozen=True, eq=False)
class Geometry:
    basis: NodalBasis
    x: np.ndarray           # (nE, 2, n, n) node coordinates
    Ja: np.ndarray          # (nE, 2, 2, n, n): [e, i, d] = Ja^i_d
    J: np.ndarray           # (nE, n, n)
    face_nvec: np.ndarray   # (nE, 4, 2, n) outward Ja^i N^i at face nodes (element order)
    face_x: np.ndarray      # (nE, 4, 2, n)
    side_nvec: np.ndarray   # (nS, 2, n) in the side's canonical (ref) orientation
    side_normal: np.ndarray
    side_tangent: np.ndarray
    side_sJ: np.ndarray     # (nS, n)
    side_x: np.ndarray      # (nS, 2, n)
    dx_dir: np.ndarray      # (nE, 2) directional sizes 2 min J / |Ja^i|

    def metric_divergence(self) -> np.ndarray:
        """Discrete sum_i d(Ja^i_d)/dxi^i with the basis derivative, (nE, 2, n, n)."""
        D = self.basis.D
        return (np.einsum("ip,edpq->ediq", D, self.Ja[:, 0])
                + np.einsum("jq,edpq->edpj", D, self.Ja[:, 1]))

    def master_normals(self, mesh: Mesh):
        """Side normals and surface elements in master orientation."""
        s = mesh.sides
        flip_to_master = ~s.master_is_ref
        n = reindex(self.side_normal, flip_to_master & (s.flip == 1))
        n[flip_to_master] *= -1.0
        t = np.stack([-n[:, 1], n[:, 0]], axis=1)
        sJ = reindex(self.side_sJ, flip_to_master & (s.flip == 1))
        return n, t, sJ


def _metric_nodes(N: int) -> np.ndarray:
    return build_nodes(max(N, 1), "LGL")[0]


def compute_geometry(mesh: Mesh, basis: NodalBasis) -> Geometry:
    N = basis.N
    xm = _metric_nodes(N)
    # The mapping is resampled and differentiated in extended precision: the
    # free-stream residual is the metric-identity roundoff amplified by 1/J,
    # so the metric terms should be rounded to double exactly once.  This
    # also makes periodic images (coordinates shifted by a constant) produce
    # the same face metrics.
    ld = np.longdouble
    Dm = build_diff_matrix(xm, dtype=ld)
    Ig = build_interpolation_matrix(build_nodes(mesh.ngeo, "LGL")[0], xm, dtype=ld)
    X = np.einsum("pi,ecij,qj->ecpq", Ig, mesh.xgeo.astype(ld), Ig)  # (nE, 2, M+1, M+1)
    x_xi = np.einsum("ip,ecpq->eciq", Dm, X)
    x_eta = np.einsum("jq,ecpq->ecpj", Dm, X)
    JaM = np.empty((X.shape[0], 2, 2) + X.shape[2:], dtype=np.longdouble)
    JaM[:, 0, 0] = x_eta[:, 1]
    JaM[:, 0, 1] = -x_eta[:, 0]
    JaM[:, 1, 0] = -x_xi[:, 1]
    JaM[:, 1, 1] = x_xi[:, 0]
    same = basis.is_lobatto and len(xm) == basis.n
    if same:
        Ja = JaM
        Im = np.eye(basis.n, dtype=ld)
    else:
        Im = build_interpolation_matrix(xm, basis.nodes, dtype=ld)
        Ja = np.einsum("pi,eadij,qj->eadpq", Im, JaM, Im)
    J = (Ja[:, 1, 1] * Ja[:, 0, 0] - Ja[:, 0, 1] * Ja[:, 1, 0]).astype(float)
    bad = np.flatnonzero(np.any(J <= 0.0, axis=(1, 2)))
    if len(bad):
        raise InvalidMeshError(f"non-positive Jacobian in elements {bad.tolist()}", element_ids=bad)

    ne = mesh.n_elems
    n = basis.n
    face_nvec = np.empty((ne, 4, 2, n), dtype=ld)
    last = len(xm) - 1
    face_nvec[:, 0] = -np.einsum("qj,edj->edq", Im, JaM[:, 0, :, 0, :])
    face_nvec[:, 1] = np.einsum("qj,edj->edq", Im, JaM[:, 0, :, last, :])
    face_nvec[:, 2] = -np.einsum("qi,edi->edq", Im, JaM[:, 1, :, :, 0])
    face_nvec[:, 3] = np.einsum("qi,edi->edq", Im, JaM[:, 1, :, :, last])
    face_nvec = face_nvec.astype(float)
    Ja = Ja.astype(float)

    x = evaluate_mapping(mesh, basis.nodes, basis.nodes)
    face_x = np.empty((ne, 4, 2, n))
    face_x[:, 0] = evaluate_mapping(mesh, [-1.0], basis.nodes)[:, :, 0, :]
    face_x[:, 1] = evaluate_mapping(mesh, [1.0], basis.nodes)[:, :, 0, :]
    face_x[:, 2] = evaluate_mapping(mesh, basis.nodes, [-1.0])[:, :, :, 0]
    face_x[:, 3] = evaluate_mapping(mesh, basis.nodes, [1.0])[:, :, :, 0]

    s = mesh.sides
    side_nvec = face_nvec[s.ref_elem, s.ref_loc].copy()
    side_x = face_x[s.ref_elem, s.ref_loc].copy()
    child = np.flatnonzero(s.kind == SIDE_MORTAR_CHILD)
    if len(child):
        # child sides take the geometry of the small element, seen from the big one
        side_nvec[child] = -reindex(face_nvec[s.oth_elem[child], s.oth_loc[child]], s.flip[child])
        side_x[child] = reindex(face_x[s.oth_elem[child], s.oth_loc[child]], s.flip[child])
    sJ = np.sqrt(side_nvec[:, 0] ** 2 + side_nvec[:, 1] ** 2)
    normal = side_nvec / sJ[:, None, :]
    tangent = np.stack([-normal[:, 1], normal[:, 0]], axis=1)

    norm_ja = np.sqrt(Ja[:, :, 0] ** 2 + Ja[:, :, 1] ** 2)  # (nE, 2, n, n)
    dx_dir = 2.0 * np.min(J[:, None] / norm_ja, axis=(2, 3))
    return Geometry(basis=basis, x=x, Ja=Ja, J=J, face_nvec=face_nvec, face_x=face_x,
                    side_nvec=side_nvec, side_normal=normal, side_tangent=tangent, side_sJ=sJ,
                    side_x=side_x, dx_dir=dx_dir)


def jacobian_on_grid(mesh: Mesh, points) -> np.ndarray:
    """Jacobian of the degree-Ngeo mapping on a tensor grid of reference points."""
    xg = build_nodes(mesh.ngeo, "LGL")[0]
    Dg = build_diff_matrix(xg)
    I = build_interpolation_matrix(xg, points)
    Id = I @ Dg
    x_xi = np.einsum("pi,ecij,qj->ecpq", Id, mesh.xgeo, I)
    x_eta = np.einsum("pi,ecij,qj->ecpq", I, mesh.xgeo, Id)
    return x_xi[:, 0] * x_eta[:, 1] - x_eta[:, 0] * x_xi[:, 1]


def scaled_jacobian(mesh: Mesh) -> np.ndarray:
    """min J / max |J| per element on an equispaced (2 Ngeo + 1)^2 grid."""
    J = jacobian_on_grid(mesh, equispaced(2 * mesh.ngeo))
    return J.min(axis=(1, 2)) / np.abs(J).max(axis=(1, 2))


def scaled_jacobian_histogram(values) -> dict:
    v = np.asarray(values)
    counts = [int(np.sum(v < 0.0)), int(np.sum((v >= 0.0) & (v < 0.1))),
              int(np.sum((v >= 0.1) & (v < 0.2))), int(np.sum((v >= 0.2) & (v < 0.3))),
              int(np.sum(v >= 0.3))]
    return dict(zip(SCALED_JACOBIAN_BUCKETS, counts))


def check_valid(mesh: Mesh) -> None:
    sj = scaled_jacobian(mesh)
    bad = np.flatnonzero(sj <= 0.0)
    if len(bad):
        raise InvalidMeshError(f"elements with non-positive Jacobian: {bad.tolist()}", element_ids=bad)
