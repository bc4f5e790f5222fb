"""Finite-volume subcell shock capturing.

A troubled element stores (N+1)^2 subcell means on an equidistant
reference grid of width w = 2/(N+1).  The subcells are advanced with a
second-order TVD scheme: limited slopes of the primitive variables
(physical centroid distances), pointwise Riemann fluxes at the subcell
interfaces, flux differencing divided by the subcell area w^2 J_ij.

Element faces shared with a DG element use the DG trace evaluated at the
FV face points (1D application of the DG->FV matrix); the FV side uses
these fluxes directly, the DG side receives them projected back with the
inverse matrix.  Subcells adjacent to an element face compute their
outward slope at the side, so the neighbour's adjacent mean travels
through the face-data exchange together with a second payload (inner
slope and centroid distance).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .basis import (NodalBasis, apply_along_face, build_diff_matrix, build_interpolation_matrix, build_nodes,
                    legendre_vandermonde, subcell_centers, subcell_faces)
from .boundary import ghost_state
from .errors import ConfigError, NonPhysicalState
from .exchange import gather_sides

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# limiters
# ---------------------------------------------------------------------------


def minmod(a, b):
    """Smaller magnitude of a and b if they share a sign, else zero."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def central(a, b):
    return 0.5 * (np.asarray(a, dtype=float) + np.asarray(b, dtype=float))


def zero_slope(a, b):
    return np.zeros(np.broadcast(np.asarray(a), np.asarray(b)).shape)


def vanleer(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = 2.0 * a * b / (a + b)
    return np.where(a * b > 0.0, r, 0.0)


LIMITERS = {"minmod": minmod, "central": central, "zero": zero_slope, "vanleer": vanleer}


def get_limiter(name: str):
    try:
        return LIMITERS[str(name).strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown limiter {name!r} ({', '.join(LIMITERS)})") from None


# ---------------------------------------------------------------------------
# transfers
# ---------------------------------------------------------------------------


def dg_to_fv(U: np.ndarray, basis: NodalBasis) -> np.ndarray:
    """Subcell means of the nodal polynomial in reference space (rows, then columns)."""
    V = basis.fv.dg_to_fv
    return np.matmul(np.matmul(V, U), V.T)


def fv_to_dg(Ufv: np.ndarray, basis: NodalBasis) -> np.ndarray:
    Vi = basis.fv.fv_to_dg
    return np.matmul(np.matmul(Vi, Ufv), Vi.T)


# ---------------------------------------------------------------------------
# indicators
# ---------------------------------------------------------------------------


class IndicatorKind(str, enum.Enum):
    PERSSON = "persson"
    JAMESON = "jameson"

    @classmethod
    def parse(cls, value) -> "IndicatorKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for item in cls:
            if item.value == key:
                return item
        raise ConfigError(f"unknown indicator {value!r} (persson, jameson)")


DEFAULT_THRESHOLDS = {IndicatorKind.PERSSON: (-3.0, -4.5), IndicatorKind.JAMESON: (0.12, 0.02)}


@dataclass(frozen=True)
class IndicatorConfig:
    kind: IndicatorKind = IndicatorKind.PERSSON
    upper: float | None = None
    lower: float | None = None
    floor: float = -20.0

    def __post_init__(self):
        object.__setattr__(self, "kind", IndicatorKind.parse(self.kind))
        up, lo = DEFAULT_THRESHOLDS[self.kind]
        if self.upper is None:
            object.__setattr__(self, "upper", up)
        if self.lower is None:
            object.__setattr__(self, "lower", lo)
        if not self.upper > self.lower:
            raise ConfigError(f"indicator thresholds need upper > lower (got {self.upper}, {self.lower})")


def indicator_persson(field: np.ndarray, basis: NodalBasis, floor: float = -20.0) -> np.ndarray:
    """log10 of the energy share of modes with total degree >= max(N-1, 1).

    ``field`` is (nElems, n, n) or (n, n).
    """
    f = np.asarray(field, dtype=float)
    single = f.ndim == 2
    if single:
        f = f[None]
    N = basis.N
    Vinv = np.linalg.inv(legendre_vandermonde(basis.nodes, normalized=True))
    modal = np.matmul(np.matmul(Vinv, f), Vinv.T)
    energy = modal ** 2
    deg = np.add.outer(np.arange(N + 1), np.arange(N + 1))
    shell = deg >= max(N - 1, 1)
    total = energy.sum(axis=(1, 2))
    top = energy[:, shell].sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(total > 0.0, top / np.where(total > 0.0, total, 1.0), 0.0)
        val = np.where(ratio > 0.0, np.log10(np.where(ratio > 0.0, ratio, 1.0)), floor)
    val = np.maximum(val, floor)
    return val[0] if single else val


def indicator_jameson(p: np.ndarray, p_faces: np.ndarray | None = None) -> np.ndarray:
    """max |p_{k+1} - 2p_k + p_{k-1}| / (p_{k+1} + 2p_k + p_{k-1}) over both directions.

    ``p`` is (nElems, n, n).  ``p_faces`` (nElems, 4, n) holds the
    neighbour pressure across each local side (NaN where none, e.g. on
    the domain boundary); without it the quotient is one-sided, i.e.
    evaluated at interior nodes only.
    """
    p = np.asarray(p, dtype=float)
    single = p.ndim == 2
    if single:
        p = p[None]
    ne, n, _ = p.shape
    if p_faces is None:
        p_faces = np.full((ne, 4, n), np.nan)
    ext1 = np.concatenate([p_faces[:, 0][:, None, :], p, p_faces[:, 1][:, None, :]], axis=1)
    ext2 = np.concatenate([p_faces[:, 2][:, :, None], p, p_faces[:, 3][:, :, None]], axis=2)

    def quotient(a, b, c):
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.abs(a - 2.0 * b + c) / (a + 2.0 * b + c)
        return np.where(np.isfinite(q), q, 0.0)

    q1 = quotient(ext1[:, 2:], ext1[:, 1:-1], ext1[:, :-2])
    q2 = quotient(ext2[:, :, 2:], ext2[:, :, 1:-1], ext2[:, :, :-2])
    val = np.maximum(q1.max(axis=(1, 2)), q2.max(axis=(1, 2)))
    return val[0] if single else val


def update_representation(is_fv: np.ndarray, indicator: np.ndarray, upper: float, lower: float,
                          allowed: np.ndarray | None = None) -> np.ndarray:
    """Hysteresis switch: DG->FV above ``upper``, FV->DG below ``lower``."""
    is_fv = np.asarray(is_fv, dtype=bool)
    ind = np.asarray(indicator, dtype=float)
    new = is_fv.copy()
    new[~is_fv & (ind > upper)] = True
    new[is_fv & (ind < lower)] = False
    if allowed is not None:
        blocked = new & ~np.asarray(allowed, dtype=bool)
        if np.any(blocked & ~is_fv):
            log.info("elements %s stay DG (adjacent to a mortar interface)",
                     np.flatnonzero(blocked & ~is_fv).tolist())
        new &= np.asarray(allowed, dtype=bool)
    return new


# ---------------------------------------------------------------------------
# subcell geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SubcellGeometry:
    J: np.ndarray          # (nE, n, n) mean Jacobian of each subcell
    n1: np.ndarray         # (nE, 2, N, n) integrated normals of inner xi1-faces k+1/2
    n2: np.ndarray         # (nE, 2, n, N) integrated normals of inner xi2-faces
    d1: np.ndarray         # (nE, N, n) centroid distances along xi1
    d2: np.ndarray         # (nE, n, N)
    e1m: np.ndarray        # (nE, n, n) centroid to the -xi1 face midpoint
    e1p: np.ndarray
    e2m: np.ndarray
    e2p: np.ndarray
    centers: np.ndarray    # (nE, 2, n, n)
    side_nvec: np.ndarray  # (nS, 2, n) mean side normal over each face subcell segment
    side_x: np.ndarray     # (nS, 2, n) face-segment midpoints
    w: float


def _mapping_poly(mesh, N):
    """Interpolation data of the degree-M mapping used for the metric terms."""
    ld = np.longdouble
    xm = build_nodes(max(N, 1), "LGL")[0]
    Ig = build_interpolation_matrix(build_nodes(mesh.ngeo, "LGL")[0], xm, dtype=ld)
    X = np.einsum("pi,ecij,qj->ecpq", Ig, mesh.xgeo.astype(ld), Ig)
    return xm, X


def _eval(xm, X, a, b):
    ld = np.longdouble
    Ia = build_interpolation_matrix(xm, np.asarray(a, dtype=ld), dtype=ld)
    Ib = build_interpolation_matrix(xm, np.asarray(b, dtype=ld), dtype=ld)
    return np.einsum("pi,ecij,qj->ecpq", Ia, X, Ib)


def compute_subcell_geometry(op) -> SubcellGeometry:
    mesh, basis, geo = op.mesh, op.basis, op.geo
    N = basis.N
    n = basis.n
    w = basis.fv.w
    ld = np.longdouble
    xm, X = _mapping_poly(mesh, N)
    faces = subcell_faces(N)
    cent = subcell_centers(N)
    corners = _eval(xm, X, faces, faces)            # (nE, 2, n+1, n+1)
    d = corners[:, :, 1:-1, 1:] - corners[:, :, 1:-1, :-1]
    n1 = np.stack([d[:, 1], -d[:, 0]], axis=1)      # (nE, 2, N, n)
    d = corners[:, :, 1:, 1:-1] - corners[:, :, :-1, 1:-1]
    n2 = np.stack([-d[:, 1], d[:, 0]], axis=1)      # (nE, 2, n, N)
    centers = _eval(xm, X, cent, cent)
    fm1 = _eval(xm, X, faces, cent)                 # (nE, 2, n+1, n)
    fm2 = _eval(xm, X, cent, faces)                 # (nE, 2, n, n+1)

    def dist(a, b):
        return np.sqrt(((a - b) ** 2).sum(axis=1)).astype(float)

    # subcell Jacobian: mean of the polynomial J over each subcell (Gauss rule, exact)
    q, qw = build_nodes(N, "LG")
    pts = (faces[:-1, None] + 0.5 * w * (q[None, :] + 1.0)).ravel()
    Dm = build_diff_matrix(xm, dtype=ld)
    Ip = build_interpolation_matrix(xm, pts.astype(ld), dtype=ld)
    Id = Ip @ Dm
    x_xi = np.einsum("pi,ecij,qj->ecpq", Id, X, Ip)
    x_eta = np.einsum("pi,ecij,qj->ecpq", Ip, X, Id)
    Jq = (x_xi[:, 0] * x_eta[:, 1] - x_eta[:, 0] * x_xi[:, 1]).reshape(-1, n, n, n, n)
    Jsub = 0.25 * np.einsum("a,b,ekalb->ekl", qw, qw, Jq).astype(float)

    Vf = basis.fv.dg_to_fv
    side_nvec = apply_along_face(geo.side_nvec, Vf)
    s = mesh.sides
    side_x = np.empty((mesh.n_sides, 2, n))
    slot_x = [fm1[:, :, 0, :], fm1[:, :, -1, :], fm2[:, :, :, 0], fm2[:, :, :, -1]]
    for loc in range(4):
        sel = s.ref_loc == loc
        side_x[sel] = slot_x[loc][s.ref_elem[sel]].astype(float)
    return SubcellGeometry(
        J=Jsub, n1=n1.astype(float), n2=n2.astype(float),
        d1=dist(centers[:, :, 1:, :], centers[:, :, :-1, :]),
        d2=dist(centers[:, :, :, 1:], centers[:, :, :, :-1]),
        e1m=dist(fm1[:, :, :-1, :], centers), e1p=dist(fm1[:, :, 1:, :], centers),
        e2m=dist(fm2[:, :, :, :-1], centers), e2p=dist(fm2[:, :, :, 1:], centers),
        centers=centers.astype(float), side_nvec=side_nvec, side_x=side_x, w=w)


# ---------------------------------------------------------------------------
# settings and the operator extension
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FVSettings:
    limiter: str = "minmod"
    indicator: IndicatorConfig = IndicatorConfig()
    mode: str = "indicator"   # indicator | all | off

    def __post_init__(self):
        get_limiter(self.limiter)
        if self.mode not in ("indicator", "all", "off"):
            raise ConfigError(f"unknown FV mode {self.mode!r} (indicator, all, off)")


def _slot_view(a: np.ndarray, kind: str):
    """Boundary rows of an element array (..., n, n) as (..., 4, n)."""
    if kind == "first":
        parts = [a[..., 0, :], a[..., -1, :], a[..., :, 0], a[..., :, -1]]
    else:  # second row inwards
        parts = [a[..., 1, :], a[..., -2, :], a[..., :, 1], a[..., :, -2]]
    return np.stack(parts, axis=-2)


class FVSubcells:
    """FV part of the hybrid operator; owned by :class:`dgflux.dg.DGOperator`."""

    def __init__(self, op, settings: FVSettings):
        if op.basis.N < 1:
            raise ConfigError("finite-volume subcells need N >= 1")
        self.op = op
        self.settings = settings
        self.limiter = get_limiter(settings.limiter)
        self.geo = compute_subcell_geometry(op)
        sg = self.geo
        N = op.basis.N
        # per-slot distances: boundary subcell centroid to the element face, and to its inner neighbour
        self.slot_e = np.stack([sg.e1m[:, 0, :], sg.e1p[:, N, :], sg.e2m[:, :, 0], sg.e2p[:, :, N]], axis=1)
        self.slot_d = np.stack([sg.d1[:, 0, :], sg.d1[:, N - 1, :], sg.d2[:, :, 0], sg.d2[:, :, N - 1]], axis=1)
        self.side_sJ = np.sqrt((sg.side_nvec ** 2).sum(axis=1))
        self.side_normal = sg.side_nvec / self.side_sJ[:, None]
        self.allowed = ~op.mesh.mortar_adjacent()
        p = op.plan
        self.flux_sides = p.conforming

    # -- transfers ----------------------------------------------------------

    def to_fv(self, U: np.ndarray, elems) -> np.ndarray:
        """Conservative DG -> FV transfer: subcell means of J U divided by J_ij."""
        elems = np.asarray(elems)
        J = self.op.geo.J[elems]
        return dg_to_fv(U[:, elems] * J, self.op.basis) / self.geo.J[elems]

    def to_dg(self, Ufv: np.ndarray, elems) -> np.ndarray:
        elems = np.asarray(elems)
        return fv_to_dg(Ufv * self.geo.J[elems], self.op.basis) / self.op.geo.J[elems]

    def element_integrals(self, Ufv: np.ndarray, elems) -> np.ndarray:
        w = self.geo.w
        return w * w * np.einsum("eij,veij->ve", self.geo.J[elems], Ufv)

    def switch(self, U: np.ndarray, is_fv: np.ndarray, new_fv: np.ndarray) -> np.ndarray:
        """Apply the representation changes; returns the updated state."""
        U = U.copy()
        to_fv = np.flatnonzero(new_fv & ~is_fv)
        to_dg = np.flatnonzero(is_fv & ~new_fv)
        if len(to_fv):
            U[:, to_fv] = self.to_fv(U, to_fv)
        if len(to_dg):
            U[:, to_dg] = self.to_dg(U[:, to_dg], to_dg)
        return U

    # -- indicators -----------------------------------------------------------

    def indicator(self, U: np.ndarray, is_fv: np.ndarray) -> np.ndarray:
        op = self.op
        cfg = self.settings.indicator
        Udg = U.copy()
        fvid = np.flatnonzero(is_fv)
        if len(fvid):
            Udg[:, fvid] = self.to_dg(U[:, fvid], fvid)
        if cfg.kind is IndicatorKind.PERSSON:
            return indicator_persson(Udg[0], op.basis, cfg.floor)
        if not hasattr(op.eq, "pressure"):
            raise ConfigError("the Jameson indicator needs a pressure (Euler/Navier-Stokes)")
        # pressure at the nodes (subcell means for FV elements) and across every face
        p = op.eq.pressure(U)
        if np.any(~(p > 0.0)):
            raise NonPhysicalState("non-positive pressure in indicator evaluation")
        from .dg import prolong_to_faces
        traces = prolong_to_faces(U, op.basis)
        if len(fvid):
            self.overwrite_traces(traces, U, is_fv)
        pt = op.eq.pressure(traces)[None]
        ref, oth = gather_sides(pt, op.plan)
        s = op.mesh.sides
        nb = np.full((op.mesh.n_elems * 4 * op.basis.n,), np.nan)
        pr = op.plan.paired
        inner = pr[s.kind[pr] == 1]
        nb[op.plan.ref_flat[inner]] = oth[0, inner]
        nb[op.plan.oth_flat[inner]] = ref[0, inner]
        return indicator_jameson(p, nb.reshape(op.mesh.n_elems, 4, op.basis.n))

    def update(self, U: np.ndarray, is_fv: np.ndarray):
        """One switching pass: returns (new state, new FV mask, indicator values)."""
        mode = self.settings.mode
        if mode == "off":
            new = np.zeros_like(is_fv)
            ind = np.zeros(len(is_fv))
        elif mode == "all":
            new = np.ones_like(is_fv)
            ind = np.zeros(len(is_fv))
        else:
            ind = self.indicator(U, is_fv)
            cfg = self.settings.indicator
            new = update_representation(is_fv, ind, cfg.upper, cfg.lower, self.allowed)
        if mode == "all" and np.any(~self.allowed):
            raise ConfigError("all-FV mode is not available on meshes with mortar interfaces")
        return self.switch(U, is_fv, new), new, ind

    # -- operator hooks ---------------------------------------------------------

    def overwrite_traces(self, traces: np.ndarray, U: np.ndarray, is_fv: np.ndarray):
        """FV elements expose their boundary subcell means as face data."""
        traces[:, is_fv] = _slot_view(U[:, is_fv], "first")

    def _reconstruction_payload(self, U: np.ndarray, is_fv: np.ndarray):
        """Second face-data array: outward inner slope (primitive) and centroid distance."""
        eq = self.op.eq
        nv = U.shape[0]
        ne, n = self.op.mesh.n_elems, self.op.basis.n
        payload = np.zeros((nv + 1, ne, 4, n))
        fvid = np.flatnonzero(is_fv)
        q = eq.cons_to_prim(U[:, fvid], where="FV subcell means")
        b = _slot_view(q, "first")
        c = _slot_view(q, "second")
        payload[:nv, fvid] = (b - c) / self.slot_d[fvid]
        payload[nv, fvid] = self.slot_e[fvid]
        return payload

    def side_fluxes(self, U, t, is_fv, ref, oth, flux, oth_flux):
        """Fluxes (per unit reference length) of every side touching an FV element.

        Fills ``flux`` (ref-slot representation) and ``oth_flux`` (other-slot
        representation, ref orientation); stores the outward limited slopes
        of the boundary subcells for :meth:`time_derivative`.
        """
        op = self.op
        eq = op.eq
        plan = op.plan
        s = op.mesh.sides
        sides = self.flux_sides
        has_oth = s.oth_elem[sides] >= 0
        r_fv = is_fv[s.ref_elem[sides]]
        o_fv = np.where(has_oth, is_fv[np.maximum(s.oth_elem[sides], 0)], False)
        sel = r_fv | o_fv
        sides = sides[sel]
        r_fv, o_fv, has_oth = r_fv[sel], o_fv[sel], has_oth[sel]
        nv = U.shape[0]
        n = op.basis.n
        self.slot_slopes = np.zeros((nv, op.mesh.n_elems, 4, n))
        if not len(sides):
            return
        Vf, Vi = op.basis.fv.dg_to_fv, op.basis.fv.fv_to_dg
        pay_r, pay_o = gather_sides(self._reconstruction_payload(U, is_fv), plan)
        pay_r, pay_o = pay_r[:, sides], pay_o[:, sides]
        Ur = ref[:, sides]
        Uo = oth[:, sides]
        # DG neighbours are evaluated at the FV face points
        Ur = np.where(r_fv[None, :, None], Ur, apply_along_face(Ur, Vf))
        Uo = np.where(o_fv[None, :, None], Uo, apply_along_face(Uo, Vf))
        nrm = self.side_normal[sides]
        nx, ny = nrm[:, 0], nrm[:, 1]
        xs = self.geo.side_x[sides]
        qr = eq.cons_to_prim(Ur, where="FV face data")
        er = np.where(r_fv[:, None], pay_r[nv], 0.0)
        eo = np.where(o_fv[:, None], pay_o[nv], 0.0)
        # boundary sides: mirror ghost at twice the centroid distance
        bidx = np.flatnonzero(~has_oth)
        groups = {}
        for bct, bs in op.bc_groups.items():
            ks = bidx[np.isin(sides[bidx], bs)]
            if len(ks):
                groups[bct] = ks

        def fill_ghosts(Uin, Uout):
            for bct, ks in groups.items():
                Uout[:, ks] = ghost_state(bct, eq, Uin[:, ks], nx[ks], ny[ks], xs[ks, 0], xs[ks, 1],
                                          t, op.exact)

        fill_ghosts(Ur, Uo)
        eo[bidx] = er[bidx]
        qo = eq.cons_to_prim(Uo, where="FV face data")
        sigma = (qo - qr) / (er + eo)[None]
        lim = self.limiter
        s_r = np.where(r_fv[None, :, None], lim(pay_r[:nv], sigma), 0.0)
        s_o = np.where(o_fv[None, :, None], lim(pay_o[:nv], -sigma), 0.0)
        UL = self._cons(qr + s_r * er[None], sides, "side")
        UR = self._cons(qo + s_o * eo[None], sides, "side")
        fill_ghosts(UL, UR)
        f = eq.riemann(UL, UR, nx, ny, op.riemann_solver, op.two_point) * self.side_sJ[sides]
        fdg = apply_along_face(f, Vi)
        flux[:, sides] = np.where(r_fv[None, :, None], f, fdg)
        oth_flux[:, sides] = np.where(o_fv[None, :, None], f, fdg)
        slopes = self.slot_slopes.reshape(nv, -1)
        slopes[:, plan.ref_flat[sides]] = s_r
        po = sides[has_oth]
        slopes[:, plan.oth_flat[po]] = s_o[:, has_oth]

    def time_derivative(self, U, t, is_fv, slots, Ut):
        """Overwrite Ut of the FV elements with the subcell update."""
        op = self.op
        eq = op.eq
        fvid = np.flatnonzero(is_fv)
        sg = self.geo
        N = op.basis.N
        w = sg.w
        lim = self.limiter
        q = eq.cons_to_prim(U[:, fvid], where="FV subcell means")
        ss = self.slot_slopes[:, fvid]
        # xi1 direction
        sig = (q[:, :, 1:, :] - q[:, :, :-1, :]) / sg.d1[fvid]
        s1 = np.empty_like(q)
        s1[:, :, 1:-1, :] = lim(sig[:, :, :-1, :], sig[:, :, 1:, :])
        s1[:, :, 0, :] = -ss[:, :, 0]
        s1[:, :, N, :] = ss[:, :, 1]
        sig = (q[:, :, :, 1:] - q[:, :, :, :-1]) / sg.d2[fvid]
        s2 = np.empty_like(q)
        s2[:, :, :, 1:-1] = lim(sig[:, :, :, :-1], sig[:, :, :, 1:])
        s2[:, :, :, 0] = -ss[:, :, 2]
        s2[:, :, :, N] = ss[:, :, 3]
        e1m, e1p = sg.e1m[fvid], sg.e1p[fvid]
        e2m, e2p = sg.e2m[fvid], sg.e2p[fvid]
        rs, tp = op.riemann_solver, op.two_point
        # inner xi1 faces between subcell k and k+1
        qL = q[:, :, :-1, :] + s1[:, :, :-1, :] * e1p[:, :-1, :]
        qR = q[:, :, 1:, :] - s1[:, :, 1:, :] * e1m[:, 1:, :]
        nvec = sg.n1[fvid]
        area = np.sqrt(nvec[:, 0] ** 2 + nvec[:, 1] ** 2)
        f1 = eq.riemann(self._cons(qL, fvid), self._cons(qR, fvid), nvec[:, 0] / area, nvec[:, 1] / area, rs, tp) * area
        qL = q[:, :, :, :-1] + s2[:, :, :, :-1] * e2p[:, :, :-1]
        qR = q[:, :, :, 1:] - s2[:, :, :, 1:] * e2m[:, :, 1:]
        nvec = sg.n2[fvid]
        area = np.sqrt(nvec[:, 0] ** 2 + nvec[:, 1] ** 2)
        f2 = eq.riemann(self._cons(qL, fvid), self._cons(qR, fvid), nvec[:, 0] / area, nvec[:, 1] / area, rs, tp) * area
        res = np.zeros_like(q)
        res[:, :, :-1, :] += f1
        res[:, :, 1:, :] -= f1
        res[:, :, :, :-1] += f2
        res[:, :, :, 1:] -= f2
        sl = slots[:, fvid]
        res[:, :, 0, :] += w * sl[:, :, 0]
        res[:, :, N, :] += w * sl[:, :, 1]
        res[:, :, :, 0] += w * sl[:, :, 2]
        res[:, :, :, N] += w * sl[:, :, 3]
        Ut[:, fvid] = -res / (w * w * sg.J[fvid])

    def _cons(self, q, ids, what="element"):
        """Reconstructed primitive -> conservative, reporting offending subcells."""
        eq = self.op.eq
        if q.shape[0] == 4:
            bad = ~(q[0] > 0.0) | ~(q[3] > 0.0)
        else:
            bad = ~np.isfinite(q[0])
        if np.any(bad):
            where = np.argwhere(bad)
            loc = [(int(ids[w[0]]),) + tuple(int(v) for v in w[1:]) for w in where[:5]]
            raise NonPhysicalState(f"reconstructed state not physical at ({what}, subcell index) {loc}",
                                   values=np.moveaxis(q, 0, -1)[bad][:5], where="FV reconstruction")
        return eq.prim_to_cons(q)
