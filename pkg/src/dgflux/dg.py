"""Semi-discrete DG spectral element operator on curved quadrilaterals.

Solution layout: ``U[var, elem, i, j]`` with i along xi1 and j along xi2.
The time derivative is assembled in the fixed sequence
prolong -> exchange -> lifting -> volume integral -> surface fluxes ->
surface integral -> multiply by -1/J.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .basis import NodalBasis
from .boundary import BCType, boundary_viscous_flux, ghost_state
from .equations import Euler, RiemannSolver, TwoPointFlux, parse_riemann, parse_two_point
from .errors import ConfigError, NonPhysicalState
from .exchange import build_side_plan, gather_sides, scatter_to_slots
from .geometry import Geometry, compute_geometry
from .mesh import Mesh
from .mortar import interpolate_children, mortar_project


class Form(str, enum.Enum):
    WEAK = "weak"
    STRONG = "strong"
    SPLIT = "split"

    @classmethod
    def parse(cls, value) -> "Form":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for item in cls:
            if item.value == key:
                return item
        raise ValueError(f"unknown DG form {value!r} (weak, strong, split)")


# ---------------------------------------------------------------------------
# element-local kernels
# ---------------------------------------------------------------------------


def prolong_to_faces(U: np.ndarray, basis: NodalBasis) -> np.ndarray:
    """Face traces (nVar, nElems, 4, N+1) in element orientation."""
    nv, ne, n, _ = U.shape
    out = np.empty((nv, ne, 4, n))
    if basis.is_lobatto:
        out[:, :, 0] = U[:, :, 0, :]
        out[:, :, 1] = U[:, :, -1, :]
        out[:, :, 2] = U[:, :, :, 0]
        out[:, :, 3] = U[:, :, :, -1]
    else:
        out[:, :, 0] = np.einsum("i,veij->vej", basis.ell_minus, U)
        out[:, :, 1] = np.einsum("i,veij->vej", basis.ell_plus, U)
        out[:, :, 2] = np.einsum("j,veij->vei", basis.ell_minus, U)
        out[:, :, 3] = np.einsum("j,veij->vei", basis.ell_plus, U)
    return out


def contravariant(F, G, Ja):
    """(F1, F2) with F^i = Ja^i_x F + Ja^i_y G."""
    return Ja[:, 0, 0] * F + Ja[:, 0, 1] * G, Ja[:, 1, 0] * F + Ja[:, 1, 1] * G


def volume_integral_weak(F1: np.ndarray, F2: np.ndarray, basis: NodalBasis) -> np.ndarray:
    """sum_a Dhat_ia F1_aj + sum_b Dhat_jb F2_ib."""
    Dh = basis.Dhat
    acc = np.matmul(Dh, F1)
    acc += np.matmul(F2, Dh.T)
    return acc


def volume_integral_strong(F1: np.ndarray, F2: np.ndarray, basis: NodalBasis) -> np.ndarray:
    D = basis.D
    acc = np.matmul(D, F1)
    acc += np.matmul(F2, D.T)
    return acc


def _pair_matrix(D: np.ndarray):
    n = D.shape[0]
    I, A = np.triu_indices(n, 1)
    M = np.zeros((n, len(I)))
    M[I, np.arange(len(I))] = D[I, A]
    M[A, np.arange(len(I))] = D[A, I]
    return I, A, M


def volume_integral_split(U, Ja, basis: NodalBasis, eq, variant=TwoPointFlux.STANDARD,
                          F1=None, F2=None, compiled: bool = True) -> np.ndarray:
    """2 sum_a D_ia F#1(U_ij, U_aj) + 2 sum_b D_jb F#2(U_ij, U_ib).

    Two-point fluxes are contracted with arithmetically averaged metric
    terms; each symmetric pair is evaluated once.  The diagonal uses the
    pointwise contravariant flux (F1, F2) if given.  For the Euler
    equations a compiled loop is used unless ``compiled`` is False.
    """
    if not basis.is_lobatto:
        raise ConfigError("the split form requires Gauss-Lobatto nodes (SBP property)")
    variant = parse_two_point(variant)
    D = basis.D
    I, A, M = _pair_matrix(D)
    nv = eq.node_vars(U)
    if F1 is None:
        F, G = eq.physical_flux(U)
        F1, F2 = contravariant(F, G, Ja)
    if compiled and isinstance(eq, Euler):
        from .kernels import VARIANT_CODES, split_volume_euler
        return split_volume_euler(np.ascontiguousarray(nv), np.ascontiguousarray(Ja), D,
                                  np.ascontiguousarray(F1), np.ascontiguousarray(F2),
                                  VARIANT_CODES[variant.value], float(eq.gamma))
    d = np.diag(D)
    # xi1 sweep
    a = nv[:, :, I, :]
    b = nv[:, :, A, :]
    mx = 0.5 * (Ja[:, 0, 0][:, I, :] + Ja[:, 0, 0][:, A, :])
    my = 0.5 * (Ja[:, 0, 1][:, I, :] + Ja[:, 0, 1][:, A, :])
    f = eq.two_point(a, b, mx, my, variant)
    acc = 2.0 * np.matmul(M, f)
    acc += 2.0 * d[:, None] * F1
    # xi2 sweep
    a = nv[:, :, :, I]
    b = nv[:, :, :, A]
    mx = 0.5 * (Ja[:, 1, 0][:, :, I] + Ja[:, 1, 0][:, :, A])
    my = 0.5 * (Ja[:, 1, 1][:, :, I] + Ja[:, 1, 1][:, :, A])
    f = eq.two_point(a, b, mx, my, variant)
    acc += 2.0 * np.matmul(f, M.T)
    acc += 2.0 * F2 * d[None, :]
    return acc


def surface_integral(slots: np.ndarray, basis: NodalBasis) -> np.ndarray:
    """Lift outward face fluxes (nVar, nElems, 4, n) into the element with l_hat."""
    lm, lp = basis.ellhat_minus, basis.ellhat_plus
    acc = lm[:, None] * slots[:, :, 0, None, :]
    acc += lp[:, None] * slots[:, :, 1, None, :]
    acc += slots[:, :, 2, :, None] * lm[None, :]
    acc += slots[:, :, 3, :, None] * lp[None, :]
    return acc


def interior_normal_flux(F1, F2, basis: NodalBasis) -> np.ndarray:
    """Interior contravariant flux times outward reference normal at the faces."""
    t1 = prolong_to_faces(F1, basis)
    t2 = prolong_to_faces(F2, basis)
    out = np.empty_like(t1)
    out[:, :, 0] = -t1[:, :, 0]
    out[:, :, 1] = t1[:, :, 1]
    out[:, :, 2] = -t2[:, :, 2]
    out[:, :, 3] = t2[:, :, 3]
    return out


# ---------------------------------------------------------------------------
# operator
# ---------------------------------------------------------------------------


@dataclass
class Workspace:
    """Intermediate results of the last operator call (for diagnostics/tests)."""

    side_ref: np.ndarray | None = None
    side_oth: np.ndarray | None = None
    side_flux: np.ndarray | None = None
    slots: np.ndarray | None = None
    gradients: tuple | None = None


class DGOperator:
    """Hybrid DG/FV spatial operator for a fixed mesh, basis and equation system.

    ``bc_types`` maps boundary tag names to :class:`BCType` values,
    ``exact(x, y, t)`` supplies Dirichlet data.  ``fv`` is an optional
    :class:`dgflux.fv.FVSettings`; when given, elements flagged in the
    ``fv_mask`` argument of :meth:`time_derivative` are advanced as
    (N+1)^2 finite-volume subcells.
    """

    def __init__(self, mesh: Mesh, basis: NodalBasis, eq, form="weak", riemann="rusanov",
                 two_point="standardmean", bc_types: dict | None = None, exact=None, fv=None,
                 lifting: bool | None = None, geometry: Geometry | None = None):
        self.mesh = mesh
        self.basis = basis
        self.eq = eq
        self.form = Form.parse(form)
        self.riemann_solver = parse_riemann(riemann)
        self.two_point = parse_two_point(two_point)
        if self.form is Form.SPLIT and not basis.is_lobatto:
            raise ConfigError("the split form requires Gauss-Lobatto nodes: its entropy/energy "
                              "properties rely on the summation-by-parts structure")
        self.viscous = eq.is_viscous if lifting is None else (bool(lifting) and eq.is_viscous)
        if fv is not None and self.viscous:
            raise ConfigError("finite-volume subcells are only available for inviscid systems")
        self.exact = exact
        self.geo = geometry if geometry is not None else compute_geometry(mesh, basis)
        self.plan = build_side_plan(mesh, basis.n)
        self._setup_boundaries(bc_types or {})
        self._child_col = {int(s): c for c, s in enumerate(self.plan.child)}
        self.fv = None
        if fv is not None:
            from .fv import FVSubcells
            self.fv = FVSubcells(self, fv)
        self.work = Workspace()

    # -- setup -------------------------------------------------------------

    def _setup_boundaries(self, bc_types: dict):
        s = self.mesh.sides
        groups = {}
        for side in self.plan.boundary:
            name = self.mesh.bc_names[s.bc[side]]
            if name not in bc_types:
                raise ConfigError(f"no boundary condition given for boundary tag {name!r}")
            bct = BCType.parse(bc_types[name])
            if bct is BCType.DIRICHLET and self.exact is None:
                raise ConfigError("Dirichlet boundaries need an exact function")
            groups.setdefault(bct, []).append(side)
        self.bc_groups = {k: np.array(v, dtype=np.int64) for k, v in groups.items()}

    # -- helpers ------------------------------------------------------------

    @property
    def nvar(self) -> int:
        return self.eq.nvar

    def state_shape(self):
        n = self.basis.n
        return (self.eq.nvar, self.mesh.n_elems, n, n)

    def node_coordinates(self):
        return self.geo.x[:, 0], self.geo.x[:, 1]

    def project(self, func, t: float = 0.0) -> np.ndarray:
        """Nodal interpolation of ``func(x, y, t)`` (collocation)."""
        x, y = self.node_coordinates()
        return np.ascontiguousarray(np.asarray(func(x, y, t), dtype=float))

    def riemann(self, UL, UR, normal):
        return self.eq.riemann(UL, UR, normal[0], normal[1], self.riemann_solver, self.two_point)

    def _ghost(self, ref, t, sel=None, side_normal=None, side_x=None):
        """Exterior states for every boundary side."""
        oth = {}
        geo = self.geo
        for bct, sides in self.bc_groups.items():
            nrm = geo.side_normal[sides] if side_normal is None else side_normal[sides]
            xs = geo.side_x[sides] if side_x is None else side_x[sides]
            oth[bct] = ghost_state(bct, self.eq, ref[:, sides], nrm[:, 0], nrm[:, 1],
                                   xs[:, 0], xs[:, 1], t, self.exact)
        return oth

    # -- side assembly --------------------------------------------------------

    def side_states(self, traces: np.ndarray, t: float):
        """(ref, other) side traces in ref orientation, BC ghosts and mortar halves filled."""
        ref, oth = gather_sides(traces, self.plan)
        if len(self.plan.child):
            c = self.plan.child
            ref[:, c] = interpolate_children(ref[:, c], self.plan.child_pos, self.basis)
        for bct, vals in self._ghost(ref, t).items():
            oth[:, self.bc_groups[bct]] = vals
        return ref, oth

    def project_parents(self, side_vals: np.ndarray) -> np.ndarray:
        """Projected big-face values for all mortar parent sides."""
        pc = self.plan.parent_children
        lo = side_vals[:, pc[:, 0]]
        hi = side_vals[:, pc[:, 1]]
        return mortar_project(2.0 * lo, 2.0 * hi, self.basis)

    def scatter(self, side_vals: np.ndarray, oth_vals: np.ndarray | None = None) -> np.ndarray:
        parent = self.project_parents(side_vals) if len(self.plan.parent) else None
        if oth_vals is None:
            return scatter_to_slots(side_vals, self.plan, parent)
        slots = scatter_to_slots(side_vals, self.plan, parent)
        p = self.plan.paired
        flat = slots.reshape(slots.shape[0], -1)
        flat[:, self.plan.oth_flat[p]] = -oth_vals[:, p]
        return slots

    # -- the operator ---------------------------------------------------------

    def time_derivative(self, U: np.ndarray, t: float = 0.0, fv_mask=None) -> np.ndarray:
        eq, basis, geo, plan = self.eq, self.basis, self.geo, self.plan
        if fv_mask is not None and np.any(fv_mask):
            if self.fv is None:
                raise ConfigError("finite-volume elements requested but FV is disabled")
            fv_mask = np.asarray(fv_mask, dtype=bool)
        else:
            fv_mask = None
        # prolongation (FV elements expose their boundary subcell means)
        traces = prolong_to_faces(U, basis)
        if fv_mask is not None:
            self.fv.overwrite_traces(traces, U, fv_mask)
        ref, oth = self.side_states(traces, t)

        # lifting
        grads = None
        if self.viscous:
            from .lifting import lift_gradients
            grads = lift_gradients(self, U, t, ref)

        # volume integral
        F, G = eq.physical_flux(U)
        if grads is not None:
            Fv, Gv = eq.viscous_flux(U, grads[0], grads[1])
        F1, F2 = contravariant(F, G, geo.Ja)
        if self.form is Form.WEAK:
            if grads is not None:
                Fv1, Fv2 = contravariant(Fv, Gv, geo.Ja)
                vol = volume_integral_weak(F1 - Fv1, F2 - Fv2, basis)
            else:
                vol = volume_integral_weak(F1, F2, basis)
        elif self.form is Form.STRONG:
            if grads is not None:
                Fv1, Fv2 = contravariant(Fv, Gv, geo.Ja)
                F1, F2 = F1 - Fv1, F2 - Fv2
            vol = volume_integral_strong(F1, F2, basis)
        else:
            vol = volume_integral_split(U, geo.Ja, basis, eq, self.two_point, F1, F2)
            if grads is not None:
                Fv1, Fv2 = contravariant(Fv, Gv, geo.Ja)
                vol -= volume_integral_strong(Fv1, Fv2, basis)
                F1, F2 = F1 - Fv1, F2 - Fv2

        # surface fluxes on pure DG sides
        flux = np.zeros_like(ref)
        dg_sides = self._dg_side_indices(fv_mask)
        if len(dg_sides):
            nrm = geo.side_normal[:, :, :][dg_sides]
            f = self.riemann(ref[:, dg_sides], oth[:, dg_sides], (nrm[:, 0], nrm[:, 1]))
            if grads is not None:
                from .lifting import viscous_side_flux
                f = f - viscous_side_flux(self, U, t, grads, ref, oth, dg_sides)
            flux[:, dg_sides] = f * geo.side_sJ[dg_sides]
        oth_flux = None
        if fv_mask is not None:
            oth_flux = flux.copy()
            self.fv.side_fluxes(U, t, fv_mask, ref, oth, flux, oth_flux)
        slots = self.scatter(flux, oth_flux)

        # surface integral
        if self.form is Form.WEAK:
            surf = surface_integral(slots, basis)
        else:
            surf = surface_integral(slots - interior_normal_flux(F1, F2, basis), basis)
        Ut = vol
        Ut += surf
        Ut *= -1.0 / geo.J
        if fv_mask is not None:
            self.fv.time_derivative(U, t, fv_mask, slots, Ut)
        self.work = Workspace(side_ref=ref, side_oth=oth, side_flux=flux, slots=slots,
                              gradients=grads)
        return Ut

    def _dg_side_indices(self, fv_mask):
        p = self.plan
        sides = np.concatenate([p.conforming, p.child]) if len(p.child) else p.conforming
        if fv_mask is None:
            return sides
        s = self.mesh.sides
        ref_fv = fv_mask[s.ref_elem[sides]]
        oth_fv = np.where(s.oth_elem[sides] >= 0, fv_mask[np.maximum(s.oth_elem[sides], 0)], False)
        return sides[~(ref_fv | oth_fv)]

    # -- diagnostics ----------------------------------------------------------

    def integrate(self, U: np.ndarray, fv_mask=None) -> np.ndarray:
        """Element-integrated conserved quantities, summed per variable."""
        w = self.basis.weights
        vals = np.einsum("i,j,eij,veij->ve", w, w, self.geo.J, U)
        if fv_mask is not None and np.any(fv_mask):
            vals[:, fv_mask] = self.fv.element_integrals(U[:, fv_mask], np.flatnonzero(fv_mask))
        return vals.sum(axis=1)

    def check_physical(self, U):
        if isinstance(self.eq, Euler):
            self.eq.check_state(U)
        elif not np.all(np.isfinite(U)):
            raise NonPhysicalState("non-finite solution values")
