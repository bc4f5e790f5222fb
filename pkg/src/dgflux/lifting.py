"""BR1 lifting: gradients of the lifted variables and the viscous side flux.

The gradient of the lifted variables L(U) is the weak-form solution of
g = grad L with surface value U* = mean of the two traces (the boundary
value on boundary sides).  Mortar sides follow the same
interpolate-then-project path as the advective fluxes.
"""

from __future__ import annotations

import numpy as np

from .boundary import boundary_viscous_flux, lifting_boundary_value
from .exchange import gather_sides
from .mortar import interpolate_children


def _side_traces(op, vol: np.ndarray):
    from .dg import prolong_to_faces

    ref, oth = gather_sides(prolong_to_faces(vol, op.basis), op.plan)
    if len(op.plan.child):
        c = op.plan.child
        ref[:, c] = interpolate_children(ref[:, c], op.plan.child_pos, op.basis)
    return ref, oth


def lifting_surface_values(op, U: np.ndarray, t: float, ref_U: np.ndarray) -> np.ndarray:
    """U* per side in ref orientation, shape (nLift, nSides, n)."""
    eq, geo = op.eq, op.geo
    Lref, Loth = _side_traces(op, eq.lifted(U))
    ustar = 0.5 * (Lref + Loth)
    for bct, sides in op.bc_groups.items():
        nrm = geo.side_normal[sides]
        xs = geo.side_x[sides]
        ustar[:, sides] = lifting_boundary_value(bct, eq, ref_U[:, sides], nrm[:, 0], nrm[:, 1],
                                                 xs[:, 0], xs[:, 1], t, op.exact)
    return ustar


def lift_gradients(op, U: np.ndarray, t: float, ref_U: np.ndarray):
    """(gx, gy), each (nLift, nElems, n, n), of the lifted variables."""
    from .dg import surface_integral

    basis, geo = op.basis, op.geo
    L = op.eq.lifted(U)
    ustar = lifting_surface_values(op, U, t, ref_U)
    Dh = basis.Dhat
    out = []
    for d in range(2):
        vol = np.matmul(Dh, geo.Ja[:, 0, d] * L)
        vol += np.matmul(geo.Ja[:, 1, d] * L, Dh.T)
        slots = op.scatter(ustar * geo.side_nvec[:, d][None])
        vol += surface_integral(slots, basis)
        out.append(vol / geo.J)
    return out[0], out[1]


def viscous_side_flux(op, U: np.ndarray, t: float, grads, ref_U: np.ndarray,
                      oth_U: np.ndarray, sides: np.ndarray) -> np.ndarray:
    """Normal viscous flux F^v . n (unit normal) on ``sides``: BR1 mean of both traces."""
    eq, geo = op.eq, op.geo
    gxr, gxo = _side_traces(op, grads[0])
    gyr, gyo = _side_traces(op, grads[1])
    nx, ny = geo.side_normal[:, 0], geo.side_normal[:, 1]
    flux = np.zeros_like(ref_U)
    # mortar parents carry no other trace; their flux comes from the children
    pr = op.plan.paired
    fr, gr = eq.viscous_flux(ref_U[:, pr], gxr[:, pr], gyr[:, pr])
    fo, go = eq.viscous_flux(oth_U[:, pr], gxo[:, pr], gyo[:, pr])
    flux[:, pr] = 0.5 * ((fr + fo) * nx[pr] + (gr + go) * ny[pr])
    for bct, bs in op.bc_groups.items():
        xs = geo.side_x[bs]
        flux[:, bs] = boundary_viscous_flux(bct, eq, ref_U[:, bs], gxr[:, bs], gyr[:, bs],
                                            nx[bs], ny[bs], xs[:, 0], xs[:, 1], t, op.exact)
    return flux[:, sides]
