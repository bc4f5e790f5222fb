"""Weakly imposed boundary conditions through ghost states.

Each boundary type supplies the exterior state handed to the Riemann
solver, the boundary value of the lifted variables (BR1 surface value),
and the normal viscous flux.
"""

from __future__ import annotations

import enum

import numpy as np

from .equations import Euler, ScalarAdvectionDiffusion


class BCType(str, enum.Enum):
    DIRICHLET = "dirichlet"
    SLIPWALL = "slipwall"
    NOSLIP = "noslip"
    EXTRAPOLATE = "extrapolate"

    @classmethod
    def parse(cls, value) -> "BCType":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for item in cls:
            if item.value == key:
                return item
        raise ValueError(f"unknown boundary condition {value!r}; expected one of "
                         + ", ".join(i.value for i in cls))


def _reflect(U, nx, ny):
    mn = U[1] * nx + U[2] * ny
    out = U.copy()
    out[1] = U[1] - 2.0 * mn * nx
    out[2] = U[2] - 2.0 * mn * ny
    return out


def ghost_state(bc: BCType, eq, U, nx, ny, x, y, t, exact):
    """Exterior state for the Riemann solver.  Arrays are (nVar, ...)."""
    if bc is BCType.DIRICHLET:
        return np.asarray(exact(x, y, t), dtype=float)
    if bc is BCType.EXTRAPOLATE or isinstance(eq, ScalarAdvectionDiffusion):
        return U.copy()
    if bc is BCType.SLIPWALL:
        return _reflect(U, nx, ny)
    if bc is BCType.NOSLIP:
        out = U.copy()
        out[1] = -U[1]
        out[2] = -U[2]
        return out
    raise ValueError(bc)


def lifting_boundary_value(bc: BCType, eq, U, nx, ny, x, y, t, exact):
    """Lifted variables on the boundary (used as the BR1 surface value)."""
    if bc is BCType.DIRICHLET:
        return eq.lifted(np.asarray(exact(x, y, t), dtype=float))
    L = eq.lifted(U)
    if bc is BCType.EXTRAPOLATE or isinstance(eq, ScalarAdvectionDiffusion):
        return L
    if bc is BCType.SLIPWALL:
        un = L[0] * nx + L[1] * ny
        L = L.copy()
        L[0] = L[0] - un * nx
        L[1] = L[1] - un * ny
        return L
    if bc is BCType.NOSLIP:
        L = L.copy()
        L[0] = 0.0
        L[1] = 0.0
        return L
    raise ValueError(bc)


def boundary_viscous_flux(bc: BCType, eq, U, gx, gy, nx, ny, x, y, t, exact):
    """Normal viscous flux F^v . n on a boundary face."""
    if bc is BCType.SLIPWALL and isinstance(eq, Euler):
        return np.zeros_like(U)
    if bc is BCType.DIRICHLET:
        Ub = np.asarray(exact(x, y, t), dtype=float)
        F, G = eq.viscous_flux(Ub, gx, gy)
        return F * nx + G * ny
    if bc is BCType.NOSLIP and isinstance(eq, Euler):
        Uw = U.copy()
        Uw[1] = 0.0
        Uw[2] = 0.0
        F, G = eq.viscous_flux(Uw, gx, gy)
        f = F * nx + G * ny
        f[3] = 0.0  # adiabatic: no heat flux, no work at rest
        return f
    F, G = eq.viscous_flux(U, gx, gy)
    return F * nx + G * ny
