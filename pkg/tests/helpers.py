"""Shared builders for operator-level tests."""

import numpy as np

from dgflux.basis import get_basis
from dgflux.dg import DGOperator
from dgflux.equations import Euler
from dgflux.mesh import apply_curving, build_mortar_interfaces, curving_map, generate_cartesian

UNIT = ((0.0, 1.0), (0.0, 1.0))
TAGS = ("xmin", "xmax", "ymin", "ymax")


def make_mesh(nx=4, ny=4, periodic=(True, True), curving="none", amp=0.1, ngeo=1, refine=None,
              bounds=UNIT, k=1):
    m = generate_cartesian(nx, ny, bounds, periodic=periodic)
    if curving != "none":
        m = apply_curving(m, curving_map(curving, bounds, amp), ngeo)
    if refine is not None:
        m = build_mortar_interfaces(m, refine)
    return m.with_partitions(k) if k > 1 else m


def make_op(mesh, N=3, family="LGL", eq=None, form="weak", riemann="rusanov", two_point="standardmean",
            bc="dirichlet", exact=None, fv=None, **kw):
    eq = eq if eq is not None else Euler()
    bcs = {name: bc for name in mesh.bc_names}
    return DGOperator(mesh, get_basis(N, family), eq, form=form, riemann=riemann, two_point=two_point,
                      bc_types=bcs, exact=exact, fv=fv, **kw)


def const_state(op, rho=1.0, u=0.3, v=-0.2, p=0.9):
    return op.project(lambda x, y, t: op.eq.prim_to_cons(np.stack([np.full_like(x, rho), np.full_like(x, u),
                                                                    np.full_like(x, v), np.full_like(x, p)])))


def smooth_state(op, amp=0.2):
    def f(x, y, t):
        rho = 1.0 + amp * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)
        u = 0.4 + amp * np.cos(2 * np.pi * y)
        v = -0.3 + amp * np.sin(2 * np.pi * x)
        p = 1.0 + amp * np.cos(2 * np.pi * (x + y))
        return op.eq.prim_to_cons(np.stack([rho, u, v, p]))
    return op.project(f)


def total(op, Ut):
    """Sum of J w Ut per variable."""
    w = op.basis.weights
    return np.einsum("i,j,eij,veij->v", w, w, op.geo.J, Ut)
