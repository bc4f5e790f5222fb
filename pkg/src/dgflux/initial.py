"""Named initial conditions and exact solutions.

Every entry is a callable ``f(x, y, t) -> U`` with ``U`` of shape
(nVar, *x.shape).  ``exact`` marks functions that are exact solutions
for all t (used for error norms and Dirichlet data).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .equations import Euler, ScalarAdvectionDiffusion
from .errors import ConfigError
from .exact_riemann import exact_riemann


@dataclass(frozen=True)
class InitialCondition:
    name: str
    func: Callable
    exact: bool

    def __call__(self, x, y, t=0.0):
        return self.func(np.asarray(x, dtype=float), np.asarray(y, dtype=float), float(t))


def _full(x, vals):
    x = np.asarray(x, dtype=float)
    return np.stack([np.full(x.shape, float(v)) for v in vals])


def constant(eq, rho=1.0, u=0.0, v=0.0, p=1.0, value=1.0, **_):
    if isinstance(eq, ScalarAdvectionDiffusion):
        return InitialCondition("constant", lambda x, y, t: _full(x, [value]), True)
    U = eq.prim_to_cons(np.array([rho, u, v, p], dtype=float))
    return InitialCondition("constant", lambda x, y, t: _full(x, U), True)


def sine(eq, bounds, amplitude=1.0, offset=0.0, kx=1, ky=1, **_):
    """Advected (and diffused) sine wave; exact on a periodic box.

    Scalar: phi = offset + A sin(2 pi (kx (x - ax t)/Lx + ky (y - ay t)/Ly)) e^(-kappa |k|^2 t).
    Euler: density wave rho = 1 + A sin(...) carried by the constant velocity (u, v) = (ax, ay)
    at unit pressure (offset is ignored).
    """
    (x0, x1), (y0, y1) = bounds
    wx = 2.0 * np.pi * kx / (x1 - x0)
    wy = 2.0 * np.pi * ky / (y1 - y0)
    if isinstance(eq, ScalarAdvectionDiffusion):
        ax, ay, kap = eq.ax, eq.ay, eq.kappa

        def f(x, y, t):
            phase = wx * (x - x0 - ax * t) + wy * (y - y0 - ay * t)
            return (offset + amplitude * np.sin(phase) * np.exp(-kap * (wx ** 2 + wy ** 2) * t))[None]
        return InitialCondition("sine", f, True)
    if eq.is_viscous:
        raise ConfigError("the sine initial condition is an exact solution only for inviscid Euler")
    ax, ay = 1.0, 0.5

    def g(x, y, t):
        rho = 1.0 + amplitude * np.sin(wx * (x - x0 - ax * t) + wy * (y - y0 - ay * t))
        return eq.prim_to_cons(np.stack([rho, np.full_like(rho, ax), np.full_like(rho, ay),
                                         np.ones_like(rho)]))
    return InitialCondition("sine", g, True)


def _wrap(d, period):
    if period is None or period <= 0:
        return d
    return d - period * np.round(d / period)


def isentropic_vortex(eq, bounds, periodic=(True, True), x0=None, y0=None, beta=5.0, radius=1.0,
                      u=1.0, v=1.0, rho=1.0, p=1.0, **_):
    """Isentropic vortex convected by (u, v); exact up to the periodic tails.

    Perturbations: du, dv = beta/(2 pi) e^((1-r^2)/2) (-y', x'), dT from the
    isentropic relation, with r measured in units of ``radius``.  On a
    periodic box the nearest image of the vortex centre is used.
    """
    if not isinstance(eq, Euler):
        raise ConfigError("the isentropic vortex needs the Euler equations")
    g = eq.gamma
    (xa, xb), (ya, yb) = bounds
    cx = 0.5 * (xa + xb) if x0 is None else x0
    cy = 0.5 * (ya + yb) if y0 is None else y0
    Lx = (xb - xa) if periodic[0] else None
    Ly = (yb - ya) if periodic[1] else None
    T0 = p / rho
    s0 = p / rho ** g

    def f(x, y, t):
        dx = _wrap(x - cx - u * t, Lx) / radius
        dy = _wrap(y - cy - v * t, Ly) / radius
        r2 = dx * dx + dy * dy
        e = np.exp(0.5 * (1.0 - r2))
        du = -beta / (2 * np.pi) * e * dy
        dv = beta / (2 * np.pi) * e * dx
        dT = -(g - 1.0) * beta ** 2 / (8.0 * g * np.pi ** 2) * e * e
        T = T0 + dT
        r = rho * (T / T0) ** (1.0 / (g - 1.0))
        pr = s0 * r ** g
        return eq.prim_to_cons(np.stack([r, u + du, v + dv, pr]))
    return InitialCondition("vortex", f, True)


def riemann_problem(eq, left=(1.0, 0.0, 0.0, 1.0), right=(0.125, 0.0, 0.0, 0.1), x0=0.5, **_):
    """1D Riemann problem along x (Sod by default), exact via the exact Riemann solver."""
    if not isinstance(eq, Euler):
        raise ConfigError("the Sod/Riemann initial condition needs the Euler equations")
    L = np.array(left, dtype=float)
    R = np.array(right, dtype=float)
    sol = exact_riemann(L, R, eq.gamma)

    def f(x, y, t):
        x = np.asarray(x, dtype=float)
        if t <= 0.0:
            q = np.where(x[None] < x0, L.reshape((4,) + (1,) * x.ndim), R.reshape((4,) + (1,) * x.ndim))
            return eq.prim_to_cons(q)
        return eq.prim_to_cons(sol.sample((x - x0) / t).reshape((4,) + x.shape))
    return InitialCondition("sod", f, True)


def shock_states(gamma: float, mach: float):
    """Upstream (rho=1, p=1) and Rankine-Hugoniot downstream primitive states."""
    rho0, p0 = 1.0, 1.0
    u0 = mach * np.sqrt(gamma * p0 / rho0)
    m2 = mach * mach
    rho1 = rho0 * (gamma + 1.0) * m2 / ((gamma - 1.0) * m2 + 2.0)
    p1 = p0 * (2.0 * gamma * m2 - (gamma - 1.0)) / (gamma + 1.0)
    return (rho0, u0, 0.0, p0), (rho1, u0 * rho0 / rho1, 0.0, p1)


def shock_vortex(eq, mach=1.5, shock_x=0.5, vortex_x=0.25, vortex_y=0.5, eps=0.3, rc=0.05,
                 alpha=0.204, **_):
    """Stationary normal shock with a travelling vortex on its upstream side.

    Upstream state rho = 1, p = 1, u = Ma c; downstream state from the
    Rankine-Hugoniot relations.  The vortex follows the classical
    composite setup with tangential velocity eps tau e^(alpha (1 - tau^2)),
    tau = r / rc, and an isentropic temperature dip.
    """
    if not isinstance(eq, Euler):
        raise ConfigError("the shock-vortex setup needs the Euler equations")
    g = eq.gamma
    (rho0, u0, _, p0), (rho1, u1, _, p1) = shock_states(g, mach)

    def f(x, y, t):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        up = x < shock_x
        rho = np.where(up, rho0, rho1)
        u = np.where(up, u0, u1)
        v = np.zeros_like(x)
        p = np.where(up, p0, p1)
        dx = x - vortex_x
        dy = y - vortex_y
        tau = np.sqrt(dx * dx + dy * dy) / rc
        e = np.exp(alpha * (1.0 - tau * tau))
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.sqrt(dx * dx + dy * dy)
            sin = np.where(r > 0, dy / np.where(r > 0, r, 1.0), 0.0)
            cos = np.where(r > 0, dx / np.where(r > 0, r, 1.0), 0.0)
        du = eps * tau * e * sin
        dv = -eps * tau * e * cos
        dT = -(g - 1.0) * eps ** 2 * e * e / (4.0 * alpha * g)
        T = p0 / rho0 + dT
        rv = rho0 * (T / (p0 / rho0)) ** (1.0 / (g - 1.0))
        pv = p0 * (rv / rho0) ** g
        rho = np.where(up, rv, rho)
        p = np.where(up, pv, p)
        u = np.where(up, u + du, u)
        v = np.where(up, dv, v)
        return eq.prim_to_cons(np.stack([rho, u, v, p]))
    return InitialCondition("shock_vortex", f, False)


REGISTRY = {"constant": constant, "sine": sine, "vortex": isentropic_vortex, "sod": riemann_problem,
            "riemann": riemann_problem, "shock_vortex": shock_vortex}


def make_initial(name: str, eq, bounds=((0.0, 1.0), (0.0, 1.0)), periodic=(True, True),
                 **params) -> InitialCondition:
    key = str(name).strip().lower()
    if key not in REGISTRY:
        raise ConfigError(f"unknown initial condition {name!r} ({', '.join(REGISTRY)})")
    builder = REGISTRY[key]
    if key in ("sine",):
        return builder(eq, bounds, **params)
    if key == "vortex":
        return builder(eq, bounds, periodic, **params)
    return builder(eq, **params)
