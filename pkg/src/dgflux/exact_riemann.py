"""Exact solution of the 1D Riemann problem for the ideal-gas Euler equations.

Newton iteration on the pressure function followed by self-similar
sampling.  Used as the reference solution for shock-tube tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import VacuumGenerated


@dataclass(frozen=True)
class RiemannSolution:
    left: tuple  # (rho, u, v, p)
    right: tuple
    gamma: float
    p_star: float
    u_star: float
    iterations: int

    def pressure_function(self, p: float) -> float:
        """f_L(p) + f_R(p) + (u_R - u_L); vanishes at p_star."""
        fl, _ = _side_function(p, self.left, self.gamma)
        fr, _ = _side_function(p, self.right, self.gamma)
        return fl + fr + self.right[1] - self.left[1]

    def sample(self, xi) -> np.ndarray:
        """Primitive state (rho, u, v, p) at similarity coordinates xi = x/t."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.empty((4,) + xi.shape)
        for idx, s in np.ndenumerate(xi):
            out[(slice(None),) + idx] = self._sample_point(float(s))
        return out

    def _sample_point(self, s: float):
        g = self.gamma
        ps, us = self.p_star, self.u_star
        if s <= us:
            rho, u, v, p = self.left
            c = np.sqrt(g * p / rho)
            if ps > p:  # left shock
                sl = u - c * np.sqrt((g + 1) / (2 * g) * ps / p + (g - 1) / (2 * g))
                if s <= sl:
                    return rho, u, v, p
                r = ps / p
                rs = rho * (r + (g - 1) / (g + 1)) / ((g - 1) / (g + 1) * r + 1)
                return rs, us, v, ps
            cs = c * (ps / p) ** ((g - 1) / (2 * g))
            if s <= u - c:
                return rho, u, v, p
            if s >= us - cs:
                return rho * (ps / p) ** (1 / g), us, v, ps
            fac = 2 / (g + 1) + (g - 1) / ((g + 1) * c) * (u - s)
            return (rho * fac ** (2 / (g - 1)), 2 / (g + 1) * (c + (g - 1) / 2 * u + s), v,
                    p * fac ** (2 * g / (g - 1)))
        rho, u, v, p = self.right
        c = np.sqrt(g * p / rho)
        if ps > p:  # right shock
            sr = u + c * np.sqrt((g + 1) / (2 * g) * ps / p + (g - 1) / (2 * g))
            if s >= sr:
                return rho, u, v, p
            r = ps / p
            rs = rho * (r + (g - 1) / (g + 1)) / ((g - 1) / (g + 1) * r + 1)
            return rs, us, v, ps
        cs = c * (ps / p) ** ((g - 1) / (2 * g))
        if s >= u + c:
            return rho, u, v, p
        if s <= us + cs:
            return rho * (ps / p) ** (1 / g), us, v, ps
        fac = 2 / (g + 1) - (g - 1) / ((g + 1) * c) * (u - s)
        return (rho * fac ** (2 / (g - 1)), 2 / (g + 1) * (-c + (g - 1) / 2 * u + s), v,
                p * fac ** (2 * g / (g - 1)))


def _side_function(p: float, state, g: float):
    rho, _, _, pk = state
    if p > pk:
        A = 2.0 / ((g + 1.0) * rho)
        B = (g - 1.0) / (g + 1.0) * pk
        root = np.sqrt(A / (p + B))
        return (p - pk) * root, root * (1.0 - 0.5 * (p - pk) / (B + p))
    c = np.sqrt(g * pk / rho)
    f = 2.0 * c / (g - 1.0) * ((p / pk) ** ((g - 1.0) / (2.0 * g)) - 1.0)
    df = (p / pk) ** (-(g + 1.0) / (2.0 * g)) / (rho * c)
    return f, df


def exact_riemann(left, right, gamma: float = 1.4, tol: float = 1e-14,
                  max_iter: int = 100) -> RiemannSolution:
    """Solve the Riemann problem for primitive states (rho, u[, v], p)."""
    left = _as_prim(left)
    right = _as_prim(right)
    g = gamma
    rl, ul, _, pl = left
    rr, ur, _, pr = right
    if min(rl, rr, pl, pr) <= 0:
        raise ValueError("Riemann data must have positive density and pressure")
    cl = np.sqrt(g * pl / rl)
    cr = np.sqrt(g * pr / rr)
    du = ur - ul
    if 2.0 * (cl + cr) / (g - 1.0) <= du:
        raise VacuumGenerated("initial data generate a vacuum")
    p = max(tol, 0.5 * (pl + pr) - 0.125 * du * (rl + rr) * (cl + cr))
    it = 0
    for it in range(1, max_iter + 1):
        fl, dfl = _side_function(p, left, g)
        fr, dfr = _side_function(p, right, g)
        p_new = p - (fl + fr + du) / (dfl + dfr)
        if p_new < 0:
            p_new = tol
        change = 2.0 * abs(p_new - p) / (p_new + p)
        p = p_new
        if change < tol:
            break
    fl, _ = _side_function(p, left, g)
    fr, _ = _side_function(p, right, g)
    u = 0.5 * (ul + ur) + 0.5 * (fr - fl)
    return RiemannSolution(left=left, right=right, gamma=g, p_star=float(p), u_star=float(u),
                           iterations=it)


def _as_prim(state):
    s = tuple(float(v) for v in state)
    if len(s) == 3:
        return (s[0], s[1], 0.0, s[2])
    if len(s) == 4:
        return s
    raise ValueError("primitive state must be (rho, u, p) or (rho, u, v, p)")
