"""Equation systems: fluxes, wave speeds, Riemann solvers, two-point fluxes.

All state arrays are variable-first: ``U[var, ...]`` with arbitrary
trailing shape; normals and metric directions broadcast against
``U[0]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NonPhysicalState


class RiemannSolver(str, enum.Enum):
    RUSANOV = "rusanov"
    HLL = "hll"
    ROE = "roe"
    CENTRAL = "central"


class TwoPointFlux(str, enum.Enum):
    STANDARD = "standardmean"
    PIROZZOLI = "pirozzoli"
    CHANDRASHEKAR = "chandrashekar"


def _parse_enum(cls, value):
    if isinstance(value, cls):
        return value
    key = str(value).strip().lower()
    for item in cls:
        if item.value == key:
            return item
    raise ValueError(f"unknown {cls.__name__} {value!r}; expected one of "
                     + ", ".join(i.value for i in cls))


def parse_riemann(value) -> RiemannSolver:
    return _parse_enum(RiemannSolver, value)


def parse_two_point(value) -> TwoPointFlux:
    return _parse_enum(TwoPointFlux, value)


def ln_mean(a, b, log_a=None, log_b=None):
    """Logarithmic mean (a - b) / (ln a - ln b), symmetric to the last bit.

    Uses the series of Ismail and Roe when a and b are close so no
    cancellation occurs; every operation is commutative in (a, b) up to
    exact sign flips, hence ln_mean(a, b) == ln_mean(b, a) bitwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if log_a is None:
        log_a = np.log(a)
    if log_b is None:
        log_b = np.log(b)
    s = a + b
    zeta = (a - b) / s
    u = zeta * zeta
    series = s / (2.0 + u * (2.0 / 3.0 + u * (2.0 / 5.0 + u * (2.0 / 7.0))))
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (a - b) / (log_a - log_b)
    return np.where(u < 1.0e-4, series, direct)


# ---------------------------------------------------------------------------
# scalar advection-diffusion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarAdvectionDiffusion:
    """phi_t + div(a phi - kappa grad phi) = 0."""

    ax: float = 1.0
    ay: float = 1.0
    kappa: float = 0.0

    nvar = 1
    nvar_lift = 1
    name = "advection"
    var_names = ("phi",)

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("diffusivity must be non-negative")

    @property
    def is_viscous(self) -> bool:
        return self.kappa > 0.0

    def check_state(self, U, where=None):
        if not np.all(np.isfinite(U)):
            raise NonPhysicalState("non-finite scalar state", where=where)

    def cons_to_prim(self, U, where=None):
        return np.asarray(U, dtype=float)

    def prim_to_cons(self, Q):
        return np.asarray(Q, dtype=float)

    def physical_flux(self, U):
        U = np.asarray(U, dtype=float)
        return self.ax * U, self.ay * U

    def normal_flux(self, U, nx, ny):
        return (self.ax * nx + self.ay * ny) * np.asarray(U, dtype=float)

    def max_wavespeed(self, U, nx, ny):
        return np.abs(self.ax * nx + self.ay * ny) * np.ones_like(np.asarray(U, dtype=float)[0])

    def wavespeed_per_direction(self, U, mx, my):
        """|a . m| + 0 for unnormalized direction m (used by the time step)."""
        return np.abs(self.ax * mx + self.ay * my) * np.ones_like(U[0])

    def viscous_scale(self, U):
        return self.kappa * np.ones_like(np.asarray(U, dtype=float)[0])

    def lifted(self, U):
        return np.asarray(U, dtype=float)

    def viscous_flux(self, U, gx, gy):
        return self.kappa * np.asarray(gx), self.kappa * np.asarray(gy)

    def riemann(self, UL, UR, nx, ny, solver=RiemannSolver.RUSANOV, variant=None):
        solver = parse_riemann(solver)
        an = self.ax * nx + self.ay * ny
        fl = an * UL
        fr = an * UR
        if solver is RiemannSolver.CENTRAL:
            return 0.5 * (fl + fr)
        # all upwind solvers coincide for a linear scalar flux
        return 0.5 * (fl + fr) - 0.5 * np.abs(an) * (UR - UL)

    def two_point(self, VA, VB, mx, my, variant=TwoPointFlux.STANDARD):
        am = self.ax * mx + self.ay * my
        return am * 0.5 * (VA + VB)

    def node_vars(self, U):
        return np.asarray(U, dtype=float)

    def two_point_flux(self, UL, UR, variant=TwoPointFlux.STANDARD):
        f = 0.5 * (np.asarray(UL) + np.asarray(UR))
        return self.ax * f, self.ay * f


# ---------------------------------------------------------------------------
# compressible Euler / Navier-Stokes
# ---------------------------------------------------------------------------

# rows of the node-variable array used by the two-point fluxes
_RHO, _U, _V, _P, _H, _LRHO, _BETA, _LBETA, _KIN = range(9)


@dataclass(frozen=True)
class Euler:
    gamma: float = 1.4

    nvar = 4
    nvar_lift = 0
    name = "euler"
    var_names = ("rho", "rhou", "rhov", "rhoE")

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError("ratio of specific heats must exceed 1")

    @property
    def is_viscous(self) -> bool:
        return False

    # -- state conversions -------------------------------------------------

    def check_state(self, U, where=None):
        rho = U[0]
        p = (self.gamma - 1.0) * (U[3] - 0.5 * (U[1] * U[1] + U[2] * U[2]) / rho)
        bad = ~((rho > 0.0) & (p > 0.0))
        if np.any(bad):
            idx = np.argwhere(bad)
            raise NonPhysicalState(
                f"non-physical state at {len(idx)} point(s); first index {tuple(idx[0])}",
                values=np.moveaxis(np.asarray(U), 0, -1)[bad], where=where if where is not None else idx)

    def cons_to_prim(self, U, where=None):
        U = np.asarray(U, dtype=float)
        self.check_state(U, where)
        rho = U[0]
        u = U[1] / rho
        v = U[2] / rho
        p = (self.gamma - 1.0) * (U[3] - 0.5 * rho * (u * u + v * v))
        return np.stack([rho, u, v, p])

    def prim_to_cons(self, Q):
        Q = np.asarray(Q, dtype=float)
        rho, u, v, p = Q
        if np.any(~(rho > 0.0)) or np.any(~(p > 0.0)):
            raise NonPhysicalState("non-positive density or pressure in primitive state",
                                   values=np.moveaxis(Q, 0, -1)[~((rho > 0) & (p > 0))])
        return np.stack([rho, rho * u, rho * v, p / (self.gamma - 1.0) + 0.5 * rho * (u * u + v * v)])

    def pressure(self, U):
        return (self.gamma - 1.0) * (U[3] - 0.5 * (U[1] * U[1] + U[2] * U[2]) / U[0])

    def temperature(self, U):
        return self.pressure(U) / U[0]

    def sound_speed(self, U):
        Q = self.cons_to_prim(U)
        return np.sqrt(self.gamma * Q[3] / Q[0])

    # -- fluxes ------------------------------------------------------------

    def physical_flux(self, U):
        rho, u, v, p = self.cons_to_prim(U)
        E = np.asarray(U[3])
        m1, m2 = rho * u, rho * v
        F = np.stack([m1, m1 * u + p, m1 * v, u * (E + p)])
        G = np.stack([m2, m2 * u, m2 * v + p, v * (E + p)])
        return F, G

    def normal_flux(self, U, nx, ny):
        rho, u, v, p = self.cons_to_prim(U)
        un = u * nx + v * ny
        m = rho * un
        return np.stack([m, m * u + p * nx, m * v + p * ny, un * (U[3] + p)])

    def max_wavespeed(self, U, nx, ny):
        rho, u, v, p = self.cons_to_prim(U)
        return np.abs(u * nx + v * ny) + np.sqrt(self.gamma * p / rho)

    def wavespeed_per_direction(self, U, mx, my):
        """|u . m| + c |m| for unnormalized direction m."""
        rho, u, v, p = self.cons_to_prim(U)
        return np.abs(u * mx + v * my) + np.sqrt(self.gamma * p / rho) * np.sqrt(mx * mx + my * my)

    def viscous_scale(self, U):
        return np.zeros_like(np.asarray(U, dtype=float)[0])

    def lifted(self, U):
        raise NotImplementedError("the Euler system has no lifted variables")

    def viscous_flux(self, U, gx, gy):
        z = np.zeros_like(np.asarray(U, dtype=float))
        return z, z.copy()

    # -- entropy -----------------------------------------------------------

    def entropy_specific(self, U):
        rho, u, v, p = self.cons_to_prim(U)
        return np.log(p) - self.gamma * np.log(rho)

    def entropy(self, U):
        """Mathematical entropy S = -rho s / (gamma - 1)."""
        return -np.asarray(U)[0] * self.entropy_specific(U) / (self.gamma - 1.0)

    def entropy_variables(self, U):
        rho, u, v, p = self.cons_to_prim(U)
        s = np.log(p) - self.gamma * np.log(rho)
        b = rho / p
        return np.stack([(self.gamma - s) / (self.gamma - 1.0) - 0.5 * b * (u * u + v * v),
                         b * u, b * v, -b])

    def entropy_potential(self, U):
        """Flux potentials (psi_x, psi_y) = rho (u, v)."""
        U = np.asarray(U)
        return U[1], U[2]

    # -- Riemann solvers ---------------------------------------------------

    def _rotated(self, U, nx, ny):
        rho, u, v, p = self.cons_to_prim(U)
        un = u * nx + v * ny
        ut = -u * ny + v * nx
        return rho, un, ut, p, U[3]

    @staticmethod
    def _flux_1d(rho, un, ut, p, E):
        m = rho * un
        return np.stack([m, m * un + p, m * ut, un * (E + p)])

    @staticmethod
    def _rotate_back(f, nx, ny):
        return np.stack([f[0], f[1] * nx - f[2] * ny, f[1] * ny + f[2] * nx, f[3]])

    def riemann(self, UL, UR, nx, ny, solver=RiemannSolver.RUSANOV,
                variant=TwoPointFlux.CHANDRASHEKAR):
        """Numerical flux f*(UL, UR; n) for unit normal n pointing L -> R.

        ``central`` evaluates the two-point flux ``variant`` without any
        dissipation (entropy conserving for the Chandrashekar flux).
        """
        solver = parse_riemann(solver)
        UL = np.asarray(UL, dtype=float)
        UR = np.asarray(UR, dtype=float)
        if solver is RiemannSolver.CENTRAL:
            return self.two_point(self.node_vars(UL), self.node_vars(UR), nx, ny, variant)
        g = self.gamma
        rl, unl, utl, pl, El = self._rotated(UL, nx, ny)
        rr, unr, utr, pr, Er = self._rotated(UR, nx, ny)
        fl = self._flux_1d(rl, unl, utl, pl, El)
        fr = self._flux_1d(rr, unr, utr, pr, Er)
        cl = np.sqrt(g * pl / rl)
        cr = np.sqrt(g * pr / rr)
        ql = np.stack([rl, rl * unl, rl * utl, El])
        qr = np.stack([rr, rr * unr, rr * utr, Er])
        if solver is RiemannSolver.RUSANOV:
            lam = np.maximum(np.abs(unl) + cl, np.abs(unr) + cr)
            f = 0.5 * (fl + fr) - 0.5 * lam * (qr - ql)
            return self._rotate_back(f, nx, ny)
        # Roe averages
        sl, sr = np.sqrt(rl), np.sqrt(rr)
        inv = 1.0 / (sl + sr)
        un = (sl * unl + sr * unr) * inv
        ut = (sl * utl + sr * utr) * inv
        H = (sl * (El + pl) / rl + sr * (Er + pr) / rr) * inv
        c2 = (g - 1.0) * (H - 0.5 * (un * un + ut * ut))
        if np.any(~(c2 > 0.0)):
            raise NonPhysicalState("Roe average has non-positive sound speed (vacuum-adjacent states)")
        c = np.sqrt(c2)
        if solver is RiemannSolver.HLL:
            smin = np.minimum(unl - cl, un - c)
            smax = np.maximum(unr + cr, un + c)
            with np.errstate(divide="ignore", invalid="ignore"):
                fhll = (smax * fl - smin * fr + smin * smax * (qr - ql)) / (smax - smin)
            f = np.where(smin >= 0.0, fl, np.where(smax <= 0.0, fr, fhll))
            return self._rotate_back(f, nx, ny)
        # Roe with Harten entropy fix on the acoustic waves
        rho_t = sl * sr
        dp = pr - pl
        dun = unr - unl
        dut = utr - utl
        drho = rr - rl
        a1 = (dp - rho_t * c * dun) / (2.0 * c2)
        a2 = drho - dp / c2
        a3 = rho_t * dut
        a4 = (dp + rho_t * c * dun) / (2.0 * c2)
        delta = 0.05 * c

        def fix(lam):
            lam = np.abs(lam)
            return np.where(lam < delta, (lam * lam + delta * delta) / (2.0 * delta), lam)

        l1 = fix(un - c)
        l2 = np.abs(un)
        l4 = fix(un + c)
        one = np.ones_like(un)
        zero = np.zeros_like(un)
        r1 = np.stack([one, un - c, ut, H - un * c])
        r2 = np.stack([one, un, ut, 0.5 * (un * un + ut * ut)])
        r3 = np.stack([zero, zero, one, ut])
        r4 = np.stack([one, un + c, ut, H + un * c])
        diss = l1 * a1 * r1 + l2 * a2 * r2 + l2 * a3 * r3 + l4 * a4 * r4
        f = 0.5 * (fl + fr) - 0.5 * diss
        return self._rotate_back(f, nx, ny)

    # -- two-point fluxes ---------------------------------------------------

    def node_vars(self, U, where=None):
        """Per-node quantities reused by every two-point flux evaluation."""
        rho, u, v, p = self.cons_to_prim(U, where)
        beta = 0.5 * rho / p
        return np.stack([rho, u, v, p, (np.asarray(U)[3] + p) / rho, np.log(rho), beta, np.log(beta),
                         0.5 * (u * u + v * v)])

    def two_point(self, A, B, mx, my, variant=TwoPointFlux.STANDARD):
        """Two-point flux contracted with direction (mx, my).

        ``A`` and ``B`` are node-variable arrays from :meth:`node_vars`.
        Every expression is symmetric in (A, B) so the result is bitwise
        symmetric.
        """
        variant = parse_two_point(variant)
        if variant is TwoPointFlux.STANDARD:
            fa = self._directional_flux(A, mx, my)
            fb = self._directional_flux(B, mx, my)
            return 0.5 * (fa + fb)
        u = 0.5 * (A[_U] + B[_U])
        v = 0.5 * (A[_V] + B[_V])
        um = u * mx + v * my
        if variant is TwoPointFlux.PIROZZOLI:
            rho = 0.5 * (A[_RHO] + B[_RHO])
            p = 0.5 * (A[_P] + B[_P])
            h = 0.5 * (A[_H] + B[_H])
            f1 = rho * um
            return np.stack([f1, f1 * u + p * mx, f1 * v + p * my, f1 * h])
        g = self.gamma
        rho_ln = ln_mean(A[_RHO], B[_RHO], A[_LRHO], B[_LRHO])
        beta_ln = ln_mean(A[_BETA], B[_BETA], A[_LBETA], B[_LBETA])
        p = 0.5 * (0.5 * (A[_RHO] + B[_RHO])) / (0.5 * (A[_BETA] + B[_BETA]))
        kin = A[_KIN] + B[_KIN]
        f1 = rho_ln * um
        f2 = f1 * u + p * mx
        f3 = f1 * v + p * my
        f4 = f1 * 0.5 * (1.0 / ((g - 1.0) * beta_ln) - kin) + f2 * u + f3 * v
        return np.stack([f1, f2, f3, f4])

    def _directional_flux(self, A, mx, my):
        rho, u, v, p, H = A[_RHO], A[_U], A[_V], A[_P], A[_H]
        um = u * mx + v * my
        m = rho * um
        return np.stack([m, m * u + p * mx, m * v + p * my, m * H])

    def two_point_flux(self, UL, UR, variant=TwoPointFlux.STANDARD):
        """Cartesian components (F#_x, F#_y) for conservative inputs."""
        A = self.node_vars(UL)
        B = self.node_vars(UR)
        return self.two_point(A, B, 1.0, 0.0, variant), self.two_point(A, B, 0.0, 1.0, variant)


@dataclass(frozen=True)
class NavierStokes(Euler):
    """Compressible Navier-Stokes, constant viscosity, R = 1.

    Lifted variables are the primitive velocity and temperature (u, v, T).
    """

    mu: float = 0.0
    Pr: float = 0.72

    nvar_lift = 3
    name = "navierstokes"

    def __post_init__(self):
        super().__post_init__()
        if self.mu < 0:
            raise ValueError("viscosity must be non-negative")
        if not self.Pr > 0:
            raise ValueError("Prandtl number must be positive")

    @property
    def is_viscous(self) -> bool:
        return self.mu > 0.0

    @property
    def conductivity(self) -> float:
        return self.mu * self.gamma / ((self.gamma - 1.0) * self.Pr)

    def viscous_scale(self, U):
        rho = np.asarray(U, dtype=float)[0]
        return np.maximum(4.0 * self.mu / (3.0 * rho), self.gamma * self.mu / (self.Pr * rho))

    def lifted(self, U):
        rho, u, v, p = self.cons_to_prim(U)
        return np.stack([u, v, p / rho])

    def viscous_flux(self, U, gx, gy):
        U = np.asarray(U, dtype=float)
        u = U[1] / U[0]
        v = U[2] / U[0]
        ux, vx, Tx = gx[0], gx[1], gx[2]
        uy, vy, Ty = gy[0], gy[1], gy[2]
        mu, k = self.mu, self.conductivity
        div = ux + vy
        txx = mu * (2.0 * ux - (2.0 / 3.0) * div)
        tyy = mu * (2.0 * vy - (2.0 / 3.0) * div)
        txy = mu * (uy + vx)
        zero = np.zeros_like(txx)
        F = np.stack([zero, txx, txy, u * txx + v * txy + k * Tx])
        G = np.stack([zero, txy, tyy, u * txy + v * tyy + k * Ty])
        return F, G


def make_equations(name: str, **params):
    key = name.strip().lower()
    if key in ("advection", "scalar", "advection-diffusion"):
        return ScalarAdvectionDiffusion(ax=params.get("ax", 1.0), ay=params.get("ay", 1.0),
                                        kappa=params.get("kappa", 0.0))
    if key == "euler":
        return Euler(gamma=params.get("gamma", 1.4))
    if key in ("navierstokes", "ns", "navier-stokes"):
        return NavierStokes(gamma=params.get("gamma", 1.4), mu=params.get("mu", 0.0),
                            Pr=params.get("Pr", 0.72))
    raise ValueError(f"unknown equation system {name!r}")
