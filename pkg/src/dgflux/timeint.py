"""Low-storage explicit Runge-Kutta schemes and the CFL/DFL time step."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.linalg.blas import daxpy

from .errors import ConfigError, DGFluxError, TimestepUnderflow

DT_MIN = 1e-14


@dataclass(frozen=True)
class RkScheme:
    """Williamson two-register scheme: R <- A_i R + dt f(U), U <- U + B_i R."""

    name: str
    A: tuple
    B: tuple
    c: tuple
    order: int

    @property
    def stages(self) -> int:
        return len(self.A)

    def butcher(self):
        """Equivalent Butcher tableau (a, b, c) of the two-register recursion."""
        s = self.stages
        A, B = np.array(self.A, dtype=float), np.array(self.B, dtype=float)
        # w[i, j]: weight of k_j in U after stage i
        w = np.zeros((s, s))
        for i in range(s):
            for j in range(i + 1):
                acc, prod = 0.0, 1.0
                for l in range(j, i + 1):
                    if l > j:
                        prod *= A[l]
                    acc += B[l] * prod
                w[i, j] = acc
        a = np.zeros((s, s))
        a[1:, :] = w[:-1, :]
        return a, w[-1].copy(), a.sum(axis=1)

    def stability_function(self, z):
        a, b, _ = self.butcher()
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        one = np.ones(self.stages)
        out = np.empty(z.shape, dtype=complex)
        for k, zk in enumerate(z.ravel()):
            out.flat[k] = 1.0 + zk * b @ np.linalg.solve(np.eye(self.stages) - zk * a, one)
        return out


def _frac(s: str) -> float:
    return float(Fraction(s))


# Williamson (1980) third-order, three stages.
RK3_WILLIAMSON = RkScheme(
    name="rk3", order=3,
    A=(0.0, _frac("-5/9"), _frac("-153/128")),
    B=(_frac("1/3"), _frac("15/16"), _frac("8/15")),
    c=(0.0, _frac("1/3"), _frac("3/4")))

# Carpenter & Kennedy (1994) fourth-order, five stages (solution 3).
RK4_CARPENTER_KENNEDY = RkScheme(
    name="rk4", order=4,
    A=(0.0,
       _frac("-567301805773/1357537059087"),
       _frac("-2404267990393/2016746695238"),
       _frac("-3550918686646/2091501179385"),
       _frac("-1275806237668/842570457699")),
    B=(_frac("1432997174477/9575080441755"),
       _frac("5161836677717/13612068292357"),
       _frac("1720146321549/2090206949498"),
       _frac("3134564353537/4481467310338"),
       _frac("2277821191437/14882151754819")),
    c=(0.0,
       _frac("1432997174477/9575080441755"),
       _frac("2526269341429/6820363962896"),
       _frac("2006345519317/3224310063776"),
       _frac("2802321613138/2924317926251")))

SCHEMES = {"rk3": RK3_WILLIAMSON, "rk4": RK4_CARPENTER_KENNEDY}


def get_scheme(name) -> RkScheme:
    if isinstance(name, RkScheme):
        return name
    key = str(name).strip().lower()
    aliases = {"williamson": "rk3", "rk3williamson": "rk3", "carpenterkennedy": "rk4",
               "rk4ck": "rk4", "ck": "rk4"}
    key = aliases.get(key, key)
    if key not in SCHEMES:
        raise ConfigError(f"unknown time integrator {name!r} (rk3, rk4)")
    return SCHEMES[key]


def _axpy(a: float, x: np.ndarray, y: np.ndarray) -> None:
    """y += a x in place without temporaries."""
    if y.flags.c_contiguous and x.flags.c_contiguous and x.dtype == np.float64:
        daxpy(x.ravel(), y.ravel(), a=a)
    else:
        y += a * x


def rk_step(U: np.ndarray, t: float, dt: float, scheme: RkScheme, rhs, R: np.ndarray | None = None):
    """Advance U (in place) by one step; returns (U, R).

    Only the two registers U and R are kept; ``rhs(U, t)`` returns U_t.
    """
    if not dt > 0.0:
        raise ValueError("time step must be positive")
    if R is None:
        R = np.zeros_like(U)
    for i in range(scheme.stages):
        try:
            Ut = rhs(U, t + scheme.c[i] * dt)
        except DGFluxError as exc:
            exc.stage = i
            raise
        if i == 0:
            R[...] = 0.0
        else:
            R *= scheme.A[i]
        _axpy(dt, Ut, R)
        _axpy(scheme.B[i], R, U)
    return U, R


# ---------------------------------------------------------------------------
# time step
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimestepFactors:
    cfl: float = 0.9
    cfld: float = 0.4
    gamma1: dict = field(default_factory=dict)   # N -> factor, default 1.0
    gamma2: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.cfl > 0 and self.cfld > 0):
            raise ConfigError("CFL numbers must be positive")
        for tab in (self.gamma1, self.gamma2):
            if any(not v > 0 for v in tab.values()):
                raise ConfigError("time-step correction factors must be positive")

    def g1(self, N: int) -> float:
        return float(self.gamma1.get(N, 1.0))

    def g2(self, N: int) -> float:
        return float(self.gamma2.get(N, 1.0))


def global_min_reduce(values) -> float:
    """Deterministic minimum over partition candidates."""
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("no candidates to reduce")
    out = vals[0]
    for v in vals[1:]:
        out = v if v < out else out
    return out


def element_timesteps(op, U: np.ndarray, factors: TimestepFactors, is_fv=None):
    """(convective, viscous) admissible time step per element."""
    eq, geo = op.eq, op.geo
    N = op.basis.N
    eq.check_state(U)
    Ja = geo.Ja
    ne = U.shape[1]
    dt_c = np.full(ne, np.inf)
    dt_v = np.full(ne, np.inf)
    fv = np.zeros(ne, dtype=bool) if is_fv is None else np.asarray(is_fv, dtype=bool)
    mu = eq.viscous_scale(U) if eq.is_viscous else None
    for i in range(2):
        norm = np.sqrt(Ja[:, i, 0] ** 2 + Ja[:, i, 1] ** 2)
        lam = (eq.wavespeed_per_direction(U, Ja[:, i, 0], Ja[:, i, 1]) / norm).max(axis=(1, 2))
        dx = geo.dx_dir[:, i]
        with np.errstate(divide="ignore"):
            dg = factors.cfl * factors.g1(N) * dx / (lam * (2 * N + 1))
            fvb = factors.cfl * factors.g1(0) * (dx / (N + 1)) / lam
        dt_c = np.minimum(dt_c, np.where(fv, fvb, dg))
        if mu is not None:
            lv = mu.max(axis=(1, 2))
            with np.errstate(divide="ignore"):
                dt_v = np.minimum(dt_v, factors.cfld * factors.g2(N) * dx ** 2 / (lv * (2 * N + 1)))
    return dt_c, dt_v


def compute_dt(op, U: np.ndarray, factors: TimestepFactors, is_fv=None) -> float:
    dt_c, dt_v = element_timesteps(op, U, factors, is_fv)
    per_elem = np.minimum(dt_c, dt_v)
    cands = [per_elem[a:b].min() for a, b in op.mesh.partition_ranges if b > a]
    dt = global_min_reduce(cands)
    if not np.isfinite(dt):
        raise ConfigError("no finite time step: zero wave speeds everywhere; set a fixed time step")
    if dt < DT_MIN:
        e = int(np.argmin(per_elem))
        raise TimestepUnderflow(f"time step {dt:.3e} below {DT_MIN:g} (limited by element {e})", element=e)
    return float(dt)


# ---------------------------------------------------------------------------
# calibration of the correction factor
# ---------------------------------------------------------------------------


def operator_matrix(op, t: float = 0.0) -> np.ndarray:
    """Dense matrix of a linear operator (by probing with unit vectors)."""
    shape = op.state_shape()
    n = int(np.prod(shape))
    M = np.empty((n, n))
    e = np.zeros(n)
    for k in range(n):
        e[k] = 1.0
        M[:, k] = op.time_derivative(e.reshape(shape), t).ravel()
        e[k] = 0.0
    return M


def stable_dt_bound(eigs: np.ndarray, scheme: RkScheme, hi: float, tol: float = 1e-6,
                    growth: float = 1e-10) -> float:
    """Largest dt with |R(dt lambda)| <= 1 + growth for all eigenvalues (bisection)."""

    def stable(dt):
        return np.all(np.abs(scheme.stability_function(dt * eigs)) <= 1.0 + growth)

    lo = 0.0
    while stable(hi):
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return lo


def calibrate_cfl(N: int, family="LGL", scheme="rk4", form="weak", nelem: int = 4) -> dict:
    """Empirical gamma_1(N): ratio of the stable step to the CFL=1 formula step.

    Linear advection in x on a periodic nelem x 1 strip of unit elements.
    """
    from .basis import get_basis
    from .dg import DGOperator
    from .equations import ScalarAdvectionDiffusion
    from .mesh import generate_cartesian

    sch = get_scheme(scheme)
    mesh = generate_cartesian(nelem, 1, ((0.0, float(nelem)), (0.0, 1.0)), periodic=(True, True))
    eq = ScalarAdvectionDiffusion(ax=1.0, ay=0.0, kappa=0.0)
    op = DGOperator(mesh, get_basis(N, family), eq, form=form, riemann="rusanov")
    eigs = np.linalg.eigvals(operator_matrix(op))
    dt_formula = 1.0 / (2 * N + 1)
    dt_stable = stable_dt_bound(eigs, sch, hi=dt_formula)
    return {"N": N, "family": str(get_basis(N, family).family.value), "scheme": sch.name,
            "dt_formula": dt_formula, "dt_stable": dt_stable, "gamma1": dt_stable / dt_formula}
