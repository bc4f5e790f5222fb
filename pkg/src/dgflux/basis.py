"""One-dimensional nodal polynomial machinery.

Quadrature nodes and weights, Lagrange interpolation, differentiation
matrices, face prolongation vectors, mortar interpolation/projection
matrices and the DG <-> finite-volume subcell Vandermonde matrices.
"""

from __future__ import annotations

import enum
import functools
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

MAX_DEGREE = 15
_NEWTON_TOL = 4.0 * np.finfo(float).eps
_NEWTON_MAXIT = 10


class NodeFamily(str, enum.Enum):
    LG = "LG"
    LGL = "LGL"

    @classmethod
    def parse(cls, value) -> "NodeFamily":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper()
        aliases = {"LG": cls.LG, "GAUSS": cls.LG, "LEGENDREGAUSS": cls.LG,
                   "LGL": cls.LGL, "GAUSS-LOBATTO": cls.LGL, "LOBATTO": cls.LGL,
                   "LEGENDREGAUSSLOBATTO": cls.LGL}
        if key not in aliases:
            raise ValueError(f"unknown node family {value!r} (expected LG or LGL)")
        return aliases[key]


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def legendre(n: int, x):
    """Return (P_n(x), P_n'(x)) by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    if n == 0:
        return np.ones_like(x), np.zeros_like(x)
    p_prev, p = np.ones_like(x), x.copy()
    dp_prev, dp = np.zeros_like(x), np.ones_like(x)
    for k in range(2, n + 1):
        p_next = ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
        dp_next = dp_prev + (2 * k - 1) * p
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
    return p, dp


def _newton(f, x0: np.ndarray) -> np.ndarray:
    x = x0.copy()
    for _ in range(_NEWTON_MAXIT):
        val, der = f(x)
        delta = -val / der
        x += delta
        if np.all(np.abs(delta) <= _NEWTON_TOL * np.maximum(np.abs(x), 1.0)):
            break
    return x


def _symmetrize(x: np.ndarray) -> np.ndarray:
    """Mirror the left half so that x_i = -x_{N-i} holds bitwise."""
    n = len(x)
    out = x.copy()
    for i in range(n // 2):
        out[n - 1 - i] = -out[i]
    if n % 2 == 1:
        out[n // 2] = 0.0
    return out


def build_nodes(N: int, family) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights of the Legendre-Gauss(-Lobatto) rule.

    Nodes are roots of P_{N+1} (LG) or the endpoints plus roots of P_N'
    (LGL), found by Newton iteration from Chebyshev initial guesses.
    """
    family = NodeFamily.parse(family)
    if not isinstance(N, (int, np.integer)) or N < 0:
        raise ValueError(f"polynomial degree must be a non-negative integer, got {N!r}")
    if N > MAX_DEGREE:
        raise ValueError(f"polynomial degree {N} exceeds the supported maximum {MAX_DEGREE}")
    N = int(N)
    if family is NodeFamily.LG:
        if N == 0:
            return np.array([0.0]), np.array([2.0])
        k = np.arange(N + 1)
        guess = -np.cos((2 * k + 1) * np.pi / (2 * N + 2))
        x = _symmetrize(_newton(lambda s: legendre(N + 1, s), guess))
        _, dp = legendre(N + 1, x)
        w = 2.0 / ((1.0 - x * x) * dp * dp)
    else:
        if N == 0:
            raise ValueError("Gauss-Lobatto nodes require N >= 1")
        x = np.empty(N + 1)
        x[0], x[N] = -1.0, 1.0
        if N > 1:
            guess = -np.cos(np.pi * np.arange(1, N) / N)

            def q(s):
                # q = P_{N+1} - P_{N-1} vanishes at the interior LGL nodes
                p1, dp1 = legendre(N + 1, s)
                p0, dp0 = legendre(N - 1, s)
                return p1 - p0, dp1 - dp0

            x[1:N] = _newton(q, guess)
        x = _symmetrize(x)
        x[0], x[N] = -1.0, 1.0
        p, _ = legendre(N, x)
        w = 2.0 / (N * (N + 1) * p * p)
    w = 0.5 * (w + w[::-1])
    return x, w


def barycentric_weights(nodes, dtype=float) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=dtype)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    if np.any(diff == 0.0):
        raise ValueError("interpolation nodes must be distinct")
    return 1.0 / np.prod(diff, axis=1)


def build_interpolation_matrix(from_nodes, to_points, dtype=float) -> np.ndarray:
    """Matrix whose row p holds l_j(to_points[p]) for the given nodes."""
    from_nodes = np.asarray(from_nodes, dtype=dtype)
    to_points = np.atleast_1d(np.asarray(to_points, dtype=dtype))
    bw = barycentric_weights(from_nodes, dtype)
    diff = to_points[:, None] - from_nodes[None, :]
    exact = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = bw[None, :] / diff
        mat = terms / terms.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    mat[hit] = exact[hit].astype(dtype)
    return mat


def lagrange_eval(nodes, j: int, x: float) -> float:
    """Value of the j-th Lagrange polynomial on ``nodes`` at ``x``."""
    nodes = np.asarray(nodes, dtype=float)
    if not 0 <= j < len(nodes):
        raise IndexError(f"basis index {j} outside 0..{len(nodes) - 1}")
    if not np.isfinite(x):
        raise ValueError("evaluation point must be finite")
    return float(build_interpolation_matrix(nodes, [x])[0, j])


def build_diff_matrix(nodes, dtype=float) -> np.ndarray:
    """D_rs = l_s'(x_r), with the negative-sum trick on the diagonal."""
    nodes = np.asarray(nodes, dtype=dtype)
    bw = barycentric_weights(nodes, dtype)
    n = len(nodes)
    D = np.zeros((n, n), dtype=dtype)
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = bw[j] / bw[i] / (nodes[i] - nodes[j])
        D[i, i] = -sum(D[i, j] for j in range(n) if j != i)
    return D


def build_dhat(nodes, weights, D) -> np.ndarray:
    """Weak-form matrix Dhat_ij = -(w_j / w_i) D_ji."""
    w = np.asarray(weights, dtype=float)
    return -(w[None, :] / w[:, None]) * np.asarray(D).T


def legendre_vandermonde(nodes, normalized: bool = True) -> np.ndarray:
    """V_ij = P_j(x_i), optionally L2-orthonormal on [-1, 1]."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    V = np.empty((n, n))
    for j in range(n):
        V[:, j] = legendre(j, nodes)[0]
        if normalized:
            V[:, j] *= np.sqrt(j + 0.5)
    return V


@dataclass(frozen=True, eq=False)
class MortarMatrices:
    IL: np.ndarray
    IU: np.ndarray
    PL: np.ndarray
    PU: np.ndarray


@dataclass(frozen=True, eq=False)
class FvVandermonde:
    dg_to_fv: np.ndarray
    fv_to_dg: np.ndarray
    w: float


@dataclass(frozen=True, eq=False)
class NodalBasis:
    N: int
    family: NodeFamily
    nodes: np.ndarray
    weights: np.ndarray
    D: np.ndarray
    Dhat: np.ndarray
    ell_minus: np.ndarray
    ell_plus: np.ndarray
    ellhat_minus: np.ndarray
    ellhat_plus: np.ndarray

    @property
    def n(self) -> int:
        return self.N + 1

    @property
    def is_lobatto(self) -> bool:
        return self.family is NodeFamily.LGL

    @functools.cached_property
    def mortar(self) -> MortarMatrices:
        return build_mortar_matrices(self)

    @functools.cached_property
    def fv(self) -> FvVandermonde:
        return build_fv_vandermonde(self)

    def interpolate_to(self, points) -> np.ndarray:
        return build_interpolation_matrix(self.nodes, points)


def make_basis(N: int, family="LGL") -> NodalBasis:
    family = NodeFamily.parse(family)
    x, w = build_nodes(N, family)
    D = build_diff_matrix(x)
    Dhat = build_dhat(x, w, D)
    lm = build_interpolation_matrix(x, [-1.0])[0]
    lp = build_interpolation_matrix(x, [1.0])[0]
    return NodalBasis(N=int(N), family=family, nodes=_freeze(x), weights=_freeze(w),
                      D=_freeze(D), Dhat=_freeze(Dhat), ell_minus=_freeze(lm),
                      ell_plus=_freeze(lp), ellhat_minus=_freeze(lm / w),
                      ellhat_plus=_freeze(lp / w))


@functools.lru_cache(maxsize=None)
def get_basis(N: int, family="LGL") -> NodalBasis:
    """Cached, immutable basis instance."""
    return make_basis(N, NodeFamily.parse(family))


def apply_along_face(vals: np.ndarray, mat: np.ndarray) -> np.ndarray:
    """vals @ mat.T over the last axis with a fixed summation order.

    BLAS kernels may round a row differently depending on its position in
    the batch; side batches are ordered by partition group, so a plain
    matmul on side data would break the bitwise independence of the
    partition count.
    """
    out = vals[..., :1] * mat[:, 0]
    for a in range(1, mat.shape[1]):
        out += vals[..., a:a + 1] * mat[:, a]
    return out


def build_mortar_matrices(basis: NodalBasis) -> MortarMatrices:
    """Interpolation big -> children and L2 projection children -> big.

    The projection is the exact L2 projection onto degree-N polynomials
    on the big face, P = 1/2 M^-1 B, integrated with a Gauss rule that is
    exact for the degree-2N integrands.  For Gauss nodes M is diagonal
    and P^L_ia reduces to 1/2 l_i((eta_a - 1)/2) w_a / w_i.
    """
    x, w = basis.nodes, basis.weights
    IL = build_interpolation_matrix(x, 0.5 * (x - 1.0))
    IU = build_interpolation_matrix(x, 0.5 * (x + 1.0))
    if basis.family is NodeFamily.LG:
        PL = 0.5 * IL.T * w[None, :] / w[:, None]
        PU = 0.5 * IU.T * w[None, :] / w[:, None]
    else:
        q, qw = build_nodes(basis.N, NodeFamily.LG)
        Lq = build_interpolation_matrix(x, q)
        M = (Lq * qw[:, None]).T @ Lq
        BL = (build_interpolation_matrix(x, 0.5 * (q - 1.0)) * qw[:, None]).T @ Lq
        BU = (build_interpolation_matrix(x, 0.5 * (q + 1.0)) * qw[:, None]).T @ Lq
        PL = 0.5 * np.linalg.solve(M, BL)
        PU = 0.5 * np.linalg.solve(M, BU)
    return MortarMatrices(IL=_freeze(IL), IU=_freeze(IU), PL=_freeze(PL), PU=_freeze(PU))


def subcell_width(N: int) -> float:
    return 2.0 / (N + 1)


def subcell_faces(N: int) -> np.ndarray:
    """Reference coordinates of the N+2 subcell interfaces."""
    return -1.0 + subcell_width(N) * np.arange(N + 2)


def subcell_centers(N: int) -> np.ndarray:
    return -1.0 + subcell_width(N) * (np.arange(N + 1) + 0.5)


def build_fv_vandermonde(basis: NodalBasis) -> FvVandermonde:
    """Mean values of the Lagrange polynomials over the equidistant subcells."""
    N = basis.N
    w = subcell_width(N)
    eta, omega = build_nodes(N, NodeFamily.LG)
    V = np.empty((N + 1, N + 1))
    for k in range(N + 1):
        pts = -1.0 + w * (k + 0.5 * (eta + 1.0))
        V[k] = 0.5 * omega @ build_interpolation_matrix(basis.nodes, pts)
    lu, piv = scipy.linalg.lu_factor(V)
    Vinv = scipy.linalg.lu_solve((lu, piv), np.eye(N + 1))
    if not np.all(np.isfinite(Vinv)):
        raise ArithmeticError("singular DG-to-FV Vandermonde matrix")
    log.debug("FV Vandermonde N=%d %s: condition number %.3e", N, basis.family.value,
              np.linalg.cond(V))
    return FvVandermonde(dg_to_fv=_freeze(V), fv_to_dg=_freeze(Vinv), w=w)


def equispaced(n_intervals: int) -> np.ndarray:
    """n_intervals + 1 equispaced points on [-1, 1]."""
    if n_intervals < 1:
        raise ValueError("need at least one interval")
    return np.linspace(-1.0, 1.0, n_intervals + 1)
