"""2:1 non-conforming interfaces: interpolation to children, L2 projection back.

Arrays carry the along-face node index last, e.g. (nVar, nSides, N+1).
"""

from __future__ import annotations

import numpy as np

from .basis import NodalBasis, apply_along_face as _apply


def mortar_interpolate(parent_trace: np.ndarray, basis: NodalBasis):
    """Traces on the lower and upper half of the big face."""
    m = basis.mortar
    return _apply(parent_trace, m.IL), _apply(parent_trace, m.IU)


def mortar_project(lower: np.ndarray, upper: np.ndarray, basis: NodalBasis) -> np.ndarray:
    """L2 projection of child data onto the big face: PL fL + PU fU.

    Child fluxes are expected per unit parent reference length, i.e.
    already multiplied by the child surface element and by 2 (the child
    covers half of the parent's reference interval).
    """
    m = basis.mortar
    return _apply(lower, m.PL) + _apply(upper, m.PU)


def interpolate_children(face_big: np.ndarray, pos: np.ndarray, basis: NodalBasis) -> np.ndarray:
    """Interpolate one big trace per child side to that child's half (pos 0/1)."""
    m = basis.mortar
    lo = _apply(face_big, m.IL)
    hi = _apply(face_big, m.IU)
    return np.where(np.asarray(pos)[None, :, None] == 0, lo, hi)


def project_children(child_vals: np.ndarray, plan_children: np.ndarray, child_index: dict,
                     basis: NodalBasis) -> np.ndarray:
    """Project (doubled) child values of every parent side back onto it.

    ``plan_children`` holds (lower, upper) side ids per parent and
    ``child_index`` maps a side id to its column in ``child_vals``.
    """
    lo = np.array([child_index[s] for s in plan_children[:, 0]], dtype=np.int64)
    hi = np.array([child_index[s] for s in plan_children[:, 1]], dtype=np.int64)
    return mortar_project(2.0 * child_vals[:, lo], 2.0 * child_vals[:, hi], basis)
