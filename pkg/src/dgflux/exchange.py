"""Side index plans and the partition-aware face-data exchange.

Face traces live in element-slot arrays ``face[var, elem, localside, node]``
(element orientation).  Side arrays ``side[var, side, node]`` use the
canonical orientation of each side's ref element.  The exchange moves
data between the two representations; with k partitions the slave
traces of partition-boundary sides travel through explicit send
buffers packed by the slave partition and unpacked by the master.  It
only ever copies values, so the assembled side data is bitwise
independent of k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import (SIDE_BOUNDARY, SIDE_INNER, SIDE_MORTAR_CHILD, SIDE_MORTAR_PARENT, Mesh,
                   partition_ranges)
from .errors import DGFluxError


@dataclass(frozen=True, eq=False)
class SidePlan:
    n: int
    n_elems: int
    n_sides: int
    ref_flat: np.ndarray       # (nS, n) flat slot index of the ref trace, natural order
    oth_flat: np.ndarray       # (nS, n) flat slot index of the other trace in ref order (-1 if none)
    boundary: np.ndarray       # side indices by kind
    inner: np.ndarray
    parent: np.ndarray
    child: np.ndarray
    paired: np.ndarray         # inner + child sides (have an other element)
    conforming: np.ndarray     # boundary + inner sides (flux stored on the ref slot)
    child_pos: np.ndarray      # per child side: 0 lower, 1 upper
    parent_children: np.ndarray  # per parent side: (lower, upper) side indices
    master_flat: np.ndarray    # (nS, n) master slot in master order
    slave_flat: np.ndarray     # (nS, n) slave slot in master order (-1 if none)
    master_is_ref: np.ndarray
    flip: np.ndarray
    elem_owner: np.ndarray
    k: int


def build_side_plan(mesh: Mesh, n: int) -> SidePlan:
    s = mesh.sides
    ns = s.n_sides
    nodes = np.arange(n)
    rev = nodes[::-1]

    def flat(e, l, flip):
        perm = np.where(np.asarray(flip)[:, None] == 1, rev[None, :], nodes[None, :])
        return (np.asarray(e)[:, None] * 4 + np.asarray(l)[:, None]) * n + perm

    zeros = np.zeros(ns, dtype=np.int64)
    ref_flat = flat(s.ref_elem, s.ref_loc, zeros)
    has_oth = s.oth_elem >= 0
    oth_flat = np.where(has_oth[:, None], flat(np.maximum(s.oth_elem, 0), np.maximum(s.oth_loc, 0), s.flip), -1)
    has_slave = s.slave_elem >= 0
    # master orientation: the slave trace is flipped relative to the master, never the master itself
    master_flat = flat(s.master_elem, s.master_loc, zeros)
    slave_flat = np.where(has_slave[:, None],
                          flat(np.maximum(s.slave_elem, 0), np.maximum(s.slave_loc, 0), s.flip), -1)
    owner = np.empty(mesh.n_elems, dtype=np.int64)
    for p, (a, b) in enumerate(partition_ranges(mesh.n_elems, mesh.k_partitions)):
        owner[a:b] = p
    child = np.flatnonzero(s.kind == SIDE_MORTAR_CHILD)
    parent = np.flatnonzero(s.kind == SIDE_MORTAR_PARENT)
    return SidePlan(
        n=n, n_elems=mesh.n_elems, n_sides=ns, ref_flat=ref_flat, oth_flat=oth_flat,
        boundary=np.flatnonzero(s.kind == SIDE_BOUNDARY), inner=np.flatnonzero(s.kind == SIDE_INNER),
        parent=parent, child=child, paired=np.flatnonzero(has_oth),
        conforming=np.flatnonzero((s.kind == SIDE_BOUNDARY) | (s.kind == SIDE_INNER)),
        child_pos=s.mortar_pos[child], parent_children=s.mortar_children[parent],
        master_flat=master_flat, slave_flat=slave_flat, master_is_ref=s.master_is_ref.copy(), flip=s.flip.copy(),
        elem_owner=owner, k=mesh.k_partitions)


def _as_flat(face: np.ndarray) -> np.ndarray:
    return face.reshape(face.shape[0], -1)


def exchange_face_data(face: np.ndarray, plan: SidePlan):
    """Assemble (master, slave) side arrays in master orientation.

    Every partition fills the slots of the sides it masters from its own
    elements; slave traces owned by another partition arrive through a
    send buffer packed by that partition.  Returns arrays of shape
    (nVar, nSides, n); slave entries of boundary/parent sides are zero.
    """
    flat = _as_flat(face)
    nv = flat.shape[0]
    master = np.zeros((nv, plan.n_sides, plan.n))
    slave = np.zeros((nv, plan.n_sides, plan.n))
    m_owner = plan.elem_owner[plan.master_flat[:, 0] // (4 * plan.n)]
    has_slave = plan.slave_flat[:, 0] >= 0
    s_owner = np.where(has_slave, plan.elem_owner[np.maximum(plan.slave_flat[:, 0], 0) // (4 * plan.n)], -1)
    if plan.k == 1:
        master[:] = flat[:, plan.master_flat]
        slave[:, has_slave] = flat[:, plan.slave_flat[has_slave]]
        return master, slave
    # pack: every partition sends the slave traces that another partition masters
    buffers = {}
    for q in range(plan.k):
        for p in range(plan.k):
            if p == q:
                continue
            sel = np.flatnonzero(has_slave & (s_owner == q) & (m_owner == p))
            if len(sel):
                buffers[(q, p)] = (sel, flat[:, plan.slave_flat[sel]].copy())
    # unpack: masters assemble their sides
    for p in range(plan.k):
        mine = np.flatnonzero(m_owner == p)
        master[:, mine] = flat[:, plan.master_flat[mine]]
        local = mine[has_slave[mine] & (s_owner[mine] == p)]
        slave[:, local] = flat[:, plan.slave_flat[local]]
        remote = mine[has_slave[mine] & (s_owner[mine] != p)]
        received = np.zeros(len(remote), dtype=bool)
        for (q, dest), (sel, data) in buffers.items():
            if dest != p:
                continue
            pos = np.searchsorted(remote, sel)
            slave[:, sel] = data
            received[pos] = True
        if not np.all(received):
            raise DGFluxError(f"partition {p}: missing slave data for sides {remote[~received].tolist()}")
    return master, slave


def master_to_ref(master: np.ndarray, slave: np.ndarray, plan: SidePlan):
    """Convert master/slave side arrays to (ref trace, other trace in ref order).

    Pure permutations: where the master is not the ref element the roles
    swap and, for flipped sides, the node order reverses.
    """
    ref = master.copy()
    oth = slave.copy()
    idx = np.flatnonzero(~plan.master_is_ref)
    if len(idx):
        rev = (plan.flip[idx] == 1)[None, :, None]
        ref[:, idx] = np.where(rev, slave[:, idx, ::-1], slave[:, idx])
        oth[:, idx] = np.where(rev, master[:, idx, ::-1], master[:, idx])
    return ref, oth


def gather_sides(face: np.ndarray, plan: SidePlan):
    """Ref-orientation side traces (ref, other) via the exchange contract.

    With a single partition the exchange is the identity, so the traces
    are gathered directly (same values, fewer copies).
    """
    if plan.k == 1:
        flat = _as_flat(face)
        oth = np.zeros((flat.shape[0], plan.n_sides, plan.n))
        oth[:, plan.paired] = flat[:, plan.oth_flat[plan.paired]]
        return flat[:, plan.ref_flat], oth
    master, slave = exchange_face_data(face, plan)
    return master_to_ref(master, slave, plan)


def scatter_to_slots(side_vals: np.ndarray, plan: SidePlan, parent_vals: np.ndarray | None = None):
    """Distribute ref-oriented side values to element slots.

    The ref slot of boundary/inner sides receives the value, the other
    slot of inner/child sides the negated, reindexed value, and mortar
    big slots ``parent_vals`` (already projected).  Returns
    (nVar, nElems, 4, n).
    """
    nv = side_vals.shape[0]
    out = np.zeros((nv, plan.n_elems * 4 * plan.n))
    c = plan.conforming
    out[:, plan.ref_flat[c]] = side_vals[:, c]
    p = plan.paired
    out[:, plan.oth_flat[p]] = -side_vals[:, p]
    if len(plan.parent):
        if parent_vals is None:
            raise DGFluxError("mortar parent values missing")
        out[:, plan.ref_flat[plan.parent]] = parent_vals
    return out.reshape(nv, plan.n_elems, 4, plan.n)
