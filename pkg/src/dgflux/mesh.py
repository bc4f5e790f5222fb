"""Quadrilateral meshes: generation, SFC ordering, connectivity, mortars, sides.

Element-local sides are numbered 0: -xi1, 1: +xi1, 2: -xi2, 3: +xi2.
The along-face parameter of sides 0/1 is xi2 and of sides 2/3 is xi1,
both increasing from -1 to +1.  Two elements sharing a side have
``flip = 1`` when their along-face parameters run in opposite physical
directions.

Geometry is stored per element as the physical coordinates of the
mapping sampled at the (Ngeo+1)^2 Gauss-Lobatto points,
``xgeo[e, comp, i, j]`` with i along xi1 and j along xi2.  The straight
corner coordinates ``xlin`` of the generating lattice are retained
so connectivity never depends on the analytic curving.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .basis import build_interpolation_matrix, build_nodes
from .errors import InvalidMeshError

# corner order in xlin: c00, c10, c01, c11 (first index along xi1)
_FACE_A = np.array([0, 1, 0, 2])  # corner at along-face parameter -1
_FACE_B = np.array([2, 3, 1, 3])  # corner at along-face parameter +1
_OPPOSITE = np.array([1, 0, 3, 2])

SIDE_BOUNDARY, SIDE_INNER, SIDE_MORTAR_PARENT, SIDE_MORTAR_CHILD = 0, 1, 2, 3
GROUP_BOUNDARY, GROUP_INNER, GROUP_PARTITION = 0, 1, 2
MORTAR_NONE, MORTAR_BIG, MORTAR_SMALL = 0, 1, 2


def sfc_index(i: int, j: int, level: int) -> int:
    """Morton (Z-order) index of cell (i, j), x bit least significant."""
    if level < 0:
        raise ValueError("level must be non-negative")
    if not (0 <= i < 2 ** level and 0 <= j < 2 ** level):
        raise ValueError(f"cell ({i}, {j}) outside the 2^{level} grid")
    key = 0
    for b in range(level):
        key |= ((i >> b) & 1) << (2 * b)
        key |= ((j >> b) & 1) << (2 * b + 1)
    return key


def partition_ranges(n_elems: int, k: int) -> list[tuple[int, int]]:
    """Contiguous [start, stop) ranges of near-equal size (larger ones first)."""
    if not 1 <= k <= n_elems:
        raise ValueError(f"partition count {k} outside 1..{n_elems}")
    base, extra = divmod(n_elems, k)
    ranges, start = [], 0
    for p in range(k):
        size = base + (1 if p < extra else 0)
        ranges.append((start, start + size))
        start += size
    return ranges


@dataclass(frozen=True, eq=False)
class Connectivity:
    """Element-slot connectivity (all arrays indexed [elem, local side])."""

    neighbor: np.ndarray        # conforming neighbor / big element for small slots, -1 otherwise
    neighbor_loc: np.ndarray
    flip: np.ndarray
    mortar_type: np.ndarray     # MORTAR_NONE / MORTAR_BIG / MORTAR_SMALL
    mortar_elem: np.ndarray     # [e, l, 2] children of a big slot (lower, upper)
    mortar_loc: np.ndarray
    mortar_flip: np.ndarray
    mortar_pos: np.ndarray      # for small slots: 0 lower / 1 upper half of the big face


@dataclass(frozen=True, eq=False)
class SideTable:
    """Unique sides, stored once, in the canonical element's orientation.

    ``ref`` is the lower-id element of a conforming side (the lower local
    side for a self-periodic element), the owner of a boundary side, or
    the big element of a mortar.  ``master``/``slave`` record the
    partition-aware ownership used by the exchange plan.
    """

    side_id: np.ndarray
    kind: np.ndarray
    ref_elem: np.ndarray
    ref_loc: np.ndarray
    oth_elem: np.ndarray
    oth_loc: np.ndarray
    flip: np.ndarray
    bc: np.ndarray
    mortar_parent: np.ndarray   # child sides: index of the parent side
    mortar_pos: np.ndarray      # child sides: 0 lower / 1 upper
    mortar_children: np.ndarray  # parent sides: (lower, upper) child side indices
    master_elem: np.ndarray
    master_loc: np.ndarray
    slave_elem: np.ndarray
    slave_loc: np.ndarray
    master_is_ref: np.ndarray
    group: np.ndarray
    elem_side: np.ndarray       # [e, l] -> side index
    elem_is_ref: np.ndarray     # [e, l] -> True if this slot is the side's ref slot

    @property
    def n_sides(self) -> int:
        return len(self.side_id)

    def count(self, kind: int) -> int:
        return int(np.sum(self.kind == kind))


@dataclass(frozen=True, eq=False)
class Partition:
    rank: int
    elem_range: tuple[int, int]
    boundary_sides: np.ndarray
    inner_sides: np.ndarray
    master_sides: np.ndarray
    slave_sides: np.ndarray


@dataclass(frozen=True, eq=False)
class Mesh:
    ngeo: int
    xgeo: np.ndarray            # (nElems, 2, Ngeo+1, Ngeo+1) on LGL points
    xlin: np.ndarray            # (nElems, 4, 2) straight lattice corners
    lattice: np.ndarray         # (nElems, 3) int: level, i, j
    bc: np.ndarray              # (nElems, 4) int: boundary tag index or -1
    bc_names: tuple
    periods: np.ndarray         # (nPeriods, 2) periodic translation vectors
    base_level: int
    conn: Connectivity
    sides: SideTable
    k_partitions: int = 1
    partitions: tuple = field(default=())

    @property
    def n_elems(self) -> int:
        return self.xgeo.shape[0]

    @property
    def n_sides(self) -> int:
        return self.sides.n_sides

    @property
    def global_ids(self) -> np.ndarray:
        return np.arange(self.n_elems)

    def partition_of(self) -> np.ndarray:
        owner = np.empty(self.n_elems, dtype=np.int64)
        for p, (a, b) in enumerate(partition_ranges(self.n_elems, self.k_partitions)):
            owner[a:b] = p
        return owner

    @property
    def partition_ranges(self) -> list[tuple[int, int]]:
        return partition_ranges(self.n_elems, self.k_partitions)

    def mortar_adjacent(self) -> np.ndarray:
        """Boolean per element: touches a non-conforming interface."""
        return np.any(self.conn.mortar_type != MORTAR_NONE, axis=1)

    def element_centroids(self) -> np.ndarray:
        return self.xlin.mean(axis=1)

    def with_partitions(self, k: int) -> "Mesh":
        sides = connect_sides(self.conn, self.bc, self.n_elems, k)
        return replace(self, sides=sides, k_partitions=k,
                       partitions=build_partitions(sides, self.n_elems, k))


# ---------------------------------------------------------------------------
# connectivity by geometric matching of the straight lattice corners
# ---------------------------------------------------------------------------


def _face_geometry(xlin):
    A = xlin[:, _FACE_A]
    B = xlin[:, _FACE_B]
    return A, B, 0.5 * (A + B)


def _shifts(periods):
    out = [np.zeros(2)]
    for p in periods:
        out.append(np.asarray(p, dtype=float))
        out.append(-np.asarray(p, dtype=float))
    return out


def connect_elements(xlin: np.ndarray, bc: np.ndarray, periods) -> Connectivity:
    """Build conforming, periodic and 2:1 mortar connectivity.

    Faces are matched by their midpoints (including periodic images);
    faces without a conforming partner are tested as big mortar faces by
    looking for two faces centered at their quarter points.  Remaining
    faces must carry a boundary tag.
    """
    n = xlin.shape[0]
    A, B, M = _face_geometry(xlin)
    Af, Bf, Mf = A.reshape(-1, 2), B.reshape(-1, 2), M.reshape(-1, 2)
    length = np.linalg.norm(Bf - Af, axis=1)
    if np.any(length <= 0):
        raise InvalidMeshError("degenerate face in element lattice")
    tol = 1e-8 * float(length.min())
    tree = cKDTree(Mf)
    nf = 4 * n
    partner = np.full(nf, -1, dtype=np.int64)
    shift = np.zeros((nf, 2))
    bcf = bc.reshape(-1)
    for s in _shifts(periods):
        hits = tree.query_ball_point(Mf + s, tol)
        for f, cand in enumerate(hits):
            for g in cand:
                if g == f or bcf[f] >= 0 or bcf[g] >= 0:
                    continue
                if partner[f] >= 0 and partner[f] != g:
                    raise InvalidMeshError(f"face {divmod(f, 4)} matches several faces")
                partner[f] = g
                shift[f] = s
    neighbor = np.full((n, 4), -1, dtype=np.int64)
    neighbor_loc = np.full((n, 4), -1, dtype=np.int64)
    flip = np.zeros((n, 4), dtype=np.int64)
    mortar_type = np.zeros((n, 4), dtype=np.int64)
    mortar_elem = np.full((n, 4, 2), -1, dtype=np.int64)
    mortar_loc = np.full((n, 4, 2), -1, dtype=np.int64)
    mortar_flip = np.zeros((n, 4, 2), dtype=np.int64)
    mortar_pos = np.full((n, 4), -1, dtype=np.int64)

    def orient(a_self, b_self, a_other, s):
        if np.linalg.norm(a_other - (a_self + s)) < tol:
            return 0
        if np.linalg.norm(a_other - (b_self + s)) < tol:
            return 1
        raise InvalidMeshError("face endpoints do not match")

    for f in range(nf):
        g = partner[f]
        if g < 0:
            continue
        e, l = divmod(f, 4)
        neighbor[e, l], neighbor_loc[e, l] = divmod(g, 4)
        flip[e, l] = orient(Af[f], Bf[f], Af[g], shift[f])

    # big mortar faces
    for f in np.flatnonzero(partner < 0):
        if bcf[f] >= 0:
            continue
        e, l = divmod(f, 4)
        qlo = 0.5 * (Af[f] + Mf[f])
        qhi = 0.5 * (Mf[f] + Bf[f])
        for s in _shifts(periods):
            lo = [g for g in tree.query_ball_point(qlo + s, tol) if partner[g] < 0 and bcf[g] < 0]
            hi = [g for g in tree.query_ball_point(qhi + s, tol) if partner[g] < 0 and bcf[g] < 0]
            if lo and hi:
                break
        else:
            continue
        if len(lo) != 1 or len(hi) != 1:
            raise InvalidMeshError(f"ambiguous mortar children on element {e} side {l}")
        mortar_type[e, l] = MORTAR_BIG
        for pos, (g, a_ref, b_ref) in enumerate(((lo[0], Af[f], Mf[f]), (hi[0], Mf[f], Bf[f]))):
            ce, cl = divmod(g, 4)
            fl = orient(a_ref, b_ref, Af[g], s)
            mortar_elem[e, l, pos], mortar_loc[e, l, pos], mortar_flip[e, l, pos] = ce, cl, fl
            mortar_type[ce, cl] = MORTAR_SMALL
            neighbor[ce, cl], neighbor_loc[ce, cl], flip[ce, cl] = e, l, fl
            mortar_pos[ce, cl] = pos

    dangling = [(int(e), int(l)) for e in range(n) for l in range(4)
                if bc[e, l] < 0 and neighbor[e, l] < 0 and mortar_type[e, l] == MORTAR_NONE]
    if dangling:
        raise InvalidMeshError(f"dangling sides (no neighbor, no boundary tag): {dangling[:10]}"
                               + (" ..." if len(dangling) > 10 else ""),
                               element_ids=sorted({e for e, _ in dangling}))
    for e in range(n):
        for l in range(4):
            if mortar_type[e, l] == MORTAR_SMALL:
                be, bl = neighbor[e, l], neighbor_loc[e, l]
                if mortar_type[be, bl] != MORTAR_BIG:
                    raise InvalidMeshError("non-conforming interface exceeds a 2:1 ratio",
                                           element_ids=[e, be])
    return Connectivity(neighbor, neighbor_loc, flip, mortar_type, mortar_elem, mortar_loc,
                        mortar_flip, mortar_pos)


def connect_sides(conn: Connectivity, bc: np.ndarray, n_elems: int, k: int = 1) -> SideTable:
    """Unique side list with master/slave assignment and storage groups."""
    owner = np.empty(n_elems, dtype=np.int64)
    for p, (a, b) in enumerate(partition_ranges(n_elems, k)):
        owner[a:b] = p
    rec = []  # (kind, ref_e, ref_l, oth_e, oth_l, flip, bc, parent, pos)
    elem_side = np.full((n_elems, 4), -1, dtype=np.int64)
    elem_is_ref = np.zeros((n_elems, 4), dtype=bool)
    children = {}
    for e in range(n_elems):
        for l in range(4):
            mt = conn.mortar_type[e, l]
            if mt == MORTAR_SMALL:
                continue
            if bc[e, l] >= 0:
                elem_side[e, l] = len(rec)
                elem_is_ref[e, l] = True
                rec.append((SIDE_BOUNDARY, e, l, -1, -1, 0, bc[e, l], -1, -1))
            elif mt == MORTAR_BIG:
                parent = len(rec)
                elem_side[e, l] = parent
                elem_is_ref[e, l] = True
                rec.append((SIDE_MORTAR_PARENT, e, l, -1, -1, 0, -1, -1, -1))
                kids = []
                for pos in range(2):
                    ce, cl = conn.mortar_elem[e, l, pos], conn.mortar_loc[e, l, pos]
                    elem_side[ce, cl] = len(rec)
                    kids.append(len(rec))
                    rec.append((SIDE_MORTAR_CHILD, e, l, ce, cl, conn.mortar_flip[e, l, pos], -1,
                                parent, pos))
                children[parent] = kids
            else:
                ne, nl = conn.neighbor[e, l], conn.neighbor_loc[e, l]
                if (ne, nl) > (e, l):
                    elem_side[e, l] = elem_side[ne, nl] = len(rec)
                    elem_is_ref[e, l] = True
                    rec.append((SIDE_INNER, e, l, ne, nl, conn.flip[e, l], -1, -1, -1))
                elif (ne, nl) == (e, l):
                    raise InvalidMeshError(f"element {e} side {l} is connected to itself")
    arr = np.array(rec, dtype=np.int64).reshape(-1, 9)
    kind, ref_e, ref_l, oth_e, oth_l, flip, bcs, parent, pos = arr.T
    ns = len(arr)
    mort_children = np.full((ns, 2), -1, dtype=np.int64)
    for p, kids in children.items():
        mort_children[p] = kids

    # master assignment: ref by default; alternate on partition boundaries
    master_is_ref = np.ones(ns, dtype=bool)
    cross = (oth_e >= 0) & (owner[np.maximum(oth_e, 0)] != owner[ref_e])
    pair_count: dict = {}
    for s in np.flatnonzero(cross & (kind == SIDE_INNER)):
        pair = (owner[ref_e[s]], owner[oth_e[s]])
        key = tuple(sorted(pair))
        c = pair_count.get(key, 0)
        pair_count[key] = c + 1
        # alternate along sideId order so both partitions own half of the shared sides
        master_is_ref[s] = (c % 2 == 0) == (pair[0] == key[0])
    master_e = np.where(master_is_ref, ref_e, oth_e)
    master_l = np.where(master_is_ref, ref_l, oth_l)
    slave_e = np.where(master_is_ref, oth_e, ref_e)
    slave_l = np.where(master_is_ref, oth_l, ref_l)
    group = np.where(kind == SIDE_BOUNDARY, GROUP_BOUNDARY,
                     np.where(cross, GROUP_PARTITION, GROUP_INNER))
    order = np.lexsort((np.arange(ns), group))
    inv = np.empty(ns, dtype=np.int64)
    inv[order] = np.arange(ns)

    def remap(idx):
        return np.where(idx >= 0, inv[np.maximum(idx, 0)], -1)

    return SideTable(
        side_id=np.arange(ns)[order], kind=kind[order], ref_elem=ref_e[order], ref_loc=ref_l[order],
        oth_elem=oth_e[order], oth_loc=oth_l[order], flip=flip[order], bc=bcs[order],
        mortar_parent=remap(parent[order]), mortar_pos=pos[order],
        mortar_children=remap(mort_children[order]),
        master_elem=master_e[order], master_loc=master_l[order],
        slave_elem=slave_e[order], slave_loc=slave_l[order], master_is_ref=master_is_ref[order],
        group=group[order], elem_side=remap(elem_side), elem_is_ref=elem_is_ref)


def build_partitions(sides: SideTable, n_elems: int, k: int) -> tuple:
    owner = np.empty(n_elems, dtype=np.int64)
    ranges = partition_ranges(n_elems, k)
    for p, (a, b) in enumerate(ranges):
        owner[a:b] = p
    parts = []
    m_owner = owner[sides.master_elem]
    s_owner = np.where(sides.slave_elem >= 0, owner[np.maximum(sides.slave_elem, 0)], -1)
    for p in range(k):
        parts.append(Partition(
            rank=p, elem_range=ranges[p],
            boundary_sides=np.flatnonzero((sides.group == GROUP_BOUNDARY) & (m_owner == p)),
            inner_sides=np.flatnonzero((sides.group == GROUP_INNER) & (m_owner == p)),
            master_sides=np.flatnonzero((sides.group == GROUP_PARTITION) & (m_owner == p)),
            slave_sides=np.flatnonzero((sides.group == GROUP_PARTITION) & (s_owner == p))))
    return tuple(parts)


def assemble_mesh(xgeo, xlin, lattice, bc, bc_names, periods, base_level, k=1) -> Mesh:
    """Sort elements along the SFC, connect them and build the side table."""
    xgeo = np.asarray(xgeo, dtype=float)
    lattice = np.asarray(lattice, dtype=np.int64)
    max_level = int(lattice[:, 0].max()) if len(lattice) else 0
    total = base_level + max_level
    keys = np.array([sfc_index(int(i) << (max_level - int(lv)), int(j) << (max_level - int(lv)), total)
                     for lv, i, j in lattice], dtype=np.int64)
    order = np.argsort(keys, kind="stable")
    if len(np.unique(keys)) != len(keys):
        raise InvalidMeshError("overlapping elements on the SFC lattice")
    xgeo = np.ascontiguousarray(xgeo[order])
    xlin = np.ascontiguousarray(np.asarray(xlin, dtype=float)[order])
    lattice = np.ascontiguousarray(lattice[order])
    bc = np.ascontiguousarray(np.asarray(bc, dtype=np.int64)[order])
    periods = np.asarray(periods, dtype=float).reshape(-1, 2)
    conn = connect_elements(xlin, bc, periods)
    sides = connect_sides(conn, bc, len(xgeo), k)
    return Mesh(ngeo=xgeo.shape[-1] - 1, xgeo=xgeo, xlin=xlin, lattice=lattice, bc=bc,
                bc_names=tuple(bc_names), periods=periods, base_level=base_level, conn=conn,
                sides=sides, k_partitions=k, partitions=build_partitions(sides, len(xgeo), k))


# ---------------------------------------------------------------------------
# generation, refinement, curving
# ---------------------------------------------------------------------------


def generate_cartesian(nx: int, ny: int, bounds=((0.0, 1.0), (0.0, 1.0)),
                       bc_tags: Sequence[str] = ("xmin", "xmax", "ymin", "ymax"),
                       periodic=(False, False)) -> Mesh:
    """Structured nx-by-ny mesh with Ngeo = 1.

    ``bc_tags`` names the boundaries x=xmin, x=xmax, y=ymin, y=ymax;
    directions flagged periodic pair opposite boundaries instead.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"element counts must be positive integers, got ({nx}, {ny})")
    (x0, x1), (y0, y1) = bounds
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate bounds {bounds}")
    if len(bc_tags) != 4:
        raise ValueError("exactly four boundary tags are required")
    px, py = bool(periodic[0]), bool(periodic[1])
    names: list[str] = []

    def tag(name):
        if name not in names:
            names.append(name)
        return names.index(name)

    xs = x0 + (x1 - x0) * np.arange(nx + 1) / nx
    ys = y0 + (y1 - y0) * np.arange(ny + 1) / ny
    xs[-1], ys[-1] = x1, y1
    xgeo, xlin, lattice, bc = [], [], [], []
    for j in range(ny):
        for i in range(nx):
            c = np.array([[xs[i], ys[j]], [xs[i + 1], ys[j]], [xs[i], ys[j + 1]], [xs[i + 1], ys[j + 1]]])
            xlin.append(c)
            g = np.empty((2, 2, 2))
            g[:, 0, 0], g[:, 1, 0], g[:, 0, 1], g[:, 1, 1] = c[0], c[1], c[2], c[3]
            xgeo.append(g)
            lattice.append((0, i, j))
            b = [-1, -1, -1, -1]
            if i == 0 and not px:
                b[0] = tag(bc_tags[0])
            if i == nx - 1 and not px:
                b[1] = tag(bc_tags[1])
            if j == 0 and not py:
                b[2] = tag(bc_tags[2])
            if j == ny - 1 and not py:
                b[3] = tag(bc_tags[3])
            bc.append(b)
    periods = []
    if px:
        periods.append((x1 - x0, 0.0))
    if py:
        periods.append((0.0, y1 - y0))
    base_level = int(np.ceil(np.log2(max(nx, ny)))) if max(nx, ny) > 1 else 0
    return assemble_mesh(np.array(xgeo), np.array(xlin), np.array(lattice), np.array(bc), names,
                         periods, base_level)


def _lgl(n):
    return build_nodes(n, "LGL")[0] if n >= 1 else np.array([0.0])


def evaluate_mapping(mesh: Mesh, xi, eta, elems=None) -> np.ndarray:
    """Physical coordinates at reference points (tensor grid xi x eta).

    Returns an array of shape (nSel, 2, len(xi), len(eta)).
    """
    nodes = _lgl(mesh.ngeo)
    Ix = build_interpolation_matrix(nodes, xi)
    Iy = build_interpolation_matrix(nodes, eta)
    xg = mesh.xgeo if elems is None else mesh.xgeo[elems]
    return np.einsum("pi,ecij,qj->ecpq", Ix, xg, Iy)


def _deform(points: np.ndarray, mapping) -> np.ndarray:
    x, y = mapping(points[:, 0], points[:, 1])
    return np.stack([np.asarray(x, dtype=float) * np.ones_like(points[:, 0]),
                     np.asarray(y, dtype=float) * np.ones_like(points[:, 1])], axis=1)


def apply_curving(mesh: Mesh, mapping: Callable, ngeo: int) -> Mesh:
    """Resample the geometry at degree ``ngeo`` and apply an analytic deformation.

    ``mapping(x, y) -> (x', y')`` acts on physical coordinates.  The
    topology (computed from the straight lattice) is unchanged.
    """
    if ngeo < 1:
        raise ValueError("geometry degree must be at least 1")
    nodes = _lgl(ngeo)
    pts = evaluate_mapping(mesh, nodes, nodes)  # (nE, 2, n, n)
    flat = np.moveaxis(pts, 1, -1).reshape(-1, 2)
    new = _deform(flat, mapping).reshape(mesh.n_elems, ngeo + 1, ngeo + 1, 2)
    xgeo = np.ascontiguousarray(np.moveaxis(new, -1, 1))
    out = replace(mesh, ngeo=ngeo, xgeo=xgeo)
    from .geometry import check_valid
    check_valid(out)
    return out


def _sin_pi(t):
    """sin(pi t) with integer arguments snapped so that it vanishes exactly there.

    Periodic images of a face then receive bitwise identical displacements,
    which keeps both elements' metric terms identical on the shared face.
    """
    t = np.asarray(t, dtype=float)
    k = np.round(t)
    near = np.abs(t - k) < 1e-12
    r = np.where(near, 0.0, t - 2.0 * np.floor(0.5 * t))  # reduce to [0, 2)
    return np.where(near, 0.0, np.sin(np.pi * r))


def curving_map(name: str, bounds, amplitude: float = 0.1) -> Callable:
    """Named analytic deformations of the rectangle ``bounds``.

    ``sine_x``: x += a Lx sin(pi (y-y0)/Ly) (one-directional warp).
    ``sine_xy``: both coordinates displaced by a L sin(2 pi s) sin(2 pi t),
    vanishing on the whole boundary (compatible with periodicity).
    """
    (x0, x1), (y0, y1) = bounds
    lx, ly = x1 - x0, y1 - y0
    key = name.strip().lower()
    if key in ("none", "identity"):
        return lambda x, y: (x, y)
    if key == "sine_x":
        return lambda x, y: (x + amplitude * lx * _sin_pi((y - y0) / ly), y)
    if key == "sine_xy":
        def f(x, y):
            s = _sin_pi(2.0 * (x - x0) / lx) * _sin_pi(2.0 * (y - y0) / ly)
            return x + amplitude * lx * s, y + amplitude * ly * s
        return f
    raise ValueError(f"unknown curving {name!r} (none, sine_x, sine_xy)")


def _resample_exact(xg: np.ndarray, nodes, xi, eta) -> np.ndarray:
    """Sample one element mapping at (xi, eta) with a single final rounding.

    Children of a split element must reproduce the parent's face
    polynomial as closely as possible, otherwise the mortar free-stream
    property degrades by the amplified rounding error.
    """
    ld = np.longdouble
    Ix = build_interpolation_matrix(nodes, np.asarray(xi, dtype=ld), dtype=ld)
    Iy = build_interpolation_matrix(nodes, np.asarray(eta, dtype=ld), dtype=ld)
    return np.einsum("pi,cij,qj->cpq", Ix, xg.astype(ld), Iy).astype(float)


def build_mortar_interfaces(mesh: Mesh, refine_region) -> Mesh:
    """Split selected elements 2x2, creating 2:1 non-conforming interfaces.

    ``refine_region`` is either a predicate on element centroids
    ``f(x, y) -> bool`` or an iterable of element ids.
    """
    cent = mesh.element_centroids()
    if callable(refine_region):
        sel = np.array([bool(refine_region(cx, cy)) for cx, cy in cent], dtype=bool)
    else:
        sel = np.zeros(mesh.n_elems, dtype=bool)
        ids = list(refine_region)
        if ids:
            sel[np.asarray(ids, dtype=np.int64)] = True
    if not sel.any():
        return mesh
    small = np.any(mesh.conn.mortar_type == MORTAR_SMALL, axis=1)
    if np.any(sel & small):
        raise InvalidMeshError("refinement would produce a non-conforming ratio above 2:1",
                               element_ids=np.flatnonzero(sel & small))
    nodes = _lgl(mesh.ngeo)
    xgeo, xlin, lattice, bc = [], [], [], []
    for e in range(mesh.n_elems):
        if not sel[e]:
            xgeo.append(mesh.xgeo[e])
            xlin.append(mesh.xlin[e])
            lattice.append(mesh.lattice[e])
            bc.append(mesh.bc[e])
            continue
        lv, i0, j0 = mesh.lattice[e]
        c = mesh.xlin[e]
        for b in range(2):
            for a in range(2):
                xi = 0.5 * (nodes.astype(np.longdouble) + (2 * a - 1))
                eta = 0.5 * (nodes.astype(np.longdouble) + (2 * b - 1))
                xgeo.append(_resample_exact(mesh.xgeo[e], nodes, xi, eta))
                corners = []
                for cb in (0, 1):
                    for ca in (0, 1):
                        s = 0.5 * (a + ca)
                        t = 0.5 * (b + cb)
                        corners.append((1 - s) * (1 - t) * c[0] + s * (1 - t) * c[1]
                                       + (1 - s) * t * c[2] + s * t * c[3])
                # reorder to c00, c10, c01, c11
                xlin.append(np.array([corners[0], corners[1], corners[2], corners[3]]))
                lattice.append((lv + 1, 2 * i0 + a, 2 * j0 + b))
                cb_ = [-1, -1, -1, -1]
                if a == 0:
                    cb_[0] = mesh.bc[e, 0]
                if a == 1:
                    cb_[1] = mesh.bc[e, 1]
                if b == 0:
                    cb_[2] = mesh.bc[e, 2]
                if b == 1:
                    cb_[3] = mesh.bc[e, 3]
                bc.append(cb_)
    return assemble_mesh(np.array(xgeo), np.array(xlin), np.array(lattice), np.array(bc),
                         mesh.bc_names, mesh.periods, mesh.base_level, mesh.k_partitions)


def reorient_element(mesh: Mesh, elem: int, quarter_turns: int) -> Mesh:
    """Rotate the local reference frame of one element (for flip testing)."""
    k = quarter_turns % 4
    if k == 0:
        return mesh
    xgeo = mesh.xgeo.copy()
    xlin = mesh.xlin.copy()
    bc = mesh.bc.copy()
    xgeo[elem] = np.rot90(mesh.xgeo[elem], k, axes=(1, 2))
    grid = np.empty((2, 2, 2))
    c = mesh.xlin[elem]
    grid[0, 0], grid[1, 0], grid[0, 1], grid[1, 1] = c[0], c[1], c[2], c[3]
    grid = np.rot90(grid, k, axes=(0, 1))
    xlin[elem] = np.array([grid[0, 0], grid[1, 0], grid[0, 1], grid[1, 1]])
    # boundary tags follow the faces they belong to
    old_A, old_B, old_M = _face_geometry(mesh.xlin[elem:elem + 1])
    new_A, new_B, new_M = _face_geometry(xlin[elem:elem + 1])
    for l_new in range(4):
        d = np.linalg.norm(old_M[0] - new_M[0, l_new], axis=1)
        bc[elem, l_new] = mesh.bc[elem, int(np.argmin(d))]
    conn = connect_elements(xlin, bc, mesh.periods)
    sides = connect_sides(conn, bc, mesh.n_elems, mesh.k_partitions)
    return replace(mesh, xgeo=xgeo, xlin=xlin, bc=bc, conn=conn, sides=sides,
                   partitions=build_partitions(sides, mesh.n_elems, mesh.k_partitions))


def partition(mesh: Mesh, k: int) -> list[tuple[int, int]]:
    """Contiguous SFC partition ranges (the mesh itself is unchanged)."""
    return partition_ranges(mesh.n_elems, k)


def side_counts(mesh: Mesh) -> dict:
    s = mesh.sides
    return {"boundary": s.count(SIDE_BOUNDARY), "inner": s.count(SIDE_INNER),
            "mortar_parent": s.count(SIDE_MORTAR_PARENT), "mortar_child": s.count(SIDE_MORTAR_CHILD)}


def elements_in(mesh: Mesh, ids: Iterable[int]) -> np.ndarray:
    return np.asarray(list(ids), dtype=np.int64)
