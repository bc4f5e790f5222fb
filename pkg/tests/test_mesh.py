import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgflux.basis import get_basis
from dgflux.errors import FileFormatError, InvalidMeshError
from dgflux.exchange import build_side_plan, exchange_face_data, gather_sides, master_to_ref
from dgflux.geometry import (compute_geometry, reindex, scaled_jacobian,
                             scaled_jacobian_histogram)
from dgflux.mesh import (GROUP_BOUNDARY, GROUP_INNER, GROUP_PARTITION, SIDE_BOUNDARY, SIDE_INNER,
                         SIDE_MORTAR_CHILD, SIDE_MORTAR_PARENT, apply_curving, build_mortar_interfaces,
                         curving_map, evaluate_mapping, generate_cartesian, partition, partition_ranges,
                         reorient_element, sfc_index, side_counts)
from dgflux.meshio import decode_mesh, encode_mesh, read_mesh, read_mesh_elements, write_mesh

UNIT = ((0.0, 1.0), (0.0, 1.0))


def curved(nx=4, ny=4, ngeo=4, amp=0.1, periodic=(False, False), name="sine_x"):
    return apply_curving(generate_cartesian(nx, ny, UNIT, periodic=periodic), curving_map(name, UNIT, amp), ngeo)


# -- generation ----------------------------------------------------------------


def test_single_cell():
    m = generate_cartesian(1, 1)
    assert m.n_elems == 1
    assert side_counts(m) == {"boundary": 4, "inner": 0, "mortar_parent": 0, "mortar_child": 0}


def test_periodic_2x2():
    m = generate_cartesian(2, 2, periodic=(True, True))
    assert m.n_elems == 4 and m.n_sides == 8
    assert side_counts(m)["inner"] == 8


def test_3x2_counts():
    c = side_counts(generate_cartesian(3, 2))
    assert c["inner"] == 7 and c["boundary"] == 10


def test_periodic_1x1_self_neighbour():
    m = generate_cartesian(1, 1, periodic=(True, True))
    s = m.sides
    assert m.n_sides == 2
    assert np.all(s.ref_elem == 0) and np.all(s.oth_elem == 0)
    # the lower local side of each pair is the ref copy
    assert sorted(s.ref_loc.tolist()) == [0, 2]


def test_generation_errors():
    with pytest.raises(ValueError):
        generate_cartesian(0, 2)
    with pytest.raises(ValueError):
        generate_cartesian(2, 2, ((0.0, 0.0), (0.0, 1.0)))


@given(nx=st.integers(1, 6), ny=st.integers(1, 6), px=st.booleans(), py=st.booleans())
@settings(max_examples=40, deadline=None)
def test_every_interior_side_referenced_twice(nx, ny, px, py):
    m = generate_cartesian(nx, ny, periodic=(px, py))
    s = m.sides
    refs = np.zeros(m.n_sides, dtype=int)
    np.add.at(refs, s.elem_side.ravel(), 1)
    assert np.all(refs[s.kind == SIDE_INNER] == 2)
    assert np.all(refs[s.kind == SIDE_BOUNDARY] == 1)
    expected_inner = (nx - 1 + px) * ny + (ny - 1 + py) * nx
    assert side_counts(m)["inner"] == expected_inner


# -- SFC and partitions -------------------------------------------------------


def test_sfc_examples():
    assert sfc_index(0, 0, 3) == 0
    assert sfc_index(1, 0, 1) == 1 and sfc_index(0, 1, 1) == 2
    seq = sorted(sfc_index(i, j, 2) for i in range(4) for j in range(4))
    assert seq == list(range(16))
    with pytest.raises(ValueError):
        sfc_index(4, 0, 2)


def test_partition_ranges():
    assert [b - a for a, b in partition_ranges(10, 3)] == [4, 3, 3]
    assert partition_ranges(10, 1) == [(0, 10)]
    assert all(b - a == 1 for a, b in partition_ranges(5, 5))
    with pytest.raises(ValueError):
        partition_ranges(5, 6)
    with pytest.raises(ValueError):
        partition(generate_cartesian(2, 2), 0)


def test_elements_in_sfc_order():
    m = generate_cartesian(4, 4)
    keys = [sfc_index(int(i), int(j), 2) for _, i, j in m.lattice]
    assert keys == sorted(keys)


def test_master_balance_on_partition_interface():
    m = generate_cartesian(4, 4).with_partitions(2)
    s = m.sides
    part = s.group == GROUP_PARTITION
    owner = m.partition_of()
    counts = np.bincount(owner[s.master_elem[part]], minlength=2)
    assert abs(counts[0] - counts[1]) <= 1


def test_side_groups_ordered():
    m = curved(6, 6, periodic=(True, False)).with_partitions(3)
    g = m.sides.group
    assert np.all(np.diff(g) >= 0)
    assert set(np.unique(g)) <= {GROUP_BOUNDARY, GROUP_INNER, GROUP_PARTITION}


def test_flip_matches_coordinates():
    m = reorient_element(generate_cartesian(2, 1), 1, 2)
    geo = compute_geometry(m, get_basis(3, "LGL"))
    s = m.sides
    e = s.ref_elem[s.kind == SIDE_INNER][0]
    side = np.flatnonzero(s.kind == SIDE_INNER)[0]
    assert s.flip[side] == 1
    a = geo.face_x[s.ref_elem[side], s.ref_loc[side]]
    b = geo.face_x[s.oth_elem[side], s.oth_loc[side]][:, ::-1]
    np.testing.assert_allclose(a, b, atol=1e-14)
    assert e >= 0


# -- curving and metrics ----------------------------------------------------------


def test_identity_curving_keeps_metrics():
    lin = generate_cartesian(3, 3)
    cur = apply_curving(lin, curving_map("none", UNIT), 3)
    b = get_basis(4, "LG")
    g1, g2 = compute_geometry(lin, b), compute_geometry(cur, b)
    assert np.abs(g1.J - g2.J).max() < 1e-14
    assert np.abs(g1.Ja - g2.Ja).max() < 1e-14


def test_affine_map_doubles_jacobian():
    lin = generate_cartesian(2, 2)
    aff = apply_curving(lin, lambda x, y: (2 * x, y + 3), 1)
    b = get_basis(3, "LGL")
    g1, g2 = compute_geometry(lin, b), compute_geometry(aff, b)
    np.testing.assert_allclose(g2.J, 2 * g1.J, rtol=1e-14)
    assert np.abs(g1.side_normal - g2.side_normal).max() < 1e-14


def test_square_element_metrics():
    h = 0.5
    m = generate_cartesian(1, 1, ((0, h), (0, h)))
    g = compute_geometry(m, get_basis(3, "LG"))
    np.testing.assert_allclose(g.J, h * h / 4, rtol=1e-14)
    np.testing.assert_allclose(g.side_sJ, h / 2, rtol=1e-14)


def test_rotated_square():
    c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
    m = apply_curving(generate_cartesian(1, 1), lambda x, y: (c * x - s * y, s * x + c * y), 1)
    g = compute_geometry(m, get_basis(2, "LGL"))
    np.testing.assert_allclose(g.J, 0.25, rtol=1e-14)
    loc = m.sides.ref_loc
    side = int(np.flatnonzero(loc == 1)[0])
    np.testing.assert_allclose(g.side_normal[side, :, 0], [c, s], atol=1e-14)


@pytest.mark.parametrize("family", ["LG", "LGL"])
def test_curved_metric_identity_and_scaled_jacobian(family):
    m = curved(4, 4, 4, 0.1)
    sj = scaled_jacobian(m)
    assert np.all(sj > 0) and np.all(sj <= 1.0)
    for N in (3, 5, 7):
        g = compute_geometry(m, get_basis(N, family))
        assert np.abs(g.metric_divergence()).max() < 1e-12
        assert np.all(g.J > 0)
        assert np.abs(np.linalg.norm(g.side_normal, axis=1) - 1).max() < 1e-13
        assert np.all(g.side_sJ > 0)


def test_jacobian_matches_finite_differences():
    m = curved(4, 4, 4, 0.1)
    f = curving_map("sine_x", UNIT, 0.1)
    g = compute_geometry(m, get_basis(6, "LGL"))
    x, y = g.x[:, 0], g.x[:, 1]
    # physical J / reference J of the straight lattice = det of the analytic deformation
    lin = compute_geometry(generate_cartesian(4, 4), get_basis(6, "LGL"))
    eps = 1e-6
    xl, yl = lin.x[:, 0], lin.x[:, 1]
    dxdx = (f(xl + eps, yl)[0] - f(xl - eps, yl)[0]) / (2 * eps)
    dxdy = (f(xl, yl + eps)[0] - f(xl, yl - eps)[0]) / (2 * eps)
    dydx = (f(xl + eps, yl)[1] - f(xl - eps, yl)[1]) / (2 * eps)
    dydy = (f(xl, yl + eps)[1] - f(xl, yl - eps)[1]) / (2 * eps)
    det = dxdx * dydy - dxdy * dydx
    assert np.abs(g.J / lin.J - det).max() < 1e-3
    assert x.shape == y.shape


def test_folded_mesh_rejected():
    m = generate_cartesian(2, 2)
    with pytest.raises(InvalidMeshError) as exc:
        apply_curving(m, lambda x, y: (x + 0.3 * np.sin(2 * np.pi * x), y), 4)
    assert len(exc.value.element_ids) > 0


def test_scaled_jacobian_histogram():
    sj = np.array([-0.5, 0.05, 0.15, 0.25, 0.9, 1.0])
    hist = scaled_jacobian_histogram(sj)
    assert list(hist) == ["<0", "0-0.1", "0.1-0.2", "0.2-0.3", ">=0.3"]
    assert list(hist.values()) == [1, 1, 1, 1, 2]
    assert np.all(scaled_jacobian(generate_cartesian(3, 3)) == pytest.approx(1.0))


def test_watertight_curved_sides():
    m = curved(5, 3, 4, 0.08, periodic=(False, True))
    g = compute_geometry(m, get_basis(5, "LG"))
    s = m.sides
    for side in np.flatnonzero(s.kind == SIDE_INNER):
        a = g.face_x[s.ref_elem[side], s.ref_loc[side]]
        b = reindex(g.face_x[s.oth_elem[side], s.oth_loc[side]][None], [s.flip[side]])[0]
        shift = np.round((a - b)[:, :1], 12)
        assert np.abs(a - b - shift).max() < 1e-12


# -- mortars ----------------------------------------------------------------------


def test_refine_one_of_two():
    m = build_mortar_interfaces(generate_cartesian(2, 1), [0])
    c = side_counts(m)
    assert m.n_elems == 5
    assert c["mortar_parent"] == 1 and c["mortar_child"] == 2
    parent = np.flatnonzero(m.sides.kind == SIDE_MORTAR_PARENT)[0]
    kids = m.sides.mortar_children[parent]
    assert np.all(m.sides.kind[kids] == SIDE_MORTAR_CHILD)
    assert np.all(m.sides.mortar_parent[kids] == parent)


def test_refine_empty_and_all():
    m = generate_cartesian(2, 2)
    assert build_mortar_interfaces(m, []) is m
    full = build_mortar_interfaces(m, range(4))
    assert full.n_elems == 16
    assert side_counts(full)["mortar_parent"] == 0


def test_refine_ratio_limit():
    m = build_mortar_interfaces(generate_cartesian(2, 1), [0])
    # a child touching the unrefined neighbour would create a 4:1 interface
    touching = [e for e in range(m.n_elems) if m.lattice[e, 0] == 1 and m.lattice[e, 1] == 1]
    with pytest.raises(InvalidMeshError):
        build_mortar_interfaces(m, touching[:1])
    interior = [e for e in range(m.n_elems) if m.lattice[e, 0] == 1 and m.lattice[e, 1] == 0]
    assert build_mortar_interfaces(m, interior[:1]).n_elems == m.n_elems + 3


def test_mortar_geometry_consistent():
    m = build_mortar_interfaces(curved(3, 3, 3, 0.05), lambda x, y: x < 0.4 and y < 0.4)
    b = get_basis(4, "LGL")
    g = compute_geometry(m, b)
    s = m.sides
    IL, IU = b.mortar.IL, b.mortar.IU
    for p in np.flatnonzero(s.kind == SIDE_MORTAR_PARENT):
        big = g.face_x[s.ref_elem[p], s.ref_loc[p]]
        for pos, I in ((0, IL), (1, IU)):
            c = s.mortar_children[p][pos]
            child = g.face_x[s.oth_elem[c], s.oth_loc[c]]
            child = child[:, ::-1] if s.flip[c] else child
            assert np.abs(big @ I.T - child).max() < 1e-12


# -- file format --------------------------------------------------------------------


def _assert_same_mesh(a, b):
    for f in ("xgeo", "xlin", "lattice", "bc", "periods"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))
    assert a.bc_names == b.bc_names and a.ngeo == b.ngeo
    for f in ("kind", "ref_elem", "ref_loc", "oth_elem", "oth_loc", "flip", "mortar_parent", "master_elem"):
        np.testing.assert_array_equal(getattr(a.sides, f), getattr(b.sides, f))


def test_mesh_file_round_trip(tmp_path):
    m = build_mortar_interfaces(curved(4, 3, 3, 0.05, periodic=(True, False)), lambda x, y: x < 0.3)
    path = tmp_path / "m.dgfxmesh"
    write_mesh(m, path)
    _assert_same_mesh(m, read_mesh(path))
    assert path.read_bytes()[:8] == b"DGFXMESH"


def test_mesh_range_read(tmp_path):
    m = curved(4, 4, 2)
    path = tmp_path / "m.dgfxmesh"
    write_mesh(m, path)
    part = read_mesh_elements(path, 3, 6)
    np.testing.assert_array_equal(part["xgeo"], m.xgeo[3:6])
    np.testing.assert_array_equal(part["bc"], m.bc[3:6])
    np.testing.assert_array_equal(part["lattice"], m.lattice[3:6])


def test_mesh_file_corruption():
    data = bytearray(encode_mesh(generate_cartesian(3, 3)))
    bad = data.copy()
    bad[8] ^= 0xFF
    with pytest.raises(FileFormatError, match="version"):
        decode_mesh(bytes(bad))
    bad = data.copy()
    bad[0] = ord("X")
    with pytest.raises(FileFormatError, match="magic"):
        decode_mesh(bytes(bad))
    bad = data.copy()
    bad[100] ^= 1
    with pytest.raises(FileFormatError, match="checksum"):
        decode_mesh(bytes(bad))
    with pytest.raises(FileFormatError):
        decode_mesh(bytes(data[:-7]))


# -- exchange ------------------------------------------------------------------------


def _random_faces(m, n, nv=2, seed=0):
    return np.random.default_rng(seed).normal(size=(nv, m.n_elems, 4, n))


def test_exchange_pure_copy_2x1():
    m = generate_cartesian(2, 1).with_partitions(2)
    plan = build_side_plan(m, 3)
    face = _random_faces(m, 3)
    master, slave = exchange_face_data(face, plan)
    s = m.sides
    side = int(np.flatnonzero(s.kind == SIDE_INNER)[0])
    vals = face[:, s.slave_elem[side], s.slave_loc[side]]
    np.testing.assert_array_equal(slave[:, side], vals[:, ::-1] if s.flip[side] else vals)


@pytest.mark.parametrize("k", [2, 3, 7])
def test_exchange_partition_invariant(k):
    base = build_mortar_interfaces(curved(6, 6, 2, 0.05, periodic=(True, True), name="sine_xy"),
                                   lambda x, y: 0.3 < x < 0.7 and 0.3 < y < 0.7)
    n = 4
    face = _random_faces(base, n, seed=k)
    r1, o1 = gather_sides(face, build_side_plan(base, n))
    mk = base.with_partitions(k)
    plan = build_side_plan(mk, n)
    rk, ok = master_to_ref(*exchange_face_data(face, plan), plan)
    # side numbering depends on k; match sides through their element slots
    def keys(s):
        return list(zip(s.ref_elem.tolist(), s.ref_loc.tolist(), s.oth_elem.tolist(), s.oth_loc.tolist()))

    pos = {k: i for i, k in enumerate(keys(base.sides))}
    idx = np.array([pos[k] for k in keys(mk.sides)])
    np.testing.assert_array_equal(r1[:, idx], rk)
    paired = mk.sides.oth_elem >= 0
    np.testing.assert_array_equal(o1[:, idx][:, paired], ok[:, paired])


def test_evaluate_mapping_corners():
    m = curved(2, 2, 3, 0.1)
    pts = evaluate_mapping(m, np.array([-1.0, 1.0]), np.array([-1.0, 1.0]))
    assert pts.shape[-2:] == (2, 2)
