"""Binary mesh file (little-endian, magic ``DGFXMESH``).

Layout::

    magic[8] version:u32 ngeo:u32 nElems:u32 nSides:u32 baseLevel:u32 nBC:u32 nPeriods:u32
    nBC x (len:u16, utf-8 name)
    nPeriods x (f64, f64)
    nElems x element record   (fixed stride, SFC order)
    nSides x side record
    crc32:u32                 (of all preceding bytes)

An element record holds the lattice address (3 x i32), the boundary tags
of its four local sides (4 x i32), the straight corners (4 x 2 f64) and
the mapping nodes (2 x (Ngeo+1)^2 f64).  Any contiguous element range
can be decoded on its own with :func:`read_mesh_elements`.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import FileFormatError
from .mesh import Mesh, build_partitions, connect_elements, connect_sides

MAGIC = b"DGFXMESH"
VERSION = 1
_HEAD = struct.Struct("<8s7I")

SIDE_DTYPE = np.dtype([("kind", "<i4"), ("ref_elem", "<i4"), ("ref_loc", "<i4"), ("oth_elem", "<i4"),
                       ("oth_loc", "<i4"), ("flip", "<i4"), ("bc", "<i4"), ("mortar_parent", "<i4"),
                       ("mortar_pos", "<i4")])


def element_dtype(ngeo: int) -> np.dtype:
    m = ngeo + 1
    return np.dtype([("lattice", "<i4", (3,)), ("bc", "<i4", (4,)), ("xlin", "<f8", (4, 2)),
                     ("xgeo", "<f8", (2, m, m))])


def _side_records(mesh: Mesh) -> np.ndarray:
    s = mesh.sides
    rec = np.zeros(mesh.n_sides, dtype=SIDE_DTYPE)
    for name in SIDE_DTYPE.names:
        rec[name] = getattr(s, name)
    return rec


def encode_mesh(mesh: Mesh) -> bytes:
    names = [n.encode("utf-8") for n in mesh.bc_names]
    parts = [_HEAD.pack(MAGIC, VERSION, mesh.ngeo, mesh.n_elems, mesh.n_sides, mesh.base_level,
                        len(names), len(mesh.periods))]
    for n in names:
        parts.append(struct.pack("<H", len(n)) + n)
    parts.append(np.asarray(mesh.periods, dtype="<f8").tobytes())
    el = np.zeros(mesh.n_elems, dtype=element_dtype(mesh.ngeo))
    el["lattice"] = mesh.lattice
    el["bc"] = mesh.bc
    el["xlin"] = mesh.xlin
    el["xgeo"] = mesh.xgeo
    parts.append(el.tobytes())
    parts.append(_side_records(mesh).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_mesh(mesh))


def _parse_header(buf: bytes):
    if len(buf) < _HEAD.size:
        raise FileFormatError("truncated mesh file (header)")
    magic, version, ngeo, ne, ns, base, nbc, nper = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FileFormatError(f"not a mesh file (magic {magic!r})")
    if version != VERSION:
        raise FileFormatError(f"unsupported mesh file version {version} (expected {VERSION})")
    pos = _HEAD.size
    names = []
    for _ in range(nbc):
        if pos + 2 > len(buf):
            raise FileFormatError("truncated mesh file (boundary table)")
        (ln,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        if pos + ln > len(buf):
            raise FileFormatError("truncated mesh file (boundary table)")
        names.append(bytes(buf[pos:pos + ln]).decode("utf-8"))
        pos += ln
    if pos + 16 * nper > len(buf):
        raise FileFormatError("truncated mesh file (periods)")
    periods = np.frombuffer(buf, dtype="<f8", count=2 * nper, offset=pos).reshape(nper, 2).astype(float)
    pos += 16 * nper
    return dict(ngeo=ngeo, n_elems=ne, n_sides=ns, base_level=base, bc_names=tuple(names),
                periods=periods, elem_offset=pos)


def decode_mesh(buf: bytes, k: int = 1) -> Mesh:
    if len(buf) < _HEAD.size + 4:
        raise FileFormatError("truncated mesh file")
    h = _parse_header(buf)
    edt = element_dtype(h["ngeo"])
    end = h["elem_offset"] + edt.itemsize * h["n_elems"] + SIDE_DTYPE.itemsize * h["n_sides"]
    if len(buf) != end + 4:
        raise FileFormatError(f"mesh file size {len(buf)} does not match its header ({end + 4} bytes)")
    (crc,) = struct.unpack_from("<I", buf, end)
    if zlib.crc32(buf[:end]) != crc:
        raise FileFormatError("mesh file checksum mismatch")
    el = np.frombuffer(buf, dtype=edt, count=h["n_elems"], offset=h["elem_offset"])
    sides = np.frombuffer(buf, dtype=SIDE_DTYPE, count=h["n_sides"],
                          offset=h["elem_offset"] + edt.itemsize * h["n_elems"])
    xgeo = np.ascontiguousarray(el["xgeo"], dtype=float)
    xlin = np.ascontiguousarray(el["xlin"], dtype=float)
    lattice = np.ascontiguousarray(el["lattice"], dtype=np.int64)
    bc = np.ascontiguousarray(el["bc"], dtype=np.int64)
    conn = connect_elements(xlin, bc, h["periods"])
    st = connect_sides(conn, bc, h["n_elems"], k)
    mesh = Mesh(ngeo=h["ngeo"], xgeo=xgeo, xlin=xlin, lattice=lattice, bc=bc, bc_names=h["bc_names"],
                periods=h["periods"], base_level=h["base_level"], conn=conn, sides=st, k_partitions=k,
                partitions=build_partitions(st, h["n_elems"], k))
    if mesh.n_sides != h["n_sides"] or _side_records(mesh).tobytes() != sides.tobytes():
        raise FileFormatError("stored side table is inconsistent with the element records")
    return mesh


def read_mesh(path, k: int = 1) -> Mesh:
    with open(path, "rb") as fh:
        return decode_mesh(fh.read(), k)


def read_mesh_elements(path, start: int, stop: int) -> dict:
    """Element records [start, stop) decoded without reading the rest of the file.

    Only the header is validated here; the checksum covers the whole
    file and is checked by :func:`read_mesh`.
    """
    with open(path, "rb") as fh:
        head = fh.read(_HEAD.size)
        if len(head) < _HEAD.size:
            raise FileFormatError("truncated mesh file (header)")
        nbc, nper = _HEAD.unpack(head)[6:8]
        table = b""
        for _ in range(nbc):
            ln = fh.read(2)
            table += ln + (fh.read(struct.unpack("<H", ln)[0]) if len(ln) == 2 else b"")
        h = _parse_header(head + table + fh.read(16 * nper))
        if not (0 <= start <= stop <= h["n_elems"]):
            raise ValueError(f"element range [{start}, {stop}) outside 0..{h['n_elems']}")
        edt = element_dtype(h["ngeo"])
        fh.seek(h["elem_offset"] + edt.itemsize * start)
        raw = fh.read(edt.itemsize * (stop - start))
    if len(raw) != edt.itemsize * (stop - start):
        raise FileFormatError("truncated mesh file (element records)")
    el = np.frombuffer(raw, dtype=edt)
    return {"xgeo": el["xgeo"].astype(float), "xlin": el["xlin"].astype(float),
            "lattice": el["lattice"].astype(np.int64), "bc": el["bc"].astype(np.int64)}
