"""Binary solution checkpoints (little-endian, magic ``DGFXSTAT``).

Layout::

    magic[8] version:u32 time:f64 step:u64 N:u32 nVar:u32 nElems:u32 meshHash[32]
    nElems x u8                      element kind (0 DG, 1 FV)
    nElems x nVar*(N+1)^2 f64        solution, one fixed-size record per element (SFC order)
    user block: len:u32 config text, len:u32 version string, len:u32 build string
    crc32:u32                        of all preceding bytes

The stored configuration text is the exact text the run was started
with, so a checkpoint alone is enough to repeat the run.
"""

from __future__ import annotations

import hashlib
import platform
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from . import __version__
from .errors import FileFormatError

MAGIC = b"DGFXSTAT"
VERSION = 1
_HEAD = struct.Struct("<8sIdQIII32s")
KIND_DG, KIND_FV = 0, 1


def build_string() -> str:
    return f"dgflux {__version__}; numpy {np.__version__}; python {platform.python_version()}"


def mesh_hash(mesh) -> bytes:
    """SHA-256 over the element geometry, boundary tags and periodicity."""
    h = hashlib.sha256()
    h.update(struct.pack("<II", mesh.ngeo, mesh.n_elems))
    for arr, dt in ((mesh.lattice, "<i8"), (mesh.bc, "<i8"), (mesh.xlin, "<f8"), (mesh.xgeo, "<f8"),
                    (mesh.periods, "<f8")):
        h.update(np.ascontiguousarray(arr, dtype=dt).tobytes())
    h.update("\0".join(mesh.bc_names).encode("utf-8"))
    return h.digest()


@dataclass(frozen=True, eq=False)
class Checkpoint:
    U: np.ndarray            # (nVar, nElems, N+1, N+1)
    is_fv: np.ndarray        # (nElems,) bool
    time: float
    step: int
    config_text: str
    mesh_hash: bytes
    version: str = __version__
    build: str = ""

    @property
    def N(self) -> int:
        return self.U.shape[-1] - 1


def encode_checkpoint(ck: Checkpoint) -> bytes:
    U = np.asarray(ck.U, dtype=float)
    nvar, ne, n, _ = U.shape
    if len(ck.mesh_hash) != 32:
        raise ValueError("mesh hash must be 32 bytes")
    parts = [_HEAD.pack(MAGIC, VERSION, float(ck.time), int(ck.step), n - 1, nvar, ne, ck.mesh_hash)]
    kinds = np.where(np.asarray(ck.is_fv, dtype=bool), KIND_FV, KIND_DG).astype("u1")
    parts.append(kinds.tobytes())
    parts.append(np.ascontiguousarray(U.transpose(1, 0, 2, 3), dtype="<f8").tobytes())
    for text in (ck.config_text, ck.version, ck.build or build_string()):
        raw = text.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)) + raw)
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def write_checkpoint(ck: Checkpoint, path) -> None:
    data = encode_checkpoint(ck)
    with open(path, "wb") as fh:
        fh.write(data)


def _header(buf):
    if len(buf) < _HEAD.size:
        raise FileFormatError("truncated checkpoint (header)")
    magic, version, t, step, N, nvar, ne, mh = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FileFormatError(f"not a checkpoint file (magic {magic!r})")
    if version != VERSION:
        raise FileFormatError(f"unsupported checkpoint version {version} (expected {VERSION})")
    return t, step, N, nvar, ne, mh


def decode_checkpoint(buf: bytes) -> Checkpoint:
    t, step, N, nvar, ne, mh = _header(buf)
    if len(buf) < _HEAD.size + 4:
        raise FileFormatError("truncated checkpoint")
    (crc,) = struct.unpack_from("<I", buf, len(buf) - 4)
    if zlib.crc32(buf[:-4]) != crc:
        raise FileFormatError("checkpoint checksum mismatch (corrupted or truncated file)")
    n = N + 1
    pos = _HEAD.size
    rec = nvar * n * n * 8
    need = pos + ne + ne * rec
    if len(buf) < need + 4:
        raise FileFormatError("truncated checkpoint (payload)")
    kinds = np.frombuffer(buf, dtype="u1", count=ne, offset=pos)
    if np.any(kinds > KIND_FV):
        raise FileFormatError("invalid element kind byte")
    pos += ne
    U = np.frombuffer(buf, dtype="<f8", count=ne * nvar * n * n, offset=pos).reshape(ne, nvar, n, n)
    U = np.ascontiguousarray(U.transpose(1, 0, 2, 3), dtype=float)
    pos += ne * rec
    texts = []
    for _ in range(3):
        if pos + 4 > len(buf) - 4:
            raise FileFormatError("truncated checkpoint (user block)")
        (ln,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        if pos + ln > len(buf) - 4:
            raise FileFormatError("truncated checkpoint (user block)")
        texts.append(bytes(buf[pos:pos + ln]).decode("utf-8"))
        pos += ln
    if pos != len(buf) - 4:
        raise FileFormatError("trailing bytes in checkpoint")
    return Checkpoint(U=U, is_fv=kinds == KIND_FV, time=t, step=int(step), config_text=texts[0],
                      mesh_hash=mh, version=texts[1], build=texts[2])


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())


def read_checkpoint_elements(path, start: int, stop: int) -> np.ndarray:
    """Solution of elements [start, stop) read by offset, shape (nVar, stop-start, n, n)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEAD.size)
        _, _, N, nvar, ne, _ = _header(head)
        if not (0 <= start <= stop <= ne):
            raise ValueError(f"element range [{start}, {stop}) outside 0..{ne}")
        n = N + 1
        rec = nvar * n * n * 8
        fh.seek(_HEAD.size + ne + start * rec)
        raw = fh.read((stop - start) * rec)
    if len(raw) != (stop - start) * rec:
        raise FileFormatError("truncated checkpoint (payload)")
    U = np.frombuffer(raw, dtype="<f8").reshape(stop - start, nvar, n, n)
    return np.ascontiguousarray(U.transpose(1, 0, 2, 3), dtype=float)


def extract_config(path) -> str:
    """Configuration text stored in a checkpoint, byte-identical to the original."""
    return read_checkpoint(path).config_text
