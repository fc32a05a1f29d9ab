"""Minimal NIfTI-1 single-file (``.nii`` / ``.nii.gz``) reader and writer.

Only the subset needed for aligned 3D CT volumes is supported: ``dim[1..3]``,
``pixdim[1..3]``, datatypes uint8/int16/int32/float32/float64, and
``scl_slope``/``scl_inter`` on read. Orientation beyond spacing is ignored.
"""

from __future__ import annotations

import gzip
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptHeader, UnsupportedFormat

HEADER_SIZE = 348
VOX_OFFSET = 352

# NIfTI datatype code -> numpy dtype name
DATATYPES = {2: "uint8", 4: "int16", 8: "int32", 16: "float32", 64: "float64"}
CODES = {v: k for k, v in DATATYPES.items()}


@dataclass
class NiftiImage:
    data: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]


def _open(path: Path) -> bytes:
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read(path: str | Path) -> NiftiImage:
    p = Path(path)
    buf = _open(p)
    if len(buf) < HEADER_SIZE:
        raise CorruptHeader(f"{p}: file shorter than a NIfTI-1 header")
    endian = "<"
    if struct.unpack("<i", buf[:4])[0] != HEADER_SIZE:
        endian = ">"
        if struct.unpack(">i", buf[:4])[0] != HEADER_SIZE:
            raise UnsupportedFormat(f"{p}: not a NIfTI-1 file (sizeof_hdr != 348)")
    magic = buf[344:348]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise UnsupportedFormat(f"{p}: bad NIfTI magic {magic!r}")
    if magic == b"ni1\x00":
        raise UnsupportedFormat(f"{p}: two-file NIfTI (.hdr/.img) is not supported")

    dim = struct.unpack(endian + "8h", buf[40:56])
    datatype = struct.unpack(endian + "h", buf[70:72])[0]
    pixdim = struct.unpack(endian + "8f", buf[76:108])
    vox_offset = int(struct.unpack(endian + "f", buf[108:112])[0])
    slope, inter = struct.unpack(endian + "2f", buf[112:120])
    qform_code, sform_code = struct.unpack(endian + "2h", buf[252:256])
    qoffset = struct.unpack(endian + "3f", buf[268:280])
    srow = np.array(struct.unpack(endian + "12f", buf[280:328]), dtype=np.float64).reshape(3, 4)

    ndim = dim[0]
    if ndim < 3 or ndim > 7:
        raise CorruptHeader(f"{p}: dim[0]={ndim}, expected a 3D volume")
    if ndim > 3 and any(d > 1 for d in dim[4 : ndim + 1]):
        raise UnsupportedFormat(f"{p}: only 3D volumes are supported, got dims {dim[1:ndim + 1]}")
    shape = tuple(int(d) for d in dim[1:4])
    if min(shape) < 1:
        raise CorruptHeader(f"{p}: nonpositive dims {shape}")
    spacing = tuple(float(abs(s)) for s in pixdim[1:4])
    if not all(np.isfinite(s) and s > 0 for s in spacing):
        raise CorruptHeader(f"{p}: nonpositive spacing {spacing}")
    if datatype not in DATATYPES:
        raise UnsupportedFormat(f"{p}: NIfTI datatype {datatype} not supported")

    if sform_code > 0:
        rot = srow[:, :3] / np.asarray(spacing)
        origin = tuple(float(v) for v in srow[:, 3])
    else:
        rot = np.eye(3)
        origin = tuple(float(v) for v in qoffset)
        if qform_code > 0:
            b, c, d = struct.unpack(endian + "3f", buf[256:268])
            if max(abs(b), abs(c), abs(d)) > 1e-6:
                rot = np.zeros((3, 3))
    if np.max(np.abs(np.abs(rot) - np.eye(3))) > 1e-4:
        warnings.warn(f"{p}: oblique/rotated orientation ignored; only spacing is used", stacklevel=2)

    dt = np.dtype(DATATYPES[datatype]).newbyteorder(endian)
    count = int(np.prod(shape))
    offset = max(vox_offset, VOX_OFFSET)
    if len(buf) < offset + count * dt.itemsize:
        raise CorruptHeader(f"{p}: truncated voxel data")
    data = np.frombuffer(buf, dtype=dt, count=count, offset=offset).reshape(shape, order="F")
    data = data.astype(dt.newbyteorder("="))
    if slope != 0 and np.isfinite(slope) and (slope != 1 or inter != 0):
        data = data.astype(np.float64) * float(slope) + float(inter)
    return NiftiImage(data, spacing, origin)  # type: ignore[arg-type]


def write(path: str | Path, data: np.ndarray, spacing, origin=(0.0, 0.0, 0.0)) -> None:
    p = Path(path)
    arr = np.asarray(data)
    if arr.ndim != 3:
        raise ValueError("only 3D arrays can be written")
    name = arr.dtype.name
    if name not in CODES:
        raise UnsupportedFormat(f"dtype {name} cannot be stored as NIfTI-1 here")
    hdr = bytearray(VOX_OFFSET)
    struct.pack_into("<i", hdr, 0, HEADER_SIZE)
    struct.pack_into("<8h", hdr, 40, 3, *arr.shape, 1, 1, 1, 1)
    struct.pack_into("<2h", hdr, 70, CODES[name], arr.dtype.itemsize * 8)
    struct.pack_into("<8f", hdr, 76, 1.0, *[float(s) for s in spacing], 0.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, float(VOX_OFFSET))
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)
    struct.pack_into("<B", hdr, 123, 2)  # xyzt_units: mm
    struct.pack_into("<2h", hdr, 252, 0, 1)
    sx, sy, sz = (float(s) for s in spacing)
    ox, oy, oz = (float(o) for o in origin)
    struct.pack_into("<12f", hdr, 280, sx, 0, 0, ox, 0, sy, 0, oy, 0, 0, sz, oz)
    hdr[344:348] = b"n+1\x00"
    payload = bytes(hdr) + arr.astype(arr.dtype.newbyteorder("<")).ravel(order="F").tobytes()
    if p.name.lower().endswith(".gz"):
        # mtime=0 keeps output byte-identical across runs
        payload = gzip.compress(payload, mtime=0)
    p.write_bytes(payload)
