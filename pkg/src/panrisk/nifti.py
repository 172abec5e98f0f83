"""Minimal NIfTI-1 reader and writer.

Supports the subset this pipeline needs: single-file little-endian NIfTI-1
(.nii, optionally gzip-compressed), 3D, datatypes uint8 / int16 / float32.
The 348-byte header is parsed with ``struct``; geometry comes from pixdim and
the sform (qform as fallback), and scl_slope / scl_inter rescaling is honored.
Anything outside that subset raises :class:`FormatError`.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .volume import Mask, Volume

__all__ = ["load_volume", "load_mask", "save_nifti"]

_HDR_FMT = "<i10s18sihbb8hfffhhhh8ffffhbbffffii80s24shhffffff12f16s4s"
_HDR_SIZE = struct.calcsize(_HDR_FMT)
assert _HDR_SIZE == 348

_DT_UINT8 = 2
_DT_INT16 = 4
_DT_FLOAT32 = 16
_DTYPES = {_DT_UINT8: np.uint8, _DT_INT16: np.int16, _DT_FLOAT32: np.float32}
_BITPIX = {_DT_UINT8: 8, _DT_INT16: 16, _DT_FLOAT32: 32}


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _qform_direction(b, c, d, qfac):
    a2 = 1.0 - (b * b + c * c + d * d)
    a = np.sqrt(max(0.0, a2))
    rot = np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )
    rot[:, 2] *= qfac
    return rot


def _parse_header(raw: bytes, path):
    if len(raw) < _HDR_SIZE:
        raise FormatError(f"{path}: file shorter than the 348-byte NIfTI-1 header")
    f = struct.unpack(_HDR_FMT, raw[:_HDR_SIZE])
    sizeof_hdr = f[0]
    dim = f[7:15]
    datatype, bitpix = f[19], f[20]
    pixdim = f[22:30]
    vox_offset, scl_slope, scl_inter = f[30], f[31], f[32]
    qform_code = f[44]
    sform_code = f[45]
    quatern = f[46:49]
    qoffset = f[49:52]
    srow = np.array(f[52:64], dtype=np.float64).reshape(3, 4)
    magic = f[65]

    if magic[:3] != b"n+1":
        raise FormatError(f"{path}: bad magic {magic!r}, expected single-file NIfTI-1 'n+1'")
    if sizeof_hdr != 348:
        raise FormatError(f"{path}: sizeof_hdr is {sizeof_hdr}, expected 348")
    if dim[0] != 3:
        raise FormatError(f"{path}: expected 3 dimensions, header declares {dim[0]}")
    if datatype not in _DTYPES:
        raise FormatError(
            f"{path}: unsupported datatype code {datatype}; supported: uint8(2), int16(4), float32(16)"
        )
    if _BITPIX[datatype] != bitpix:
        raise FormatError(f"{path}: bitpix {bitpix} inconsistent with datatype {datatype}")
    dims = tuple(int(d) for d in dim[1:4])
    if any(d <= 0 for d in dims):
        raise FormatError(f"{path}: nonpositive dimension in {dims}")
    spacing = tuple(float(p) for p in pixdim[1:4])
    if any(not np.isfinite(s) or s <= 0 for s in spacing):
        raise FormatError(f"{path}: nonpositive pixdim {spacing}")

    if sform_code > 0:
        affine3 = srow[:, :3]
        norms = np.linalg.norm(affine3, axis=0)
        if np.any(norms <= 0) or not np.all(np.isfinite(norms)):
            raise FormatError(f"{path}: degenerate sform rows")
        direction = affine3 / norms
        origin = srow[:, 3].copy()
    elif qform_code > 0:
        qfac = -1.0 if pixdim[0] < 0 else 1.0
        direction = _qform_direction(*[float(q) for q in quatern], qfac)
        origin = np.array(qoffset, dtype=np.float64)
    else:
        direction = np.eye(3)
        origin = np.zeros(3)

    return {
        "dims": dims,
        "spacing": spacing,
        "direction": direction,
        "origin": origin,
        "datatype": datatype,
        "vox_offset": int(round(vox_offset)),
        "scl_slope": float(scl_slope),
        "scl_inter": float(scl_inter),
    }


def _load_array(path):
    raw = _read_bytes(path)
    hdr = _parse_header(raw, path)
    dims = hdr["dims"]
    dtype = _DTYPES[hdr["datatype"]]
    count = int(np.prod(dims))
    offset = max(hdr["vox_offset"], _HDR_SIZE)
    nbytes = count * dtype().itemsize
    if len(raw) < offset + nbytes:
        raise FormatError(f"{path}: truncated voxel data ({len(raw)} bytes, need {offset + nbytes})")
    flat = np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<"), count=count, offset=offset)
    data = flat.reshape(dims, order="F").astype(np.float64)
    slope, inter = hdr["scl_slope"], hdr["scl_inter"]
    if np.isfinite(slope) and slope != 0.0 and not (slope == 1.0 and (inter == 0.0 or not np.isfinite(inter))):
        data = data * slope + (inter if np.isfinite(inter) else 0.0)
    return data, hdr


def load_volume(path) -> Volume:
    """Load a scalar volume; values are scaled by scl_slope / scl_inter when set."""
    data, hdr = _load_array(path)
    return Volume(data=data, spacing=hdr["spacing"], direction=hdr["direction"], origin=hdr["origin"])


def load_mask(path) -> Mask:
    """Load a segmentation mask; any voxel value > 0 is foreground."""
    data, hdr = _load_array(path)
    return Mask(data=data > 0, spacing=hdr["spacing"], direction=hdr["direction"], origin=hdr["origin"])


def _build_header(img, datatype: int) -> bytes:
    dims = img.dims
    srow = img.direction * np.array(img.spacing)[None, :]
    srow = np.hstack([srow, np.asarray(img.origin, dtype=np.float64).reshape(3, 1)])
    return struct.pack(
        _HDR_FMT,
        348,                      # sizeof_hdr
        b"", b"", 0, 0, 0, 0,     # unused
        3, dims[0], dims[1], dims[2], 1, 1, 1, 1,
        0.0, 0.0, 0.0,            # intent_p1..p3
        0,                        # intent_code
        datatype,
        _BITPIX[datatype],
        0,                        # slice_start
        1.0, img.spacing[0], img.spacing[1], img.spacing[2], 0.0, 0.0, 0.0, 0.0,
        352.0,                    # vox_offset
        1.0, 0.0,                 # scl_slope, scl_inter
        0, 0, 0,                  # slice_end, slice_code, xyzt_units
        0.0, 0.0, 0.0, 0.0,       # cal_max, cal_min, slice_duration, toffset
        0, 0,                     # glmax, glmin
        b"", b"",                 # descrip, aux_file
        0, 1,                     # qform_code, sform_code
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,  # quatern, qoffset
        *srow.ravel().tolist(),
        b"",                      # intent_name
        b"n+1\x00",
    )


def save_nifti(img, path) -> None:
    """Write a Volume (float32) or Mask (uint8) as single-file NIfTI-1.

    A ``.gz`` suffix selects gzip compression with a zeroed mtime so identical
    inputs produce byte-identical files.
    """
    if isinstance(img, Mask):
        datatype = _DT_UINT8
        payload = img.data.astype(np.uint8)
    else:
        datatype = _DT_FLOAT32
        payload = img.data.astype(np.float32)
    blob = _build_header(img, datatype) + b"\x00" * 4 + payload.tobytes(order="F")

    path = Path(path)
    if path.suffix == ".gz":
        with open(path, "wb") as fh:
            with gzip.GzipFile(filename="", mode="wb", fileobj=fh, mtime=0) as gz:
                gz.write(blob)
    else:
        path.write_bytes(blob)
