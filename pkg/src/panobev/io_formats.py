"""Readers and writers for every on-disk artifact.

PBT layout (all little-endian)::

    b"PBT1" | u8 dtype code | u8 ndim | ndim x u32 dims | row-major payload

Depth panoramas are 16-bit P5 PGM in millimeters (0 = no return), RGB
panoramas are 8-bit P6 PPM, point clouds are ASCII PLY.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (CalibrationError, FormatError, InputError, LengthError,
                     ParseError, UnsupportedError)
from .types import NO_DATA, LabeledPointCloud, SemanticBevMap

PBT_MAGIC = b"PBT1"
PBT_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("u1"), 2: np.dtype("<u2"), 3: np.dtype("<i4")}
_PBT_CODES = {dt: code for code, dt in PBT_DTYPES.items()}


def pbt_payload_nbytes(dtype_code: int, dims) -> int:
    n = PBT_DTYPES[dtype_code].itemsize
    for d in dims:
        n *= int(d)
    return n


def encode_pbt(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    dt = array.dtype.newbyteorder("<") if array.dtype.itemsize > 1 else array.dtype
    code = _PBT_CODES.get(np.dtype(dt))
    if code is None:
        raise FormatError(f"dtype {array.dtype} has no PBT code")
    if not 1 <= array.ndim <= 4 or min(array.shape) < 1:
        raise FormatError(f"PBT needs 1-4 dims, all >= 1; got shape {array.shape}")
    header = PBT_MAGIC + struct.pack("<BB", code, array.ndim)
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    return header + np.ascontiguousarray(array, dtype=PBT_DTYPES[code]).tobytes()


def decode_pbt(buf: bytes) -> np.ndarray:
    if len(buf) < 6 or buf[:4] != PBT_MAGIC:
        raise FormatError("bad PBT magic")
    code, ndim = struct.unpack_from("<BB", buf, 4)
    if code not in PBT_DTYPES:
        raise FormatError(f"unknown PBT dtype code {code}")
    if not 1 <= ndim <= 4:
        raise FormatError(f"PBT ndim {ndim} outside 1..4")
    if len(buf) < 6 + 4 * ndim:
        raise LengthError("truncated PBT header")
    dims = struct.unpack_from(f"<{ndim}I", buf, 6)
    if min(dims) < 1:
        raise FormatError("PBT dims must be >= 1")
    start = 6 + 4 * ndim
    need = pbt_payload_nbytes(code, dims)
    if len(buf) - start != need:
        raise LengthError(f"PBT payload is {len(buf) - start} bytes, header implies {need}")
    return np.frombuffer(buf, dtype=PBT_DTYPES[code], offset=start).reshape(dims).copy()


def read_pbt(path) -> np.ndarray:
    return decode_pbt(Path(path).read_bytes())


def write_pbt(array: np.ndarray, path) -> None:
    Path(path).write_bytes(encode_pbt(array))


# --- Netpbm -----------------------------------------------------------------

def _netpbm_header(buf: bytes):
    """Return (magic, width, height, maxval, payload offset)."""
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(buf):
            raise FormatError("truncated Netpbm header")
        if buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        end = pos
        while end < len(buf) and not buf[end:end + 1].isspace() and buf[end:end + 1] != b"#":
            end += 1
        tokens.append(buf[pos:end])
        pos = end
    # exactly one whitespace byte separates maxval from the raster
    pos += 1
    magic = tokens[0].decode("ascii", "replace")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FormatError(f"non-integer Netpbm header field: {exc}") from None
    return magic, w, h, maxval, pos


def read_depth_pgm(path) -> np.ndarray:
    """Read a 16-bit millimeter P5 depth panorama into meters (0.0 = no data)."""
    buf = Path(path).read_bytes()
    magic, w, h, maxval, pos = _netpbm_header(buf)
    if magic != "P5":
        raise FormatError(f"expected P5 depth PGM, got {magic}")
    if maxval != 65535:
        raise UnsupportedError(f"depth PGM maxval must be 65535, got {maxval}")
    need = 2 * w * h
    if len(buf) - pos < need:
        raise LengthError("truncated PGM raster")
    mm = np.frombuffer(buf, dtype=">u2", count=w * h, offset=pos).reshape(h, w)
    depth = mm.astype(np.float64) / 1000.0
    depth[mm == 0] = NO_DATA
    return depth


def depth_to_millimeters(depth: np.ndarray) -> np.ndarray:
    depth = np.asarray(depth, dtype=np.float64)
    valid = np.isfinite(depth) & (depth > 0)
    mm = np.zeros(depth.shape, dtype=np.float64)
    mm[valid] = np.floor(depth[valid] * 1000.0 + 0.5)
    if mm.max(initial=0) > 65535:
        raise InputError("depth exceeds 65.535 m, not representable in u16 millimeters")
    return mm.astype(np.uint16)


def write_depth_pgm(depth: np.ndarray, path) -> None:
    mm = depth_to_millimeters(depth)
    h, w = mm.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n65535\n".encode("ascii") + mm.astype(">u2").tobytes())


def read_ppm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    magic, w, h, maxval, pos = _netpbm_header(buf)
    if magic != "P6":
        raise FormatError(f"expected P6 PPM, got {magic}")
    if maxval != 255:
        raise UnsupportedError(f"only 8-bit PPM is supported, maxval {maxval}")
    if len(buf) - pos < 3 * w * h:
        raise LengthError("truncated PPM raster")
    return np.frombuffer(buf, dtype=np.uint8, count=3 * w * h, offset=pos).reshape(h, w, 3).copy()


def write_ppm(rgb: np.ndarray, path) -> None:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise InputError("PPM expects an (H, W, 3) uint8 array")
    h, w, _ = rgb.shape
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes())


# --- PLY --------------------------------------------------------------------

_PLY_FLOAT = {"float", "float32", "double", "float64"}
_PLY_INT = {"uchar", "uint8", "char", "int8", "ushort", "uint16", "short", "int16",
            "uint", "uint32", "int", "int32"}


def read_ply_ascii(path) -> LabeledPointCloud:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing 'ply' signature")
    count, props, i = None, [], 1
    in_vertex = False
    while True:
        if i >= len(lines):
            raise ParseError("missing end_header")
        parts = lines[i].split()
        i += 1
        if not parts or parts[0] in ("comment", "obj_info"):
            continue
        if parts[0] == "format":
            if parts[1:2] != ["ascii"]:
                raise UnsupportedError(f"only ASCII PLY is supported, got {parts[1:]}")
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                count = int(parts[2])
        elif parts[0] == "property" and in_vertex:
            if parts[1] == "list":
                raise UnsupportedError("list properties on vertices are not supported")
            props.append((parts[2], parts[1]))
        elif parts[0] == "end_header":
            break
    if count is None:
        raise ParseError("no vertex element in header")
    names = [p[0] for p in props]
    for axis in "xyz":
        if axis not in names:
            raise ParseError(f"vertex property {axis!r} missing")
    body = [ln for ln in lines[i:] if ln.strip()]
    if len(body) < count:
        raise ParseError(f"header declares {count} vertices, body has {len(body)}")
    body = body[:count]
    if count == 0:
        rows = np.zeros((0, len(props)))
    else:
        try:
            rows = np.array([[float(v) for v in ln.split()] for ln in body])
        except ValueError as exc:
            raise ParseError(str(exc)) from None
        if rows.ndim != 2 or rows.shape[1] != len(props):
            raise ParseError("vertex rows do not match declared properties")
    pts = rows[:, [names.index(a) for a in "xyz"]]
    labels = None
    if "label" in names:
        labels = rows[:, names.index("label")].astype(np.int64)
        if labels.size and (labels.min() < 0 or labels.max() > 255):
            raise ParseError("labels must fit in uchar")
    return LabeledPointCloud(pts, labels)


def write_ply_ascii(cloud: LabeledPointCloud, path) -> None:
    has_label = cloud.labels is not None
    head = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}",
            "property double x", "property double y", "property double z"]
    if has_label:
        head.append("property uchar label")
    head.append("end_header")
    out = ["\n".join(head)]
    # repr of a Python float is the shortest string that round-trips exactly
    rows = cloud.points.tolist()
    if has_label:
        for (x, y, z), lab in zip(rows, cloud.labels.tolist()):
            out.append(f"{x!r} {y!r} {z!r} {lab}")
    else:
        for x, y, z in rows:
            out.append(f"{x!r} {y!r} {z!r}")
    Path(path).write_text("\n".join(out) + "\n")


def write_points_pbt(cloud: LabeledPointCloud, path) -> None:
    write_pbt(cloud.points.astype(np.float32), path)


def read_points(path) -> LabeledPointCloud:
    """Points from ASCII PLY, or from an ``(N, 3)`` f32 PBT."""
    path = Path(path)
    if path.suffix.lower() == ".pbt":
        arr = read_pbt(path)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise FormatError(f"point PBT must be (N, 3), got {arr.shape}")
        return LabeledPointCloud(arr.astype(np.float64))
    return read_ply_ascii(path)


# --- calibration --------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationExtrinsic:
    """Rigid LiDAR-to-camera transform; points map as ``p_cam = R @ p_lidar + t``."""

    T_cam_lidar: np.ndarray
    units: str = "m"

    def __post_init__(self):
        T = np.array(self.T_cam_lidar, dtype=np.float64).reshape(4, 4)
        validate_extrinsic(T)
        T.setflags(write=False)
        object.__setattr__(self, "T_cam_lidar", T)

    @property
    def rotation(self) -> np.ndarray:
        return self.T_cam_lidar[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.T_cam_lidar[:3, 3]

    def inverse(self) -> "CalibrationExtrinsic":
        R, t = self.rotation, self.translation
        T = np.eye(4)
        T[:3, :3] = R.T
        T[:3, 3] = -R.T @ t
        return CalibrationExtrinsic(T, self.units)

    @classmethod
    def identity(cls) -> "CalibrationExtrinsic":
        return cls(np.eye(4))

    @classmethod
    def from_rt(cls, R, t) -> "CalibrationExtrinsic":
        T = np.eye(4)
        T[:3, :3] = R
        T[:3, 3] = t
        return cls(T)


def validate_extrinsic(T: np.ndarray, tol: float = 1e-6) -> None:
    if T.shape != (4, 4) or not np.all(np.isfinite(T)):
        raise CalibrationError("extrinsic must be a finite 4x4 matrix")
    if not np.array_equal(T[3], [0.0, 0.0, 0.0, 1.0]):
        raise CalibrationError(f"bottom row must be exactly (0, 0, 0, 1), got {T[3]}")
    R = T[:3, :3]
    dev = np.linalg.norm(R @ R.T - np.eye(3))
    if dev > tol:
        raise CalibrationError(f"rotation block not orthonormal (|RR^T - I|_F = {dev:.3g})")
    det = np.linalg.det(R)
    if abs(det - 1.0) > tol:
        raise CalibrationError(f"rotation determinant {det:.9f} != +1")


def read_calibration_json(path) -> CalibrationExtrinsic:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"calibration is not valid JSON: {exc}") from None
    if not isinstance(obj, dict) or "T_cam_lidar" not in obj:
        raise FormatError("calibration JSON needs key 'T_cam_lidar'")
    vals = obj["T_cam_lidar"]
    if not isinstance(vals, list) or len(vals) != 16:
        raise FormatError("'T_cam_lidar' must be a list of 16 numbers, row-major")
    try:
        T = np.array([float(v) for v in vals]).reshape(4, 4)
    except (TypeError, ValueError):
        raise FormatError("'T_cam_lidar' entries must be numbers") from None
    return CalibrationExtrinsic(T, str(obj.get("units", "m")))


def write_calibration_json(calib: CalibrationExtrinsic, path) -> None:
    obj = {"T_cam_lidar": [float(v) for v in calib.T_cam_lidar.ravel()], "units": calib.units}
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


# --- BEV maps -------------------------------------------------------------------

def bev_paths(stem) -> dict[str, Path]:
    """The three PBT files that hold one BEV map, keyed by channel."""
    stem = os.fspath(stem)
    return {k: Path(f"{stem}.{k}.pbt") for k in ("labels", "mask", "heights")}


def write_bev(bev: SemanticBevMap, stem) -> dict[str, Path]:
    paths = bev_paths(stem)
    write_pbt(bev.labels.astype(np.uint8), paths["labels"])
    write_pbt(bev.mask.astype(np.uint8), paths["mask"])
    write_pbt(bev.heights.astype(np.float32), paths["heights"])
    return paths


def read_bev(stem) -> SemanticBevMap:
    """Read a BEV map from its stem, or a bare labels PBT (mask = label != 255)."""
    p = Path(stem)
    if p.suffix == ".pbt" and p.exists():
        labels = read_pbt(p)
        if labels.ndim != 2 or labels.dtype != np.uint8:
            raise FormatError("bare BEV labels PBT must be a 2-D u8 grid")
        return SemanticBevMap(labels, labels != 255)
    paths = bev_paths(stem)
    missing = [str(q) for q in paths.values() if not q.exists()]
    if missing:
        raise FormatError(f"missing BEV files: {', '.join(missing)}")
    return SemanticBevMap(read_pbt(paths["labels"]), read_pbt(paths["mask"]).astype(bool),
                          read_pbt(paths["heights"]))


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
