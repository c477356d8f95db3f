import json
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from panobev.errors import CalibrationError, FormatError, InputError, LengthError, ParseError
from panobev.io_formats import (PBT_DTYPES, CalibrationExtrinsic, decode_pbt, encode_pbt,
                                pbt_payload_nbytes, read_bev, read_calibration_json,
                                read_depth_pgm, read_ply_ascii, read_points, read_ppm,
                                write_bev, write_calibration_json, write_depth_pgm,
                                write_ply_ascii, write_points_pbt, write_ppm)
from panobev.projection import transform_points
from panobev.types import LabeledPointCloud, SemanticBevMap


# --- PBT ---------------------------------------------------------------------

def test_pbt_zeros_round_trip():
    a = np.zeros((2, 3), dtype=np.float32)
    b = decode_pbt(encode_pbt(a))
    assert b.dtype == a.dtype and b.shape == a.shape and np.array_equal(a, b)


def test_pbt_payload_size():
    # independent size computation: element count times f32 width
    expected = int(np.prod([3, 512, 1024])) * np.dtype(np.float32).itemsize
    assert expected == 6291456
    assert pbt_payload_nbytes(0, (3, 512, 1024)) == expected
    buf = encode_pbt(np.zeros((3, 512, 1024), dtype=np.float32))
    assert len(buf) - (6 + 4 * 3) == expected


def test_pbt_header_layout():
    buf = encode_pbt(np.arange(6, dtype=np.uint16).reshape(2, 3))
    assert buf[:4] == b"PBT1"
    assert struct.unpack_from("<BB2I", buf, 4) == (2, 2, 2, 3)


def test_pbt_bad_dtype_code():
    buf = bytearray(encode_pbt(np.zeros(4, dtype=np.uint8)))
    buf[4] = 7
    with pytest.raises(FormatError):
        decode_pbt(bytes(buf))


def test_pbt_bad_magic_and_truncation():
    buf = encode_pbt(np.ones((4, 4), dtype=np.float32))
    with pytest.raises(FormatError):
        decode_pbt(b"XXXX" + buf[4:])
    with pytest.raises(LengthError):
        decode_pbt(buf[:-1])
    with pytest.raises(LengthError):
        decode_pbt(buf + b"\0")


def test_pbt_rejects_unsupported_dtype():
    with pytest.raises(FormatError):
        encode_pbt(np.zeros(3, dtype=np.float64))


@given(st.sampled_from(list(PBT_DTYPES.values())).flatmap(
    lambda dt: hnp.arrays(dt, hnp.array_shapes(min_dims=1, max_dims=4, max_side=5))))
def test_pbt_round_trip_bit_exact(a):
    b = decode_pbt(encode_pbt(a))
    assert b.shape == a.shape and b.dtype == a.dtype
    assert b.tobytes() == a.tobytes()


# --- PGM / PPM ---------------------------------------------------------------

def test_depth_pgm_units(tmp_path):
    mm = np.array([[2000, 0], [1, 65535]], dtype=">u2")
    p = tmp_path / "d.pgm"
    p.write_bytes(b"P5\n2 2\n65535\n" + mm.tobytes())
    d = read_depth_pgm(p)
    assert d[0, 0] == 2.0 and d[0, 1] == 0.0
    assert d[1, 0] == 0.001 and d[1, 1] == 65.535


def test_depth_pgm_dims_and_round_trip(tmp_path, rng):
    mm = rng.integers(0, 65536, (512, 1024)).astype(np.uint16)
    d = mm / 1000.0
    p = tmp_path / "d.pgm"
    write_depth_pgm(d, p)
    back = read_depth_pgm(p)
    assert back.shape == (512, 1024)
    assert np.array_equal(back, d)


def test_depth_pgm_header_comment(tmp_path):
    p = tmp_path / "d.pgm"
    p.write_bytes(b"P5\n# sensor 3\n1 1\n65535\n" + np.array([1500], dtype=">u2").tobytes())
    assert read_depth_pgm(p)[0, 0] == 1.5


def test_depth_pgm_errors(tmp_path):
    p = tmp_path / "d.pgm"
    p.write_bytes(b"P5\n4 4\n65535\n" + b"\0" * 10)
    with pytest.raises(LengthError):
        read_depth_pgm(p)
    p.write_bytes(b"P2\n1 1\n65535\n0\n")
    with pytest.raises(FormatError):
        read_depth_pgm(p)
    with pytest.raises(InputError):
        write_depth_pgm(np.array([[70.0]]), p)


def test_ppm_round_trip(tmp_path, rng):
    rgb = rng.integers(0, 256, (7, 9, 3)).astype(np.uint8)
    write_ppm(rgb, tmp_path / "a.ppm")
    assert np.array_equal(read_ppm(tmp_path / "a.ppm"), rgb)


# --- PLY ---------------------------------------------------------------------

def test_ply_single_point(tmp_path):
    p = tmp_path / "one.ply"
    p.write_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"
                 "property float y\nproperty float z\nend_header\n0 0 1\n")
    cloud = read_ply_ascii(p)
    assert cloud.points.tolist() == [[0.0, 0.0, 1.0]]
    assert cloud.labels is None


def test_ply_count_mismatch(tmp_path):
    p = tmp_path / "bad.ply"
    body = "\n".join(["0 0 0"] * 4)
    p.write_text("ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\n"
                 "property float y\nproperty float z\nend_header\n" + body + "\n")
    with pytest.raises(ParseError):
        read_ply_ascii(p)


def test_ply_round_trip_100_points(tmp_path, rng):
    pts = rng.uniform(-50, 50, (100, 3))
    labels = rng.integers(0, 21, 100).astype(np.uint8)
    write_ply_ascii(LabeledPointCloud(pts, labels), tmp_path / "c.ply")
    back = read_ply_ascii(tmp_path / "c.ply")
    assert np.max(np.abs(back.points - pts)) <= 1e-6
    assert np.array_equal(back.labels, labels)


def test_points_pbt(tmp_path, rng):
    pts = rng.uniform(-5, 5, (20, 3)).astype(np.float32)
    write_points_pbt(LabeledPointCloud(pts.astype(np.float64)), tmp_path / "p.pbt")
    assert np.array_equal(read_points(tmp_path / "p.pbt").points, pts.astype(np.float64))


# --- calibration ---------------------------------------------------------------

def _yaw(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def test_calibration_identity(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"T_cam_lidar": np.eye(4).ravel().tolist()}))
    T = read_calibration_json(p)
    assert np.array_equal(T.T_cam_lidar, np.eye(4))


def test_calibration_scaled_rotation_rejected(tmp_path):
    M = np.eye(4)
    M[:3, :3] *= 2
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"T_cam_lidar": M.ravel().tolist()}))
    with pytest.raises(CalibrationError):
        read_calibration_json(p)


def test_calibration_yaw_translation_applied(tmp_path):
    R = _yaw(np.pi / 2)
    assert np.linalg.norm(R @ R.T - np.eye(3)) < 1e-12
    T = CalibrationExtrinsic.from_rt(R, [0.1, 0.0, 0.3])
    write_calibration_json(T, tmp_path / "c.json")
    T2 = read_calibration_json(tmp_path / "c.json")
    out = transform_points(LabeledPointCloud(np.array([[1.0, 0.0, 0.0]])), T2)
    assert np.allclose(out.points, [[0.1, 1.0, 0.3]], atol=1e-12)


def test_calibration_threshold():
    R = np.eye(3)
    R[0, 1] = 5e-7  # inside 1e-6 Frobenius
    CalibrationExtrinsic.from_rt(R, [0, 0, 0])
    R[0, 1] = 5e-6
    with pytest.raises(CalibrationError):
        CalibrationExtrinsic.from_rt(R, [0, 0, 0])


def test_calibration_reflection_and_bottom_row():
    with pytest.raises(CalibrationError):
        CalibrationExtrinsic.from_rt(np.diag([1.0, 1.0, -1.0]), [0, 0, 0])
    M = np.eye(4)
    M[3, 0] = 0.5
    with pytest.raises(CalibrationError):
        CalibrationExtrinsic(M)


def test_calibration_missing_key(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"R": [1, 0, 0]}))
    with pytest.raises(FormatError):
        read_calibration_json(p)


# --- BEV ---------------------------------------------------------------------

def test_bev_triple_round_trip(tmp_path, rng):
    labels = rng.integers(0, 21, (6, 5)).astype(np.uint8)
    mask = rng.random((6, 5)) < 0.7
    labels[~mask] = 255
    heights = np.where(mask, rng.uniform(0, 2, (6, 5)), 0).astype(np.float32)
    bev = SemanticBevMap(labels, mask, heights)
    write_bev(bev, tmp_path / "m")
    assert read_bev(tmp_path / "m").equals(bev)
    with pytest.raises(FormatError):
        read_bev(tmp_path / "absent")
