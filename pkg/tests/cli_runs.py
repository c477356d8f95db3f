"""Drive every CLI subcommand once inside a scratch directory."""

import contextlib
import io
import json
from pathlib import Path

import numpy as np

from panobev.attention import random_params
from panobev.cli import main
from panobev.io_formats import CalibrationExtrinsic, write_calibration_json, write_pbt
from panobev.scene import SceneSpec, Box, save_scene

SUBCOMMANDS = ("render", "project", "rasterize", "eval", "attend", "augment", "rotate",
               "demo-pipeline")


def run(argv):
    """Run the CLI in-process; returns (exit code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()


def small_scene():
    return SceneSpec((0, 0, 0), (6, 5, 2.8), (2.9, 2.4, 1.4),
                     (Box((4.0, 1.0, 0.0), (4.8, 2.0, 0.9), 5), Box((1.0, 3.2, 0.0), (2.2, 4.0, 0.5), 10)))


def exercise_all(root: Path) -> dict[str, Path]:
    """Run each subcommand with fixed flags; returns the artifact location per subcommand."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    scene_path = root / "scene.json"
    save_scene(small_scene(), scene_path)
    w = root / "work"
    w.mkdir(exist_ok=True)
    outputs = {}

    def ok(argv):
        code, stdout, stderr = run(argv)
        if code != 0:
            raise AssertionError(f"{argv[0]} exited {code}: {stderr}")
        return stdout

    ok(["render", scene_path, "--height", 64, "--width", 128, "--out", w / "render"])
    outputs["render"] = w / "render"

    calib = CalibrationExtrinsic.from_rt(np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 1]]), [0.05, 0, 0.1])
    write_calibration_json(calib, root / "calib.json")
    ok(["project", "--mode", "depth2cloud", "--depth", w / "render" / "depth.pgm",
        "--semantic", w / "render" / "semantic.pbt", "--calib", root / "calib.json",
        "--out", w / "cloud.ply"])
    ok(["project", "--mode", "lidar2pano", "--cloud", w / "cloud.ply", "--calib", root / "calib.json",
        "--height", 64, "--width", 128, "--out", w / "lidar2pano"])
    outputs["project"] = w / "lidar2pano"
    outputs["project-cloud"] = w / "cloud.ply"

    ok(["project", "--mode", "depth2cloud", "--depth", w / "render" / "depth.pgm",
        "--semantic", w / "render" / "semantic.pbt", "--out", w / "cam_cloud.ply"])
    ok(["rasterize", "--cloud", w / "cam_cloud.ply", "--cells", 100, "--range", 10.0,
        "--out", w / "raster" / "bev"])
    outputs["rasterize"] = w / "raster"

    ok(["eval", "--pred", w / "raster" / "bev", "--gt", w / "raster" / "bev",
        "--out", w / "eval" / "metrics.json"])
    outputs["eval"] = w / "eval"

    rng = np.random.default_rng(0)
    att = root / "attend_in"
    att.mkdir(exist_ok=True)
    write_pbt(rng.normal(size=(6, 8)).astype(np.float32), att / "q.pbt")
    write_pbt(rng.normal(size=(8, 8, 16)).astype(np.float32), att / "f.pbt")
    pts = rng.uniform(-3, 3, (6, 3))
    pts[0] = [8.0, 0, 0]  # outside the window: masked out
    write_pbt(pts.astype(np.float32), att / "p.pbt")
    params = random_params(8, 4, seed=21, scale=0.4)
    (att / "params").mkdir(exist_ok=True)
    for name, value in params.as_dict().items():
        write_pbt(value.astype(np.float32), att / "params" / f"{name}.pbt")
    ok(["attend", "--queries", att / "q.pbt", "--points", att / "p.pbt", "--features", att / "f.pbt",
        "--params", att / "params", "--seed", 3, "--gradcheck", "--out", w / "attend"])
    outputs["attend"] = w / "attend"

    spec = root / "aug_spec.json"
    spec.write_text(json.dumps({"flip_p": 0.5, "mix_lambda": 0.3, "bev_rotation": 0.3}))
    ok(["augment", "--sample", w / "render", "--partner", w / "render", "--spec", spec,
        "--sample-id", 2, "--seed", 5, "--out", w / "augment"])
    outputs["augment"] = w / "augment"

    ok(["rotate", "--input", w / "render" / "rgb.ppm", "--pitch", 5, "--roll", -3,
        "--interp", "bilinear", "--out", w / "rotate" / "rgb.ppm"])
    ok(["rotate", "--input", w / "render" / "depth.pgm", "--pitch", 5, "--roll", -3,
        "--out", w / "rotate" / "depth.pgm"])
    ok(["rotate", "--input", w / "render" / "semantic.pbt", "--pitch", 5, "--roll", -3,
        "--out", w / "rotate" / "semantic.pbt"])
    outputs["rotate"] = w / "rotate"

    cfg = root / "demo_cfg.json"
    cfg.write_text(json.dumps({"pano_height": 256, "pano_width": 512}))
    ok(["demo-pipeline", "--config", cfg, "--out", w / "demo"])
    outputs["demo-pipeline"] = w / "demo"
    return outputs


def tree_bytes(path: Path) -> dict[str, bytes]:
    path = Path(path)
    if path.is_file():
        return {path.name: path.read_bytes()}
    return {str(p.relative_to(path)): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}
