"""``panobev`` command line: render, project, rasterize, eval, attend, augment,
rotate and demo-pipeline.

Exit codes: 0 ok, 2 input/format error, 3 calibration or invariant failure,
4 acceptance threshold missed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import io_formats as io
from .attention import DEFAULT_N_REF, LinearParams, init_params, pd_attention
from .augment import AugmentSpec, Sample, joint_augment
from .bev import bev_metrics, rasterize_bev
from .config import PipelineConfig, colorize_labels
from .errors import FormatError, InputError, PanoBevError
from .gradcheck import check_pd_attention, kink_margin
from .pipeline import consistency_triangle, lidar_triangle
from .projection import depth_to_points, lidar_to_panorama, mask_valid, transform_points
from .scene import ground_truth_bev, load_scene, render_panorama
from .spherical import cart_to_sph, rotate_panorama, rotation_pr
from .threads import thread_cap
from .types import NUM_CLASSES, BevGridSpec, LabeledPointCloud

EXIT_OK, EXIT_INPUT, EXIT_INVARIANT, EXIT_ACCEPTANCE = 0, 2, 3, 4


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(outdir: Path, artifacts: dict, extra: dict | None = None) -> Path:
    """Manifest with relative names and content hashes only (no timestamps)."""
    def walk(v):
        if isinstance(v, dict):
            return {k: walk(x) for k, x in v.items()}
        p = Path(v)
        return {"file": p.name, "sha256": _sha256(p)}

    doc = {"artifacts": walk(artifacts)}
    if extra:
        doc.update(extra)
    path = outdir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _load_config(path) -> PipelineConfig:
    return PipelineConfig() if path is None else PipelineConfig.load(path)


def _grid_from_args(args) -> BevGridSpec:
    return BevGridSpec(args.cells, args.cells, args.range, args.range,
                       args.z_min if args.z_min is not None else -np.inf,
                       args.z_max if args.z_max is not None else np.inf)


def _add_grid_args(p):
    p.add_argument("--cells", type=int, default=500, help="cells per side")
    p.add_argument("--range", type=float, default=10.0, help="window side in meters")
    p.add_argument("--z-min", type=float, default=None)
    p.add_argument("--z-max", type=float, default=None)


def _read_sample(d: Path) -> Sample:
    d = Path(d)
    return Sample(pano=io.read_ppm(d / "rgb.ppm"),
                  depth=io.read_depth_pgm(d / "depth.pgm") if (d / "depth.pgm").exists() else None,
                  semantic=io.read_pbt(d / "semantic.pbt") if (d / "semantic.pbt").exists() else None,
                  gt_bev=io.read_bev(d / "gt_bev") if (d / "gt_bev.labels.pbt").exists() else None)


def _write_sample(s: Sample, d: Path) -> dict:
    d.mkdir(parents=True, exist_ok=True)
    arts = {"rgb": d / "rgb.ppm"}
    io.write_ppm(s.pano, arts["rgb"])
    if s.depth is not None:
        arts["depth"] = d / "depth.pgm"
        io.write_depth_pgm(s.depth, arts["depth"])
    if s.semantic is not None:
        arts["semantic"] = d / "semantic.pbt"
        io.write_pbt(np.asarray(s.semantic, dtype=np.uint8), arts["semantic"])
    if s.gt_bev is not None:
        arts["gt_bev"] = {k: str(v) for k, v in io.write_bev(s.gt_bev, d / "gt_bev").items()}
    return arts


# --- subcommands -----------------------------------------------------------------

def cmd_render(args) -> int:
    scene = load_scene(args.scene)
    cfg = _load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    h = args.height or cfg.pano_height
    w = args.width or cfg.pano_width
    r = render_panorama(scene, h, w, cfg.palette)
    gt = ground_truth_bev(scene, cfg.grid)
    s = Sample(r.rgb, r.depth, r.semantic, gt)
    arts = _write_sample(s, out)
    _write_manifest(out, arts, {"dims": [h, w], "grid": [cfg.grid.cells_y, cfg.grid.cells_x]})
    print(json.dumps({"outdir": str(out), "artifacts": sorted(arts)}))
    return EXIT_OK


def cmd_project(args) -> int:
    calib = io.read_calibration_json(args.calib) if args.calib else None
    if args.mode == "depth2cloud":
        if not args.depth:
            raise InputError("--depth is required for depth2cloud")
        depth = io.read_depth_pgm(args.depth)
        sem = io.read_pbt(args.semantic) if args.semantic else None
        cloud = depth_to_points(depth, sem)
        if calib is not None:
            # back into the LiDAR frame
            cloud = transform_points(cloud, calib.inverse())
        io.write_ply_ascii(cloud, args.out)
        print(json.dumps({"points": len(cloud), "out": str(args.out)}))
        return EXIT_OK
    if not args.cloud:
        raise InputError("--cloud is required for lidar2pano")
    cloud = io.read_points(args.cloud)
    calib = calib or io.CalibrationExtrinsic.identity()
    proj = lidar_to_panorama(cloud, calib, args.height, args.width)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    arts = {"depth": out / "depth.pgm"}
    io.write_depth_pgm(proj.depth, arts["depth"])
    if proj.labels is not None:
        arts["semantic"] = out / "semantic.pbt"
        io.write_pbt(proj.labels, arts["semantic"])
    _write_manifest(out, arts, {"hits": proj.hits, "skipped": proj.skipped})
    print(json.dumps({"hits": proj.hits, "skipped": proj.skipped}))
    return EXIT_OK


def cmd_rasterize(args) -> int:
    cloud = io.read_points(args.cloud)
    bev = rasterize_bev(cloud, _grid_from_args(args))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    paths = io.write_bev(bev, args.out)
    io.write_ppm(colorize_labels(bev.labels), Path(f"{args.out}.ppm"))
    print(json.dumps({"observed": int(bev.mask.sum()), "files": [p.name for p in paths.values()]}))
    return EXIT_OK


def cmd_eval(args) -> int:
    pred, gt = io.read_bev(args.pred), io.read_bev(args.gt)
    report = bev_metrics(pred, gt, args.classes, include_void=not args.exclude_void)
    text = report.to_json()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def _read_params(d: Path, C: int, n_ref: int) -> LinearParams:
    tmpl = init_params(C, n_ref, 0)
    vals = {}
    for name in tmpl.names():
        p = d / f"{name}.pbt"
        if not p.exists():
            raise FormatError(f"missing parameter file {p}")
        vals[name] = io.read_pbt(p).astype(np.float64)
    params = LinearParams(**vals)
    params.validate()
    return params


def cmd_attend(args) -> int:
    q = io.read_pbt(args.queries).astype(np.float64)
    feat = io.read_pbt(args.features).astype(np.float64)
    cloud = io.read_points(args.points)
    if q.ndim != 2 or feat.ndim != 3 or len(q) != len(cloud):
        raise InputError(f"need Q (N, C), F (C, H, W) and N points; got Q {q.shape}, "
                         f"F {feat.shape}, {len(cloud)} points")
    C = q.shape[1]
    params = (_read_params(Path(args.params), C, args.n_ref) if args.params
              else init_params(C, args.n_ref, args.seed))
    mask = mask_valid(cloud, _grid_from_args(args))
    s = np.zeros((len(cloud), 2))
    if mask.any():
        phi, theta = cart_to_sph(cloud.points[mask])
        s[mask] = np.stack([phi, theta], axis=1)
    delta_max = None if args.delta_max <= 0 else args.delta_max
    res = pd_attention(q, s, mask, feat, params, delta_max)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    arts = {}
    if len(res.rows):
        arts = {"output": out / "output.pbt", "weights": out / "weights.pbt",
                "index": out / "index.pbt", "rows": out / "rows.pbt"}
        io.write_pbt(res.out.astype(np.float32), arts["output"])
        io.write_pbt(res.weights.astype(np.float32), arts["weights"])
        io.write_pbt(res.idx.astype(np.int32), arts["index"])
        io.write_pbt(res.rows.astype(np.int32), arts["rows"])
    extra = {"queries": len(q), "kept": int(len(res.rows))}
    if args.gradcheck and len(res.rows):
        upstream = np.random.default_rng(args.seed).normal(size=res.out.shape)
        report = check_pd_attention(q, s, mask, feat, params, upstream, delta_max)
        # finite differences are meaningless when a sample sits on a bilinear kink,
        # which is always the case for zero-init offset heads
        report["kink_margin"] = kink_margin(q, s, mask, feat, params, delta_max)
        arts["gradcheck"] = out / "gradcheck.json"
        arts["gradcheck"].write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        extra["max_rel_error"] = report["max_rel_error"]
    _write_manifest(out, arts, extra)
    print(json.dumps(extra))
    return EXIT_OK


def cmd_augment(args) -> int:
    spec = AugmentSpec.from_dict(io.load_json(args.spec))
    if args.seed is not None:
        spec.seed = args.seed
    sample = _read_sample(Path(args.sample))
    partner = _read_sample(Path(args.partner)) if args.partner else None
    out_sample, rec = joint_augment(sample, spec, args.sample_id, partner)
    out = Path(args.out)
    arts = _write_sample(out_sample, out)
    meta = out / "metadata.json"
    meta.write_text(json.dumps(rec.to_dict(), indent=2, sort_keys=True) + "\n")
    arts["metadata"] = meta
    _write_manifest(out, arts)
    print(json.dumps(rec.to_dict()))
    return EXIT_OK


def cmd_rotate(args) -> int:
    src = Path(args.input)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    rot = rotation_pr(np.radians(args.pitch), np.radians(args.roll))
    suffix = src.suffix.lower()
    if suffix == ".ppm":
        io.write_ppm(rotate_panorama(io.read_ppm(src), rot, args.interp), args.out)
    elif suffix == ".pgm":
        depth = io.read_depth_pgm(src)
        io.write_depth_pgm(rotate_panorama(depth, rot, args.interp, depth=True), args.out)
    elif suffix == ".pbt":
        arr = io.read_pbt(src)
        if arr.dtype == np.uint8 and args.interp != "nearest":
            raise InputError("label panoramas must use nearest interpolation")
        io.write_pbt(rotate_panorama(arr, rot, args.interp), args.out)
    else:
        raise FormatError(f"unsupported panorama file {src.name}")
    print(json.dumps({"out": str(args.out), "pitch_deg": args.pitch, "roll_deg": args.roll}))
    return EXIT_OK


def cmd_demo(args) -> int:
    if args.scene:
        scene = load_scene(args.scene)
    else:
        scene = load_scene(resources.files("panobev") / "data" / "demo_scene.json")
    cfg = _load_config(args.config)
    dense = consistency_triangle(scene, cfg)
    sparse = lidar_triangle(scene, cfg)
    report = bev_metrics(dense.pred, dense.gt, scene.classes)
    ok = dense.agreement >= cfg.min_agreement and sparse.agreement >= cfg.min_lidar_agreement
    summary = {
        "agreement": dense.agreement, "cells": dense.cells,
        "lidar_agreement": sparse.agreement, "lidar_cells": sparse.cells,
        "thresholds": {"dense": cfg.min_agreement, "lidar": cfg.min_lidar_agreement},
        "metrics": {k: v for k, v in report.to_dict().items() if k != "per_class"},
        "pass": bool(ok),
    }
    if not ok:
        both = dense.pred.mask & dense.gt.mask
        bad = both & (dense.pred.labels != dense.gt.labels)
        pairs, counts = np.unique(np.stack([dense.gt.labels[bad], dense.pred.labels[bad]]),
                                  axis=1, return_counts=True)
        summary["diff"] = [{"gt": int(g), "pred": int(p), "cells": int(c)}
                           for (g, p), c in zip(pairs.T, counts)]
    text = json.dumps(summary, indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "demo_report.json").write_text(text + "\n")
        io.write_bev(dense.pred, out / "pred_bev")
        io.write_bev(dense.gt, out / "gt_bev")
        io.write_ppm(colorize_labels(dense.pred.labels, cfg.palette), out / "pred_bev.ppm")
        io.write_ppm(colorize_labels(dense.gt.labels, cfg.palette), out / "gt_bev.ppm")
    print(text)
    print(f"end-to-end agreement {dense.agreement:.4f} (dense), {sparse.agreement:.4f} (lidar): "
          f"{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_ACCEPTANCE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="panobev", description="Panorama to semantic BEV geometry toolkit.",
                                 epilog="exit codes: 0 ok, 2 input/format, 3 calibration, 4 acceptance")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="ray-cast a scene into panoramas and GT BEV")
    p.add_argument("scene")
    p.add_argument("--height", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("project", help="depth->cloud or LiDAR->panorama")
    p.add_argument("--mode", choices=["depth2cloud", "lidar2pano"], required=True)
    p.add_argument("--depth")
    p.add_argument("--semantic")
    p.add_argument("--cloud")
    p.add_argument("--calib")
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--width", type=int, default=1024)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("rasterize", help="labeled cloud -> BEV map")
    p.add_argument("--cloud", required=True)
    _add_grid_args(p)
    p.add_argument("--out", required=True, help="output stem")
    p.set_defaults(func=cmd_rasterize)

    p = sub.add_parser("eval", help="BEV metrics as JSON")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--classes", type=int, default=NUM_CLASSES)
    p.add_argument("--exclude-void", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attend", help="run PD attention on stored tensors")
    p.add_argument("--queries", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--params", default=None, help="directory of <name>.pbt parameter files")
    p.add_argument("--n-ref", type=int, default=DEFAULT_N_REF)
    p.add_argument("--delta-max", type=float, default=np.pi / 8, help="radians; <= 0 disables")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gradcheck", action="store_true")
    _add_grid_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attend)

    p = sub.add_parser("augment", help="joint panorama/BEV augmentation")
    p.add_argument("--sample", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--partner", default=None)
    p.add_argument("--sample-id", type=int, default=0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("rotate", help="pitch/roll perturbation of a panorama")
    p.add_argument("--input", required=True)
    p.add_argument("--pitch", type=float, default=0.0, help="degrees")
    p.add_argument("--roll", type=float, default=0.0, help="degrees")
    p.add_argument("--interp", choices=["nearest", "bilinear"], default="nearest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rotate)

    p = sub.add_parser("demo-pipeline", help="render -> back-project -> rasterize -> eval")
    p.add_argument("scene", nargs="?", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_demo)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        thread_cap()
        return args.func(args)
    except PanoBevError as exc:
        print(f"panobev {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"panobev {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
