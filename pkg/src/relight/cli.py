"""Command-line interface.

Subcommands: render, fit, enhance-video, albedo, ablate, bench, make-scene,
serve.  Exit codes: 0 success, 2 usage error, 3 data error.  Values in a
--config JSON file override built-in defaults; explicit flags override the
file.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import albedo as albedo_mod
from . import io as img_io
from .config import SessionConfig, build_config, load_config
from .errors import DataError, RelightError
from .fit import auto_target, fit
from .geometry import normals_from_depth
from .harness import Scene, bench_render, make_planted_scene, run_ablation, standard_loss_sweep
from .lights import default_stats
from .presets import load_lights, load_stats, save_lights
from .render import compose, light_map
from .report import write_ablation_csv, write_ablation_figure, write_bench_csv, write_bench_figure
from .temporal import KeyframeSchedule, enhance_sequence


def _config_from_args(args) -> SessionConfig:
    file_overrides = load_config(args.config) if getattr(args, "config", None) else None
    flag_overrides = {
        name: getattr(args, name, None)
        for name in (
            "k", "sigma1", "sigma2", "sigma_c", "sigma_l", "lambda_r", "pixel_norm",
            "coarse_iters", "refine_iters", "step_size", "working_short_side", "coarse_factor",
            "beta", "keyframe_interval", "tau", "blur_frac", "z_gain", "threads", "seed",
        )
    }
    if getattr(args, "albedo", False):
        flag_overrides["use_albedo"] = True
    return build_config(file_overrides, flag_overrides)


def _load_depth_or_fallback(path: str | None, shape: tuple[int, int], renormalize: bool = False) -> np.ndarray:
    if path is None:
        print("warning: no depth map given, using constant 0.5", file=sys.stderr)
        return np.full(shape, 0.5)
    depth = img_io.load_depth(path, renormalize=renormalize)
    if depth.shape != shape:
        raise DataError(f"depth {depth.shape} does not match image {shape}")
    return depth


def _render_base(image: np.ndarray, cfg: SessionConfig) -> np.ndarray:
    if not cfg.use_albedo:
        return image
    mask = albedo_mod.estimate_illumination_mask(image, cfg.tau, cfg.blur_frac)
    return albedo_mod.apply_albedo(image, mask)


def cmd_render(args) -> int:
    cfg = _config_from_args(args)
    image = img_io.load_image(args.image, linearize=args.linearize)
    depth = _load_depth_or_fallback(args.depth, image.shape[:2], args.renormalize_depth)
    loaded = load_lights(args.lights)
    for note in loaded.notes:
        print(f"note: {note}", file=sys.stderr)
    base = _render_base(image, cfg)
    normals = normals_from_depth(depth, cfg.z_gain)
    lmap = light_map(loaded.params, depth, normals, loaded.shading, threads=cfg.threads)
    img_io.save_image(args.out, compose(base, lmap), delinearize=args.linearize)
    return 0


def cmd_fit(args) -> int:
    cfg = _config_from_args(args)
    image = img_io.load_image(args.image, linearize=args.linearize)
    depth = _load_depth_or_fallback(args.depth, image.shape[:2], args.renormalize_depth)
    if args.target is not None:
        target = img_io.load_image(args.target, linearize=args.linearize)
    else:
        target = auto_target(image, args.auto_target_luma)
    base = _render_base(image, cfg)
    stats = load_stats(args.stats) if args.stats else default_stats(cfg.k)
    result = fit(base, target, depth, cfg.fit_config(), cfg.loss_config(),
                 stats=stats, shading=cfg.shading_config(), z_gain=cfg.z_gain)
    if args.out_lights:
        save_lights(args.out_lights, result.params, cfg.shading_config())
    if args.out_image:
        normals = normals_from_depth(depth, cfg.z_gain)
        lmap = light_map(result.params, depth, normals, cfg.shading_config(), threads=cfg.threads)
        img_io.save_image(args.out_image, compose(base, lmap), delinearize=args.linearize)
    print(f"final loss {result.loss_trace[-1]:.6g} "
          f"(coarse {result.coarse_seconds:.2f}s, refine {result.refine_seconds:.2f}s)")
    return 0


def _list_frames(directory: str) -> list[str]:
    if not os.path.isdir(directory):
        raise DataError(f"not a directory: {directory}")
    names = sorted(
        name for name in os.listdir(directory)
        if os.path.splitext(name)[1].lower() in (".png", ".ppm", ".pgm")
    )
    if not names:
        raise DataError(f"no frames found in {directory}")
    return names


def cmd_enhance_video(args) -> int:
    cfg = _config_from_args(args)
    names = _list_frames(args.frames)
    frames = [img_io.load_image(os.path.join(args.frames, name)) for name in names]
    if args.depth_dir:
        depths = []
        for name in names:
            path = os.path.join(args.depth_dir, name)
            if not os.path.exists(path):
                raise DataError(f"missing depth frame: {path}")
            depths.append(img_io.load_depth(path))
    else:
        print("warning: no depth directory given, using constant 0.5", file=sys.stderr)
        depths = [np.full(frame.shape[:2], 0.5) for frame in frames]
    luma = args.auto_target_luma

    def provider(frame, depth, index):
        return auto_target(frame, luma)

    outputs, timings = enhance_sequence(
        frames, depths, KeyframeSchedule(cfg.keyframe_interval), cfg.beta,
        cfg.fit_config(), cfg.loss_config(), provider,
        shading=cfg.shading_config(), z_gain=cfg.z_gain,
    )
    os.makedirs(args.out, exist_ok=True)
    for name, frame in zip(names, outputs):
        img_io.save_image(os.path.join(args.out, name), frame)
    timings_path = args.timings_out or os.path.join(args.out, "timings.csv")
    with open(timings_path, "w", encoding="utf-8") as fh:
        fh.write("frame,fit_ms,render_ms,total_ms\n")
        for record in timings:
            fh.write(record.line() + "\n")
    fits = sum(1 for record in timings if record.fit_ms > 0)
    print(f"enhanced {len(outputs)} frames with {fits} fits (interval {cfg.keyframe_interval})")
    return 0


def cmd_albedo(args) -> int:
    cfg = _config_from_args(args)
    image = img_io.load_image(args.image)
    mask = albedo_mod.estimate_illumination_mask(image, cfg.tau, cfg.blur_frac)
    img_io.save_image(args.out, albedo_mod.apply_albedo(image, mask))
    if args.mask_out:
        img_io.save_gray16(args.mask_out, mask[:, :, 0])
    return 0


def _load_scene_dir(directory: str) -> Scene:
    input_path = os.path.join(directory, "input.png")
    target_path = os.path.join(directory, "target.png")
    depth_path = os.path.join(directory, "depth.png")
    if not os.path.exists(input_path) or not os.path.exists(target_path):
        raise DataError(f"scene {directory} needs input.png and target.png")
    base = img_io.load_image(input_path)
    target = img_io.load_image(target_path)
    if os.path.exists(depth_path):
        depth = img_io.load_depth(depth_path)
    else:
        depth = np.full(base.shape[:2], 0.5)
    return Scene(name=os.path.basename(directory.rstrip("/")), base=base, depth=depth, target=target)


def cmd_ablate(args) -> int:
    cfg = _config_from_args(args)
    scene_dirs = sorted(
        os.path.join(args.scenes, name)
        for name in os.listdir(args.scenes)
        if os.path.isdir(os.path.join(args.scenes, name))
    ) if os.path.isdir(args.scenes) else []
    if not scene_dirs:
        raise DataError(f"no scene directories under {args.scenes}")
    scenes = [_load_scene_dir(d) for d in scene_dirs]
    k_values = [int(v) for v in args.k_list.split(",")] if args.k_list else []
    loss_configs = standard_loss_sweep() if args.loss_sweep else []
    if not k_values and not loss_configs:
        raise DataError("nothing to ablate: give --k-list and/or --loss-sweep")
    rows = run_ablation(scenes, k_values, loss_configs, cfg.fit_config(),
                        shading=cfg.shading_config(), z_gain=cfg.z_gain)
    write_ablation_csv(rows, args.out_report)
    figure_path = os.path.splitext(args.out_report)[0] + ".png"
    write_ablation_figure(rows, figure_path)
    for row in rows:
        print(f"{row.label}: loss {row.mean_final_loss:.6g}, {row.mean_fit_seconds:.2f}s/fit")
    return 0


def cmd_bench(args) -> int:
    cfg = _config_from_args(args)
    result = bench_render(args.width, args.height, cfg.k, args.iters, cfg.threads,
                          fit_cfg=cfg.fit_config(), seed=cfg.seed)
    print(f"render {args.width}x{args.height} k={cfg.k} threads={cfg.threads}: "
          f"min {result.min_ms:.2f} median {result.median_ms:.2f} mean {result.mean_ms:.2f} ms")
    print(f"resize to working size: {result.resize_ms:.2f} ms (reported separately)")
    print(f"fit: {result.fit_ms:.1f} ms")
    for n in sorted(result.amortized_ms):
        print(f"amortized n={n}: {result.amortized_ms[n]:.2f} ms/frame")
    if args.out_report:
        write_bench_csv(result, args.out_report)
        write_bench_figure(result, os.path.splitext(args.out_report)[0] + ".png")
    return 0


def cmd_make_scene(args) -> int:
    cfg = _config_from_args(args)
    scene = make_planted_scene(cfg.seed, cfg.k, args.height, args.width, noise=args.noise,
                               shading=cfg.shading_config(), z_gain=cfg.z_gain)
    os.makedirs(args.out, exist_ok=True)
    img_io.save_image(os.path.join(args.out, "input.png"), scene.base)
    img_io.save_image(os.path.join(args.out, "target.png"), scene.target)
    img_io.save_gray16(os.path.join(args.out, "depth.png"), scene.depth)
    if scene.planted is not None:
        save_lights(os.path.join(args.out, "planted.json"), scene.planted, cfg.shading_config())
    print(f"wrote planted scene (k={cfg.k}, seed={cfg.seed}) to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import StudioSession, create_app

    cfg = _config_from_args(args)
    image = img_io.load_image(args.image)
    depth = _load_depth_or_fallback(args.depth, image.shape[:2], args.renormalize_depth)
    session = StudioSession(image, depth, k=cfg.k, shading=cfg.shading_config(),
                            preview_short_side=args.preview_short_side, threads=cfg.threads,
                            use_albedo=cfg.use_albedo, z_gain=cfg.z_gain)
    static_dir = args.static_dir if args.static_dir and os.path.isdir(args.static_dir) else None
    app = create_app(session, static_dir=static_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--z-gain", dest="z_gain", type=float, default=None)


def _add_shading(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sigma1", type=float, default=None)
    parser.add_argument("--sigma2", type=float, default=None)


def _add_fit_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=None)
    parser.add_argument("--coarse-iters", dest="coarse_iters", type=int, default=None)
    parser.add_argument("--refine-iters", dest="refine_iters", type=int, default=None)
    parser.add_argument("--step-size", dest="step_size", type=float, default=None)
    parser.add_argument("--working-short-side", dest="working_short_side", type=int, default=None)
    parser.add_argument("--coarse-factor", dest="coarse_factor", type=int, default=None)
    parser.add_argument("--sigma-c", dest="sigma_c", type=float, default=None)
    parser.add_argument("--sigma-l", dest="sigma_l", type=float, default=None)
    parser.add_argument("--lambda-r", dest="lambda_r", type=float, default=None)
    parser.add_argument("--pixel-norm", dest="pixel_norm", choices=("l1", "l2"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relight",
                                     description="Depth-aware virtual-light relighting")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="shade an image with a lights preset")
    p.add_argument("--image", required=True)
    p.add_argument("--depth")
    p.add_argument("--lights", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--albedo", action="store_true", help="use the estimated albedo as render base")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--blur-frac", dest="blur_frac", type=float, default=None)
    p.add_argument("--linearize", action="store_true", help="apply sRGB linearization on load/save")
    p.add_argument("--renormalize-depth", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("fit", help="estimate lighting parameters for a target")
    p.add_argument("--image", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--target")
    group.add_argument("--auto-target-luma", dest="auto_target_luma", type=float)
    p.add_argument("--depth")
    p.add_argument("--out-lights", dest="out_lights")
    p.add_argument("--out-image", dest="out_image")
    p.add_argument("--stats", help="JSON file with mu/sigma normalization statistics")
    p.add_argument("--albedo", action="store_true")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--blur-frac", dest="blur_frac", type=float, default=None)
    p.add_argument("--linearize", action="store_true")
    p.add_argument("--renormalize-depth", action="store_true")
    _add_fit_flags(p)
    _add_shading(p)
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("enhance-video", help="enhance a directory of numbered frames")
    p.add_argument("--frames", required=True)
    p.add_argument("--depth-dir", dest="depth_dir")
    p.add_argument("--keyframe-interval", dest="keyframe_interval", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--auto-target-luma", dest="auto_target_luma", type=float, default=0.5)
    p.add_argument("--timings-out", dest="timings_out")
    _add_fit_flags(p)
    _add_shading(p)
    _add_common(p)
    p.set_defaults(func=cmd_enhance_video)

    p = sub.add_parser("albedo", help="estimate a glare mask and write the albedo")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--blur-frac", dest="blur_frac", type=float, default=None)
    p.add_argument("--mask-out", dest="mask_out", help="write the mask as a 16-bit image")
    _add_common(p)
    p.set_defaults(func=cmd_albedo)

    p = sub.add_parser("ablate", help="sweep light counts / loss configs over a scene set")
    p.add_argument("--scenes", required=True, help="directory of scene subdirectories")
    p.add_argument("--k-list", dest="k_list")
    p.add_argument("--loss-sweep", dest="loss_sweep", action="store_true")
    p.add_argument("--out-report", dest="out_report", required=True)
    _add_fit_flags(p)
    _add_shading(p)
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="render/fit timing at a given resolution")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--out-report", dest="out_report")
    _add_fit_flags(p)
    _add_shading(p)
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("make-scene", help="write a planted-light scene directory")
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--k", type=int, default=None)
    _add_shading(p)
    _add_common(p)
    p.set_defaults(func=cmd_make_scene)

    p = sub.add_parser("serve", help="start the live studio service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--image", required=True)
    p.add_argument("--depth")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--preview-short-side", dest="preview_short_side", type=int, default=512)
    p.add_argument("--albedo", action="store_true")
    p.add_argument("--static-dir", dest="static_dir", default="frontend",
                   help="directory with the browser editor (served at /)")
    p.add_argument("--renormalize-depth", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except RelightError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
