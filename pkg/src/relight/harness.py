"""Ablation and benchmark harnesses, plus synthetic planted-light scenes.

Planted scenes render a target from known lighting parameters over a smooth
random base, giving a self-consistency oracle: a fit with enough lights can
drive the loss toward the noise floor, an under-parameterized fit cannot.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import gaussian_filter

from .fit import FitConfig, LossConfig, auto_target, fit
from .geometry import normals_from_depth, resize_area
from .lights import LightingParams, VirtualLight, project_valid
from .render import ShadingConfig, compose, light_map


@dataclass(frozen=True)
class Scene:
    name: str
    base: np.ndarray
    depth: np.ndarray
    target: np.ndarray
    planted: LightingParams | None = None


def _smooth_field(rng: np.random.Generator, height: int, width: int, channels: int | None = None) -> np.ndarray:
    shape = (height, width) if channels is None else (height, width, channels)
    noise = rng.uniform(0.0, 1.0, shape)
    sigma = (height / 12.0, width / 12.0) if channels is None else (height / 12.0, width / 12.0, 0.0)
    field = gaussian_filter(noise, sigma=sigma, mode="nearest")
    lo, hi = field.min(), field.max()
    if hi == lo:
        return np.full(shape, 0.5)
    return (field - lo) / (hi - lo)


def planted_lights(rng: np.random.Generator, k: int) -> LightingParams:
    """k localized colorful lights on a jittered grid, tight attenuation."""
    side = math.ceil(math.sqrt(k))
    lights = []
    for i in range(k):
        gx = (i % side + 0.5) / side
        gy = (i // side + 0.5) / side
        position = np.array([
            np.clip(gx + rng.uniform(-0.08, 0.08), 0.05, 0.95),
            np.clip(gy + rng.uniform(-0.08, 0.08), 0.05, 0.95),
            rng.uniform(0.1, 0.3),
        ])
        color = rng.uniform(0.5, 2.5, 3)
        tilt = rng.uniform(-0.4, 0.4, 2)
        direction = np.array([tilt[0], tilt[1], 1.0])
        direction /= np.linalg.norm(direction)
        lights.append(VirtualLight(color=color, direction=direction, position=position,
                                   attenuation=float(rng.uniform(8.0, 20.0))))
    ambient = rng.uniform(0.6, 1.2, 3)
    return LightingParams(tuple(lights), ambient)


def make_planted_scene(
    seed: int,
    k_plant: int,
    height: int = 64,
    width: int = 64,
    noise: float = 0.0,
    shading: ShadingConfig = ShadingConfig(),
    z_gain: float = 1.0,
    name: str | None = None,
) -> Scene:
    """Target rendered from known params over a smooth random base image."""
    rng = np.random.default_rng(seed)
    base = 0.1 + 0.6 * _smooth_field(rng, height, width, 3)
    # keep some clearance between the surface and the planted lights so the
    # target stays a moderate multiplier field rather than a spike
    depth = 0.55 + 0.35 * _smooth_field(rng, height, width)
    params = planted_lights(rng, k_plant)
    normals = normals_from_depth(depth, z_gain)
    target = compose(base, light_map(params, depth, normals, shading))
    if noise > 0.0:
        target = target + noise * rng.standard_normal(target.shape)
    return Scene(name=name or f"planted-k{k_plant}-s{seed}", base=base, depth=depth,
                 target=target, planted=params)


def random_scene(seed: int, k: int, height: int, width: int) -> tuple[np.ndarray, np.ndarray, LightingParams]:
    """Seeded random base/depth/params for renderer checks and benches."""
    rng = np.random.default_rng(seed)
    base = rng.uniform(0.0, 1.0, (height, width, 3))
    depth = rng.uniform(0.0, 1.0, (height, width))
    lights = tuple(
        VirtualLight(
            color=rng.uniform(0.0, 1.0, 3),
            direction=_random_unit(rng),
            position=rng.uniform(0.0, 1.0, 3),
            attenuation=float(rng.uniform(0.5, 5.0)),
        )
        for _ in range(k)
    )
    params = LightingParams(lights, ambient=rng.uniform(0.0, 1.0, 3))
    return base, depth, params


def _random_unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    n = np.linalg.norm(v)
    while n < 1e-9:
        v = rng.standard_normal(3)
        n = np.linalg.norm(v)
    return v / n


@dataclass(frozen=True)
class AblationRow:
    label: str
    mean_final_loss: float
    mean_fit_seconds: float


def run_ablation(
    scenes: list[Scene],
    k_values: list[int] | None = None,
    loss_configs: list[tuple[str, LossConfig]] | None = None,
    fit_cfg: FitConfig = FitConfig(),
    shading: ShadingConfig = ShadingConfig(),
    z_gain: float = 1.0,
) -> list[AblationRow]:
    """Sweep light counts and/or loss configurations over a scene set.

    One row per configuration: mean final total loss and mean fit wall time.
    """
    if not scenes:
        raise ValueError("ablation needs at least one scene")
    rows: list[AblationRow] = []
    for k in k_values or []:
        losses, seconds = _fit_scene_set(scenes, replace(fit_cfg, k=k), LossConfig(), shading, z_gain)
        rows.append(AblationRow(f"k={k}", losses, seconds))
    for label, loss_cfg in loss_configs or []:
        losses, seconds = _fit_scene_set(scenes, fit_cfg, loss_cfg, shading, z_gain)
        rows.append(AblationRow(label, losses, seconds))
    return rows


def standard_loss_sweep() -> list[tuple[str, LossConfig]]:
    """pixel only, pixel+roi, and the full objective."""
    return [
        ("pixel", LossConfig(lambda_r=0.0, use_roi=False)),
        ("pixel+roi", LossConfig(lambda_r=0.0)),
        ("full", LossConfig()),
    ]


def _fit_scene_set(scenes, fit_cfg, loss_cfg, shading, z_gain):
    final_losses = []
    seconds = []
    for scene in scenes:
        start = time.perf_counter()
        result = fit(scene.base, scene.target, scene.depth, fit_cfg, loss_cfg,
                     shading=shading, z_gain=z_gain)
        seconds.append(time.perf_counter() - start)
        final_losses.append(result.loss_trace[-1])
    return float(np.mean(final_losses)), float(np.mean(seconds))


@dataclass(frozen=True)
class BenchResult:
    width: int
    height: int
    k: int
    threads: int
    render_ms: tuple[float, ...]
    resize_ms: float
    fit_ms: float
    amortized_ms: dict[int, float]

    @property
    def min_ms(self) -> float:
        return min(self.render_ms)

    @property
    def median_ms(self) -> float:
        return float(np.median(self.render_ms))

    @property
    def mean_ms(self) -> float:
        return float(np.mean(self.render_ms))


def bench_render(
    width: int,
    height: int,
    k: int = 9,
    iters: int = 10,
    threads: int = 1,
    keyframe_intervals: tuple[int, ...] = (1, 3, 10),
    fit_cfg: FitConfig | None = None,
    seed: int = 0,
) -> BenchResult:
    """Time light_map+compose at the given size and the amortized per-frame
    cost (t_fit + (N-1) * t_render) / N for each keyframe interval.

    The working-resolution resize is timed separately from the render.
    """
    if width < 1 or height < 1 or iters < 1:
        raise ValueError("width, height and iters must be positive")
    base, depth, params = random_scene(seed, k, height, width)
    params = project_valid(params).params
    normals = normals_from_depth(depth)
    shading = ShadingConfig()

    light_map(params, depth, normals, shading, threads=threads)  # warmup
    samples = []
    for _ in range(iters):
        start = time.perf_counter()
        lmap = light_map(params, depth, normals, shading, threads=threads)
        compose(base, lmap)
        samples.append((time.perf_counter() - start) * 1000.0)

    cfg = fit_cfg or FitConfig(k=k, threads=threads)
    start = time.perf_counter()
    short = min(width, height)
    scale = min(1.0, cfg.working_short_side / short)
    resize_area(base, max(1, round(height * scale)), max(1, round(width * scale)))
    resize_ms = (time.perf_counter() - start) * 1000.0

    target = auto_target(np.clip(base, 1e-3, 1.0), 0.5)
    start = time.perf_counter()
    fit(base, target, depth, cfg)
    fit_ms = (time.perf_counter() - start) * 1000.0

    t_render = float(np.median(samples))
    amortized = {n: (fit_ms + (n - 1) * t_render) / n for n in keyframe_intervals}
    return BenchResult(width=width, height=height, k=k, threads=threads,
                       render_ms=tuple(samples), resize_ms=resize_ms,
                       fit_ms=fit_ms, amortized_ms=amortized)
