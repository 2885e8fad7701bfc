"""Frame-to-frame parameter smoothing and keyframe scheduling.

Lighting parameters are re-estimated only every N-th frame; between keyframes
the last fitted parameters are held.  Every frame, held or fresh, passes
through an exponential moving average in raw flat parameter space, with light
directions renormalized to unit length after blending.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .fit import FitConfig, LossConfig, fit
from .geometry import normals_from_depth
from .lights import PER_LIGHT_DIM, ParamBounds, ParamStats, flatten, unflatten
from .render import ShadingConfig, compose, light_map

DEFAULT_BETA = 0.9
RECOMMENDED_BETA_RANGE = (0.8, 0.99)


@dataclass
class SmootherState:
    """EMA state: blend factor and the previous smoothed flat vector."""

    beta: float = DEFAULT_BETA
    prev: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        lo, hi = RECOMMENDED_BETA_RANGE
        if self.beta != 0.0 and not lo <= self.beta <= hi:
            warnings.warn(f"beta={self.beta} is outside the recommended range [{lo}, {hi}]", stacklevel=2)


@dataclass(frozen=True)
class KeyframeSchedule:
    """Re-estimate lighting every ``interval`` frames (1 = every frame)."""

    interval: int = 1

    def __post_init__(self):
        if self.interval < 1:
            raise ValueError("keyframe interval must be >= 1")

    def is_keyframe(self, frame_index: int) -> bool:
        return frame_index % self.interval == 0

    def fit_count(self, total_frames: int) -> int:
        return math.ceil(total_frames / self.interval)


def smooth_step(state: SmootherState, theta_t: np.ndarray, k: int) -> np.ndarray:
    """One EMA update: beta * prev + (1 - beta) * theta_t.

    The first call passes theta_t through unchanged and initializes the
    state.  Direction components are renormalized after blending; the stored
    state is the renormalized output.
    """
    theta_t = np.asarray(theta_t, dtype=np.float64).ravel()
    if state.prev is None:
        state.prev = theta_t.copy()
        return theta_t.copy()
    if state.prev.size != theta_t.size:
        raise ValueError(f"state dim {state.prev.size} does not match input dim {theta_t.size}")
    out = state.beta * state.prev + (1.0 - state.beta) * theta_t
    for i in range(k):
        sl = slice(PER_LIGHT_DIM * i + 3, PER_LIGHT_DIM * i + 6)
        d = out[sl]
        norm = float(np.sqrt(d @ d))
        out[sl] = d / norm if norm > 0.0 else (0.0, 0.0, 1.0)
    state.prev = out.copy()
    return out


def flicker_index(light_maps: list[np.ndarray]) -> float:
    """Mean absolute inter-frame light-map difference, averaged over pairs."""
    if len(light_maps) < 2:
        raise ValueError("flicker_index needs at least 2 frames")
    shape = light_maps[0].shape
    for lm in light_maps[1:]:
        if lm.shape != shape:
            raise ValueError("light maps must share a common shape")
    diffs = [float(np.abs(b - a).mean()) for a, b in zip(light_maps, light_maps[1:])]
    return float(np.mean(diffs))


@dataclass(frozen=True)
class FrameTiming:
    index: int
    fit_ms: float
    render_ms: float

    @property
    def total_ms(self) -> float:
        return self.fit_ms + self.render_ms

    def line(self) -> str:
        return f"{self.index},{self.fit_ms:.3f},{self.render_ms:.3f},{self.total_ms:.3f}"


def enhance_sequence(
    frames: list[np.ndarray],
    depths: list[np.ndarray],
    schedule: KeyframeSchedule = KeyframeSchedule(),
    beta: float = DEFAULT_BETA,
    fit_cfg: FitConfig = FitConfig(),
    loss_cfg: LossConfig = LossConfig(),
    target_provider=None,
    stats: ParamStats | None = None,
    bounds: ParamBounds = ParamBounds(),
    shading: ShadingConfig = ShadingConfig(),
    z_gain: float = 1.0,
) -> tuple[list[np.ndarray], list[FrameTiming]]:
    """Enhance a frame sequence with keyframed fits and per-frame smoothing.

    ``target_provider(frame, depth, index)`` supplies the fit target at each
    keyframe.  Exactly ceil(T / N) fits are performed; every frame is rendered
    with the smoothed parameters of that frame.
    """
    if len(frames) != len(depths):
        raise ValueError(f"{len(frames)} frames but {len(depths)} depths")
    if not frames:
        return [], []
    if target_provider is None:
        raise ValueError("a target_provider is required")
    for frame, depth in zip(frames, depths):
        if depth.shape != frame.shape[:2]:
            raise ValueError(f"depth shape {depth.shape} does not match frame {frame.shape[:2]}")

    smoother = SmootherState(beta=beta)
    held: np.ndarray | None = None
    outputs: list[np.ndarray] = []
    timings: list[FrameTiming] = []
    for t, (frame, depth) in enumerate(zip(frames, depths)):
        fit_ms = 0.0
        if schedule.is_keyframe(t):
            start = time.perf_counter()
            target = target_provider(frame, depth, t)
            result = fit(frame, target, depth, fit_cfg, loss_cfg, stats, bounds, shading, z_gain)
            held = flatten(result.params)
            fit_ms = (time.perf_counter() - start) * 1000.0
        smoothed = smooth_step(smoother, held, fit_cfg.k)
        start = time.perf_counter()
        normals = normals_from_depth(depth, z_gain)
        lmap = light_map(unflatten(smoothed, fit_cfg.k), depth, normals, shading, threads=fit_cfg.threads)
        outputs.append(compose(frame, lmap))
        render_ms = (time.perf_counter() - start) * 1000.0
        timings.append(FrameTiming(index=t, fit_ms=fit_ms, render_ms=render_ms))
    return outputs, timings
