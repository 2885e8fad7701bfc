"""Two-stage lighting-parameter estimation.

Stage 1 optimizes an initial normalized vector theta0 on a downsampled view
of the working images; stage 2 freezes theta0 and optimizes a full-resolution
offset.  Both stages run an Adam-style update guarded by accept-if-improved
backtracking, so the recorded loss trace never increases.  The final physical
parameters are sigma * (theta0 + offset) + mu.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .geometry import box_downsample, normals_from_depth, resize_area
from .lights import (
    LightingParams,
    ParamBounds,
    ParamStats,
    default_stats,
    denormalize,
    param_dim,
    regularization_loss,
)
from .render import ShadingConfig, compose, light_map, light_map_vjp, validate_image

DEFAULT_SIGMA_C = 0.2
DEFAULT_SIGMA_L = 0.2
DEFAULT_LAMBDA_R = 0.1
DEFAULT_PIXEL_NORM = "l1"
DEFAULT_WORKING_SHORT_SIDE = 512
DEFAULT_COARSE_FACTOR = 4
DEFAULT_COARSE_ITERS = 200
DEFAULT_REFINE_ITERS = 100
DEFAULT_STEP_SIZE = 0.05

_ADAM_B1 = 0.9
_ADAM_B2 = 0.999
_ADAM_EPS = 1e-8
_MAX_BACKTRACKS = 4
_STEP_GROW = 1.1
_MIN_STEP_FRACTION = 1e-3


@dataclass(frozen=True)
class LossConfig:
    sigma_c: float = DEFAULT_SIGMA_C
    sigma_l: float = DEFAULT_SIGMA_L
    lambda_r: float = DEFAULT_LAMBDA_R
    pixel_norm: str = DEFAULT_PIXEL_NORM
    use_roi: bool = True

    def __post_init__(self):
        if not 0.0 < self.sigma_c <= 1.0 or not 0.0 < self.sigma_l <= 1.0:
            raise ValueError("sigma_c and sigma_l must lie in (0, 1]")
        if self.lambda_r < 0:
            raise ValueError("lambda_r must be nonnegative")
        norm = self.pixel_norm.lower()
        if norm not in ("l1", "l2"):
            raise ValueError(f"pixel_norm must be 'l1' or 'l2', got {self.pixel_norm!r}")
        object.__setattr__(self, "pixel_norm", norm)


@dataclass(frozen=True)
class FitConfig:
    k: int = 9
    working_short_side: int = DEFAULT_WORKING_SHORT_SIDE
    coarse_factor: int = DEFAULT_COARSE_FACTOR
    coarse_iters: int = DEFAULT_COARSE_ITERS
    refine_iters: int = DEFAULT_REFINE_ITERS
    step_size: float = DEFAULT_STEP_SIZE
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.coarse_factor < 1:
            raise ValueError("coarse_factor must be >= 1")
        if self.coarse_iters < 0 or self.refine_iters < 0:
            raise ValueError("iteration budgets must be >= 0")


@dataclass(frozen=True)
class FitResult:
    params: LightingParams
    theta0: np.ndarray
    theta_offset: np.ndarray
    loss_trace: tuple[float, ...]
    coarse_seconds: float
    refine_seconds: float


def pixel_loss(output: np.ndarray, target: np.ndarray, mode: str = "l1") -> tuple[float, np.ndarray]:
    """Pixel-level reconstruction error and its gradient w.r.t. the output.

    l1: mean absolute difference; l2: root of the mean squared difference.
    """
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if output.shape != target.shape:
        raise ValueError(f"output shape {output.shape} does not match target {target.shape}")
    diff = output - target
    n = diff.size
    mode = mode.lower()
    if mode == "l1":
        return float(np.abs(diff).mean()), np.sign(diff) / n
    if mode == "l2":
        rms = float(np.sqrt((diff * diff).mean()))
        if rms == 0.0:
            return 0.0, np.zeros_like(diff)
        return rms, diff / (n * rms)
    raise ValueError(f"unknown pixel norm {mode!r}")


def roi_loss(
    output: np.ndarray,
    target: np.ndarray,
    depth: np.ndarray,
    sigma_c: float = DEFAULT_SIGMA_C,
    sigma_l: float = DEFAULT_SIGMA_L,
) -> tuple[float, np.ndarray]:
    """Foreground/high-luminance weighted squared error.

    Per element the weight is max(depth, sigma_c) * max(target, sigma_l) with
    depth broadcast across channels; the loss is mean((w * (O - T))^2) and the
    gradient 2 w^2 (O - T) / n.
    """
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if output.shape != target.shape:
        raise ValueError(f"output shape {output.shape} does not match target {target.shape}")
    if depth.shape != output.shape[:2]:
        raise ValueError(f"depth shape {depth.shape} does not match images {output.shape[:2]}")
    w = np.maximum(depth, sigma_c)[:, :, None] * np.maximum(target, sigma_l)
    diff = output - target
    n = diff.size
    loss = float(((w * diff) ** 2).mean())
    return loss, 2.0 * w * w * diff / n


def total_loss(
    params: LightingParams,
    input_base: np.ndarray,
    target: np.ndarray,
    depth: np.ndarray,
    normals: np.ndarray,
    loss_cfg: LossConfig = LossConfig(),
    shading: ShadingConfig = ShadingConfig(),
    bounds: ParamBounds = ParamBounds(),
    threads: int = 1,
    with_grad: bool = True,
) -> tuple[float, np.ndarray | None]:
    """pixel + roi + lambda_r * regularization, with the flat raw-parameter
    gradient chained through the renderer."""
    lmap = light_map(params, depth, normals, shading, threads=threads)
    output = compose(input_base, lmap)
    p_loss, p_grad = pixel_loss(output, target, loss_cfg.pixel_norm)
    if loss_cfg.use_roi:
        r_loss, r_grad = roi_loss(output, target, depth, loss_cfg.sigma_c, loss_cfg.sigma_l)
    else:
        r_loss, r_grad = 0.0, 0.0
    reg_loss, reg_grad = regularization_loss(params, bounds)
    loss = p_loss + r_loss + loss_cfg.lambda_r * reg_loss
    if not with_grad:
        return loss, None
    upstream = (p_grad + r_grad) * input_base
    grad = light_map_vjp(upstream, params, depth, normals, shading, threads=threads)
    grad += loss_cfg.lambda_r * reg_grad
    return loss, grad


def auto_target(image: np.ndarray, target_mean_luma: float) -> np.ndarray:
    """Gamma-map the image so its mean luma lands on the requested value.

    gamma = log(target) / log(mean luma), with the mean floored at 1e-4 and
    capped just under 1 to keep the exponent finite.
    """
    image = validate_image(image)
    if not 0.0 < target_mean_luma < 1.0:
        raise ValueError("target_mean_luma must lie in (0, 1)")
    mean_luma = float(np.clip(image.mean(), 1e-4, 1.0 - 1e-9))
    gamma = np.log(target_mean_luma) / np.log(mean_luma)
    return np.power(np.maximum(image, 0.0), gamma)


def _adam_minimize(objective, x0: np.ndarray, iters: int, step_size: float) -> tuple[np.ndarray, list[float]]:
    """Adam-style steps with accept-if-improved backtracking.

    ``objective(x, with_grad)`` returns (loss, grad-or-None).  A candidate
    step is only taken when it does not increase the loss; otherwise the step
    is halved up to a few times within the iteration and the base step decays
    persistently, so the returned trace is nonincreasing and the tail anneals
    instead of oscillating.
    """
    x = x0.copy()
    loss, grad = objective(x, True)
    trace = [loss]
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    base_lr = step_size
    for t in range(1, iters + 1):
        m = _ADAM_B1 * m + (1.0 - _ADAM_B1) * grad
        v = _ADAM_B2 * v + (1.0 - _ADAM_B2) * grad * grad
        m_hat = m / (1.0 - _ADAM_B1**t)
        v_hat = v / (1.0 - _ADAM_B2**t)
        direction = m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
        lr = base_lr
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            candidate = x - lr * direction
            cand_loss, _ = objective(candidate, False)
            if cand_loss <= loss:
                x = candidate
                loss, grad = objective(x, True)
                accepted = True
                break
            lr *= 0.5
        if accepted:
            base_lr = min(base_lr * _STEP_GROW, step_size)
        else:
            base_lr = max(base_lr * 0.5, step_size * _MIN_STEP_FRACTION)
        trace.append(loss)
    return x, trace


def _working_scale(h: int, w: int, short_side: int) -> tuple[int, int]:
    short = min(h, w)
    if short <= short_side:
        return h, w
    scale = short_side / short
    return max(1, round(h * scale)), max(1, round(w * scale))


def fit(
    input_image: np.ndarray,
    target: np.ndarray,
    depth: np.ndarray | None,
    fit_cfg: FitConfig = FitConfig(),
    loss_cfg: LossConfig = LossConfig(),
    stats: ParamStats | None = None,
    bounds: ParamBounds = ParamBounds(),
    shading: ShadingConfig = ShadingConfig(),
    z_gain: float = 1.0,
) -> FitResult:
    """Fit lighting parameters so that composing the input reproduces the target.

    Missing depth falls back to a constant 0.5 plane (flat normals).  The
    loss trace concatenates both stages and is nonincreasing within each.
    """
    input_image = validate_image(input_image)
    target = validate_image(target)
    if input_image.shape != target.shape:
        raise ValueError(f"input shape {input_image.shape} does not match target {target.shape}")
    h, w = input_image.shape[:2]
    if h < 1 or w < 1:
        raise ValueError("images must be non-empty")
    if depth is None:
        depth = np.full((h, w), 0.5)
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (h, w):
        raise ValueError(f"depth shape {depth.shape} does not match images {(h, w)}")
    if stats is None:
        stats = default_stats(fit_cfg.k)
    if stats.k != fit_cfg.k:
        raise ValueError(f"stats are for k={stats.k} but fit requested k={fit_cfg.k}")

    wh, ww = _working_scale(h, w, fit_cfg.working_short_side)
    work_input = resize_area(input_image, wh, ww)
    work_target = resize_area(target, wh, ww)
    work_depth = resize_area(depth, wh, ww)

    coarse_input = box_downsample(work_input, fit_cfg.coarse_factor)
    coarse_target = box_downsample(work_target, fit_cfg.coarse_factor)
    coarse_depth = box_downsample(work_depth, fit_cfg.coarse_factor)
    coarse_normals = normals_from_depth(coarse_depth, z_gain)
    work_normals = normals_from_depth(work_depth, z_gain)

    dim = param_dim(fit_cfg.k)
    sigma = stats.sigma

    def make_objective(base, tgt, dpt, nrm, theta_frozen):
        def objective(x, with_grad):
            params = denormalize(theta_frozen, x, stats)
            loss, grad = total_loss(
                params, base, tgt, dpt, nrm, loss_cfg, shading, bounds,
                threads=fit_cfg.threads, with_grad=with_grad,
            )
            if not with_grad:
                return loss, None
            return loss, sigma * grad
        return objective

    zero = np.zeros(dim)
    t0 = time.perf_counter()
    theta0, coarse_trace = _adam_minimize(
        make_objective(coarse_input, coarse_target, coarse_depth, coarse_normals, zero),
        zero, fit_cfg.coarse_iters, fit_cfg.step_size,
    )
    t1 = time.perf_counter()
    offset, refine_trace = _adam_minimize(
        make_objective(work_input, work_target, work_depth, work_normals, theta0),
        zero, fit_cfg.refine_iters, fit_cfg.step_size,
    )
    t2 = time.perf_counter()

    return FitResult(
        params=denormalize(theta0, offset, stats),
        theta0=theta0,
        theta_offset=offset,
        loss_trace=tuple(coarse_trace + refine_trace),
        coarse_seconds=t1 - t0,
        refine_seconds=t2 - t1,
    )
