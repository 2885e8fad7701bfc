"""Virtual-light parameter set: structured form, flat vector form, and validity.

A scene is lit by K parametric lights plus one ambient term.  The flat vector
layout is, per light, [color(3), direction(3), position(3), attenuation(1)]
followed by ambient(3), so the total dimension is 10*K + 3.  Optimization
happens on normalized flat vectors; ``denormalize`` maps them back to physical
parameters through per-dimension mean/scale statistics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

PER_LIGHT_DIM = 10
AMBIENT_DIM = 3

# Fallback direction used when a degenerate (zero) direction must be repaired.
FALLBACK_DIRECTION = (0.0, 0.0, 1.0)

# Normalized-space scale used when no fitted statistics are available.
DEFAULT_STAT_SIGMA = 0.25

# Generous physical ranges; only clearly implausible values are penalized.
DEFAULT_C_MAX = 10.0
DEFAULT_S_MAX = 100.0
DEFAULT_AMBIENT_MAX = 4.0
DEFAULT_LAMBDA_AMB = 1.0


def param_dim(k: int) -> int:
    """Flat vector dimension for k lights."""
    return PER_LIGHT_DIM * k + AMBIENT_DIM


@dataclass(frozen=True)
class VirtualLight:
    """One parametric light: per-channel intensity, unit direction, position
    in the normalized scene cube, and a squared-distance attenuation factor."""

    color: np.ndarray
    direction: np.ndarray
    position: np.ndarray
    attenuation: float

    def __post_init__(self):
        object.__setattr__(self, "color", np.asarray(self.color, dtype=np.float64).reshape(3))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=np.float64).reshape(3))
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64).reshape(3))
        object.__setattr__(self, "attenuation", float(self.attenuation))


@dataclass(frozen=True)
class LightingParams:
    """K ordered virtual lights plus a 3-channel ambient term."""

    lights: tuple[VirtualLight, ...]
    ambient: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lights", tuple(self.lights))
        object.__setattr__(self, "ambient", np.asarray(self.ambient, dtype=np.float64).reshape(3))

    @property
    def k(self) -> int:
        return len(self.lights)


@dataclass(frozen=True)
class ParamStats:
    """Per-dimension mean and scale for reverse normalization.

    ``sigma`` must be strictly positive elementwise.
    """

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64).ravel()
        sigma = np.asarray(self.sigma, dtype=np.float64).ravel()
        if mu.shape != sigma.shape:
            raise ValueError(f"mu has dim {mu.size} but sigma has dim {sigma.size}")
        if np.any(sigma <= 0):
            raise ValueError("sigma must be strictly positive in every dimension")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def k(self) -> int:
        return (self.mu.size - AMBIENT_DIM) // PER_LIGHT_DIM


@dataclass(frozen=True)
class ParamBounds:
    """Validity box for the soft-constraint projection and its penalty."""

    c_max: float = DEFAULT_C_MAX
    s_max: float = DEFAULT_S_MAX
    ambient_max: float = DEFAULT_AMBIENT_MAX
    lambda_amb: float = DEFAULT_LAMBDA_AMB

    def __post_init__(self):
        if self.c_max <= 0 or self.s_max <= 0 or self.ambient_max <= 0:
            raise ValueError("all bounds must be positive")


class ProjectionResult(NamedTuple):
    params: "LightingParams"
    degenerate_directions: tuple[int, ...]


def flatten(params: LightingParams) -> np.ndarray:
    """Pack params into a flat vector of dimension 10K+3."""
    out = np.empty(param_dim(params.k), dtype=np.float64)
    for i, light in enumerate(params.lights):
        base = PER_LIGHT_DIM * i
        out[base : base + 3] = light.color
        out[base + 3 : base + 6] = light.direction
        out[base + 6 : base + 9] = light.position
        out[base + 9] = light.attenuation
    out[-3:] = params.ambient
    return out


def unflatten(vec: np.ndarray, k: int) -> LightingParams:
    """Inverse of :func:`flatten`.  Raises ValueError on dimension mismatch."""
    vec = np.asarray(vec, dtype=np.float64).ravel()
    expected = param_dim(k)
    if vec.size != expected:
        raise ValueError(f"expected vector of dim {expected} for k={k}, got {vec.size}")
    lights = []
    for i in range(k):
        base = PER_LIGHT_DIM * i
        lights.append(
            VirtualLight(
                color=vec[base : base + 3].copy(),
                direction=vec[base + 3 : base + 6].copy(),
                position=vec[base + 6 : base + 9].copy(),
                attenuation=float(vec[base + 9]),
            )
        )
    return LightingParams(lights=tuple(lights), ambient=vec[-3:].copy())


def grid_positions(k: int) -> np.ndarray:
    """(k, 3) cell-center positions on a near-square grid at mid depth.

    Spreading the per-light rest positions breaks the permutation symmetry of
    an all-identical initialization; with identical rest points every light
    would receive the same gradient and they could never specialize.
    """
    if k == 0:
        return np.zeros((0, 3))
    side = int(np.ceil(np.sqrt(k)))
    out = np.empty((k, 3), dtype=np.float64)
    for i in range(k):
        out[i] = ((i % side + 0.5) / side, (i // side + 0.5) / side, 0.5)
    return out


def neutral_params(k: int) -> LightingParams:
    """Lights off, ambient 1: composition with any base image is the identity.

    Light positions sit on the spread grid so downstream optimization and
    interactive editing start from distinguishable lights.
    """
    positions = grid_positions(k)
    lights = tuple(
        VirtualLight(color=np.zeros(3), direction=(0.0, 0.0, 1.0), position=positions[i], attenuation=1.0)
        for i in range(k)
    )
    return LightingParams(lights=lights, ambient=np.ones(3))


def default_stats(k: int, sigma: float = DEFAULT_STAT_SIGMA) -> ParamStats:
    """Stats whose zero point denormalizes to neutral lighting.

    Per light the mean is (c=0, d=(0,0,1), p=(0.5,0.5,0.5), s=1), ambient mean
    is (1,1,1); the scale is uniform.  Loadable stats files override this.
    """
    mu = flatten(neutral_params(k))
    return ParamStats(mu=mu, sigma=np.full(mu.shape, float(sigma)))


def denormalize(theta0: np.ndarray, theta_off: np.ndarray, stats: ParamStats) -> LightingParams:
    """Reverse normalization: sigma * (theta0 + theta_off) + mu, unflattened.

    No projection is applied; the regularization loss supplies validity
    pressure on the raw result.
    """
    theta0 = np.asarray(theta0, dtype=np.float64).ravel()
    theta_off = np.asarray(theta_off, dtype=np.float64).ravel()
    if theta0.size != theta_off.size or theta0.size != stats.mu.size:
        raise ValueError(
            f"dimension mismatch: theta0 {theta0.size}, offset {theta_off.size}, stats {stats.mu.size}"
        )
    raw = stats.sigma * (theta0 + theta_off) + stats.mu
    return unflatten(raw, stats.k)


def _project_direction(d: np.ndarray) -> tuple[np.ndarray, bool]:
    norm = float(np.sqrt(d @ d))
    if norm == 0.0:
        return np.array(FALLBACK_DIRECTION), True
    # already unit within the type invariant: leave bits untouched so the
    # projection is exactly idempotent
    if abs(norm - 1.0) <= 1e-6:
        return d.copy(), False
    return d / norm, False


def project_valid(params: LightingParams, bounds: ParamBounds = ParamBounds()) -> ProjectionResult:
    """Clamp intensities/positions into range and renormalize directions.

    Idempotent.  Zero directions are replaced by the fallback (0,0,1) and the
    light's index is reported in ``degenerate_directions``.
    """
    lights = []
    degenerate = []
    for i, light in enumerate(params.lights):
        d, was_zero = _project_direction(light.direction)
        if was_zero:
            degenerate.append(i)
        lights.append(
            VirtualLight(
                color=np.clip(light.color, 0.0, bounds.c_max),
                direction=d,
                position=np.clip(light.position, 0.0, 1.0),
                attenuation=float(np.clip(light.attenuation, 0.0, bounds.s_max)),
            )
        )
    ambient = np.clip(params.ambient, 0.0, bounds.ambient_max)
    return ProjectionResult(LightingParams(tuple(lights), ambient), tuple(degenerate))


def regularization_loss(
    params: LightingParams, bounds: ParamBounds = ParamBounds()
) -> tuple[float, np.ndarray]:
    """Squared distance to the valid set, with the ambient term weighted.

    Returns (loss, gradient).  The projection is treated as locally constant,
    so the gradient is 2*(theta - proj(theta)) on the light block and
    2*lambda_amb*(ambient - clamp(ambient)) on the ambient block.
    """
    projected = project_valid(params, bounds).params
    raw = flatten(params)
    proj = flatten(projected)
    resid = raw - proj
    light_dim = PER_LIGHT_DIM * params.k
    light_resid = resid[:light_dim]
    amb_resid = resid[light_dim:]
    loss = float(light_resid @ light_resid) + bounds.lambda_amb * float(amb_resid @ amb_resid)
    grad = np.empty_like(resid)
    grad[:light_dim] = 2.0 * light_resid
    grad[light_dim:] = 2.0 * bounds.lambda_amb * amb_resid
    return loss, grad
