"""Session configuration shared by the CLI commands.

Every default is sourced from the module that owns it, so there is a single
source of truth; a JSON config file can override the defaults and explicit
command-line flags override the file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields

from . import albedo, fit, geometry, render, temporal
from .errors import MissingFileError, SchemaError

DEFAULT_KEYFRAME_INTERVAL = 1


@dataclass
class SessionConfig:
    k: int = 9
    sigma1: float = render.DEFAULT_SIGMA1
    sigma2: float = render.DEFAULT_SIGMA2
    sigma_c: float = fit.DEFAULT_SIGMA_C
    sigma_l: float = fit.DEFAULT_SIGMA_L
    lambda_r: float = fit.DEFAULT_LAMBDA_R
    pixel_norm: str = fit.DEFAULT_PIXEL_NORM
    coarse_iters: int = fit.DEFAULT_COARSE_ITERS
    refine_iters: int = fit.DEFAULT_REFINE_ITERS
    step_size: float = fit.DEFAULT_STEP_SIZE
    working_short_side: int = fit.DEFAULT_WORKING_SHORT_SIDE
    coarse_factor: int = fit.DEFAULT_COARSE_FACTOR
    beta: float = temporal.DEFAULT_BETA
    keyframe_interval: int = DEFAULT_KEYFRAME_INTERVAL
    use_albedo: bool = False
    tau: float = albedo.DEFAULT_TAU
    blur_frac: float = albedo.DEFAULT_BLUR_FRAC
    z_gain: float = geometry.DEFAULT_Z_GAIN
    threads: int = 1
    seed: int = 0

    def fit_config(self) -> fit.FitConfig:
        return fit.FitConfig(
            k=self.k,
            working_short_side=self.working_short_side,
            coarse_factor=self.coarse_factor,
            coarse_iters=self.coarse_iters,
            refine_iters=self.refine_iters,
            step_size=self.step_size,
            seed=self.seed,
            threads=self.threads,
        )

    def loss_config(self) -> fit.LossConfig:
        return fit.LossConfig(
            sigma_c=self.sigma_c,
            sigma_l=self.sigma_l,
            lambda_r=self.lambda_r,
            pixel_norm=self.pixel_norm,
        )

    def shading_config(self) -> render.ShadingConfig:
        return render.ShadingConfig(sigma1=self.sigma1, sigma2=self.sigma2)


_FIELD_NAMES = {f.name for f in fields(SessionConfig)}


def load_config(path: str) -> dict:
    """Read a JSON config file; unknown keys are rejected early."""
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("config root: expected an object")
    for key in doc:
        if key not in _FIELD_NAMES:
            raise SchemaError(f"config: unknown key {key!r}")
    return doc


def build_config(file_overrides: dict | None = None, flag_overrides: dict | None = None) -> SessionConfig:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    values: dict = {}
    if file_overrides:
        values.update(file_overrides)
    if flag_overrides:
        values.update({k: v for k, v in flag_overrides.items() if v is not None})
    return SessionConfig(**values)
