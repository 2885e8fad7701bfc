"""Baseline glare-mask estimation and albedo substitution.

For scenes dominated by a bright glare region the render base can be swapped
from the raw image I to an albedo A = I - Z, where Z is a smooth nonnegative
illumination mask.  The mask here is a classical baseline: blurred luma
excess over a threshold, copied to all three channels.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .render import validate_image

DEFAULT_TAU = 0.85
DEFAULT_BLUR_FRAC = 0.02


def estimate_illumination_mask(
    image: np.ndarray, tau: float = DEFAULT_TAU, blur_sigma_frac: float = DEFAULT_BLUR_FRAC
) -> np.ndarray:
    """Nonnegative (H, W, 3) glare mask: max(0, blur(luma) - tau) per channel.

    Luma is the plain channel mean; the Gaussian sigma is blur_sigma_frac
    times the image width, with replicated borders so a constant image blurs
    to itself.
    """
    image = validate_image(image)
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    if blur_sigma_frac <= 0:
        raise ValueError("blur_sigma_frac must be positive")
    luma = image.mean(axis=2)
    blurred = gaussian_filter(luma, sigma=blur_sigma_frac * image.shape[1], mode="nearest")
    excess = np.maximum(0.0, blurred - tau)
    return np.repeat(excess[:, :, None], 3, axis=2)


def apply_albedo(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """A = max(I - Z, 0).  A <= I elementwise for nonnegative images."""
    image = validate_image(image)
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != image.shape:
        raise ValueError(f"mask shape {mask.shape} does not match image {image.shape}")
    return np.maximum(image - mask, 0.0)
