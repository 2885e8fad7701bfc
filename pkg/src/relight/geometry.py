"""Per-pixel geometry derived from a depth map.

Depth maps are (H, W) float arrays with values in [0, 1].  All spatial
coordinates are normalized to the unit square using pixel centers, so the
lighting geometry is independent of resolution.
"""

from __future__ import annotations

import numpy as np

DEFAULT_Z_GAIN = 1.0


def validate_depth(depth: np.ndarray) -> np.ndarray:
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim != 2 or depth.shape[0] < 1 or depth.shape[1] < 1:
        raise ValueError(f"depth must be a non-empty 2-D array, got shape {depth.shape}")
    return depth


def pixel_positions(depth: np.ndarray) -> np.ndarray:
    """(H, W, 3) array of p_i = (x, y, z): pixel-center coordinates plus depth.

    x = (u + 0.5) / W and y = (v + 0.5) / H, so positions are resolution
    invariant; z is the depth value itself.
    """
    depth = validate_depth(depth)
    h, w = depth.shape
    x = (np.arange(w, dtype=np.float64) + 0.5) / w
    y = (np.arange(h, dtype=np.float64) + 0.5) / h
    out = np.empty((h, w, 3), dtype=np.float64)
    out[:, :, 0] = x[None, :]
    out[:, :, 1] = y[:, None]
    out[:, :, 2] = depth
    return out


def normals_from_depth(depth: np.ndarray, z_gain: float = DEFAULT_Z_GAIN) -> np.ndarray:
    """Unit surface normals from central differences of the depth map.

    Gradients are taken in the same normalized coordinate frame as
    :func:`pixel_positions` (spacing 1/W horizontally, 1/H vertically);
    borders replicate their neighbor.  N = normalize(-g_x, -g_y, 1), so
    N_z > 0 everywhere and a flat depth map yields (0, 0, 1).
    """
    depth = validate_depth(depth)
    if z_gain <= 0:
        raise ValueError("z_gain must be positive")
    h, w = depth.shape
    padded = np.pad(depth, 1, mode="edge")
    gx = z_gain * (padded[1:-1, 2:] - padded[1:-1, :-2]) / (2.0 / w)
    gy = z_gain * (padded[2:, 1:-1] - padded[:-2, 1:-1]) / (2.0 / h)
    n = np.empty((h, w, 3), dtype=np.float64)
    n[:, :, 0] = -gx
    n[:, :, 1] = -gy
    n[:, :, 2] = 1.0
    norm = np.sqrt(n[:, :, 0] ** 2 + n[:, :, 1] ** 2 + 1.0)
    n /= norm[:, :, None]
    return n


def box_downsample(raster: np.ndarray, factor: int) -> np.ndarray:
    """Average over factor x factor blocks; ragged edge blocks average over
    whatever pixels they cover.  Works on (H, W) and (H, W, C) arrays."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if factor == 1:
        return np.asarray(raster, dtype=np.float64).copy()
    raster = np.asarray(raster, dtype=np.float64)
    h, w = raster.shape[:2]
    oh = (h + factor - 1) // factor
    ow = (w + factor - 1) // factor
    out = np.empty((oh, ow) + raster.shape[2:], dtype=np.float64)
    for i in range(oh):
        rows = raster[i * factor : min((i + 1) * factor, h)]
        for j in range(ow):
            block = rows[:, j * factor : min((j + 1) * factor, w)]
            out[i, j] = block.mean(axis=(0, 1))
    return out


def _overlap_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) row-stochastic matrix of interval-overlap weights for
    area-average resampling along one axis."""
    scale = n_in / n_out
    weights = np.zeros((n_out, n_in), dtype=np.float64)
    for o in range(n_out):
        lo = o * scale
        hi = (o + 1) * scale
        first = int(np.floor(lo))
        last = min(int(np.ceil(hi)), n_in)
        for i in range(first, last):
            overlap = min(hi, i + 1) - max(lo, i)
            if overlap > 0:
                weights[o, i] = overlap
        weights[o] /= weights[o].sum()
    return weights


def resize_area(raster: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    """Area-average resize (separable overlap weighting).  Deterministic and
    exact for constant inputs; used for the working-resolution schedule."""
    raster = np.asarray(raster, dtype=np.float64)
    h, w = raster.shape[:2]
    if (h, w) == (new_h, new_w):
        return raster.copy()
    wr = _overlap_weights(h, new_h)
    wc = _overlap_weights(w, new_w)
    if raster.ndim == 2:
        return wr @ raster @ wc.T
    out = np.empty((new_h, new_w, raster.shape[2]), dtype=np.float64)
    for c in range(raster.shape[2]):
        out[:, :, c] = wr @ raster[:, :, c] @ wc.T
    return out
