import numpy as np
import pytest


def central_diff(f, x, eps=1e-6):
    """Central finite differences of a scalar function over a flat vector."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for i in range(x.size):
        hi, lo = x.copy(), x.copy()
        hi[i] += eps
        lo[i] -= eps
        out[i] = (f(hi) - f(lo)) / (2.0 * eps)
    return out


def relative_errors(analytic, numeric, floor=1e-8):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    scale = np.maximum(floor, np.maximum(np.abs(analytic), np.abs(numeric)))
    return np.abs(analytic - numeric) / scale


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)
