import numpy as np
import pytest

from relight.geometry import normals_from_depth
from relight.harness import random_scene
from relight.lights import LightingParams, VirtualLight, flatten, unflatten
from relight.render import (
    ShadingConfig,
    compose,
    light_map,
    light_map_reference,
    light_map_vjp,
)

from conftest import central_diff, relative_errors

CFG = ShadingConfig(sigma1=0.01, sigma2=0.05)


def flat_scene(h, w, value=0.5):
    depth = np.full((h, w), value)
    return depth, normals_from_depth(depth)


def test_ambient_only():
    depth, normals = flat_scene(6, 9)
    params = LightingParams((), ambient=(0.5, 0.5, 0.5))
    lm = light_map(params, depth, normals, CFG)
    assert np.all(lm == 0.5)


def test_coincident_light_peak_gain():
    # light exactly at the position of pixel (v=2, u=1) on a flat 4x4 scene:
    # distance 0, Lambertian 1, denominator sigma1 -> 1/0.01 = 100
    depth, normals = flat_scene(4, 4)
    light = VirtualLight(color=(1, 1, 1), direction=(0, 0, 1),
                         position=((1 + 0.5) / 4, (2 + 0.5) / 4, 0.5), attenuation=1.0)
    params = LightingParams((light,), ambient=(0, 0, 0))
    lm = light_map(params, depth, normals, CFG)
    assert np.allclose(lm[2, 1], 100.0)


def test_quarter_distance_value():
    # pixel (0,0) of a 2x2 flat scene sits at (0.25, 0.25, 0.5); a light at
    # (0.75, 0.25, 0.5) is at squared distance 0.25 -> 1 / 0.26
    depth, normals = flat_scene(2, 2)
    light = VirtualLight(color=(1, 1, 1), direction=(0, 0, 1), position=(0.75, 0.25, 0.5), attenuation=1.0)
    params = LightingParams((light,), ambient=(0, 0, 0))
    lm = light_map(params, depth, normals, CFG)
    assert np.allclose(lm[0, 0], 1.0 / 0.26)
    assert np.allclose(lm[0, 1], 100.0)  # the light coincides with pixel (0,1)


def test_lambertian_floor_applies():
    depth, normals = flat_scene(2, 2)
    light = VirtualLight(color=(1, 1, 1), direction=(0, 0, -1), position=(0.25, 0.25, 0.4), attenuation=0.0)
    params = LightingParams((light,), ambient=(0, 0, 0))
    lm = light_map(params, depth, normals, CFG)
    # N.d = -1 everywhere, floored at sigma2=0.05; denominator 0.01
    assert np.allclose(lm, 0.05 / 0.01)


def test_compose_identity_zero_scalar():
    base = np.full((3, 3, 3), 0.4)
    ones = np.ones_like(base)
    assert np.array_equal(compose(base, ones), base)
    assert np.all(compose(base, np.zeros_like(base)) == 0.0)
    assert np.allclose(compose(base, np.full_like(base, 2.0)), 0.8)


def test_compose_dimension_mismatch():
    with pytest.raises(ValueError):
        compose(np.zeros((2, 2, 3)), np.zeros((3, 2, 3)))


def test_light_map_dimension_mismatch(rng):
    depth = rng.uniform(0, 1, (4, 4))
    normals = normals_from_depth(rng.uniform(0, 1, (4, 5)))
    with pytest.raises(ValueError):
        light_map(LightingParams((), ambient=(1, 1, 1)), depth, normals, CFG)


def test_additivity_in_lights(rng):
    base, depth, params = random_scene(5, 2, 24, 24)
    normals = normals_from_depth(depth)
    both = light_map(params, depth, normals, CFG)
    a = light_map(LightingParams(params.lights[:1], params.ambient), depth, normals, CFG)
    b = light_map(LightingParams(params.lights[1:], params.ambient), depth, normals, CFG)
    ambient = np.broadcast_to(params.ambient, both.shape)
    assert np.abs(both - (a + b - ambient)).max() <= 1e-6


def test_monotone_in_color(rng):
    _, depth, params = random_scene(6, 3, 16, 16)
    normals = normals_from_depth(depth)
    lm = light_map(params, depth, normals, CFG)
    for idx in range(3):
        for channel in range(3):
            bumped_lights = list(params.lights)
            light = bumped_lights[idx]
            color = light.color.copy()
            color[channel] += 0.5
            bumped_lights[idx] = VirtualLight(color, light.direction, light.position, light.attenuation)
            lm2 = light_map(LightingParams(tuple(bumped_lights), params.ambient), depth, normals, CFG)
            assert np.all(lm2 >= lm - 1e-15)


@pytest.mark.parametrize("k", [1, 9, 12])
def test_fast_matches_reference(k):
    base, depth, params = random_scene(100 + k, k, 48, 64)
    normals = normals_from_depth(depth)
    fast = light_map(params, depth, normals, CFG)
    ref = light_map_reference(params, depth, normals, CFG)
    assert np.abs(fast - ref).max() <= 1e-5


def test_bit_identical_across_threads():
    _, depth, params = random_scene(77, 9, 200, 130)
    normals = normals_from_depth(depth)
    outputs = [light_map(params, depth, normals, CFG, threads=t) for t in (1, 2, 4, 8)]
    for other in outputs[1:]:
        assert np.array_equal(outputs[0], other)


def test_vjp_zero_upstream(rng):
    _, depth, params = random_scene(8, 2, 8, 8)
    normals = normals_from_depth(depth)
    grad = light_map_vjp(np.zeros((8, 8, 3)), params, depth, normals, CFG)
    assert np.all(grad == 0.0)


def test_vjp_ambient_is_upstream_sum():
    depth, normals = flat_scene(1, 1)
    params = LightingParams((), ambient=(0.3, 0.3, 0.3))
    upstream = np.zeros((1, 1, 3))
    upstream[0, 0, 0] = 0.7
    grad = light_map_vjp(upstream, params, depth, normals, CFG)
    assert np.array_equal(grad, [0.7, 0.0, 0.0])


@pytest.mark.parametrize("k", [1, 3])
def test_vjp_matches_finite_differences(k):
    rng = np.random.default_rng(1000 + k)
    _, depth, params = random_scene(300 + k, k, 16, 16)
    normals = normals_from_depth(depth)
    upstream = rng.standard_normal((16, 16, 3))
    grad = light_map_vjp(upstream, params, depth, normals, CFG)

    def f(vec):
        return float(np.sum(upstream * light_map(unflatten(vec, k), depth, normals, CFG)))

    fd = central_diff(f, flatten(params))
    assert relative_errors(grad, fd).max() <= 1e-6


def test_vjp_bit_identical_across_threads(rng):
    _, depth, params = random_scene(55, 3, 150, 90)
    normals = normals_from_depth(depth)
    upstream = rng.standard_normal((150, 90, 3))
    grads = [light_map_vjp(upstream, params, depth, normals, CFG, threads=t) for t in (1, 2, 4, 8)]
    for other in grads[1:]:
        assert np.array_equal(grads[0], other)


def test_light_map_nonnegative_after_projection(rng):
    from relight.lights import project_valid

    _, depth, params = random_scene(9, 4, 12, 12)
    valid = project_valid(params).params
    normals = normals_from_depth(depth)
    assert np.all(light_map(valid, depth, normals, CFG) >= 0.0)
