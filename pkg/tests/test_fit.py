import numpy as np
import pytest

from relight.fit import (
    FitConfig,
    LossConfig,
    auto_target,
    fit,
    pixel_loss,
    roi_loss,
    total_loss,
)
from relight.geometry import box_downsample, normals_from_depth
from relight.harness import make_planted_scene, random_scene
from relight.lights import (
    LightingParams,
    VirtualLight,
    default_stats,
    flatten,
    neutral_params,
    unflatten,
)
from relight.render import compose, light_map

from conftest import central_diff, relative_errors


# ---------------------------------------------------------------- losses


def test_pixel_loss_zero():
    image = np.full((2, 2, 3), 0.3)
    loss, grad = pixel_loss(image, image, "l1")
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_pixel_loss_uniform_offset():
    target = np.zeros((2, 2, 3))
    output = np.full((2, 2, 3), 0.1)
    assert pixel_loss(output, target, "l1")[0] == pytest.approx(0.1, rel=1e-12)
    assert pixel_loss(output, target, "l2")[0] == pytest.approx(0.1, rel=1e-12)


def test_pixel_loss_gradients_match_fd(rng):
    target = rng.uniform(0, 1, (4, 4, 3))
    output = target + rng.uniform(0.05, 0.3, target.shape) * rng.choice([-1.0, 1.0], target.shape)
    for mode in ("l1", "l2"):
        _, grad = pixel_loss(output, target, mode)
        fd = central_diff(lambda v: pixel_loss(v.reshape(output.shape), target, mode)[0], output.ravel())
        assert relative_errors(grad.ravel(), fd).max() <= 1e-6


def test_pixel_loss_shape_check():
    with pytest.raises(ValueError):
        pixel_loss(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))


def test_roi_loss_zero():
    image = np.full((3, 3, 3), 0.4)
    depth = np.full((3, 3), 0.5)
    loss, grad = roi_loss(image, image, depth)
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_roi_loss_full_weight_case():
    # weight 1 everywhere, diff 0.5 -> mean of 0.25
    target = np.ones((1, 1, 3))
    output = np.full((1, 1, 3), 1.5)
    depth = np.ones((1, 1))
    loss, _ = roi_loss(output, target, depth, sigma_c=0.2, sigma_l=0.2)
    assert loss == pytest.approx(0.25, rel=1e-12)


def test_roi_loss_floor_case():
    # floors give weight 0.04; diff 1 -> (0.04)^2 = 0.0016
    target = np.zeros((1, 1, 3))
    output = np.ones((1, 1, 3))
    depth = np.zeros((1, 1))
    loss, _ = roi_loss(output, target, depth, sigma_c=0.2, sigma_l=0.2)
    assert loss == pytest.approx(0.0016, rel=1e-12)


def test_roi_loss_gradient_matches_fd(rng):
    target = rng.uniform(0, 1, (3, 3, 3))
    output = rng.uniform(0, 1, (3, 3, 3))
    depth = rng.uniform(0, 1, (3, 3))
    _, grad = roi_loss(output, target, depth)
    fd = central_diff(lambda v: roi_loss(v.reshape(output.shape), target, depth)[0], output.ravel())
    assert relative_errors(grad.ravel(), fd).max() <= 1e-6


def test_total_loss_zero_at_identity():
    base = np.random.default_rng(5).uniform(0, 1, (8, 8, 3))
    depth = np.full((8, 8), 0.5)
    normals = normals_from_depth(depth)
    loss, grad = total_loss(neutral_params(2), base, base, depth, normals)
    assert loss == 0.0
    assert np.all(grad == 0.0)


def test_total_loss_lambda_zero_is_pixel_plus_roi(rng):
    base, depth, params = random_scene(21, 2, 12, 12)
    target = rng.uniform(0, 1, (12, 12, 3))
    normals = normals_from_depth(depth)
    output = compose(base, light_map(params, depth, normals))
    total, _ = total_loss(params, base, target, depth, normals, LossConfig(lambda_r=0.0))
    expected = pixel_loss(output, target, "l1")[0] + roi_loss(output, target, depth)[0]
    assert total == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_total_loss_gradient_matches_fd(k):
    rng = np.random.default_rng(400 + k)
    base, depth, params = random_scene(500 + k, k, 16, 16)
    target = rng.uniform(0, 1, (16, 16, 3))
    normals = normals_from_depth(depth)
    cfg = LossConfig()
    _, grad = total_loss(params, base, target, depth, normals, cfg)

    def f(vec):
        return total_loss(unflatten(vec, k), base, target, depth, normals, cfg, with_grad=False)[0]

    fd = central_diff(f, flatten(params))
    assert relative_errors(grad, fd).max() <= 1e-5


# ---------------------------------------------------------------- auto target


def test_auto_target_identity():
    image = np.full((4, 4, 3), 0.5)
    assert np.allclose(auto_target(image, 0.5), image)


def test_auto_target_hand_gamma():
    image = np.full((4, 4, 3), 0.25)
    out = auto_target(image, 0.5)
    assert np.allclose(out, 0.5)  # gamma = log(0.5)/log(0.25) = 0.5


def test_auto_target_black_image_is_finite():
    out = auto_target(np.zeros((4, 4, 3)), 0.5)
    assert np.all(np.isfinite(out))


def test_auto_target_validates_range():
    with pytest.raises(ValueError):
        auto_target(np.full((2, 2, 3), 0.5), 1.5)


# ---------------------------------------------------------------- fit


def test_fit_identity_target():
    rng = np.random.default_rng(11)
    base = rng.uniform(0.1, 0.9, (24, 24, 3))
    depth = rng.uniform(0.2, 0.8, (24, 24))
    result = fit(base, base, depth, FitConfig(k=2, coarse_iters=20, refine_iters=10))
    assert result.loss_trace[-1] <= 1e-6
    assert np.allclose(flatten(result.params), default_stats(2).mu)


def test_fit_planted_spec_scene():
    # the planted configuration: k=1, c=(2,2,2), d=(0,0,1), p=(.5,.5,.5), s=5
    rng = np.random.default_rng(42)
    h = w = 64
    base = rng.uniform(0.1, 0.9, (h, w, 3))
    depth = 0.75 + 0.2 * rng.uniform(0, 1, (h, w))
    planted = LightingParams(
        (VirtualLight(color=(2, 2, 2), direction=(0, 0, 1), position=(0.5, 0.5, 0.5), attenuation=5.0),),
        ambient=np.zeros(3),
    )
    normals = normals_from_depth(depth)
    target = compose(base, light_map(planted, depth, normals))
    result = fit(base, target, depth, FitConfig(k=1))
    rerender = compose(base, light_map(result.params, depth, normals))
    assert float(((rerender - target) ** 2).mean()) <= 1e-4


def test_fit_trace_nonincreasing_and_refine_no_worse():
    scene = make_planted_scene(7, 2, 48, 48)
    cfg = FitConfig(k=2, coarse_iters=60, refine_iters=30)
    result = fit(scene.base, scene.target, scene.depth, cfg)
    trace = np.array(result.loss_trace)
    assert trace.size == (cfg.coarse_iters + 1) + (cfg.refine_iters + 1)
    coarse = trace[: cfg.coarse_iters + 1]
    refine = trace[cfg.coarse_iters + 1 :]
    assert np.all(np.diff(coarse) <= 0.0)
    assert np.all(np.diff(refine) <= 0.0)
    # refine starts at the coarse solution evaluated at full resolution
    assert refine[-1] <= refine[0]


def test_fit_params_equal_denormalized_thetas():
    from relight.lights import denormalize

    scene = make_planted_scene(3, 1, 32, 32)
    result = fit(scene.base, scene.target, scene.depth, FitConfig(k=1, coarse_iters=15, refine_iters=5))
    rebuilt = denormalize(result.theta0, result.theta_offset, default_stats(1))
    assert np.array_equal(flatten(result.params), flatten(rebuilt))


def test_fit_deterministic():
    scene = make_planted_scene(9, 2, 32, 32)
    cfg = FitConfig(k=2, coarse_iters=40, refine_iters=20)
    a = fit(scene.base, scene.target, scene.depth, cfg)
    b = fit(scene.base, scene.target, scene.depth, cfg)
    assert np.array_equal(flatten(a.params), flatten(b.params))
    assert a.loss_trace == b.loss_trace
    assert np.array_equal(a.theta0, b.theta0)
    assert np.array_equal(a.theta_offset, b.theta_offset)


def test_fit_zero_budget_returns_neutral():
    scene = make_planted_scene(4, 2, 16, 16)
    result = fit(scene.base, scene.target, scene.depth, FitConfig(k=2, coarse_iters=0, refine_iters=0))
    assert np.array_equal(flatten(result.params), default_stats(2).mu)
    assert np.all(result.theta0 == 0.0)
    assert np.all(result.theta_offset == 0.0)


def test_fit_depth_fallback_and_shape_checks():
    rng = np.random.default_rng(2)
    base = rng.uniform(0, 1, (8, 8, 3))
    result = fit(base, base, None, FitConfig(k=1, coarse_iters=2, refine_iters=1))
    assert np.isfinite(result.loss_trace[-1])
    with pytest.raises(ValueError):
        fit(base, base, np.zeros((4, 4)), FitConfig(k=1, coarse_iters=1, refine_iters=1))
    with pytest.raises(ValueError):
        fit(base, rng.uniform(0, 1, (9, 8, 3)), None, FitConfig(k=1))


def test_fit_resolution_invariance():
    # under-parameterized fit: the mismatch floor is a property of the scene,
    # not of the sampling resolution
    scene = make_planted_scene(13, 3, 64, 64)
    cfg = FitConfig(k=1, coarse_iters=120, refine_iters=60)
    loss_full = fit(scene.base, scene.target, scene.depth, cfg).loss_trace[-1]
    small = fit(
        box_downsample(scene.base, 2),
        box_downsample(scene.target, 2),
        box_downsample(scene.depth, 2),
        cfg,
    ).loss_trace[-1]
    assert abs(loss_full - small) <= 0.1 * max(loss_full, small)


def test_fit_working_resize_applies():
    # a large image is brought down to the working resolution before staging
    rng = np.random.default_rng(6)
    base = rng.uniform(0.2, 0.8, (40, 80, 3))
    result = fit(base, base, np.full((40, 80), 0.5),
                 FitConfig(k=1, working_short_side=20, coarse_iters=2, refine_iters=1))
    assert result.loss_trace[-1] <= 1e-6
