import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage
from scipy.spatial.transform import Rotation

from depthmotion.camera import CameraPose, Intrinsics
from depthmotion.errors import ConfigError
from depthmotion.stillbox import (
    OrientationNoise,
    Primitive,
    Scene,
    SceneParams,
    generate_scene,
    perturb_orientation,
    ray_depth,
    render_frame,
    render_sequence,
    sample_trajectory,
)

IDENTITY_POSE = CameraPose(np.zeros(3), np.eye(3))


def sphere_zdepth(origin, direction, center, radius, axis):
    """Closed-form nearest hit along a unit direction, converted to z-depth."""
    d = np.asarray(direction) / np.linalg.norm(direction)
    oc = np.asarray(origin) - np.asarray(center)
    b = d @ oc
    disc = b * b - (oc @ oc - radius**2)
    if disc < 0:
        return math.inf
    s = -b - math.sqrt(disc)
    if s <= 0:
        s = -b + math.sqrt(disc)
    return s * (d @ axis) if s > 0 else math.inf


def test_empty_scene_rejected():
    with pytest.raises(ConfigError):
        generate_scene(7, SceneParams(primitive_count=0))


@pytest.mark.parametrize("bad", [dict(box_half_extent=-1.0), dict(size_range=(0.0, 1.0)), dict(size_range=(2.0, 1.0))])
def test_invalid_params_rejected(bad):
    with pytest.raises(ConfigError):
        generate_scene(1, SceneParams(**bad))


def test_generation_is_deterministic():
    params = SceneParams(primitive_count=20, box_half_extent=50.0)
    a, b = generate_scene(42, params), generate_scene(42, params)
    assert a.to_dict() == b.to_dict()
    assert generate_scene(43, params).to_dict() != a.to_dict()


def test_primitives_inside_box():
    scene = generate_scene(42, SceneParams(primitive_count=20, box_half_extent=50.0))
    assert len(scene.primitives) == 20
    for p in scene.primitives:
        assert np.max(np.abs(p.center)) + p.size < 50.0
        assert p.size > 0


@given(st.integers(0, 2**63 - 1))
@settings(max_examples=30, deadline=None)
def test_primitives_inside_box_any_seed(seed):
    scene = generate_scene(seed, SceneParams(primitive_count=5))
    for p in scene.primitives:
        assert np.max(np.abs(p.center)) + p.size < scene.box_half_extent
        assert p.nearest_distance() >= 5.0


def test_primitive_validation():
    with pytest.raises(ConfigError):
        Primitive("cone", (0, 0, 10), 1.0, 0)
    with pytest.raises(ConfigError):
        Primitive("sphere", (0, 0, 10), 0.0, 0)


def test_trajectory_direction_uniform():
    dirs = np.array([sample_trajectory(s).direction for s in range(10_000)])
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)
    assert np.linalg.norm(dirs.mean(axis=0)) < 0.05


def test_trajectory_deterministic_and_spacing():
    assert sample_trajectory(5).direction == sample_trajectory(5).direction
    traj = sample_trajectory(3, speed=1.0, frame_period=0.1, frame_count=10)
    pos = np.array([traj.position(k) for k in range(10)])
    assert np.allclose(np.linalg.norm(np.diff(pos, axis=0), axis=1), 0.1, atol=1e-12)


@pytest.mark.parametrize("kw", [dict(speed=0.0), dict(speed=-1.0), dict(frame_period=0.0)])
def test_trajectory_rejects_bad_params(kw):
    with pytest.raises(ConfigError):
        sample_trajectory(1, **kw)


def test_ray_depth_sphere_on_axis():
    scene = Scene([Primitive("sphere", (0.0, 0.0, 10.0), 1.0, 1)], 50.0, 0)
    K = Intrinsics.from_fov(256, 256, 90)
    assert ray_depth(scene, IDENTITY_POSE, K, (128, 128)) == pytest.approx(9.0, abs=1e-12)


def test_ray_depth_wall_is_zdepth():
    scene = Scene([], 50.0, 0)
    K = Intrinsics.from_fov(256, 256, 90)
    assert ray_depth(scene, IDENTITY_POSE, K, (128, 128)) == pytest.approx(50.0, abs=1e-12)
    # ray length through this pixel is longer than 50, the z-depth is not
    assert ray_depth(scene, IDENTITY_POSE, K, (100, 170)) == pytest.approx(50.0, abs=1e-12)


def test_ray_depth_box_face():
    scene = Scene([Primitive("box", (0.0, 0.0, 20.0), 2.0, 1)], 50.0, 0)
    K = Intrinsics.from_fov(64, 64, 90)
    assert ray_depth(scene, IDENTITY_POSE, K, (32, 32)) == pytest.approx(18.0, abs=1e-12)
    assert ray_depth(scene, IDENTITY_POSE, K, (32, 35)) == pytest.approx(18.0, abs=1e-12)


def test_ray_depth_matches_closed_form_sphere():
    rng = np.random.default_rng(0)
    center = np.array([1.5, -2.0, 15.0])
    scene = Scene([Primitive("sphere", tuple(center), 6.0, 1)], 100.0, 0)
    K = Intrinsics.from_fov(256, 256, 90)
    R = Rotation.from_euler("xyz", [0.05, -0.1, 0.02]).as_matrix()
    pose = CameraPose(np.array([0.3, 0.1, -0.2]), R)
    checked = 0
    for _ in range(1000):
        i, j = rng.integers(0, 256, size=2)
        ray = np.array([(j - 128) / K.focal_px, (i - 128) / K.focal_px, 1.0])
        expected = sphere_zdepth(pose.position, R @ ray, center, 6.0, R[:, 2])
        got = ray_depth(scene, pose, K, (i, j))
        if math.isfinite(expected):
            assert got == pytest.approx(expected, rel=1e-9)
            checked += 1
    assert checked > 100


def test_render_deterministic_and_positive(small_intrinsics):
    scene = generate_scene(11, SceneParams(primitive_count=10))
    pose = CameraPose(np.zeros(3), scene.camera_orientation)
    a = render_frame(scene, pose, small_intrinsics)
    b = render_frame(scene, pose, small_intrinsics)
    assert np.array_equal(a.image, b.image) and np.array_equal(a.gt_depth, b.gt_depth)
    assert a.image.shape == a.gt_depth.shape == (64, 64)
    assert a.gt_depth.min() > 0 and np.all(np.isfinite(a.gt_depth))
    assert a.image.min() >= 0 and a.image.max() <= 1
    # nothing is farther than the box corner
    assert a.gt_depth.max() <= math.sqrt(3) * 2 * scene.box_half_extent


def test_wall_depth_decreases_by_forward_motion(small_intrinsics):
    scene = Scene([], 50.0, 0)
    a = render_frame(scene, IDENTITY_POSE, small_intrinsics)
    b = render_frame(scene, CameraPose(np.array([0.0, 0.0, 0.7]), np.eye(3)), small_intrinsics)
    # central region sees only the far wall
    sl = np.s_[16:48, 16:48]
    assert np.allclose(a.gt_depth[sl] - b.gt_depth[sl], 0.7, atol=1e-9)


def test_perturb_orientation_zero_noise():
    pose = CameraPose(np.ones(3), Rotation.from_euler("z", 0.3).as_matrix())
    out = perturb_orientation(pose, OrientationNoise(0.0, 1), 5)
    assert np.array_equal(out.orientation, pose.orientation)


def test_perturb_orientation_bound_and_variation():
    R0 = Rotation.from_euler("xyz", [0.2, 0.4, -0.1]).as_matrix()
    pose = CameraPose(np.zeros(3), R0)
    noise = OrientationNoise(0.001, 99)
    outs = [perturb_orientation(pose, noise, k).orientation for k in range(50)]
    for R in outs:
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        angle = Rotation.from_matrix(R0.T @ R).magnitude()
        assert 0 < angle <= math.sqrt(3) * 0.001 + 1e-15
    assert not np.allclose(outs[0], outs[1])
    # per-step draws do not depend on order
    assert np.array_equal(perturb_orientation(pose, noise, 7).orientation, outs[7])


def test_photometric_consistency_under_translation():
    K = Intrinsics.from_fov(128, 128, 90)
    hits = total = 0
    for seed in range(3):
        scene = generate_scene(seed, SceneParams(primitive_count=20))
        traj = sample_trajectory(seed)
        R = scene.camera_orientation
        cur = render_frame(scene, CameraPose(np.zeros(3), R), K)
        step = 0.3 * np.asarray(traj.direction)
        prev = render_frame(scene, CameraPose(-step, R), K)
        T = R.T @ step
        pts = K.pixel_rays() * cur.gt_depth[..., None] + T
        u, v, z = K.project(pts)
        inside = (u >= 0) & (u <= 127) & (v >= 0) & (v <= 127) & (z > 0)
        warped_img = ndimage.map_coordinates(prev.image, [np.where(inside, v, 0), np.where(inside, u, 0)], order=1)
        warped_z = ndimage.map_coordinates(prev.gt_depth, [np.where(inside, v, 0), np.where(inside, u, 0)], order=1)
        visible = inside & (np.abs(warped_z - z) < 0.01 * z)
        ok = np.abs(warped_img - cur.image) < 0.05
        hits += np.sum(ok & visible)
        total += np.sum(visible)
    assert total > 0.5 * 3 * 128 * 128
    assert hits / total >= 0.95


def test_render_sequence_uses_trajectory(small_intrinsics):
    scene = generate_scene(2, SceneParams(primitive_count=4))
    traj = sample_trajectory(2, frame_count=3)
    frames = render_sequence(scene, traj, small_intrinsics, OrientationNoise(0.001, 2))
    assert [f.timestamp for f in frames] == pytest.approx([0.0, 0.1, 0.2])
    assert np.allclose(frames[2].pose.position, traj.position(2))
    assert not np.allclose(frames[1].pose.orientation, scene.camera_orientation)


def test_scene_roundtrip_dict():
    scene = generate_scene(4)
    again = Scene.from_dict(scene.to_dict())
    assert again.to_dict() == scene.to_dict()
