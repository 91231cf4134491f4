import numpy as np
import pytest

from splatsr.errors import DataError, UsageError
from splatsr.scene import (Camera, GaussianScene, covariance_from_params,
                           init_scene_random, load_cameras, load_scene,
                           quat_to_rotation, quats_to_rotations, save_cameras,
                           save_scene, scenes_equal)


def test_quat_identity():
    np.testing.assert_allclose(quat_to_rotation([1, 0, 0, 0]), np.eye(3),
                               atol=1e-15)


def test_quat_known_z_rotation():
    # 90 degrees about +z: q = (cos45, 0, 0, sin45).
    c = np.cos(np.pi / 4)
    R = quat_to_rotation([c, 0, 0, c])
    expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    np.testing.assert_allclose(R, expected, atol=1e-15)


def test_quat_orthonormal_and_scale_invariant(rng):
    for _ in range(20):
        q = rng.normal(size=4)
        R = quat_to_rotation(q)
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(quat_to_rotation(3.7 * q), R, atol=1e-12)


def test_quat_zero_raises():
    with pytest.raises(UsageError):
        quat_to_rotation([0.0, 0.0, 0.0, 0.0])


def test_quats_to_rotations_matches_scalar(rng):
    q = rng.normal(size=(8, 4))
    batched = quats_to_rotations(q)
    for i in range(8):
        np.testing.assert_allclose(batched[i], quat_to_rotation(q[i]),
                                   atol=1e-14)


def test_covariance_spd_and_eigenvalues(rng):
    s = rng.uniform(-1.0, 1.0, 3)
    cov = covariance_from_params(s, rng.normal(size=4))
    np.testing.assert_allclose(cov, cov.T, atol=1e-14)
    eig = np.sort(np.linalg.eigvalsh(cov))
    np.testing.assert_allclose(eig, np.sort(np.exp(2 * s)), rtol=1e-10)


def test_camera_rejects_non_orthonormal():
    with pytest.raises(DataError):
        Camera(rotation_w2c=np.eye(3) + 1e-3, translation_w2c=np.zeros(3),
               focal=(10.0, 10.0), principal_point=(7.5, 7.5),
               width=16, height=16)


def test_camera_scaled_identity_and_center():
    cam = Camera(rotation_w2c=np.eye(3), translation_w2c=[1.0, 2.0, 3.0],
                 focal=(100.0, 110.0), principal_point=(63.5, 59.5),
                 width=128, height=120)
    assert cam.scaled(1.0) == (100.0, 110.0, 63.5, 59.5, 128, 120)
    fx, fy, cx, cy, w, h = cam.scaled(0.25)
    assert (w, h) == (32, 30)
    assert fx == 25.0 and fy == 27.5
    # Pixel-center alignment: HR center 63.5 maps to (63.5+0.5)/4 - 0.5.
    assert cx == pytest.approx(15.5)
    np.testing.assert_allclose(cam.center_world(), [-1.0, -2.0, -3.0])


def test_init_scene_random_deterministic():
    a = init_scene_random(50, (np.full(3, -1.0), np.full(3, 1.0)), seed=7)
    b = init_scene_random(50, (np.full(3, -1.0), np.full(3, 1.0)), seed=7)
    assert scenes_equal(a, b)
    c = init_scene_random(50, (np.full(3, -1.0), np.full(3, 1.0)), seed=8)
    assert not scenes_equal(a, c)
    assert np.all(a.positions >= -1.0) and np.all(a.positions <= 1.0)
    np.testing.assert_allclose(a.opacities(), 0.5)


def test_scene_roundtrip_bit_exact(tmp_path, rng):
    scene = init_scene_random(17, (np.full(3, -2.0), np.full(3, 2.0)), seed=3,
                              background=(0.25, 0.5, 0.75))
    # Awkward values: denormal-ish, negative zero, many digits.
    scene.positions[0, 0] = 0.1 + 0.2
    scene.log_scales[1, 2] = -0.0
    scene.colors[2, 1] = 1.0 / 3.0
    path = tmp_path / "scene.txt"
    save_scene(scene, path)
    loaded = load_scene(path)
    assert scenes_equal(scene, loaded)


def test_empty_scene_roundtrip(tmp_path):
    scene = GaussianScene.empty(background=(0.1, 0.2, 0.3))
    path = tmp_path / "empty.txt"
    save_scene(scene, path)
    loaded = load_scene(path)
    assert loaded.count == 0
    np.testing.assert_array_equal(loaded.background, scene.background)


def test_load_scene_bad_header(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("not a scene\n")
    with pytest.raises(DataError):
        load_scene(path)


def test_load_scene_truncated(tmp_path):
    scene = init_scene_random(5, (np.full(3, -1.0), np.full(3, 1.0)), seed=0)
    path = tmp_path / "trunc.txt"
    save_scene(scene, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-2]) + "\n")
    with pytest.raises(DataError, match="truncated"):
        load_scene(path)


def test_load_scene_bad_field_count(tmp_path):
    scene = init_scene_random(2, (np.full(3, -1.0), np.full(3, 1.0)), seed=0)
    path = tmp_path / "fields.txt"
    save_scene(scene, path)
    lines = path.read_text().splitlines()
    lines[2] += " 0.5"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match="14 fields"):
        load_scene(path)


def test_cameras_roundtrip(tmp_path, rng):
    cams = []
    for i in range(3):
        q = rng.normal(size=4)
        cams.append(Camera(
            rotation_w2c=quat_to_rotation(q),
            translation_w2c=rng.normal(size=3),
            focal=(100.0 + i, 90.0), principal_point=(63.5, 63.5),
            width=128, height=128, near_plane=0.05))
    path = tmp_path / "cams.txt"
    save_cameras(cams, path)
    loaded = load_cameras(path)
    assert len(loaded) == 3
    for a, b in zip(cams, loaded):
        assert np.array_equal(a.rotation_w2c, b.rotation_w2c)
        assert np.array_equal(a.translation_w2c, b.translation_w2c)
        assert a.focal == b.focal
        assert a.principal_point == b.principal_point
        assert (a.width, a.height, a.near_plane) == (b.width, b.height, b.near_plane)


def test_load_cameras_bad_magic(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("whatever\n1\n")
    with pytest.raises(DataError):
        load_cameras(path)
