import math

import numpy as np
import pytest

from hybridsync.geometry import DegenerateInputError, estimate_rigid_transform
from hybridsync.quaternion import Quaternion


def random_points(rng, n):
    return rng.uniform(-1.0, 1.0, size=(n, 3))


def apply_pose_array(pose, pts):
    r = pose.rotation.to_matrix()
    return pts @ r.T + np.array(pose.translation)


class TestEstimateRigidTransform:
    def test_identity_when_dst_equals_src(self):
        rng = np.random.default_rng(1)
        pts = random_points(rng, 10)
        pose = estimate_rigid_transform(pts, pts)
        assert pose.rotation.angle_to(Quaternion.identity()) < 1e-6
        assert np.linalg.norm(pose.translation) < 1e-9

    def test_recovers_known_transform(self):
        rng = np.random.default_rng(2)
        src = random_points(rng, 10)
        rot = Quaternion.from_axis_angle((0, 0, 1), math.radians(30.0))
        t = np.array([1.0, 2.0, 3.0])
        dst = src @ rot.to_matrix().T + t
        pose = estimate_rigid_transform(src, dst)
        assert pose.rotation.angle_to(rot) < 1e-6
        assert np.linalg.norm(np.array(pose.translation) - t) < 1e-6

    def test_zero_noise_recovery_many_random_transforms(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            src = random_points(rng, 8)
            rot = Quaternion.normalized(*rng.normal(size=4))
            t = rng.uniform(-2, 2, size=3)
            dst = src @ rot.to_matrix().T + t
            pose = estimate_rigid_transform(src, dst)
            assert pose.rotation.angle_to(rot) < 1e-6
            assert np.linalg.norm(np.array(pose.translation) - t) < 1e-6

    def test_rotation_is_always_proper(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            src = random_points(rng, 5)
            dst = random_points(rng, 5)
            try:
                pose = estimate_rigid_transform(src, dst)
            except DegenerateInputError:
                continue
            assert np.linalg.det(pose.rotation.to_matrix()) == pytest.approx(1.0, abs=1e-9)

    def test_noisy_rms_within_three_sigma(self):
        # 50 points, sigma = 5 mm, 100 seeded trials.
        sigma = 0.005
        rng = np.random.default_rng(5)
        for _ in range(100):
            src = random_points(rng, 50)
            rot = Quaternion.normalized(*rng.normal(size=4))
            t = rng.uniform(-1, 1, size=3)
            dst = src @ rot.to_matrix().T + t + rng.normal(scale=sigma, size=src.shape)
            pose = estimate_rigid_transform(src, dst)
            residual = apply_pose_array(pose, src) - dst
            rms = math.sqrt(float((residual**2).sum(axis=1).mean()))
            assert rms <= 3.0 * sigma

    def test_planar_points_are_fine(self):
        rng = np.random.default_rng(6)
        src = random_points(rng, 12)
        src[:, 2] = 0.0
        rot = Quaternion.from_axis_angle((1, 1, 0), 0.8)
        dst = src @ rot.to_matrix().T + np.array([0.1, -0.2, 0.3])
        pose = estimate_rigid_transform(src, dst)
        assert pose.rotation.angle_to(rot) < 1e-6

    def test_too_few_points(self):
        with pytest.raises(DegenerateInputError):
            estimate_rigid_transform([(0, 0, 0), (1, 0, 0)], [(0, 0, 0), (1, 0, 0)])

    def test_length_mismatch(self):
        with pytest.raises(DegenerateInputError):
            estimate_rigid_transform(
                [(0, 0, 0), (1, 0, 0), (0, 1, 0)], [(0, 0, 0), (1, 0, 0)]
            )

    def test_collinear_points_degenerate(self):
        src = np.array([[float(i), 0.0, 0.0] for i in range(6)])
        with pytest.raises(DegenerateInputError):
            estimate_rigid_transform(src, src)

    def test_coincident_points_degenerate(self):
        src = np.zeros((5, 3))
        with pytest.raises(DegenerateInputError):
            estimate_rigid_transform(src, src)
