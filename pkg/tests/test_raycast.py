import numpy as np
import pytest
from _oracles import (
    brute_force_intersect,
    brute_force_intersect_scalar,
    random_rays_at_mesh,
)

from hybridsync.geometry import (
    Ray,
    TriangleMesh,
    make_reference_mesh,
    make_unit_cube,
    ray_intersect,
)


class TestRayIntersect:
    def test_cube_front_face_hit(self):
        mesh = make_unit_cube()
        ray = Ray((0.0, 0.0, -5.0), (0.0, 0.0, 1.0))
        hit = ray_intersect(mesh, ray)
        assert hit is not None
        assert hit.t == pytest.approx(4.5, abs=1e-12)
        assert hit.point[2] == pytest.approx(-0.5, abs=1e-12)
        oracle = brute_force_intersect_scalar(mesh, ray)
        assert oracle is not None
        assert hit.triangle_index == oracle[0]
        assert abs(hit.t - oracle[1]) < 1e-9

    def test_miss_returns_none(self):
        mesh = make_unit_cube()
        assert ray_intersect(mesh, Ray((0.0, 0.0, -5.0), (0.0, 0.0, -1.0))) is None
        assert ray_intersect(mesh, Ray((5.0, 5.0, 5.0), (0.0, 0.0, 1.0))) is None

    def test_origin_inside_cube_hits_far_face(self):
        mesh = make_unit_cube()
        hit = ray_intersect(mesh, Ray((0.1, 0.07, 0.0), (0.0, 0.0, 1.0)))
        assert hit is not None
        assert hit.point[2] == pytest.approx(0.5)

    def test_tie_broken_by_lowest_triangle_index(self):
        # Two coincident triangles: same t, the lower index must win.
        verts = [(-1, -1, 1), (1, -1, 1), (0, 1, 1)]
        mesh = TriangleMesh(np.array(verts, dtype=float), np.array([[0, 1, 2], [0, 1, 2]]))
        hit = ray_intersect(mesh, Ray((0.0, 0.0, 0.0), (0.0, 0.0, 1.0)))
        assert hit is not None
        assert hit.triangle_index == 0

    def test_vectorized_oracle_matches_scalar_oracle(self):
        # The acceptance sweep relies on the vectorized oracle; pin it to
        # the simple per-triangle loop on a small sample first.
        mesh = make_reference_mesh()
        rng = np.random.default_rng(77)
        for ray in random_rays_at_mesh(rng, 12):
            slow = brute_force_intersect_scalar(mesh, ray)
            fast = brute_force_intersect(mesh, ray)
            assert (slow is None) == (fast is None)
            if slow is not None:
                assert slow[0] == fast[0]
                assert abs(slow[1] - fast[1]) < 1e-12

    def test_random_rays_match_oracle_on_reference_mesh(self):
        mesh = make_reference_mesh()
        assert mesh.triangle_count == 10000
        rng = np.random.default_rng(2024)
        tested_hits = 0
        for ray in random_rays_at_mesh(rng, 200):
            hit = ray_intersect(mesh, ray)
            oracle = brute_force_intersect(mesh, ray)
            if oracle is None:
                assert hit is None
            else:
                assert hit is not None
                assert hit.triangle_index == oracle[0]
                assert abs(hit.t - oracle[1]) < 1e-9
                tested_hits += 1
        assert tested_hits > 100
