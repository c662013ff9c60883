import numpy as np
import pytest

from hybridsync.geometry import (
    PointSide,
    SlicePlane,
    classify_point,
    clip_mesh,
    make_reference_mesh,
    make_unit_cube,
)


def oracle_clip_area(mesh, plane):
    """Independent kept-area oracle: per-triangle polygon clip written from
    scratch (distance-interpolation form, no epsilon band)."""
    total = 0.0
    v = mesh.vertices
    n = np.array(plane.normal)
    for i0, i1, i2 in mesh.triangles:
        poly = [v[i0], v[i1], v[i2]]
        out = []
        for k in range(len(poly)):
            cur, nxt = poly[k], poly[(k + 1) % len(poly)]
            dc = cur @ n - plane.offset
            dn = nxt @ n - plane.offset
            if dc <= 0:
                out.append(cur)
            if (dc < 0 < dn) or (dn < 0 < dc):
                out.append(cur + (dc / (dc - dn)) * (nxt - cur))
        if len(out) >= 3:
            for k in range(1, len(out) - 1):
                total += 0.5 * np.linalg.norm(
                    np.cross(out[k] - out[0], out[k + 1] - out[0])
                )
    return total


def offset_cube():
    return make_unit_cube(center=(0.5, 0.5, 0.5))  # the [0,1]^3 cube


class TestClassifyPoint:
    def test_on_plane(self):
        plane = SlicePlane((0, 0, 1), 0.5)
        assert classify_point(plane, (0.3, -2.0, 0.5)) is PointSide.ON_PLANE

    def test_kept(self):
        assert classify_point(SlicePlane((0, 0, 1), 0.5), (0, 0, 0)) is PointSide.KEPT

    def test_cut(self):
        assert classify_point(SlicePlane((0, 0, 1), 0.5), (0, 0, 1)) is PointSide.CUT


class TestClipMesh:
    def test_empty_plane_list_is_identity(self):
        mesh = offset_cube()
        out = clip_mesh(mesh, [])
        assert out is not mesh
        assert out.same_geometry(mesh)

    def test_half_cube_kept_area(self):
        # [0,1]^3 cut at z = 0.5: bottom face (1.0) + four half walls (4 x 0.5).
        mesh = offset_cube()
        plane = SlicePlane((0, 0, 1), 0.5)
        out = clip_mesh(mesh, [plane])
        assert out.area() == pytest.approx(3.0, abs=1e-6)
        assert out.area() == pytest.approx(oracle_clip_area(mesh, plane), abs=1e-9)

    def test_plane_below_mesh_empty_output(self):
        mesh = offset_cube()
        out = clip_mesh(mesh, [SlicePlane((0, 0, 1), -1.0)])
        assert out.triangle_count == 0
        assert out.area() == 0.0

    def test_plane_above_mesh_keeps_everything(self):
        mesh = offset_cube()
        out = clip_mesh(mesh, [SlicePlane((0, 0, 1), 5.0)])
        assert out.area() == pytest.approx(6.0, abs=1e-9)

    def test_input_never_mutated(self):
        mesh = offset_cube()
        before_v = mesh.vertices.copy()
        before_t = mesh.triangles.copy()
        clip_mesh(mesh, [SlicePlane((0, 0, 1), 0.5), SlicePlane((1, 0, 0), 0.25)])
        np.testing.assert_array_equal(mesh.vertices, before_v)
        np.testing.assert_array_equal(mesh.triangles, before_t)

    def test_area_monotone_as_planes_append(self):
        mesh = make_reference_mesh()
        rng = np.random.default_rng(11)
        planes = []
        prev_area = mesh.area()
        for _ in range(6):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            planes.append(SlicePlane(tuple(n), float(rng.uniform(-0.2, 0.4))))
            area = clip_mesh(mesh, planes).area()
            assert area <= prev_area + 1e-9
            prev_area = area

    def test_two_sides_partition_area(self):
        mesh = make_reference_mesh()
        rng = np.random.default_rng(12)
        for _ in range(8):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            plane = SlicePlane(tuple(n), float(rng.uniform(-0.3, 0.3)))
            kept = clip_mesh(mesh, [plane]).area()
            cut = clip_mesh(mesh, [plane.flipped()]).area()
            total = mesh.area()
            assert kept + cut >= total - 1e-6 * total
            assert kept + cut <= total + 1e-6 * total

    def test_matches_oracle_on_random_planes(self):
        mesh = offset_cube()
        rng = np.random.default_rng(13)
        for _ in range(25):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            plane = SlicePlane(tuple(n), float(rng.uniform(-0.5, 1.2)))
            assert clip_mesh(mesh, [plane]).area() == pytest.approx(
                oracle_clip_area(mesh, plane), abs=1e-9
            )

    def test_deterministic(self):
        mesh = make_reference_mesh()
        planes = [SlicePlane((0, 0, 1), 0.1), SlicePlane((1, 0, 0), 0.0)]
        a = clip_mesh(mesh, planes)
        b = clip_mesh(mesh, planes)
        assert a.same_geometry(b)
