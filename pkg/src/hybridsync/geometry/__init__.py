"""Triangle-mesh geometry: loading, raycasting, slicing, and rigid registration."""

from hybridsync.geometry.clipping import PointSide, classify_point, clip_mesh
from hybridsync.geometry.mesh import TriangleMesh, make_reference_mesh, make_unit_cube
from hybridsync.geometry.meshio import MeshParseError, load_mesh, load_mesh_path
from hybridsync.geometry.raycast import RayHit, ray_intersect
from hybridsync.geometry.registration import DegenerateInputError, estimate_rigid_transform
from hybridsync.geometry.types import (
    Ray,
    RigidPose,
    SlicePlane,
    compose_pose,
    invert_pose,
    transform_point,
    transform_ray,
)

__all__ = [
    "Ray",
    "RigidPose",
    "SlicePlane",
    "compose_pose",
    "invert_pose",
    "transform_point",
    "transform_ray",
    "TriangleMesh",
    "make_unit_cube",
    "make_reference_mesh",
    "MeshParseError",
    "load_mesh",
    "load_mesh_path",
    "RayHit",
    "ray_intersect",
    "PointSide",
    "classify_point",
    "clip_mesh",
    "DegenerateInputError",
    "estimate_rigid_transform",
]
