"""Independent test oracles shared between unit and acceptance tests.

The raycast oracles use plane intersection plus a barycentric inside test,
a different formulation from the implementation's Moller-Trumbore, so the
two routes check each other.
"""

import numpy as np


def brute_force_intersect_scalar(mesh, ray):
    """Per-triangle Python loop; slow but maximally simple."""
    o = np.array(ray.origin)
    d = np.array(ray.direction)
    best = None
    v = mesh.vertices
    for idx, (i0, i1, i2) in enumerate(mesh.triangles):
        a, b, c = v[i0], v[i1], v[i2]
        n = np.cross(b - a, c - a)
        denom = n @ d
        if abs(denom) < 1e-9:
            continue
        t = (n @ (a - o)) / denom
        if t < 0.0:
            continue
        p = o + t * d
        w0 = np.cross(b - a, p - a) @ n
        w1 = np.cross(c - b, p - b) @ n
        w2 = np.cross(a - c, p - c) @ n
        nn = n @ n
        if w0 >= -1e-12 * nn and w1 >= -1e-12 * nn and w2 >= -1e-12 * nn:
            if best is None or t < best[1]:
                best = (idx, t)
    return best


def brute_force_intersect(mesh, ray):
    """Vectorized form of the same plane/barycentric test.

    Returns (triangle_index, t) of the nearest hit or None.
    """
    if mesh.triangle_count == 0:
        return None
    a, b, c = mesh.corner_arrays()
    o = np.array(ray.origin)
    d = np.array(ray.direction)

    n = np.cross(b - a, c - a)
    denom = n @ d
    ok = np.abs(denom) >= 1e-9
    safe = np.where(ok, denom, 1.0)
    t = np.einsum("ij,ij->i", n, a - o) / safe
    ok &= t >= 0.0

    p = o + t[:, None] * d
    w0 = np.einsum("ij,ij->i", np.cross(b - a, p - a), n)
    w1 = np.einsum("ij,ij->i", np.cross(c - b, p - b), n)
    w2 = np.einsum("ij,ij->i", np.cross(a - c, p - c), n)
    nn = np.einsum("ij,ij->i", n, n)
    tol = -1e-12 * nn
    ok &= (w0 >= tol) & (w1 >= tol) & (w2 >= tol)

    if not ok.any():
        return None
    t_masked = np.where(ok, t, np.inf)
    idx = int(np.argmin(t_masked))
    return idx, float(t[idx])


def random_rays_at_mesh(rng, count, distance=3.0, jitter=0.25):
    """Seeded rays from a sphere of the given radius aimed near the origin."""
    from hybridsync.geometry import Ray

    rays = []
    for _ in range(count):
        origin = rng.normal(size=3)
        origin = origin / np.linalg.norm(origin) * distance
        direction = -origin + rng.normal(scale=jitter, size=3)
        direction = direction / np.linalg.norm(direction)
        rays.append(Ray(tuple(origin), tuple(direction)))
    return rays
