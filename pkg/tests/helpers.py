"""Shared fixture builders for the test suite."""

from __future__ import annotations

import numpy as np

from breptok.geometry import BSplineCurve, BSplineSurface
from breptok.trimming import TrimLoop, TrimmedSurface, untrimmed_boundary_loop

CIRCLE_BEZIER_K = 4.0 / 3.0 * np.tan(np.pi / 8.0)


def line2d(a, b) -> BSplineCurve:
    return BSplineCurve(1, np.array([a, b], dtype=float), [0.0, 0.0, 1.0, 1.0])


def loop_of(curves) -> TrimLoop:
    return TrimLoop(tuple((c, False) for c in curves))


def polygon_loop(points) -> TrimLoop:
    pts = [np.asarray(p, dtype=float) for p in points]
    return loop_of([line2d(pts[k], pts[(k + 1) % len(pts)])
                    for k in range(len(pts))])


def flat_square_surface(z: float = 0.0, size: float = 1.0) -> BSplineSurface:
    grid = np.zeros((2, 2, 4))
    grid[:, :, 3] = 1.0
    grid[1, 0, 0] = size
    grid[0, 1, 1] = size
    grid[1, 1, :2] = size
    grid[:, :, 2] = z
    return BSplineSurface(1, 1, grid, [0, 0, 1, 1], [0, 0, 1, 1])


def bicubic_surface(rng, interior_u=1, interior_v=1, z_scale=0.3) -> BSplineSurface:
    ku = np.concatenate([[0.0] * 4, np.sort(rng.uniform(0.25, 0.75, interior_u)),
                         [1.0] * 4])
    kv = np.concatenate([[0.0] * 4, np.sort(rng.uniform(0.25, 0.75, interior_v)),
                         [1.0] * 4])
    nu, nv = 4 + interior_u, 4 + interior_v
    grid = np.zeros((nu, nv, 4))
    grid[:, :, 3] = 1.0
    for i in range(nu):
        for j in range(nv):
            grid[i, j, :3] = [i / (nu - 1), j / (nv - 1), z_scale * rng.normal()]
    return BSplineSurface(3, 3, grid, ku, kv)


def quarter_disc_loop() -> TrimLoop:
    """Quarter disc in the unit square: straight legs plus one cubic arc."""
    k = CIRCLE_BEZIER_K
    arc = BSplineCurve(3, np.array([[1, 0], [1, k], [k, 1], [0, 1]], dtype=float),
                       [0, 0, 0, 0, 1, 1, 1, 1])
    return loop_of([line2d((0, 0), (1, 0)), arc, line2d((0, 1), (0, 0))])


def quarter_disc_surface() -> TrimmedSurface:
    return TrimmedSurface(flat_square_surface(), (quarter_disc_loop(),))


def untrimmed(surface: BSplineSurface) -> TrimmedSurface:
    return TrimmedSurface(surface, (untrimmed_boundary_loop(surface),))


def square_with_hole(hole=(0.4, 0.6)) -> TrimmedSurface:
    lo, hi = hole
    outer = polygon_loop([(0, 0), (1, 0), (1, 1), (0, 1)])
    inner = polygon_loop([(lo, lo), (lo, hi), (hi, hi), (hi, lo)])  # clockwise
    return TrimmedSurface(flat_square_surface(), (outer, inner))


def quarter_disc_fit_setup():
    """Initial half-cell triangle plus arc samples mapped to its hypotenuse.

    The fit must bend the hypotenuse of the lower-left unit-cell triangle
    onto the quarter-circle arc; the straight loop legs along the domain
    edges are dropped from the sample chain.
    """
    from breptok.geometry import (
        decompose_surface,
        elevate_surface_degree,
        eval_surface,
        rect_to_triangles,
    )
    from breptok.trimming import TrimClassifier, _hypotenuse_samples

    ts = quarter_disc_surface()
    cell = elevate_surface_degree(decompose_surface(ts.surface)[0], (3, 3))
    tri, _ = rect_to_triangles(cell)
    cls = TrimClassifier([quarter_disc_loop()], domain=(0, 1, 0, 1))
    uv, fractions = cls.clipped_boundary_chain((0.0, 1.0, 0.0, 1.0), 32)
    interior = (uv[:, 0] > 1e-6) & (uv[:, 1] > 1e-6)
    uv = uv[interior]
    fractions = (np.arange(len(uv)) + 0.5) / len(uv)
    s, t, matched = _hypotenuse_samples(tri, uv, fractions)
    assert matched
    P = eval_surface(ts.surface, uv[:, 0], uv[:, 1])
    return tri, (s, t, P)
