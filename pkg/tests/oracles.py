"""Independent reference implementations used to check the main code paths.

Everything here is deliberately written from first principles (recursive
pyramids, repeated interpolation, brute-force scans) and shares no code
with the package under test.
"""

from __future__ import annotations

import numpy as np


def de_boor_point(degree, knots, control_points, t):
    """de Boor's recursive pyramid for one parameter value."""
    knots = np.asarray(knots, dtype=float)
    P = np.asarray(control_points, dtype=float)
    n_ctrl = len(P)
    # locate span [u_k, u_{k+1}) containing t; right end maps to last span
    k = degree
    for i in range(degree, n_ctrl):
        if knots[i] <= t < knots[i + 1]:
            k = i
            break
    else:
        k = n_ctrl - 1
        while k > degree and knots[k] >= knots[k + 1]:
            k -= 1
    d = [P[j + k - degree].copy() for j in range(degree + 1)]
    for r in range(1, degree + 1):
        for j in range(degree, r - 1, -1):
            i = j + k - degree
            den = knots[i + degree - r + 1] - knots[i]
            alpha = 0.0 if den == 0.0 else (t - knots[i]) / den
            d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j]
    return d[degree]


def de_casteljau_point(control_points, t):
    """Repeated linear interpolation on a Bezier control polygon."""
    work = np.asarray(control_points, dtype=float).copy()
    while len(work) > 1:
        work = (1.0 - t) * work[:-1] + t * work[1:]
    return work[0]


def two_stage_surface_point(surface, u, v):
    """Evaluate a rational tensor-product surface row-by-row, then combine.

    Each row of the homogeneous control grid (fixed u index) is treated as
    a 4-component B-spline "curve" in v; the resulting points form a curve
    in u evaluated last.
    """
    grid = np.asarray(surface.control_points, dtype=float)
    H = grid.copy()
    H[..., :3] *= H[..., 3:4]
    rows = np.stack([
        de_boor_point(surface.degree_v, surface.knots_v, H[i], v)
        for i in range(grid.shape[0])
    ])
    h = de_boor_point(surface.degree_u, surface.knots_u, rows, u)
    return h[:3] / h[3]


def winding_number(polyline, px, py):
    """Nonzero-winding count of a closed polyline around a point."""
    x1, y1 = polyline[:-1, 0], polyline[:-1, 1]
    x2, y2 = polyline[1:, 0], polyline[1:, 1]
    side = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    up = (y1 <= py) & (y2 > py) & (side > 0)
    down = (y1 > py) & (y2 <= py) & (side < 0)
    return int(up.sum()) - int(down.sum())


def quadtree_dfs_order(leaves):
    """Depth-first quadrant traversal order over a quadtree leaf set.

    ``leaves`` maps (x, y, depth) -> payload. Quadrants are visited in the
    order (0,0), (1,0), (0,1), (1,1).
    """
    out = []
    max_depth = max(d for (_, _, d) in leaves)

    def visit(x, y, depth):
        if (x, y, depth) in leaves:
            out.append((x, y, depth))
            return
        if depth >= max_depth:
            return
        for dx, dy in ((0, 0), (1, 0), (0, 1), (1, 1)):
            visit(2 * x + dx, 2 * y + dy, depth + 1)

    visit(0, 0, 0)
    return out


def brute_force_adjacency(faces_to_edges):
    """All face pairs sharing at least one edge, by pairwise scan."""
    ids = sorted(faces_to_edges)
    neighbors = {f: set() for f in ids}
    for a in ids:
        for b in ids:
            if a == b:
                continue
            if faces_to_edges[a] & faces_to_edges[b]:
                neighbors[a].add(b)
    return neighbors
