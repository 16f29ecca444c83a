"""Split a rational Bezier rectangle into two Bezier triangles, exactly.

The conversion produces degree-(m+n) triangles whose control points are
convex combinations of the tensor-product net, so it commutes with rigid
motions and reproduces the patch to floating-point accuracy.
"""

import numpy as np

from breptok.geometry import (
    BezierRectangle,
    eval_bezier_rectangle,
    eval_bezier_triangle,
    rect_to_triangles,
)

rng = np.random.default_rng(7)
grid = np.empty((4, 4, 4))
for i in range(4):
    for j in range(4):
        grid[i, j] = [i, j, 0.5 * rng.normal(), rng.uniform(0.5, 2.0)]
rect = BezierRectangle(3, 3, grid, (0.0, 1.0, 0.0, 1.0))

lower, upper = rect_to_triangles(rect)
print(f"bicubic rectangle -> two degree-{lower.degree} triangles, "
      f"{len(lower.control_points)} control points each")

pts = rng.uniform(0, 1, size=(2000, 2))
pts = pts[pts.sum(axis=1) <= 1.0]
s, t = pts[:, 0], pts[:, 1]
dev_lower = np.max(np.abs(eval_bezier_triangle(lower, s, t)
                          - eval_bezier_rectangle(rect, s, t)))
dev_upper = np.max(np.abs(eval_bezier_triangle(upper, s, t)
                          - eval_bezier_rectangle(rect, 1 - s, 1 - t)))
print(f"max deviation, lower-left half:  {dev_lower:.2e}")
print(f"max deviation, upper-right half: {dev_upper:.2e}")

from breptok.geometry import _rect_to_tri_matrix

rows = _rect_to_tri_matrix(3, 3).sum(axis=1)
print(f"coefficient row sums in [{rows.min():.15f}, {rows.max():.15f}]")
