"""Tessellate a trimmed surface (quarter disc) into Bezier triangles.

Shows the quadtree in action: interior cells split exactly, boundary cells
subdivide until the trim curve runs corner-to-corner (or the depth cap),
and their triangles are refined by least squares so the hypotenuse bends
onto the trim curve.
"""

from collections import Counter

import numpy as np

from breptok.geometry import BSplineCurve, BSplineSurface
from breptok.trimming import FitConfig, TrimLoop, TrimmedSurface, tessellate_trimmed

# flat unit square surface
grid = np.zeros((2, 2, 4))
grid[:, :, 3] = 1.0
grid[1, 0, 0] = grid[0, 1, 1] = 1.0
grid[1, 1, :2] = 1.0
surface = BSplineSurface(1, 1, grid, [0, 0, 1, 1], [0, 0, 1, 1])

# quarter-disc trim: two straight legs plus one cubic arc
k = 4 / 3 * np.tan(np.pi / 8)
legs_and_arc = (
    (BSplineCurve(1, [[0, 0], [1, 0]], [0, 0, 1, 1]), False),
    (BSplineCurve(3, [[1, 0], [1, k], [k, 1], [0, 1]],
                  [0, 0, 0, 0, 1, 1, 1, 1]), False),
    (BSplineCurve(1, [[0, 1], [0, 0]], [0, 0, 1, 1]), False),
)
trimmed = TrimmedSurface(surface, (TrimLoop(legs_and_arc),))

for depth in (3, 4, 6):
    tris = tessellate_trimmed(trimmed, FitConfig(max_depth=depth))
    by_status = Counter(t.trim_status for t in tris)
    area = 0.0
    for t in tris:
        c = t.param_corners
        e1, e2 = c[1] - c[0], c[2] - c[0]
        area += 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    print(f"max_depth={depth}: {len(tris):4d} triangles {dict(by_status)}, "
          f"kept area {area:.5f} vs pi/4 = {np.pi / 4:.5f} "
          f"({abs(area - np.pi / 4) / (np.pi / 4):.2%} off)")

fits = [t.fit_deviation for t in tessellate_trimmed(trimmed, FitConfig())
        if t.trim_status == "boundary-fitted"]
print(f"boundary-fitted deviation bounds: max {max(fits):.2e}")
