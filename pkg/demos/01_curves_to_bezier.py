"""Decompose a B-spline curve into Bezier segments and check fidelity.

Walks through the one-dimensional half of the geometry kernel: basis
evaluation, knot insertion, and the exact split of a cubic B-spline into
knot-free Bezier pieces.
"""

import numpy as np

from breptok.geometry import (
    BSplineCurve,
    decompose_curve,
    eval_bezier_curve,
    eval_curve,
    insert_knot,
)

rng = np.random.default_rng(42)

# a cubic with three interior knots -> four Bezier segments
knots = [0, 0, 0, 0, 0.3, 0.55, 0.8, 1, 1, 1, 1]
ctrl = rng.normal(size=(7, 3))
curve = BSplineCurve(3, ctrl, knots)
print(f"curve: degree {curve.degree}, {len(ctrl)} control points, "
      f"domain {curve.domain}")

# knot insertion leaves every point of the curve where it was
refined = insert_knot(curve, 0.42)
ts = np.linspace(0, 1, 400)
dev = np.max(np.abs(eval_curve(curve, ts) - eval_curve(refined, ts)))
print(f"insert_knot(0.42): {len(refined.control_points)} control points, "
      f"max shape deviation {dev:.2e}")

segments = decompose_curve(curve)
print(f"decompose_curve: {len(segments)} Bezier segments")
for seg in segments:
    local = np.linspace(0, 1, 100)
    global_t = seg.t0 + local * (seg.t1 - seg.t0)
    err = np.max(np.abs(eval_bezier_curve(seg.curve, local)
                        - eval_curve(curve, global_t)))
    print(f"  [{seg.t0:.2f}, {seg.t1:.2f}] max deviation {err:.2e}")
