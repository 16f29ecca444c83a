"""Synthetic solid generators used for tests, demos, and dataset creation.

Four families: axis-aligned boxes, plates with cylindrical through-holes
(genuinely trimmed faces plus closed circle edges and a seam edge), prisms
extruded from convex polygons (trimmed planar caps), and open wavy bicubic
sheets. Every generator is deterministic given its seed.
"""

from __future__ import annotations

import numpy as np

from .geometry import BSplineCurve, BSplineSurface
from .topology import BRepModel, EdgeRec, FaceRec, LoopRec, ShellRec, VertexRec
from .trimming import TrimLoop, TrimmedSurface

# one cubic segment per 60 degrees keeps radial error below 1e-4 * radius
CIRCLE_SEGMENTS = 6
_CIRCLE_K = 4.0 / 3.0 * np.tan(np.pi / (2 * CIRCLE_SEGMENTS) / 2)


class _Builder:
    """Incremental model assembly with id bookkeeping and edge sharing."""

    def __init__(self):
        self.vertices: dict[int, VertexRec] = {}
        self.edges: dict[int, EdgeRec] = {}
        self.loops: dict[int, LoopRec] = {}
        self.faces: dict[int, FaceRec] = {}
        self.shells: dict[int, ShellRec] = {}
        self._vkey: dict[tuple, int] = {}
        self._ekey: dict[tuple, int] = {}
        self._next = 0

    def _new_id(self) -> int:
        self._next += 1
        return self._next

    def vertex(self, point) -> int:
        key = tuple(np.round(np.asarray(point, dtype=float), 9))
        if key not in self._vkey:
            vid = self._new_id()
            self._vkey[key] = vid
            self.vertices[vid] = VertexRec(vid, np.asarray(point, dtype=float))
        return self._vkey[key]

    def line_edge(self, a, b) -> tuple[int, bool]:
        """Straight edge between two points, shared across faces.

        Returns (edge id, reversed) where reversed means the stored edge
        runs b -> a.
        """
        va, vb = self.vertex(a), self.vertex(b)
        key = (min(va, vb), max(va, vb))
        if key in self._ekey:
            eid = self._ekey[key]
            return eid, self.edges[eid].start_vertex != va
        eid = self._new_id()
        self._ekey[key] = eid
        curve = BSplineCurve(1, np.vstack([a, b]).astype(float),
                             [0.0, 0.0, 1.0, 1.0])
        self.edges[eid] = EdgeRec(eid, curve, va, vb, 0.0, 1.0)
        return eid, False

    def curve_edge(self, curve: BSplineCurve) -> int:
        """Edge spanning a full curve; closed when endpoints coincide."""
        lo, hi = curve.domain
        from .geometry import eval_curve

        va = self.vertex(eval_curve(curve, lo))
        vb = self.vertex(eval_curve(curve, hi))
        eid = self._new_id()
        self.edges[eid] = EdgeRec(eid, curve, va, vb, lo, hi)
        return eid

    def loop(self, entries, is_outer=True) -> int:
        lid = self._new_id()
        self.loops[lid] = LoopRec(lid, tuple(entries), is_outer)
        return lid

    def face(self, geometry: TrimmedSurface, outer: int,
             inners=()) -> int:
        fid = self._new_id()
        self.faces[fid] = FaceRec(fid, geometry, outer, tuple(inners))
        return fid

    def shell(self, face_ids) -> int:
        sid = self._new_id()
        self.shells[sid] = ShellRec(sid, tuple(face_ids))
        return sid

    def model(self) -> BRepModel:
        return BRepModel(self.vertices, self.edges, self.loops, self.faces,
                         self.shells)


def _line2d(a, b) -> BSplineCurve:
    return BSplineCurve(1, np.array([a, b], dtype=float),
                        [0.0, 0.0, 1.0, 1.0])


def _plane_surface(origin, u_axis, v_axis, u1: float, v1: float) -> BSplineSurface:
    """Bilinear patch origin + u*u_axis + v*v_axis over [0,u1] x [0,v1]."""
    origin = np.asarray(origin, dtype=float)
    u_axis = np.asarray(u_axis, dtype=float)
    v_axis = np.asarray(v_axis, dtype=float)
    grid = np.ones((2, 2, 4))
    grid[0, 0, :3] = origin
    grid[1, 0, :3] = origin + u1 * u_axis
    grid[0, 1, :3] = origin + v1 * v_axis
    grid[1, 1, :3] = origin + u1 * u_axis + v1 * v_axis
    return BSplineSurface(1, 1, grid, [0, 0, u1, u1], [0, 0, v1, v1])


def _planar_face(builder: _Builder, origin, u_axis, v_axis, u1, v1,
                 polygon2d=None, holes2d=()) -> int:
    """Planar face whose loops are straight-edged polygons in (u, v).

    ``polygon2d`` defaults to the full domain rectangle; it must be listed
    counter-clockwise, holes clockwise. Edges are shared through the
    builder so adjacent faces pick them up automatically.
    """
    origin = np.asarray(origin, dtype=float)
    u_axis = np.asarray(u_axis, dtype=float)
    v_axis = np.asarray(v_axis, dtype=float)
    surface = _plane_surface(origin, u_axis, v_axis, u1, v1)

    def to3d(p):
        return origin + p[0] * u_axis + p[1] * v_axis

    if polygon2d is None:
        polygon2d = [(0.0, 0.0), (u1, 0.0), (u1, v1), (0.0, v1)]

    def polygon_loop(points2d):
        entries = []
        trim_entries = []
        n = len(points2d)
        for k in range(n):
            a2 = np.asarray(points2d[k], dtype=float)
            b2 = np.asarray(points2d[(k + 1) % n], dtype=float)
            eid, reversed_ = builder.line_edge(to3d(a2), to3d(b2))
            entries.append((eid, reversed_))
            pts = (b2, a2) if reversed_ else (a2, b2)
            trim_entries.append((_line2d(*pts), reversed_))
        return entries, trim_entries

    outer_entries, outer_trim = polygon_loop(polygon2d)
    loop_ids = [builder.loop(outer_entries, is_outer=True)]
    trim_loops = [TrimLoop(tuple(outer_trim))]
    for hole in holes2d:
        entries, trim = polygon_loop(hole)
        loop_ids.append(builder.loop(entries, is_outer=False))
        trim_loops.append(TrimLoop(tuple(trim)))
    geometry = TrimmedSurface(surface, tuple(trim_loops))
    return builder.face(geometry, loop_ids[0], loop_ids[1:])


def circle_bspline(center, radius: float, dim3_z: float | None = None) -> BSplineCurve:
    """Closed cubic approximation of a circle (six 60-degree arcs, CCW).

    Radial deviation stays below 1e-4 of the radius. 2D when ``dim3_z`` is
    None, otherwise embedded in the z = dim3_z plane.
    """
    center = np.asarray(center, dtype=float)
    n = CIRCLE_SEGMENTS
    ctrl2d = []
    for k in range(n):
        a0 = 2 * np.pi * k / n
        a1 = 2 * np.pi * (k + 1) / n
        p0 = center + radius * np.array([np.cos(a0), np.sin(a0)])
        p3 = center + radius * np.array([np.cos(a1), np.sin(a1)])
        t0 = radius * np.array([-np.sin(a0), np.cos(a0)])
        t1 = radius * np.array([-np.sin(a1), np.cos(a1)])
        seg = [p0, p0 + _CIRCLE_K * t0, p3 - _CIRCLE_K * t1]
        ctrl2d.extend(seg)
    ctrl2d.append(ctrl2d[0])
    ctrl = np.asarray(ctrl2d, dtype=float)
    if dim3_z is not None:
        ctrl = np.hstack([ctrl, np.full((len(ctrl), 1), dim3_z)])
    knots = np.concatenate([[0.0]] + [[k] * 3 for k in range(n + 1)] + [[n]])
    return BSplineCurve(3, ctrl, knots)


def generate_box(lx: float, ly: float, lz: float) -> BRepModel:
    """Closed box: 8 vertices, 12 edges, 6 bilinear faces, one shell."""
    b = _Builder()
    o = np.array([0.0, 0.0, 0.0])
    ex = np.array([1.0, 0.0, 0.0])
    ey = np.array([0.0, 1.0, 0.0])
    ez = np.array([0.0, 0.0, 1.0])
    faces = [
        _planar_face(b, o, ey, ex, ly, lx),                     # bottom
        _planar_face(b, o + lz * ez, ex, ey, lx, ly),           # top
        _planar_face(b, o, ex, ez, lx, lz),                     # front y=0
        _planar_face(b, o + ly * ey, ez, ex, lz, lx),           # back
        _planar_face(b, o, ez, ey, lz, ly),                     # left x=0
        _planar_face(b, o + lx * ex, ey, ez, ly, lz),           # right
    ]
    b.shell(faces)
    return b.model()


def generate_cube(size: float = 1.0, seed: int | None = None) -> BRepModel:
    """Cube, or a mildly randomized box when a seed is given."""
    if seed is None:
        return generate_box(size, size, size)
    rng = np.random.default_rng(seed)
    sides = size * np.exp(rng.uniform(-0.4, 0.4, 3))
    return generate_box(*sides)


def generate_plate_with_holes(lx: float = 4.0, ly: float = 3.0,
                              lz: float = 0.6, holes=None,
                              seed: int | None = None) -> BRepModel:
    """Rectangular plate with cylindrical through-holes.

    The top and bottom faces are genuinely trimmed (circular inner loops);
    each hole contributes a lateral surface with one closed circle edge per
    cap and a seam edge used twice by the same loop.
    """
    if holes is None:
        rng = np.random.default_rng(seed if seed is not None else 0)
        n = int(rng.integers(1, 4)) if seed is not None else 2
        holes = []
        for _ in range(n):
            r = float(rng.uniform(0.25, 0.45)) * min(lx, ly) / 4
            cx = float(rng.uniform(0.25 * lx, 0.75 * lx))
            cy = float(rng.uniform(0.25 * ly, 0.75 * ly))
            if all((cx - h[0]) ** 2 + (cy - h[1]) ** 2 > (r + h[2] + 0.1) ** 2
                   for h in holes):
                holes.append((cx, cy, r))
        if not holes:
            holes = [(lx / 2, ly / 2, 0.2 * min(lx, ly))]
    b = _Builder()
    o = np.array([0.0, 0.0, 0.0])
    ex, ey, ez = np.eye(3)
    hole_edges: dict[tuple, int] = {}

    # caps get circular hole loops appended, so build them by hand
    def cap_face(origin, u_axis, v_axis, u1, v1, z, xy_to_uv):
        surface = _plane_surface(origin, u_axis, v_axis, u1, v1)
        rect = [(0.0, 0.0), (u1, 0.0), (u1, v1), (0.0, v1)]

        def to3d(p):
            return (np.asarray(origin, dtype=float)
                    + p[0] * np.asarray(u_axis, dtype=float)
                    + p[1] * np.asarray(v_axis, dtype=float))

        entries, trim_entries = [], []
        for k in range(4):
            a2, b2 = np.asarray(rect[k]), np.asarray(rect[(k + 1) % 4])
            eid, reversed_ = b.line_edge(to3d(a2), to3d(b2))
            entries.append((eid, reversed_))
            pts = (b2, a2) if reversed_ else (a2, b2)
            trim_entries.append((_line2d(*pts), reversed_))
        loop_ids = [b.loop(entries, is_outer=True)]
        trim_loops = [TrimLoop(tuple(trim_entries))]
        for cx, cy, r in holes:
            key = (cx, cy, r, z)
            if key not in hole_edges:
                hole_edges[key] = b.curve_edge(
                    circle_bspline((cx, cy), r, dim3_z=z))
            # map the circle into this cap's parameter plane; the hole loop
            # must run clockwise there, so reverse when the map keeps the
            # counter-clockwise sense of the 3D circle
            circle2d = circle_bspline((cx, cy), r)
            mapped = np.array([xy_to_uv(p) for p in circle2d.control_points])
            pcurve = BSplineCurve(3, mapped, circle2d.knots)
            e0 = xy_to_uv((1.0, 0.0)) - xy_to_uv((0.0, 0.0))
            e1 = xy_to_uv((0.0, 1.0)) - xy_to_uv((0.0, 0.0))
            preserves = (e0[0] * e1[1] - e0[1] * e1[0]) > 0
            loop_ids.append(b.loop([(hole_edges[key], bool(preserves))],
                                   is_outer=False))
            trim_loops.append(TrimLoop(((pcurve, bool(preserves)),)))
        geometry = TrimmedSurface(surface, tuple(trim_loops))
        return b.face(geometry, loop_ids[0], loop_ids[1:])

    faces = []
    # top cap: parameters (x, y); bottom cap: parameters (y, x) so both
    # outer loops run counter-clockwise in their own parameter planes
    faces.append(cap_face(o + lz * ez, ex, ey, lx, ly, lz,
                          lambda p: np.array([p[0], p[1]])))
    faces.append(cap_face(o, ey, ex, ly, lx, 0.0,
                          lambda p: np.array([p[1], p[0]])))
    faces.append(_planar_face(b, o, ex, ez, lx, lz))
    faces.append(_planar_face(b, o + ly * ey, ez, ex, lz, lx))
    faces.append(_planar_face(b, o, ez, ey, lz, ly))
    faces.append(_planar_face(b, o + lx * ex, ey, ez, ly, lz))

    for cx, cy, r in holes:
        faces.append(_hole_lateral_face(b, hole_edges, cx, cy, r, 0.0, lz))
    b.shell(faces)
    return b.model()


def _hole_lateral_face(b: _Builder, hole_edges, cx, cy, r, z0, z1) -> int:
    """Cylindrical (cubic-approximate) wall of a through-hole."""
    bottom = circle_bspline((cx, cy), r, dim3_z=z0)
    top = circle_bspline((cx, cy), r, dim3_z=z1)
    e_bot = hole_edges[(cx, cy, r, z0)]
    e_top = hole_edges[(cx, cy, r, z1)]
    n = CIRCLE_SEGMENTS
    # extrude the circle control polygon between the two z levels
    grid = np.ones((len(bottom.control_points), 2, 4))
    grid[:, 0, :3] = bottom.control_points
    grid[:, 1, :3] = top.control_points
    surface = BSplineSurface(3, 1, grid, bottom.knots, [0.0, 0.0, 1.0, 1.0])
    seam_a = bottom.control_points[0]
    seam_b = top.control_points[0]
    e_seam, seam_rev = b.line_edge(seam_a, seam_b)
    loop = b.loop([(e_bot, False), (e_seam, seam_rev),
                   (e_top, True), (e_seam, not seam_rev)])
    pc_bot = _line2d((0.0, 0.0), (float(n), 0.0))
    pc_seam_up = _line2d((float(n), 0.0), (float(n), 1.0))
    pc_top = _line2d((0.0, 1.0), (float(n), 1.0))
    pc_seam_down = _line2d((0.0, 1.0), (0.0, 0.0))
    trim = TrimLoop(((pc_bot, False), (pc_seam_up, False),
                     (pc_top, True), (pc_seam_down, False)))
    geometry = TrimmedSurface(surface, (trim,))
    return b.face(geometry, loop)


def generate_extruded_polygon(n_sides: int = 6, radius: float = 1.0,
                              height: float = 0.8,
                              seed: int | None = None) -> BRepModel:
    """Prism over a convex polygon; both caps are trimmed planar faces."""
    if n_sides < 3:
        raise ValueError("polygon needs at least 3 sides")
    rng = np.random.default_rng(seed if seed is not None else 0)
    angles = np.sort(2 * np.pi * (np.arange(n_sides) + rng.uniform(
        0.15, 0.85, n_sides)) / n_sides)
    radii = radius * (1.0 + 0.25 * rng.uniform(-1, 1, n_sides)) \
        if seed is not None else np.full(n_sides, radius)
    poly = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    poly -= poly.min(axis=0) - 0.1 * radius  # keep the domain positive
    span = poly.max(axis=0) + 0.1 * radius

    b = _Builder()
    ex, ey, ez = np.eye(3)
    o = np.zeros(3)
    faces = [
        # bottom: parameters (y, x) so the polygon appears counter-clockwise
        _planar_face(b, o, ey, ex, span[1], span[0],
                     polygon2d=[(p[1], p[0]) for p in poly[::-1]]),
        _planar_face(b, o + height * ez, ex, ey, span[0], span[1],
                     polygon2d=list(map(tuple, poly))),
    ]
    for k in range(n_sides):
        a = np.array([*poly[k], 0.0])
        c = np.array([*poly[(k + 1) % n_sides], 0.0])
        u_axis = c - a
        length = np.linalg.norm(u_axis)
        faces.append(_planar_face(b, a, u_axis / length, ez, length, height))
    b.shell(faces)
    return b.model()


def generate_wavy_bicubic(nx: int = 2, ny: int = 1, amplitude: float = 0.25,
                          seed: int | None = None) -> BRepModel:
    """Open sheet: one untrimmed bicubic face with interior knots.

    ``nx`` and ``ny`` count interior knots per direction; the boundary
    curves are extracted from the control grid so edges match the surface
    exactly.
    """
    rng = np.random.default_rng(seed if seed is not None else 0)
    ku = np.concatenate([[0.0] * 4, np.sort(rng.uniform(0.2, 0.8, nx)), [1.0] * 4])
    kv = np.concatenate([[0.0] * 4, np.sort(rng.uniform(0.2, 0.8, ny)), [1.0] * 4])
    nu, nv = 4 + nx, 4 + ny
    grid = np.ones((nu, nv, 4))
    for i in range(nu):
        for j in range(nv):
            grid[i, j, :3] = [i / (nu - 1), j / (nv - 1),
                              amplitude * rng.normal()]
    surface = BSplineSurface(3, 3, grid, ku, kv)

    b = _Builder()
    curves = {
        "v0": BSplineCurve(3, grid[:, 0, :3], ku),
        "v1": BSplineCurve(3, grid[:, -1, :3], ku),
        "u0": BSplineCurve(3, grid[0, :, :3], kv),
        "u1": BSplineCurve(3, grid[-1, :, :3], kv),
    }
    eids = {k: b.curve_edge(c) for k, c in curves.items()}
    loop = b.loop([(eids["v0"], False), (eids["u1"], False),
                   (eids["v1"], True), (eids["u0"], True)])
    trim = TrimLoop((
        (_line2d((0.0, 0.0), (1.0, 0.0)), False),
        (_line2d((1.0, 0.0), (1.0, 1.0)), False),
        (_line2d((0.0, 1.0), (1.0, 1.0)), True),
        (_line2d((0.0, 0.0), (0.0, 1.0)), True),
    ))
    fid = b.face(TrimmedSurface(surface, (trim,)), loop)
    b.shell([fid])
    return b.model()


GENERATORS = {
    "cube": generate_cube,
    "plate-with-holes": generate_plate_with_holes,
    "extruded-polygon": generate_extruded_polygon,
    "wavy-bicubic": generate_wavy_bicubic,
}
