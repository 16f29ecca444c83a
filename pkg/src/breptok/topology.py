"""Boundary-structure records, validation, adjacency, and patch ordering.

A model is a set of id-keyed tables: vertices (points), edges (curve
segments between two vertices), loops (closed circuits of directed edges),
faces (trimmed surfaces bounded by one outer and any number of inner
loops), and shells (groups of faces). All tables are immutable after
construction and every query here is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import TopologyError
from .geometry import BezierRectangle, BezierTriangle, BSplineCurve, eval_curve
from .trimming import TrimmedSurface

ENDPOINT_TOL_REL = 1e-6


@dataclass(frozen=True, eq=False)
class VertexRec:
    id: int
    point: np.ndarray

    def __post_init__(self):
        point = np.asarray(self.point, dtype=float)
        if point.shape != (3,) or not np.all(np.isfinite(point)):
            raise TopologyError(
                f"vertex {self.id}: point must be 3 finite coordinates")
        object.__setattr__(self, "point", point)


@dataclass(frozen=True, eq=False)
class EdgeRec:
    """A curve segment bounded by two end vertices.

    Closed edges (circles and the like) are allowed with start == end.
    """

    id: int
    curve: BSplineCurve
    start_vertex: int
    end_vertex: int
    t0: float
    t1: float


@dataclass(frozen=True, eq=False)
class LoopRec:
    """Closed circuit of edges; each entry is (edge id, reversed flag)."""

    id: int
    edges: tuple[tuple[int, bool], ...]
    is_outer: bool = True

    def __post_init__(self):
        object.__setattr__(self, "edges",
                           tuple((int(e), bool(r)) for e, r in self.edges))
        if len(self.edges) < 1:
            raise TopologyError(f"loop {self.id} has no edges")


@dataclass(frozen=True, eq=False)
class FaceRec:
    id: int
    geometry: TrimmedSurface
    outer_loop: int
    inner_loops: tuple[int, ...] = ()
    same_sense: bool = True

    def __post_init__(self):
        object.__setattr__(self, "inner_loops", tuple(self.inner_loops))

    @property
    def loop_ids(self) -> tuple[int, ...]:
        return (self.outer_loop,) + self.inner_loops


@dataclass(frozen=True, eq=False)
class ShellRec:
    id: int
    faces: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "faces", tuple(self.faces))


@dataclass(frozen=True, eq=False)
class BRepModel:
    """Id-keyed record tables plus shells; the unit all pipelines consume."""

    vertices: dict[int, VertexRec] = field(default_factory=dict)
    edges: dict[int, EdgeRec] = field(default_factory=dict)
    loops: dict[int, LoopRec] = field(default_factory=dict)
    faces: dict[int, FaceRec] = field(default_factory=dict)
    shells: dict[int, ShellRec] = field(default_factory=dict)
    units: str = "mm"

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounds over vertices and all control points."""
        pts = [v.point for v in self.vertices.values()]
        pts += [e.curve.control_points.reshape(-1, e.curve.dim)
                for e in self.edges.values() if e.curve.dim == 3]
        pts += [f.geometry.surface.control_points[:, :, :3].reshape(-1, 3)
                for f in self.faces.values()]
        stacked = np.vstack([np.atleast_2d(p) for p in pts]) if pts else np.zeros((1, 3))
        return stacked.min(axis=0), stacked.max(axis=0)

    def diagonal(self) -> float:
        lo, hi = self.bounding_box()
        return float(np.linalg.norm(hi - lo))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    code: str
    severity: str  # "hard" or "soft"
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not any(v.severity == "hard" for v in self.violations)

    def hard(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == "hard"]


def _edge_endpoint(edge: EdgeRec, t: float) -> np.ndarray:
    return eval_curve(edge.curve, t)


def validate_model(model: BRepModel) -> ValidationReport:
    """Check referential integrity and the per-record invariants.

    Hard violations: unresolved references, loops that do not chain or
    close, edges used by more than two faces, faces without a usable outer
    loop, edge endpoints that miss their vertices by more than 1e-6 of the
    model diagonal, and loop/p-curve count mismatches.
    """
    out: list[Violation] = []
    diag = max(model.diagonal(), 1e-30)

    def hard(code, msg):
        out.append(Violation(code, "hard", msg))

    for edge in model.edges.values():
        for which, vid in (("start", edge.start_vertex), ("end", edge.end_vertex)):
            if vid not in model.vertices:
                hard("unresolved reference",
                     f"edge {edge.id}: {which} vertex {vid} not found")
        if edge.t1 <= edge.t0:
            hard("bad parameter interval",
                 f"edge {edge.id}: t1 {edge.t1} <= t0 {edge.t0}")
        elif (edge.start_vertex in model.vertices
                and edge.end_vertex in model.vertices):
            for t, vid in ((edge.t0, edge.start_vertex), (edge.t1, edge.end_vertex)):
                gap = float(np.linalg.norm(
                    _edge_endpoint(edge, t) - model.vertices[vid].point))
                if gap > ENDPOINT_TOL_REL * diag:
                    hard("endpoint mismatch",
                         f"edge {edge.id}: curve point at t={t} misses vertex "
                         f"{vid} by {gap:.3e}")

    for loop in model.loops.values():
        chain_ok = True
        for eid, _ in loop.edges:
            if eid not in model.edges:
                hard("unresolved reference", f"loop {loop.id}: edge {eid} not found")
                chain_ok = False
        if not chain_ok:
            continue
        heads, tails = [], []
        for eid, reversed_ in loop.edges:
            e = model.edges[eid]
            a, b = e.start_vertex, e.end_vertex
            if reversed_:
                a, b = b, a
            heads.append(a)
            tails.append(b)
        for k in range(len(loop.edges)):
            nxt = (k + 1) % len(loop.edges)
            if tails[k] != heads[nxt]:
                hard("broken loop chain",
                     f"loop {loop.id}: edge step {k} ends at vertex {tails[k]} "
                     f"but step {nxt} starts at {heads[nxt]}")

    edge_use: dict[int, int] = {}
    for face in model.faces.values():
        for lid in face.loop_ids:
            if lid not in model.loops:
                hard("unresolved reference", f"face {face.id}: loop {lid} not found")
                continue
            for eid, _ in model.loops[lid].edges:
                edge_use[eid] = edge_use.get(eid, 0) + 1
        n_trim = len(face.geometry.loops)
        n_topo = len(face.loop_ids)
        if n_trim != n_topo:
            hard("loop count mismatch",
                 f"face {face.id}: {n_topo} topological loops vs "
                 f"{n_trim} trim loops")
    for eid, uses in edge_use.items():
        if uses > 2:
            hard("non-manifold edge use", f"edge {eid} used {uses} times by faces")

    for shell in model.shells.values():
        for fid in shell.faces:
            if fid not in model.faces:
                hard("unresolved reference", f"shell {shell.id}: face {fid} not found")

    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# adjacency and loop unfolding
# ---------------------------------------------------------------------------

def face_adjacency(model: BRepModel) -> dict[int, set[int]]:
    """Faces sharing at least one edge; symmetric, never self-adjacent."""
    users: dict[int, set[int]] = {}
    for face in model.faces.values():
        for lid in face.loop_ids:
            for eid, _ in model.loops[lid].edges:
                users.setdefault(eid, set()).add(face.id)
    neighbors: dict[int, set[int]] = {fid: set() for fid in model.faces}
    for faces in users.values():
        for a in faces:
            for b in faces:
                if a != b:
                    neighbors[a].add(b)
    return neighbors


def unfold_loop(loop: LoopRec, break_index: int) -> list[int]:
    """Break the cycle at an edge and pad the unfolded sequence.

    With the rotated edges e_1..e_n (e_1 at ``break_index``) the output is
    {e_n, e_1, ..., e_n, e_1, e_2}, indices modulo n, so loops of any length
    produce n + 3 entries.
    """
    n = len(loop.edges)
    if n == 0:
        raise TopologyError("cannot unfold an empty loop")
    if not 0 <= break_index < n:
        raise TopologyError(f"break index {break_index} out of range [0, {n})")
    rotated = [loop.edges[(break_index + k) % n][0] for k in range(n)]
    return ([rotated[(n - 1) % n]] + rotated
            + [rotated[0 % n], rotated[1 % n]])


# ---------------------------------------------------------------------------
# z-order keys and patch ordering
# ---------------------------------------------------------------------------

def zorder_key(x: int, y: int, depth: int) -> int:
    """Bit-interleaved quadrant key; bijective on [0, 4**depth).

    Per level the x bit occupies the lower of the two key bits, so sorting
    keys visits quadrants in the order (0,0), (1,0), (0,1), (1,1).
    """
    if depth < 0:
        raise TopologyError("depth must be non-negative")
    if not (0 <= x < 2**depth and 0 <= y < 2**depth):
        raise TopologyError(
            f"coords ({x}, {y}) out of range for depth {depth}")
    key = 0
    for level in range(depth - 1, -1, -1):
        key = (key << 2) | (((y >> level) & 1) << 1) | ((x >> level) & 1)
    return key


def order_patches(
    leaves: list[tuple[BezierRectangle, list[BezierTriangle]]],
) -> list[BezierTriangle]:
    """Deterministic z-order over quadtree leaves, triangles flattened.

    Keys are left-aligned: a leaf's key is padded with trailing zero bits to
    the deepest leaf's bit length, ties broken by smaller depth. Within one
    rectangle the triangle list order is preserved (lower-left half first).
    """
    if not leaves:
        return []
    seen = set()
    for rect, _ in leaves:
        if rect.key in seen:
            raise TopologyError(f"duplicate leaf cell {rect.key}")
        seen.add(rect.key)
    max_depth = max(rect.depth for rect, _ in leaves)

    def sort_key(item):
        rect, _ = item
        x, y = rect.grid_coords
        key = zorder_key(x, y, rect.depth)
        return (key << (2 * (max_depth - rect.depth)), rect.depth)

    ordered: list[BezierTriangle] = []
    for _, tris in sorted(leaves, key=sort_key):
        ordered.extend(tris)
    return ordered


# ---------------------------------------------------------------------------
# model normalization
# ---------------------------------------------------------------------------

def normalize_model(model: BRepModel) -> BRepModel:
    """Translate and uniformly scale the model into the unit cube at origin.

    Only 3D data moves: vertices, model-space curves, and surface control
    points. Parameter-space curves and weights are untouched.
    """
    lo, hi = model.bounding_box()
    center = 0.5 * (lo + hi)
    extent = float(np.max(hi - lo))
    scale = 1.0 / extent if extent > 0 else 1.0

    def map_pts(pts):
        return (pts - center) * scale

    vertices = {vid: replace(v, point=map_pts(v.point))
                for vid, v in model.vertices.items()}
    edges = {}
    for eid, e in model.edges.items():
        curve = e.curve
        if curve.dim == 3:
            curve = BSplineCurve(curve.degree, map_pts(curve.control_points),
                                 curve.knots)
        edges[eid] = replace(e, curve=curve)
    faces = {}
    for fid, f in model.faces.items():
        surf = f.geometry.surface
        grid = surf.control_points.copy()
        grid[:, :, :3] = map_pts(grid[:, :, :3])
        from .geometry import BSplineSurface

        new_surf = BSplineSurface(surf.degree_u, surf.degree_v, grid,
                                  surf.knots_u, surf.knots_v)
        faces[fid] = replace(f, geometry=TrimmedSurface(new_surf,
                                                        f.geometry.loops))
    return BRepModel(vertices, edges, model.loops, faces, model.shells,
                     model.units)
