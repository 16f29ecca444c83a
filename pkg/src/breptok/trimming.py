"""Trimmed-surface tessellation into ordered Bezier triangles.

The pipeline: decompose the underlying surface into Bezier rectangles,
classify each cell against the trim loops (nonzero winding over polyline
approximations of the p-curves), subdivide boundary cells into a quadtree
until the trim curve passes near two diagonally opposite corners (or the
depth limit is hit), split every kept cell along a diagonal into Bezier
triangles, and refine the boundary triangles with a regularized linear
least-squares fit against surface points sampled along the trim curve.

Everything is deterministic: identical inputs and configuration produce
bit-identical output.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DegenerateLoopWarning,
    GeometryError,
    LoopCrossingWarning,
    OrientationWarning,
    RankDeficientWarning,
)
from .geometry import (
    BezierRectangle,
    BezierTriangle,
    BSplineCurve,
    BSplineSurface,
    _split_rect,
    bernstein_triangle_row,
    decompose_surface,
    elevate_surface_degree,
    eval_curve,
    eval_surface,
    rect_to_triangles,
    subdivide_rectangle,
    triangle_point_count,
)

# fixed barycentric probe points used for deviation reporting (lattice d=4)
DEVIATION_PROBES = np.array(
    [(i / 4.0, j / 4.0) for i in range(5) for j in range(5 - i)])


def as_pcurve(curve: BSplineCurve) -> BSplineCurve:
    """Require a curve living in a surface's 2D parameter space."""
    if curve.dim != 2:
        raise GeometryError("p-curves must be 2D (parameter-space) curves")
    return curve


@dataclass(frozen=True, eq=False)
class TrimLoop:
    """Ordered circuit of p-curves with per-curve sense flags.

    A True sense means the curve is traversed from its end toward its start.
    The outer loop of a face runs counter-clockwise, inner loops clockwise;
    wrong winding is auto-corrected (with a warning) when classified.
    """

    curves: tuple[tuple[BSplineCurve, bool], ...]

    def __post_init__(self):
        entries = tuple((as_pcurve(c), bool(r)) for c, r in self.curves)
        if not entries:
            raise GeometryError("trim loop needs at least one curve")
        object.__setattr__(self, "curves", entries)

    def closure_gap(self) -> float:
        """Largest distance between one curve's end and the next's start."""
        ends = []
        for curve, reversed_ in self.curves:
            lo, hi = curve.domain
            a = eval_curve(curve, hi if reversed_ else lo)
            b = eval_curve(curve, lo if reversed_ else hi)
            ends.append((a, b))
        gap = 0.0
        for k in range(len(ends)):
            b = ends[k][1]
            a_next = ends[(k + 1) % len(ends)][0]
            gap = max(gap, float(np.linalg.norm(b - a_next)))
        return gap

    def polyline(self, samples_per_curve: int = 64) -> np.ndarray:
        """Closed polyline approximation, first point repeated at the end."""
        pts: list[np.ndarray] = []
        for curve, reversed_ in self.curves:
            lo, hi = curve.domain
            ts = np.linspace(lo, hi, samples_per_curve + 1)
            chunk = eval_curve(curve, ts)
            if reversed_:
                chunk = chunk[::-1]
            if pts:
                pts.append(chunk[1:])
            else:
                pts.append(chunk)
        poly = np.vstack(pts)
        if np.linalg.norm(poly[0] - poly[-1]) > 0:
            poly = np.vstack([poly, poly[0]])
        return poly


def _polylines_cross(a: np.ndarray, b: np.ndarray) -> bool:
    """Any proper (interior-to-interior) crossing between two polylines."""
    p1, p2 = a[:-1], a[1:]
    q1, q2 = b[:-1], b[1:]

    def side(p, q, r):
        # sign of (q - p) x (r - p), broadcast (segments x points)
        return ((q[:, None, 0] - p[:, None, 0]) * (r[None, :, 1] - p[:, None, 1])
                - (q[:, None, 1] - p[:, None, 1]) * (r[None, :, 0] - p[:, None, 0]))

    d1 = side(p1, p2, q1)
    d2 = side(p1, p2, q2)
    d3 = side(q1, q2, p1).T
    d4 = side(q1, q2, p2).T
    return bool(np.any((d1 * d2 < 0) & (d3 * d4 < 0)))


@dataclass(frozen=True, eq=False)
class TrimmedSurface:
    """A surface restricted to the region bounded by its trim loops.

    The first loop is the outer boundary; the rest are holes. Each loop must
    close within 1e-8 of the parameter-domain diagonal. Loop pairs are
    checked for crossings on coarse polyline samples (best effort, warning
    only; tangencies and very tight passes can escape the sampling).
    """

    surface: BSplineSurface
    loops: tuple[TrimLoop, ...]

    def __post_init__(self):
        loops = tuple(self.loops)
        if not loops:
            raise GeometryError("trimmed surface needs at least an outer loop")
        object.__setattr__(self, "loops", loops)
        u0, u1, v0, v1 = self.surface.domain
        diag = float(np.hypot(u1 - u0, v1 - v0))
        for k, loop in enumerate(loops):
            gap = loop.closure_gap()
            if gap > 1e-8 * diag:
                raise GeometryError(
                    f"trim loop {k} is not closed: gap {gap:.3e} exceeds "
                    f"1e-8 of the domain diagonal {diag:.3e}")
            pts = loop.polyline(17)
            tol = 1e-6 * diag
            if (np.any(pts[:, 0] < u0 - tol) or np.any(pts[:, 0] > u1 + tol)
                    or np.any(pts[:, 1] < v0 - tol)
                    or np.any(pts[:, 1] > v1 + tol)):
                raise GeometryError(
                    f"trim loop {k} leaves the surface domain "
                    f"[{u0}, {u1}] x [{v0}, {v1}]")
        # prime sample count: crossings at nice lattice points would
        # otherwise coincide with polyline vertices and defeat the strict
        # orientation test
        polys = [loop.polyline(17) for loop in loops]
        for i in range(len(polys)):
            for j in range(i + 1, len(polys)):
                if _polylines_cross(polys[i], polys[j]):
                    warnings.warn(
                        f"trim loops {i} and {j} cross each other (sampled "
                        "check); classification may be inconsistent",
                        LoopCrossingWarning)

    @property
    def domain(self):
        return self.surface.domain


class PatchClass(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class FitConfig:
    """Tessellation and boundary-fitting knobs.

    ``corner_snap_tol`` is relative to the parameter-domain diagonal.
    ``max_depth`` counts subdivision levels below the knot-span grid.
    ``working_degree`` is the Bezier degree every patch is elevated to
    before splitting; higher-degree inputs are rejected.
    """

    lam: float = 0.1
    n_boundary_samples: int = 32
    max_depth: int = 6
    corner_snap_tol: float = 1e-3
    pcurve_samples: int = 64
    working_degree: int = 3

    def __post_init__(self):
        if self.lam < 0:
            raise GeometryError("lambda must be non-negative")
        if self.n_boundary_samples < 1:
            raise GeometryError("need at least one boundary sample")
        if self.max_depth < 0 or self.pcurve_samples < 2:
            raise GeometryError("bad subdivision/sampling configuration")
        if self.working_degree < 1:
            raise GeometryError("working degree must be at least 1")


# ---------------------------------------------------------------------------
# point and rectangle classification
# ---------------------------------------------------------------------------

def _signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))


class TrimClassifier:
    """Cached polyline machinery for one trimmed domain.

    Builds closed polylines for every loop, fixes winding (outer CCW, inner
    CW), drops degenerate loops, and answers vectorized inside/on-boundary,
    crossing, and clipping queries.
    """

    def __init__(self, loops, domain=None, samples_per_curve: int = 64,
                 snap_tol: float | None = None):
        polys = [np.asarray(loop.polyline(samples_per_curve), dtype=float)
                 for loop in loops]
        if domain is None:
            allpts = np.vstack(polys)
            lo = allpts.min(axis=0)
            hi = allpts.max(axis=0)
            domain = (lo[0], hi[0], lo[1], hi[1])
        self.domain = domain
        u0, u1, v0, v1 = domain
        self.domain_diag = float(np.hypot(u1 - u0, v1 - v0))
        self.snap_tol = (snap_tol if snap_tol is not None
                         else 1e-3 * self.domain_diag)
        domain_area = abs((u1 - u0) * (v1 - v0))
        kept: list[np.ndarray] = []
        for k, poly in enumerate(polys):
            area = _signed_area(poly)
            if abs(area) < 1e-12 * max(domain_area, 1e-300):
                warnings.warn(f"trim loop {k} has negligible area; ignored",
                              DegenerateLoopWarning)
                continue
            want_ccw = not kept  # first kept loop is the outer one
            if (area > 0) != want_ccw:
                warnings.warn(
                    f"trim loop {k} wound the wrong way; auto-corrected",
                    OrientationWarning)
                poly = poly[::-1]
            kept.append(poly)
        if not kept:
            raise GeometryError("no usable trim loops")
        self.polylines = kept
        segs = []
        for poly in kept:
            segs.append(np.hstack([poly[:-1], poly[1:]]))
        self.segments = np.vstack(segs)

    # -- point queries ------------------------------------------------------

    def classify_points(self, uv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(inside, on_boundary) flags per point by nonzero winding.

        Points within the snap tolerance of any polyline are flagged
        on-boundary; their winding result is still reported.
        """
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        wn = np.zeros(len(uv), dtype=int)
        dmin = np.full(len(uv), np.inf)
        x1 = self.segments[:, 0]
        y1 = self.segments[:, 1]
        x2 = self.segments[:, 2]
        y2 = self.segments[:, 3]
        dx = x2 - x1
        dy = y2 - y1
        seg_len2 = np.maximum(dx * dx + dy * dy, 1e-300)
        chunk = max(1, int(2e6) // max(len(self.segments), 1))
        for start in range(0, len(uv), chunk):
            px = uv[start:start + chunk, 0:1]
            py = uv[start:start + chunk, 1:2]
            cross = dx * (py - y1) - dy * (px - x1)
            up = (y1 <= py) & (y2 > py) & (cross > 0)
            down = (y1 > py) & (y2 <= py) & (cross < 0)
            wn[start:start + chunk] = up.sum(axis=1) - down.sum(axis=1)
            t = np.clip(((px - x1) * dx + (py - y1) * dy) / seg_len2, 0.0, 1.0)
            qx = x1 + t * dx - px
            qy = y1 + t * dy - py
            dmin[start:start + chunk] = np.sqrt(
                (qx * qx + qy * qy).min(axis=1))
        return wn != 0, dmin <= self.snap_tol

    def min_distance(self, uv: np.ndarray) -> np.ndarray:
        uv = np.atleast_2d(np.asarray(uv, dtype=float))
        x1, y1, x2, y2 = (self.segments[:, k] for k in range(4))
        dx, dy = x2 - x1, y2 - y1
        seg_len2 = np.maximum(dx * dx + dy * dy, 1e-300)
        px = uv[:, 0:1]
        py = uv[:, 1:2]
        t = np.clip(((px - x1) * dx + (py - y1) * dy) / seg_len2, 0.0, 1.0)
        qx = x1 + t * dx - px
        qy = y1 + t * dy - py
        return np.sqrt((qx * qx + qy * qy).min(axis=1))

    # -- segment/rectangle queries -----------------------------------------

    def _clip_params(self, rect) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Liang-Barsky parameters of each polyline segment inside the rect."""
        u0, u1, v0, v1 = rect
        p = self.segments[:, :2]
        d = self.segments[:, 2:4] - p
        t0 = np.zeros(len(p))
        t1 = np.ones(len(p))
        ok = np.ones(len(p), dtype=bool)
        for axis, lo, hi in ((0, u0, u1), (1, v0, v1)):
            dd = d[:, axis]
            pp = p[:, axis]
            parallel = np.abs(dd) < 1e-300
            ok &= ~(parallel & ((pp < lo) | (pp > hi)))
            with np.errstate(divide="ignore", invalid="ignore"):
                ta = (lo - pp) / dd
                tb = (hi - pp) / dd
            enter = np.where(dd >= 0, ta, tb)
            leave = np.where(dd >= 0, tb, ta)
            moving = ~parallel
            t0 = np.where(moving, np.maximum(t0, enter), t0)
            t1 = np.where(moving, np.minimum(t1, leave), t1)
        ok &= t0 <= t1
        return t0, t1, ok

    def crosses_interior(self, rect) -> bool:
        """True when any polyline segment enters the rect's open interior."""
        u0, u1, v0, v1 = rect
        t0, t1, ok = self._clip_params(rect)
        live = ok & (t1 - t0 > 1e-12)
        if not np.any(live):
            return False
        tm = 0.5 * (t0[live] + t1[live])
        p = self.segments[live, :2]
        d = self.segments[live, 2:4] - p
        mid = p + tm[:, None] * d
        eps = 1e-12 * self.domain_diag
        strict = ((mid[:, 0] > u0 + eps) & (mid[:, 0] < u1 - eps)
                  & (mid[:, 1] > v0 + eps) & (mid[:, 1] < v1 - eps))
        return bool(np.any(strict))

    def clipped_boundary_points(self, rect, n: int) -> np.ndarray:
        """n points equally spaced by arc length along the clipped p-curves.

        Returns a (k, 2) array, k <= n (empty when no curve enters), ordered
        by traversal of the loops.
        """
        return self.clipped_boundary_chain(rect, n)[0]

    def clipped_boundary_chain(self, rect, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Arc-length sampled clipped p-curve portion inside a cell.

        Returns (points (k, 2), fractions (k,)) where fractions are the
        normalized arc positions (k + 0.5) / n of each point along the
        clipped portion, in loop traversal order.
        """
        t0, t1, ok = self._clip_params(rect)
        live = ok & (t1 - t0 > 1e-12)
        if not np.any(live):
            return np.empty((0, 2)), np.empty(0)
        p = self.segments[live, :2]
        d = self.segments[live, 2:4] - p
        a = p + t0[live, None] * d
        b = p + t1[live, None] * d
        lengths = np.linalg.norm(b - a, axis=1)
        keep = lengths > 0
        a, b, lengths = a[keep], b[keep], lengths[keep]
        if len(lengths) == 0:
            return np.empty((0, 2)), np.empty(0)
        cum = np.concatenate([[0.0], np.cumsum(lengths)])
        total = cum[-1]
        fractions = (np.arange(n) + 0.5) / n
        targets = fractions * total
        idx = np.clip(np.searchsorted(cum, targets, side="right") - 1,
                      0, len(lengths) - 1)
        frac = (targets - cum[idx]) / lengths[idx]
        return a[idx] + frac[:, None] * (b[idx] - a[idx]), fractions

    def corner_snapped(self, corner) -> bool:
        return bool(self.min_distance(np.asarray([corner]))[0] <= self.snap_tol)


def classify_point(loops, u: float, v: float,
                   samples_per_curve: int = 64,
                   snap_tol: float | None = None) -> tuple[bool, bool]:
    """Nonzero-winding inside test for one parameter point.

    Returns (inside, on_boundary); a point within the snap tolerance of a
    p-curve polyline is flagged on-boundary and the caller decides.
    """
    cls = TrimClassifier(loops, samples_per_curve=samples_per_curve,
                         snap_tol=snap_tol)
    inside, onb = cls.classify_points(np.array([[u, v]]))
    return bool(inside[0]), bool(onb[0])


def _rect_probe_points(rect) -> np.ndarray:
    u0, u1, v0, v1 = rect
    um, vm = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
    return np.array([
        (u0, v0), (u1, v0), (u0, v1), (u1, v1),
        (um, v0), (um, v1), (u0, vm), (u1, vm),
        (um, vm),
    ])


def _classify_rect_bounds(classifier: TrimClassifier, rect) -> PatchClass:
    inside, onb = classifier.classify_points(_rect_probe_points(rect))
    crosses = classifier.crosses_interior(rect)
    if np.all(inside | onb) and not crosses:
        return PatchClass.INSIDE
    if np.all(~inside & ~onb) and not crosses:
        return PatchClass.OUTSIDE
    return PatchClass.BOUNDARY


def classify_rectangle(node: BezierRectangle, loops,
                       samples_per_curve: int = 64,
                       snap_tol: float | None = None) -> PatchClass:
    """Classify a patch cell against the trim loops.

    Inside/Outside require all nine probe points (corners, edge midpoints,
    center) to agree and no p-curve segment entering the open interior;
    anything else is Boundary.
    """
    cls = TrimClassifier(loops, samples_per_curve=samples_per_curve,
                         snap_tol=snap_tol)
    return _classify_rect_bounds(cls, node.param_rect)


def subdivide(node: BezierRectangle, max_depth: int | None = None) -> list[BezierRectangle]:
    """Quadtree split of a cell into its four half-parameter children."""
    if max_depth is not None and node.depth >= max_depth:
        raise GeometryError(f"cell already at depth limit {max_depth}")
    return subdivide_rectangle(node)


# ---------------------------------------------------------------------------
# quadtree construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadLeaf:
    rect: BezierRectangle
    patch_class: PatchClass
    diagonal: str | None = None  # split diagonal for boundary leaves


def _curve_hugs_segment(classifier: TrimClassifier, rect, a, b) -> bool:
    """Interior portion of the trim curve stays within snap tol of a-b.

    Curve pieces running along the cell's own edges are ignored; only the
    part crossing the open interior has to follow the candidate diagonal.
    """
    pts = classifier.clipped_boundary_points(rect, 32)
    if len(pts) == 0:
        return True
    u0, u1, v0, v1 = rect
    tol = classifier.snap_tol
    interior = ((pts[:, 0] > u0 + tol) & (pts[:, 0] < u1 - tol)
                & (pts[:, 1] > v0 + tol) & (pts[:, 1] < v1 - tol))
    pts = pts[interior]
    if len(pts) == 0:
        return True
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    len2 = float(d @ d)
    t = np.clip((pts - a) @ d / len2, 0.0, 1.0)
    gaps = np.linalg.norm(pts - (a + t[:, None] * d), axis=1)
    return bool(np.max(gaps) <= tol)


def _incident_diagonal(classifier: TrimClassifier, rect) -> str | None:
    """Diagonal the trim curve runs along corner-to-corner, if any.

    Both diagonal corners must lie on the curve and the curve portion
    clipped to the cell must stay within the snap tolerance of the diagonal,
    so a curve merely touching two corners while bulging keeps subdividing.
    """
    u0, u1, v0, v1 = rect
    near = {c: classifier.corner_snapped(c)
            for c in ((u0, v0), (u1, v0), (u0, v1), (u1, v1))}
    if (near[(u1, v0)] and near[(u0, v1)]
            and _curve_hugs_segment(classifier, rect, (u1, v0), (u0, v1))):
        return "anti"
    if (near[(u0, v0)] and near[(u1, v1)]
            and _curve_hugs_segment(classifier, rect, (u0, v0), (u1, v1))):
        return "main"
    return None


def _separating_diagonal(classifier: TrimClassifier, rect) -> str:
    """Diagonal whose off-diagonal corners best split inside from outside."""
    u0, u1, v0, v1 = rect
    corners = np.array([(u0, v0), (u1, v0), (u0, v1), (u1, v1)])
    inside, onb = classifier.classify_points(corners)
    state = [None if onb[k] else bool(inside[k]) for k in range(4)]
    ll, lr, ul, ur = state
    anti_separates = ll is not None and ur is not None and ll != ur
    main_separates = lr is not None and ul is not None and lr != ul
    if anti_separates and not main_separates:
        return "anti"
    if main_separates and not anti_separates:
        return "main"
    return "anti"


def build_quadtree(ts: TrimmedSurface, cfg: FitConfig) -> list[QuadLeaf]:
    """Classify knot-span cells and subdivide the boundary ones.

    A boundary cell stops subdividing once the trim curve passes within the
    snap tolerance of two diagonally opposite corners, or at the depth
    limit; the surviving boundary leaves carry the diagonal to split along.
    Inside and outside leaves are returned as-is (callers drop outside).
    """
    cells = decompose_surface(ts.surface)
    deg = cfg.working_degree
    for cell in cells:
        if cell.degree_u > deg or cell.degree_v > deg:
            raise GeometryError(
                f"surface degree ({cell.degree_u}, {cell.degree_v}) exceeds "
                f"working degree {deg}; raise working_degree to accept it")
    cells = [elevate_surface_degree(c, (deg, deg)) for c in cells]
    classifier = TrimClassifier(ts.loops, domain=ts.domain,
                                samples_per_curve=cfg.pcurve_samples,
                                snap_tol=cfg.corner_snap_tol
                                * float(np.hypot(ts.domain[1] - ts.domain[0],
                                                 ts.domain[3] - ts.domain[2])))
    base_depth = cells[0].depth if cells else 0
    limit = base_depth + cfg.max_depth
    leaves: list[QuadLeaf] = []
    stack = list(reversed(cells))
    while stack:
        rect = stack.pop()
        cls = _classify_rect_bounds(classifier, rect.param_rect)
        if cls is not PatchClass.BOUNDARY:
            leaves.append(QuadLeaf(rect, cls))
            continue
        diagonal = _incident_diagonal(classifier, rect.param_rect)
        if diagonal is not None:
            leaves.append(QuadLeaf(rect, cls, diagonal))
            continue
        if rect.depth >= limit:
            leaves.append(QuadLeaf(
                rect, cls, _separating_diagonal(classifier, rect.param_rect)))
            continue
        stack.extend(reversed(subdivide_rectangle(rect)))
    return leaves


# ---------------------------------------------------------------------------
# boundary fitting
# ---------------------------------------------------------------------------

def _rational_basis_rows(tri: BezierTriangle, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Rational Bernstein rows with the triangle's weights held fixed."""
    B = bernstein_triangle_row(tri.degree, s, t)  # (n_pts, N)
    w = tri.control_points[:, 3]
    num = B * w[:, None]
    return (num / num.sum(axis=0, keepdims=True)).T  # (N, n_pts)


def fit_residual_sq(tri: BezierTriangle, samples) -> float:
    """Sum of squared distances between targets and triangle points."""
    s, t, P = samples
    A = _rational_basis_rows(tri, s, t)
    diff = P - A @ tri.control_points[:, :3]
    return float(np.sum(diff * diff))


def fit_boundary_triangle(init: BezierTriangle, samples, cfg: FitConfig) -> BezierTriangle:
    """Regularized least-squares refinement of a boundary triangle.

    ``samples`` is (s, t, P): barycentric coordinates in the triangle's own
    frame and target 3D surface points along the trim curve. Solves

        min over V of  sum_k |P_k - T(s_k, t_k)|^2 + lam * sum |V - V_init|^2

    for the Cartesian control points (weights stay fixed, keeping the
    problem linear). With lam = 0 a rank-deficient system is solved as the
    minimum-norm correction to the initial net and flagged with a warning.
    The fitted residual never exceeds the initial one.
    """
    s, t, P = samples
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    P = np.asarray(P, dtype=float)
    if len(s) == 0:
        raise GeometryError("boundary fit needs at least one sample")
    n_pts = triangle_point_count(init.degree)
    if cfg.lam == 0 and len(s) < int(np.ceil(n_pts / 3)):
        raise GeometryError(
            f"unregularized fit needs at least {int(np.ceil(n_pts / 3))} "
            f"samples for {n_pts} control points, got {len(s)}")
    A = _rational_basis_rows(init, s, t)
    X0 = init.control_points[:, :3]
    if cfg.lam > 0:
        G = A.T @ A + cfg.lam * np.eye(n_pts)
        X = np.linalg.solve(G, A.T @ P + cfg.lam * X0)
    else:
        D, _, rank, _ = np.linalg.lstsq(A, P - A @ X0, rcond=None)
        if rank < n_pts:
            warnings.warn(
                f"boundary fit rank {rank} < {n_pts} unknowns; "
                "minimum-norm correction used", RankDeficientWarning)
        X = X0 + D
    ctrl = init.control_points.copy()
    ctrl[:, :3] = X
    fitted = BezierTriangle(init.degree, ctrl, provenance=init.provenance,
                            trim_status="boundary-fitted",
                            param_corners=init.param_corners)
    diff = P - A @ X
    resid = float(np.sum(diff * diff))
    dev = float(np.max(np.linalg.norm(diff, axis=1)))
    return replace(fitted, fit_residual=resid, fit_deviation=dev)


# ---------------------------------------------------------------------------
# full tessellation
# ---------------------------------------------------------------------------

def _triangle_mostly_inside(classifier: TrimClassifier, tri: BezierTriangle) -> bool:
    """Corner-majority vote with the barycenter breaking ties.

    Corners sitting on the trim curve are neutral, so for a clean diagonal
    split the off-diagonal corner decides.
    """
    corners = tri.param_corners
    centroid = corners.mean(axis=0, keepdims=True)
    inside, onb = classifier.classify_points(np.vstack([corners, centroid]))
    votes_in = int(np.sum(inside[:3] & ~onb[:3]))
    votes_out = int(np.sum(~inside[:3] & ~onb[:3]))
    if votes_in != votes_out:
        return votes_in > votes_out
    return bool(inside[3] or onb[3])


def _probe_cloud_deviation(tri: BezierTriangle, surface: BSplineSurface,
                           rect) -> float:
    """Upper bound on probe-point distance to the surface over a cell.

    Distances are measured to a dense sample cloud of the (untrimmed)
    surface over the cell; since the cloud is a subset of the surface this
    bounds the true point-to-surface distances from above.
    """
    from .geometry import eval_bezier_triangle

    u0, u1, v0, v1 = rect
    ss = np.linspace(0.0, 1.0, 20)
    U, V = [a.ravel() for a in np.meshgrid(u0 + ss * (u1 - u0),
                                           v0 + ss * (v1 - v0))]
    cloud = eval_surface(surface, U, V)
    probes = eval_bezier_triangle(tri, DEVIATION_PROBES[:, 0],
                                  DEVIATION_PROBES[:, 1])
    d2 = ((probes[:, None, :] - cloud[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.min(axis=1)).max())


def _hypotenuse_samples(tri: BezierTriangle, uv: np.ndarray,
                        fractions: np.ndarray):
    """Pair trim-curve points with barycentric spots along the hypotenuse.

    The clipped curve portion is matched to the triangle edge s + t = 1 by
    normalized arc length, oriented so the curve ends land on the nearer
    edge corners. Bending that edge onto the curve is exactly what the
    boundary refinement is for; basis values off the edge vanish there, so
    only the edge control points are constrained.

    Returns (s, t, matched). ``matched`` is False when the curve does not
    run roughly corner to corner of this hypotenuse (for example when it
    merely clips the opposite corner of the cell); bending the edge onto an
    unrelated curve would fold the patch, so such triangles stay exact.
    """
    c10 = tri.param_corners[1]
    c01 = tri.param_corners[2]
    first, last = uv[0], uv[-1]
    straight = (np.linalg.norm(first - c10) + np.linalg.norm(last - c01))
    flipped = (np.linalg.norm(first - c01) + np.linalg.norm(last - c10))
    fr = fractions if straight <= flipped else 1.0 - fractions
    cell_diag = float(np.linalg.norm(c01 - c10))
    matched = min(straight, flipped) <= 0.75 * cell_diag
    return 1.0 - fr, fr, matched


def tessellate_trimmed(ts: TrimmedSurface, cfg: FitConfig | None = None) -> list[BezierTriangle]:
    """Convert a trimmed surface into z-ordered Bezier triangles.

    Inside cells split exactly along the anti-diagonal; terminal boundary
    cells split along their chosen diagonal, keep the halves lying in the
    trim region, and refine those by least squares against surface points
    sampled along the clipped trim curve.
    """
    from .topology import order_patches

    cfg = cfg or FitConfig()
    leaves = build_quadtree(ts, cfg)
    classifier = TrimClassifier(ts.loops, domain=ts.domain,
                                samples_per_curve=cfg.pcurve_samples,
                                snap_tol=cfg.corner_snap_tol
                                * float(np.hypot(ts.domain[1] - ts.domain[0],
                                                 ts.domain[3] - ts.domain[2])))
    pairs: list[tuple[BezierRectangle, list[BezierTriangle]]] = []
    for leaf in leaves:
        if leaf.patch_class is PatchClass.OUTSIDE:
            continue
        if leaf.patch_class is PatchClass.INSIDE:
            pairs.append((leaf.rect, list(rect_to_triangles(leaf.rect))))
            continue
        halves = _split_rect(leaf.rect, leaf.diagonal or "anti")
        kept: list[BezierTriangle] = []
        uv, fractions = classifier.clipped_boundary_chain(
            leaf.rect.param_rect, cfg.n_boundary_samples)
        for tri in halves:
            if not _triangle_mostly_inside(classifier, tri):
                continue
            if len(uv) == 0:
                kept.append(tri)
                continue
            s, t, matched = _hypotenuse_samples(tri, uv, fractions)
            if not matched:
                kept.append(tri)
                continue
            P = eval_surface(ts.surface, uv[:, 0], uv[:, 1])
            fitted = fit_boundary_triangle(tri, (s, t, P), cfg)
            dev = max(fitted.fit_deviation or 0.0,
                      _probe_cloud_deviation(fitted, ts.surface,
                                             leaf.rect.param_rect))
            kept.append(replace(fitted, fit_deviation=dev))
        if kept:
            pairs.append((leaf.rect, kept))
    return order_patches(pairs)


def untrimmed_boundary_loop(surface: BSplineSurface) -> TrimLoop:
    """The full-domain rectangle as a counter-clockwise trim loop."""
    u0, u1, v0, v1 = surface.domain
    corners = [(u0, v0), (u1, v0), (u1, v1), (u0, v1)]
    curves = []
    for k in range(4):
        a = np.asarray(corners[k], dtype=float)
        b = np.asarray(corners[(k + 1) % 4], dtype=float)
        curves.append((BSplineCurve(1, np.vstack([a, b]), [0.0, 0.0, 1.0, 1.0]),
                       False))
    return TrimLoop(tuple(curves))
