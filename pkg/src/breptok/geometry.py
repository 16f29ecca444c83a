"""Exact B-spline/Bezier geometry: evaluation, refinement, patch splitting.

Curves are polynomial and live either in 3D model space or in the 2D (u, v)
parameter space of a surface. Surfaces, Bezier rectangles, and Bezier
triangles are rational; their control points are stored as Cartesian
coordinates plus a positive weight, and every shape-preserving operation
(knot insertion, degree elevation, subdivision, rectangle-to-triangle
conversion) runs on 4D homogeneous coordinates internally.

All geometry uses 64-bit floats. Two knots are considered equal when they
differ by at most ``KNOT_EQ_REL`` times the knot range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DomainError, GeometryError

KNOT_EQ_REL = 1e-10


# ---------------------------------------------------------------------------
# knot vector helpers
# ---------------------------------------------------------------------------

def knot_tolerance(knots: np.ndarray) -> float:
    """Absolute tolerance below which two knots count as equal."""
    knots = np.asarray(knots, dtype=float)
    rng = float(knots[-1] - knots[0])
    return KNOT_EQ_REL * (rng if rng > 0.0 else 1.0)


def validate_knot_vector(knots: np.ndarray, n_ctrl: int, degree: int) -> np.ndarray:
    """Check a knot vector against its owning curve/direction.

    Enforces: finite entries, non-decreasing order, the count relation
    ``len(knots) == n_ctrl + degree + 1``, and interior multiplicity at most
    ``degree``. Returns the vector as a float array.
    """
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1:
        raise GeometryError("knot vector must be one-dimensional")
    if not np.all(np.isfinite(knots)):
        raise GeometryError("knot vector contains non-finite values")
    if np.any(np.diff(knots) < 0):
        raise GeometryError("knot vector must be non-decreasing")
    expected = n_ctrl + degree + 1
    if len(knots) != expected:
        raise GeometryError(
            f"knot count {len(knots)} != n_ctrl + degree + 1 = {expected}")
    tol = knot_tolerance(knots)
    lo, hi = domain_of(knots, degree)
    for value, mult in zip(*unique_knots(knots, tol)):
        if lo + tol < value < hi - tol and mult > degree:
            raise GeometryError(
                f"interior knot {value} has multiplicity {mult} > degree {degree}")
    return knots


def unique_knots(knots: np.ndarray, tol: float | None = None):
    """Distinct knot values and their multiplicities."""
    knots = np.asarray(knots, dtype=float)
    if tol is None:
        tol = knot_tolerance(knots)
    values: list[float] = []
    counts: list[int] = []
    for u in knots:
        if values and abs(u - values[-1]) <= tol:
            counts[-1] += 1
        else:
            values.append(float(u))
            counts.append(1)
    return values, counts


def domain_of(knots: np.ndarray, degree: int) -> tuple[float, float]:
    """Valid parameter range ``[u_p, u_{n+1}]`` of a knot vector."""
    return float(knots[degree]), float(knots[len(knots) - degree - 1])


def find_span(knots: np.ndarray, degree: int, t: float) -> int:
    """Index k of the knot span with ``knots[k] <= t < knots[k+1]``.

    The domain's right endpoint maps to the last nonempty span.
    """
    lo, hi = domain_of(knots, degree)
    n_ctrl = len(knots) - degree - 1
    if t >= hi:
        k = n_ctrl - 1
        while k > degree and knots[k] >= knots[k + 1]:
            k -= 1
        return k
    k = int(np.searchsorted(knots, t, side="right")) - 1
    return min(max(k, degree), n_ctrl - 1)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BSplineCurve:
    """Polynomial B-spline curve of arbitrary degree in 2D or 3D.

    ``control_points`` has shape (n_ctrl, dim) with dim 2 for curves living
    in a surface's parameter space and 3 for model-space curves.
    """

    degree: int
    control_points: np.ndarray
    knots: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise GeometryError("control points must be an (n, 2) or (n, 3) array")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("control points contain non-finite values")
        if self.degree < 0:
            raise GeometryError("degree must be non-negative")
        if len(pts) < self.degree + 1:
            raise GeometryError(
                f"need at least degree+1 = {self.degree + 1} control points, got {len(pts)}")
        knots = validate_knot_vector(self.knots, len(pts), self.degree)
        object.__setattr__(self, "control_points", pts)
        object.__setattr__(self, "knots", knots)

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]

    @property
    def domain(self) -> tuple[float, float]:
        return domain_of(self.knots, self.degree)


@dataclass(frozen=True, eq=False)
class BezierCurve:
    """Knot-free polynomial curve on [0, 1] with degree+1 control points."""

    degree: int
    control_points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise GeometryError("control points must be an (n, 2) or (n, 3) array")
        if len(pts) != self.degree + 1:
            raise GeometryError(
                f"Bezier curve of degree {self.degree} needs {self.degree + 1} "
                f"control points, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("control points contain non-finite values")
        object.__setattr__(self, "control_points", pts)

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]


@dataclass(frozen=True, eq=False)
class BezierSegment:
    """A Bezier piece of a decomposed B-spline plus its source interval."""

    curve: BezierCurve
    t0: float
    t1: float


@dataclass(frozen=True, eq=False)
class BSplineSurface:
    """Rational tensor-product B-spline surface.

    ``control_points`` has shape (nu, nv, 4) holding (x, y, z, w) per point;
    index i runs along u, index j along v.
    """

    degree_u: int
    degree_v: int
    control_points: np.ndarray
    knots_u: np.ndarray
    knots_v: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.control_points, dtype=float)
        if grid.ndim != 3 or grid.shape[2] != 4:
            raise GeometryError("control grid must be an (nu, nv, 4) array")
        if not np.all(np.isfinite(grid)):
            raise GeometryError("control grid contains non-finite values")
        if np.any(grid[:, :, 3] <= 0):
            raise GeometryError("all weights must be positive")
        ku = validate_knot_vector(self.knots_u, grid.shape[0], self.degree_u)
        kv = validate_knot_vector(self.knots_v, grid.shape[1], self.degree_v)
        object.__setattr__(self, "control_points", grid)
        object.__setattr__(self, "knots_u", ku)
        object.__setattr__(self, "knots_v", kv)

    @property
    def domain(self) -> tuple[float, float, float, float]:
        u0, u1 = domain_of(self.knots_u, self.degree_u)
        v0, v1 = domain_of(self.knots_v, self.degree_v)
        return u0, u1, v0, v1


@dataclass(frozen=True, eq=False)
class BezierRectangle:
    """Rational tensor-product Bezier patch over a sub-rectangle of a surface.

    ``grid_coords`` and ``depth`` place the patch in the quadtree used for
    z-order sorting: integer cell coordinates (x along u, y along v) at the
    given depth.
    """

    degree_u: int
    degree_v: int
    control_points: np.ndarray
    param_rect: tuple[float, float, float, float]
    grid_coords: tuple[int, int] = (0, 0)
    depth: int = 0

    def __post_init__(self):
        grid = np.asarray(self.control_points, dtype=float)
        if grid.ndim != 3 or grid.shape[2] != 4:
            raise GeometryError("control grid must be an (mu, mv, 4) array")
        if grid.shape[0] != self.degree_u + 1 or grid.shape[1] != self.degree_v + 1:
            raise GeometryError(
                f"grid {grid.shape[:2]} does not match degrees "
                f"({self.degree_u}, {self.degree_v})")
        u0, u1, v0, v1 = self.param_rect
        if not (u0 < u1 and v0 < v1):
            raise GeometryError("param_rect must satisfy u0 < u1 and v0 < v1")
        if np.any(grid[:, :, 3] <= 0):
            raise GeometryError("all weights must be positive")
        object.__setattr__(self, "control_points", grid)

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.grid_coords[0], self.grid_coords[1], self.depth)


@dataclass(frozen=True, eq=False)
class BezierTriangle:
    """Rational Bezier triangle in barycentric form.

    ``control_points`` has shape ((d+1)(d+2)/2, 4) storing (x, y, z, w) in
    lexicographic (a, b) order (a ascending, then b), a + b <= d.
    ``param_corners`` gives the surface-parameter images of the barycentric
    corners (0,0), (1,0), (0,1); ``provenance`` records the parent rectangle
    key and which half of the split this triangle is.
    """

    degree: int
    control_points: np.ndarray
    provenance: tuple[tuple[int, int, int], str] = ((0, 0, 0), "lower-left")
    trim_status: str = "exact"
    param_corners: np.ndarray = field(
        default_factory=lambda: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    fit_residual: float | None = None
    fit_deviation: float | None = None

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=float)
        want = (self.degree + 1) * (self.degree + 2) // 2
        if pts.ndim != 2 or pts.shape != (want, 4):
            raise GeometryError(
                f"triangle of degree {self.degree} needs control array "
                f"({want}, 4), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("control points contain non-finite values")
        if np.any(pts[:, 3] <= 0):
            raise GeometryError("all weights must be positive")
        if self.trim_status not in ("exact", "boundary-fitted"):
            raise GeometryError(f"unknown trim_status {self.trim_status!r}")
        object.__setattr__(self, "control_points", pts)
        object.__setattr__(self, "param_corners",
                           np.asarray(self.param_corners, dtype=float))

    def param_at(self, s, t) -> np.ndarray:
        """Surface parameters for barycentric (s, t); broadcasts over arrays."""
        c = self.param_corners
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return (c[0] + np.multiply.outer(s, c[1] - c[0])
                + np.multiply.outer(t, c[2] - c[0]))

    def barycentric_of(self, u, v) -> tuple[np.ndarray, np.ndarray]:
        """Inverse of :meth:`param_at` (affine solve)."""
        c = self.param_corners
        m = np.column_stack([c[1] - c[0], c[2] - c[0]])
        rhs = np.stack([np.asarray(u, dtype=float) - c[0][0],
                        np.asarray(v, dtype=float) - c[0][1]])
        st = np.linalg.solve(m, rhs.reshape(2, -1))
        s = st[0].reshape(np.shape(u))
        t = st[1].reshape(np.shape(u))
        return s, t


def triangle_point_count(degree: int) -> int:
    return (degree + 1) * (degree + 2) // 2


@lru_cache(maxsize=None)
def triangle_lex_indices(degree: int) -> tuple[tuple[int, int], ...]:
    """(a, b) pairs with a + b <= degree in storage order."""
    return tuple((a, b) for a in range(degree + 1) for b in range(degree + 1 - a))


@lru_cache(maxsize=None)
def _triangle_index_map(degree: int) -> dict[tuple[int, int], int]:
    return {ab: i for i, ab in enumerate(triangle_lex_indices(degree))}


def triangle_index(a: int, b: int, degree: int) -> int:
    return _triangle_index_map(degree)[(a, b)]


# ---------------------------------------------------------------------------
# homogeneous helpers
# ---------------------------------------------------------------------------

def to_homogeneous(pts: np.ndarray) -> np.ndarray:
    """(..., 4) Cartesian+weight -> (..., 4) (wx, wy, wz, w)."""
    h = np.array(pts, dtype=float)
    h[..., :3] *= h[..., 3:4]
    return h


def from_homogeneous(h: np.ndarray) -> np.ndarray:
    """(..., 4) (wx, wy, wz, w) -> (..., 4) Cartesian+weight."""
    pts = np.array(h, dtype=float)
    pts[..., :3] /= pts[..., 3:4]
    return pts


# ---------------------------------------------------------------------------
# basis functions
# ---------------------------------------------------------------------------

def basis(knots: np.ndarray, p: int, i: int, t: float) -> float:
    """B-spline basis value N_{i,p}(t) by the Cox-de Boor recursion.

    Terms with a zero denominator are taken as zero. The right endpoint of
    the overall knot range is treated as belonging to the last nonempty span
    so the basis still sums to one there.
    """
    knots = np.asarray(knots, dtype=float)
    if not (knots[0] <= t <= knots[-1]):
        raise DomainError(f"parameter {t} outside knot range "
                          f"[{knots[0]}, {knots[-1]}]")
    if i < 0 or i + p + 1 >= len(knots):
        raise DomainError(f"basis index {i} out of range for degree {p}")
    return _cox_de_boor(knots, p, i, t, float(knots[-1]))


def _cox_de_boor(knots, p, i, t, t_end):
    if p == 0:
        if knots[i] <= t < knots[i + 1]:
            return 1.0
        # half-open spans; close the final span at the range's right end
        if t >= t_end and knots[i] < knots[i + 1] >= t_end:
            return 1.0
        return 0.0
    left = 0.0
    den = knots[i + p] - knots[i]
    if den > 0.0:
        left = (t - knots[i]) / den * _cox_de_boor(knots, p - 1, i, t, t_end)
    right = 0.0
    den = knots[i + p + 1] - knots[i + 1]
    if den > 0.0:
        right = (knots[i + p + 1] - t) / den * _cox_de_boor(knots, p - 1, i + 1, t, t_end)
    return left + right


def basis_row(knots: np.ndarray, p: int, t) -> np.ndarray:
    """All degree-p basis values at parameter(s) t.

    Returns shape (n_ctrl,) for scalar t or (n_ctrl, len(t)) for arrays.
    Uses the iterative triangular recurrence, vectorized over t.
    """
    knots = np.asarray(knots, dtype=float)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    t_end = float(knots[-1])
    n0 = len(knots) - 1
    N = np.zeros((n0, len(t_arr)))
    for i in range(n0):
        hit = (knots[i] <= t_arr) & (t_arr < knots[i + 1])
        if knots[i] < knots[i + 1] >= t_end:
            hit |= t_arr >= t_end
        N[i, hit] = 1.0
    for d in range(1, p + 1):
        M = np.zeros((n0 - d, len(t_arr)))
        for i in range(n0 - d):
            den = knots[i + d] - knots[i]
            if den > 0.0:
                M[i] += (t_arr - knots[i]) / den * N[i]
            den = knots[i + d + 1] - knots[i + 1]
            if den > 0.0:
                M[i] += (knots[i + d + 1] - t_arr) / den * N[i + 1]
        N = M
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return N[:, 0]
    return N


def bernstein_row(degree: int, t) -> np.ndarray:
    """Bernstein basis values B_{i,n}(t); (n+1,) or (n+1, len(t))."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    n = degree
    out = np.empty((n + 1, len(t_arr)))
    for i in range(n + 1):
        out[i] = math.comb(n, i) * (1.0 - t_arr) ** (n - i) * t_arr**i
    if np.isscalar(t) or np.asarray(t).ndim == 0:
        return out[:, 0]
    return out


def bernstein_triangle_row(degree: int, s, t) -> np.ndarray:
    """Bivariate Bernstein basis over the simplex in lexicographic order.

    Returns ((d+1)(d+2)/2,) for scalars or (n_pts, len(s)) for arrays.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    w_arr = 1.0 - s_arr - t_arr
    idx = triangle_lex_indices(degree)
    out = np.empty((len(idx), len(s_arr)))
    fact = math.factorial(degree)
    for row, (a, b) in enumerate(idx):
        c = fact // (math.factorial(a) * math.factorial(b)
                     * math.factorial(degree - a - b))
        out[row] = c * s_arr**a * t_arr**b * w_arr ** (degree - a - b)
    if np.isscalar(s) or np.asarray(s).ndim == 0:
        return out[:, 0]
    return out


# ---------------------------------------------------------------------------
# curve evaluation and refinement
# ---------------------------------------------------------------------------

def _check_curve_param(curve: BSplineCurve, t) -> None:
    lo, hi = curve.domain
    tol = knot_tolerance(curve.knots)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < lo - tol) or np.any(t_arr > hi + tol):
        raise DomainError(f"parameter outside curve domain [{lo}, {hi}]")


def eval_curve(curve: BSplineCurve, t) -> np.ndarray:
    """Point(s) on a B-spline curve; t may be a scalar or 1D array."""
    _check_curve_param(curve, t)
    N = basis_row(curve.knots, curve.degree, t)
    if N.ndim == 1:
        return N @ curve.control_points
    return N.T @ curve.control_points


def eval_bezier_curve(bez: BezierCurve, t) -> np.ndarray:
    """Bernstein-form evaluation of a Bezier curve on [0, 1]."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -1e-12) or np.any(t_arr > 1.0 + 1e-12):
        raise DomainError("Bezier parameter must lie in [0, 1]")
    B = bernstein_row(bez.degree, t)
    if B.ndim == 1:
        return B @ bez.control_points
    return B.T @ bez.control_points


def bezier_curve_tangent(bez: BezierCurve, t: float) -> np.ndarray:
    """Unit tangent of a Bezier curve; zero vector if the derivative vanishes."""
    n = bez.degree
    diffs = np.diff(bez.control_points, axis=0) * n
    if n == 0:
        return np.zeros(bez.control_points.shape[1])
    B = bernstein_row(n - 1, t)
    d = B @ diffs
    norm = np.linalg.norm(d)
    if norm < 1e-300:
        return np.zeros_like(d)
    return d / norm


def insert_knot(curve: BSplineCurve, u: float) -> BSplineCurve:
    """Insert one knot, preserving shape (Boehm's rule).

    The new control points blend neighbours: Q_i = a_i P_i + (1 - a_i) P_{i-1}
    with a_i = (u - u_i) / (u_{i+p} - u_i) over the affected window.
    """
    lo, hi = curve.domain
    tol = knot_tolerance(curve.knots)
    if not (lo + tol < u < hi - tol):
        raise DomainError(f"knot {u} must lie strictly inside ({lo}, {hi})")
    mult = int(np.sum(np.abs(curve.knots - u) <= tol))
    p = curve.degree
    if mult >= p:
        raise GeometryError(
            f"inserting {u} would raise multiplicity to {mult + 1} > degree {p}")
    k = find_span(curve.knots, p, u)
    P = curve.control_points
    n_new = len(P) + 1
    Q = np.empty((n_new, P.shape[1]))
    Q[: k - p + 1] = P[: k - p + 1]
    for i in range(k - p + 1, k + 1):
        a = (u - curve.knots[i]) / (curve.knots[i + p] - curve.knots[i])
        Q[i] = a * P[i] + (1.0 - a) * P[i - 1]
    Q[k + 1:] = P[k:]
    new_knots = np.insert(curve.knots, k + 1, u)
    return BSplineCurve(p, Q, new_knots)


def is_clamped(knots: np.ndarray, degree: int) -> bool:
    tol = knot_tolerance(knots)
    return (abs(knots[degree] - knots[0]) <= tol
            and abs(knots[-degree - 1] - knots[-1]) <= tol)


def decompose_curve(curve: BSplineCurve) -> list[BezierSegment]:
    """Split a clamped B-spline curve into Bezier segments.

    Each distinct interior knot is raised to multiplicity p by repeated
    insertion; consecutive groups of p+1 control points then form the
    Bezier pieces, paired with their source parameter intervals.
    """
    p = curve.degree
    if p == 0:
        raise GeometryError("cannot decompose a degree-0 curve")
    if not is_clamped(curve.knots, p):
        raise GeometryError("decomposition requires a clamped knot vector")
    tol = knot_tolerance(curve.knots)
    lo, hi = curve.domain
    work = curve
    values, counts = unique_knots(curve.knots, tol)
    for value, mult in zip(values, counts):
        if lo + tol < value < hi - tol:
            for _ in range(p - mult):
                work = insert_knot(work, value)
    breakpoints = [v for v in unique_knots(work.knots, tol)[0]]
    segments: list[BezierSegment] = []
    for j in range(len(breakpoints) - 1):
        t0, t1 = breakpoints[j], breakpoints[j + 1]
        ctrl = work.control_points[j * p: j * p + p + 1]
        segments.append(BezierSegment(BezierCurve(p, ctrl), t0, t1))
    return segments


def bezier_to_bspline(bez: BezierCurve, t0: float = 0.0, t1: float = 1.0) -> BSplineCurve:
    """View a Bezier curve as a clamped single-span B-spline on [t0, t1]."""
    n = bez.degree
    knots = np.array([t0] * (n + 1) + [t1] * (n + 1))
    return BSplineCurve(n, bez.control_points, knots)


def curve_segments_between(curve: BSplineCurve, t0: float, t1: float) -> list[BezierSegment]:
    """Bezier segments of the curve restricted to [t0, t1].

    Splits the curve at t0 and t1 (when strictly interior) and keeps the
    pieces whose midpoints fall inside the interval.
    """
    lo, hi = curve.domain
    tol = knot_tolerance(curve.knots)
    if t1 <= t0:
        raise DomainError(f"need t0 < t1, got [{t0}, {t1}]")
    if t0 < lo - tol or t1 > hi + tol:
        raise DomainError(f"[{t0}, {t1}] outside curve domain [{lo}, {hi}]")
    work = curve
    for cut in (t0, t1):
        if lo + tol < cut < hi - tol:
            mult = int(np.sum(np.abs(work.knots - cut) <= tol))
            for _ in range(curve.degree - mult):
                work = insert_knot(work, cut)
    segments = decompose_curve(work)
    return [seg for seg in segments
            if t0 - tol <= 0.5 * (seg.t0 + seg.t1) <= t1 + tol]


def elevate_degree(bez: BezierCurve, target: int) -> BezierCurve:
    """Raise a Bezier curve's degree without changing its shape."""
    if target < bez.degree:
        raise GeometryError(
            f"target degree {target} below current degree {bez.degree}")
    ctrl = bez.control_points
    for n in range(bez.degree, target):
        new = np.empty((n + 2, ctrl.shape[1]))
        new[0] = ctrl[0]
        new[n + 1] = ctrl[n]
        for i in range(1, n + 1):
            a = i / (n + 1)
            new[i] = a * ctrl[i - 1] + (1.0 - a) * ctrl[i]
        ctrl = new
    return BezierCurve(target, ctrl)


# ---------------------------------------------------------------------------
# surface evaluation and refinement
# ---------------------------------------------------------------------------

def eval_surface(surface: BSplineSurface, u, v) -> np.ndarray:
    """Rational surface point(s): weighted numerator over weight sum.

    Scalars give a (3,) point; equal-length arrays give (len, 3).
    """
    u0, u1, v0, v1 = surface.domain
    tol_u = knot_tolerance(surface.knots_u)
    tol_v = knot_tolerance(surface.knots_v)
    u_arr = np.asarray(u, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    if (np.any(u_arr < u0 - tol_u) or np.any(u_arr > u1 + tol_u)
            or np.any(v_arr < v0 - tol_v) or np.any(v_arr > v1 + tol_v)):
        raise DomainError(f"(u, v) outside surface domain "
                          f"[{u0}, {u1}] x [{v0}, {v1}]")
    Nu = basis_row(surface.knots_u, surface.degree_u, u)
    Nv = basis_row(surface.knots_v, surface.degree_v, v)
    H = to_homogeneous(surface.control_points)
    if Nu.ndim == 1:
        h = np.einsum("i,j,ijc->c", Nu, Nv, H)
        return h[:3] / h[3]
    h = np.einsum("ik,jk,ijc->kc", Nu, Nv, H)
    return h[:, :3] / h[:, 3:4]


def _insert_grid_knot(grid_h: np.ndarray, knots: np.ndarray, degree: int,
                      u: float) -> tuple[np.ndarray, np.ndarray]:
    """Boehm insertion along axis 0 of a homogeneous grid."""
    k = find_span(knots, degree, u)
    n_new = grid_h.shape[0] + 1
    Q = np.empty((n_new,) + grid_h.shape[1:])
    Q[: k - degree + 1] = grid_h[: k - degree + 1]
    for i in range(k - degree + 1, k + 1):
        a = (u - knots[i]) / (knots[i + degree] - knots[i])
        Q[i] = a * grid_h[i] + (1.0 - a) * grid_h[i - 1]
    Q[k + 1:] = grid_h[k:]
    return Q, np.insert(knots, k + 1, u)


def insert_surface_knot(surface: BSplineSurface, direction: str, u: float) -> BSplineSurface:
    """Insert one knot along 'u' or 'v', preserving the surface shape."""
    if direction not in ("u", "v"):
        raise GeometryError("direction must be 'u' or 'v'")
    knots = surface.knots_u if direction == "u" else surface.knots_v
    degree = surface.degree_u if direction == "u" else surface.degree_v
    lo, hi = domain_of(knots, degree)
    tol = knot_tolerance(knots)
    if not (lo + tol < u < hi - tol):
        raise DomainError(f"knot {u} must lie strictly inside ({lo}, {hi})")
    if int(np.sum(np.abs(knots - u) <= tol)) >= degree:
        raise GeometryError(f"inserting {u} would exceed multiplicity {degree}")
    H = to_homogeneous(surface.control_points)
    if direction == "u":
        Q, new_knots = _insert_grid_knot(H, knots, degree, u)
        return BSplineSurface(surface.degree_u, surface.degree_v,
                              from_homogeneous(Q), new_knots, surface.knots_v)
    Q, new_knots = _insert_grid_knot(np.swapaxes(H, 0, 1), knots, degree, u)
    return BSplineSurface(surface.degree_u, surface.degree_v,
                          from_homogeneous(np.swapaxes(Q, 0, 1)),
                          surface.knots_u, new_knots)


def decompose_surface(surface: BSplineSurface) -> list[BezierRectangle]:
    """Refine all interior knots to full multiplicity and cut Bezier cells.

    Cells partition the domain; each carries its param_rect, its (x, y)
    knot-span grid coordinates, and the base quadtree depth
    ceil(log2(max(spans_u, spans_v))).
    """
    pu, pv = surface.degree_u, surface.degree_v
    if not is_clamped(surface.knots_u, pu) or not is_clamped(surface.knots_v, pv):
        raise GeometryError("decomposition requires clamped knot vectors")
    work = surface
    for direction in ("u", "v"):
        knots = work.knots_u if direction == "u" else work.knots_v
        degree = pu if direction == "u" else pv
        lo, hi = domain_of(knots, degree)
        tol = knot_tolerance(knots)
        for value, mult in zip(*unique_knots(knots, tol)):
            if lo + tol < value < hi - tol:
                for _ in range(degree - mult):
                    work = insert_surface_knot(work, direction, value)
    bu = unique_knots(work.knots_u)[0]
    bv = unique_knots(work.knots_v)[0]
    spans_u, spans_v = len(bu) - 1, len(bv) - 1
    base_depth = max(spans_u - 1, spans_v - 1).bit_length()
    cells: list[BezierRectangle] = []
    for iy in range(spans_v):
        for ix in range(spans_u):
            ctrl = work.control_points[ix * pu: ix * pu + pu + 1,
                                       iy * pv: iy * pv + pv + 1]
            cells.append(BezierRectangle(
                pu, pv, ctrl,
                (bu[ix], bu[ix + 1], bv[iy], bv[iy + 1]),
                grid_coords=(ix, iy), depth=base_depth))
    return cells


def eval_bezier_rectangle(rect: BezierRectangle, s, t) -> np.ndarray:
    """Rational patch point(s) in the patch's local [0,1]^2 coordinates."""
    Bu = bernstein_row(rect.degree_u, s)
    Bv = bernstein_row(rect.degree_v, t)
    H = to_homogeneous(rect.control_points)
    if Bu.ndim == 1:
        h = np.einsum("i,j,ijc->c", Bu, Bv, H)
        return h[:3] / h[3]
    h = np.einsum("ik,jk,ijc->kc", Bu, Bv, H)
    return h[:, :3] / h[:, 3:4]


def rect_local_coords(rect: BezierRectangle, u, v):
    """Map global surface parameters into the patch's local [0,1]^2."""
    u0, u1, v0, v1 = rect.param_rect
    return ((np.asarray(u, dtype=float) - u0) / (u1 - u0),
            (np.asarray(v, dtype=float) - v0) / (v1 - v0))


def _elevate_grid_axis(grid_h: np.ndarray, target: int) -> np.ndarray:
    """Bezier degree elevation along axis 0 of a homogeneous grid."""
    current = grid_h.shape[0] - 1
    out = grid_h
    for n in range(current, target):
        new = np.empty((n + 2,) + out.shape[1:])
        new[0] = out[0]
        new[n + 1] = out[n]
        for i in range(1, n + 1):
            a = i / (n + 1)
            new[i] = a * out[i - 1] + (1.0 - a) * out[i]
        out = new
    return out


def elevate_surface_degree(rect: BezierRectangle,
                           targets: tuple[int, int]) -> BezierRectangle:
    """Raise a Bezier rectangle to the target (u, v) degrees, shape intact."""
    tu, tv = targets
    if tu < rect.degree_u or tv < rect.degree_v:
        raise GeometryError(
            f"targets {targets} below current degrees "
            f"({rect.degree_u}, {rect.degree_v})")
    H = to_homogeneous(rect.control_points)
    H = _elevate_grid_axis(H, tu)
    H = np.swapaxes(_elevate_grid_axis(np.swapaxes(H, 0, 1), tv), 0, 1)
    return BezierRectangle(tu, tv, from_homogeneous(H), rect.param_rect,
                           rect.grid_coords, rect.depth)


# ---------------------------------------------------------------------------
# rectangle -> triangle conversion
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _rect_to_tri_matrix(m: int, n: int) -> np.ndarray:
    """Convex-combination coefficients taking an (m+1)x(n+1) tensor grid to
    the degree-(m+n) triangle covering the half s + t <= 1.

    Entry [(a,b), (i,j)] = C(a,i) C(b,j) C(m+n-a-b, m-i-(b-j)) / C(m+n, n),
    with out-of-range binomials zero. Every row sums to one, so the map is
    affine-invariant.
    """
    d = m + n
    idx = triangle_lex_indices(d)
    M = np.zeros((len(idx), (m + 1) * (n + 1)))
    denom = math.comb(d, n)

    def comb0(nn, kk):
        if kk < 0 or kk > nn or nn < 0:
            return 0
        return math.comb(nn, kk)

    for row, (a, b) in enumerate(idx):
        for i in range(m + 1):
            for j in range(n + 1):
                c = comb0(a, i) * comb0(b, j) * comb0(d - a - b, m - i - (b - j))
                if c:
                    M[row, i * (n + 1) + j] = c / denom
    return M


def rect_to_triangles(rect: BezierRectangle) -> tuple[BezierTriangle, BezierTriangle]:
    """Split a Bezier rectangle along its anti-diagonal into two triangles.

    The lower-left triangle covers local {s + t <= 1} with T1(s, t) equal to
    the rectangle at (s, t); the upper-right one is produced by the symmetric
    substitution, i.e. the same coefficients applied to the index-reversed
    grid, with T2(s, t) equal to the rectangle at (1 - s, 1 - t). Weights are
    handled by converting in homogeneous coordinates.
    """
    return _split_rect(rect, "anti")


def _split_rect(rect: BezierRectangle, diagonal: str) -> tuple[BezierTriangle, BezierTriangle]:
    """Diagonal split; 'anti' joins (1,0)-(0,1), 'main' joins (0,0)-(1,1)."""
    m, n = rect.degree_u, rect.degree_v
    M = _rect_to_tri_matrix(m, n)
    H = to_homogeneous(rect.control_points)
    u0, u1, v0, v1 = rect.param_rect
    d = m + n

    def tri_from(grid_h, corners, half):
        V = M @ grid_h.reshape((m + 1) * (n + 1), 4)
        return BezierTriangle(d, from_homogeneous(V),
                              provenance=(rect.key, half),
                              param_corners=np.asarray(corners, dtype=float))

    if diagonal == "anti":
        t1 = tri_from(H, [(u0, v0), (u1, v0), (u0, v1)], "lower-left")
        t2 = tri_from(H[::-1, ::-1], [(u1, v1), (u0, v1), (u1, v0)], "upper-right")
    elif diagonal == "main":
        # flip u: the anti-diagonal of the u-reversed patch is the main diagonal
        t1 = tri_from(H[::-1, :], [(u1, v0), (u0, v0), (u1, v1)], "lower-right")
        t2 = tri_from(H[:, ::-1], [(u0, v1), (u1, v1), (u0, v0)], "upper-left")
    else:
        raise GeometryError(f"unknown diagonal {diagonal!r}")
    return t1, t2


# ---------------------------------------------------------------------------
# triangle evaluation
# ---------------------------------------------------------------------------

def eval_bezier_triangle(tri: BezierTriangle, s, t) -> np.ndarray:
    """Rational barycentric Bernstein evaluation; s, t >= 0, s + t <= 1."""
    s_arr = np.asarray(s, dtype=float)
    t_arr = np.asarray(t, dtype=float)
    eps = 1e-12
    if (np.any(s_arr < -eps) or np.any(t_arr < -eps)
            or np.any(s_arr + t_arr > 1.0 + eps)):
        raise DomainError("(s, t) outside the barycentric domain")
    B = bernstein_triangle_row(tri.degree, s, t)
    H = to_homogeneous(tri.control_points)
    if B.ndim == 1:
        h = B @ H
        return h[:3] / h[3]
    h = B.T @ H
    return h[:, :3] / h[:, 3:4]


def _triangle_partial_grids(tri: BezierTriangle) -> tuple[np.ndarray, np.ndarray]:
    """Homogeneous control nets of the s- and t-partial derivatives."""
    d = tri.degree
    H = to_homogeneous(tri.control_points)
    get = _triangle_index_map(d)
    idx_lower = triangle_lex_indices(d - 1)
    Ds = np.empty((len(idx_lower), 4))
    Dt = np.empty((len(idx_lower), 4))
    for row, (a, b) in enumerate(idx_lower):
        Ds[row] = d * (H[get[(a + 1, b)]] - H[get[(a, b)]])
        Dt[row] = d * (H[get[(a, b + 1)]] - H[get[(a, b)]])
    return Ds, Dt


def triangle_center_normal(tri: BezierTriangle) -> tuple[np.ndarray, bool]:
    """Unit normal at the barycentric center (1/3, 1/3).

    Returns (normal, degenerate). If the tangent cross product is smaller
    than 1e-12 times the control-net bounding-box diagonal the patch is
    flagged degenerate and the zero vector returned.
    """
    s = t = 1.0 / 3.0
    H = to_homogeneous(tri.control_points)
    B = bernstein_triangle_row(tri.degree, s, t)
    h = B @ H
    X, W = h[:3], h[3]
    Ds, Dt = _triangle_partial_grids(tri)
    Bl = bernstein_triangle_row(tri.degree - 1, s, t)
    hs = Bl @ Ds
    ht = Bl @ Dt
    cs = (hs[:3] * W - X * hs[3]) / W**2
    ct = (ht[:3] * W - X * ht[3]) / W**2
    cross = np.cross(cs, ct)
    pts = tri.control_points[:, :3]
    diag = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    if np.linalg.norm(cross) <= 1e-12 * diag:
        return np.zeros(3), True
    return cross / np.linalg.norm(cross), False


# ---------------------------------------------------------------------------
# de Casteljau subdivision (used by the trimming quadtree)
# ---------------------------------------------------------------------------

def _split_axis_mid(grid_h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """de Casteljau split at 0.5 along axis 0 of a homogeneous grid.

    Equivalent to inserting the midpoint knot to full multiplicity.
    """
    n = grid_h.shape[0] - 1
    left = np.empty_like(grid_h)
    right = np.empty_like(grid_h)
    work = grid_h.copy()
    left[0] = work[0]
    right[n] = work[n]
    for r in range(1, n + 1):
        work = 0.5 * (work[:-1] + work[1:])
        left[r] = work[0]
        right[n - r] = work[-1]
    return left, right


def subdivide_rectangle(rect: BezierRectangle) -> list[BezierRectangle]:
    """Split a patch into its four half-parameter children.

    Children keep the parent's degrees; coords become (2x+dx, 2y+dy) at
    depth+1, listed in the order (0,0), (1,0), (0,1), (1,1).
    """
    H = to_homogeneous(rect.control_points)
    lo_u, hi_u = _split_axis_mid(H)
    u0, u1, v0, v1 = rect.param_rect
    um, vm = 0.5 * (u0 + u1), 0.5 * (v0 + v1)
    x, y = rect.grid_coords
    out: list[BezierRectangle] = []
    # children in (0,0), (1,0), (0,1), (1,1) order
    quads = [(0, 0, lo_u, (u0, um), "lo"), (1, 0, hi_u, (um, u1), "lo"),
             (0, 1, lo_u, (u0, um), "hi"), (1, 1, hi_u, (um, u1), "hi")]
    for dx, dy, part_u, (uu0, uu1), v_half in quads:
        lo_v, hi_v = _split_axis_mid(np.swapaxes(part_u, 0, 1))
        chosen = lo_v if v_half == "lo" else hi_v
        grid = from_homogeneous(np.swapaxes(chosen, 0, 1))
        vv0, vv1 = (v0, vm) if v_half == "lo" else (vm, v1)
        out.append(BezierRectangle(rect.degree_u, rect.degree_v, grid,
                                   (uu0, uu1, vv0, vv1),
                                   grid_coords=(2 * x + dx, 2 * y + dy),
                                   depth=rect.depth + 1))
    return out


def control_net_diagonal(pts: np.ndarray) -> float:
    """Bounding-box diagonal of a control array's Cartesian part."""
    xyz = np.asarray(pts, dtype=float)
    if xyz.shape[-1] == 4:
        xyz = xyz[..., :3]
    flat = xyz.reshape(-1, xyz.shape[-1])
    return float(np.linalg.norm(flat.max(axis=0) - flat.min(axis=0)))
