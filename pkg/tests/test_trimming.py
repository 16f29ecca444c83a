"""Tests for trim classification, quadtree subdivision, and boundary fitting."""

import numpy as np
import pytest

from breptok.errors import GeometryError, OrientationWarning, RankDeficientWarning
from breptok.geometry import (
    eval_bezier_triangle,
    eval_surface,
    rect_to_triangles,
    subdivide_rectangle,
)
from breptok.trimming import (
    DEVIATION_PROBES,
    FitConfig,
    PatchClass,
    TrimClassifier,
    TrimmedSurface,
    build_quadtree,
    classify_point,
    classify_rectangle,
    fit_boundary_triangle,
    fit_residual_sq,
    tessellate_trimmed,
)

from helpers import (
    bicubic_surface,
    flat_square_surface,
    polygon_loop,
    quarter_disc_surface,
    square_with_hole,
    untrimmed,
)
from oracles import winding_number


def leaf_area(leaf):
    u0, u1, v0, v1 = leaf.rect.param_rect
    return (u1 - u0) * (v1 - v0)


def triangle_param_area(tri):
    c = tri.param_corners
    e1, e2 = c[1] - c[0], c[2] - c[0]
    return 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])


class TestClassifyPoint:
    def test_unit_square_center(self):
        loop = polygon_loop([(0, 0), (1, 0), (1, 1), (0, 1)])
        inside, onb = classify_point([loop], 0.5, 0.5)
        assert inside and not onb

    def test_center_of_hole_is_outside(self):
        ts = square_with_hole()
        inside, _ = classify_point(list(ts.loops), 0.5, 0.5)
        assert not inside

    def test_on_boundary_flag(self):
        loop = polygon_loop([(0, 0), (1, 0), (1, 1), (0, 1)])
        _, onb = classify_point([loop], 0.5, 1e-5)
        assert onb

    def test_against_dense_winding_oracle(self):
        ts = square_with_hole((0.35, 0.7))
        cls = TrimClassifier(list(ts.loops), domain=(0, 1, 0, 1),
                             samples_per_curve=64)
        oracle = TrimClassifier(list(ts.loops), domain=(0, 1, 0, 1),
                                samples_per_curve=4096)
        rng = np.random.default_rng(42)
        pts = rng.uniform(0, 1, size=(1000, 2))
        inside, onb = cls.classify_points(pts)
        polys = oracle.polylines
        for k, (u, v) in enumerate(pts):
            if onb[k]:
                continue  # flagged points are the caller's problem
            wn = sum(winding_number(poly, u, v) for poly in polys)
            assert inside[k] == (wn != 0)

    def test_orientation_autocorrect(self):
        # outer loop wound clockwise gets flipped with a warning
        outer_cw = polygon_loop([(0, 0), (0, 1), (1, 1), (1, 0)])
        with pytest.warns(OrientationWarning):
            inside, _ = classify_point([outer_cw], 0.5, 0.5)
        assert inside

    def test_degenerate_loop_ignored_with_warning(self):
        from breptok.errors import DegenerateLoopWarning

        outer = polygon_loop([(0, 0), (1, 0), (1, 1), (0, 1)])
        sliver = polygon_loop([(0.5, 0.5), (0.5 + 1e-9, 0.5),
                               (0.5, 0.5 + 1e-9)])
        with pytest.warns(DegenerateLoopWarning):
            inside, _ = classify_point([outer, sliver], 0.5, 0.5)
        assert inside  # the sliver hole was dropped


class TestTrimmedSurfaceInvariants:
    def test_unclosed_loop_rejected(self):
        from breptok.geometry import BSplineCurve
        from breptok.trimming import TrimLoop

        gap_loop = TrimLoop((
            (BSplineCurve(1, [[0, 0], [1, 0]], [0, 0, 1, 1]), False),
            (BSplineCurve(1, [[1, 0.01], [0, 0]], [0, 0, 1, 1]), False),
        ))
        with pytest.raises(GeometryError, match="not closed"):
            TrimmedSurface(flat_square_surface(), (gap_loop,))

    def test_crossing_loops_warn(self):
        from breptok.errors import LoopCrossingWarning

        outer = polygon_loop([(0, 0), (1, 0), (1, 1), (0, 1)])
        hole_a = polygon_loop([(0.2, 0.2), (0.2, 0.55), (0.55, 0.55),
                               (0.55, 0.2)])
        hole_b = polygon_loop([(0.4, 0.4), (0.4, 0.75), (0.75, 0.75),
                               (0.75, 0.4)])
        with pytest.warns(LoopCrossingWarning):
            TrimmedSurface(flat_square_surface(), (outer, hole_a, hole_b))

    def test_loop_leaving_domain_rejected(self):
        outer = polygon_loop([(0, 0), (1.5, 0), (1.5, 1), (0, 1)])
        with pytest.raises(GeometryError, match="leaves the surface domain"):
            TrimmedSurface(flat_square_surface(), (outer,))

    def test_nested_loops_do_not_warn(self):
        import warnings as w

        ts = square_with_hole((0.3, 0.7))
        with w.catch_warnings():
            w.simplefilter("error")
            TrimmedSurface(ts.surface, ts.loops)


class TestClassifyRectangle:
    def test_fully_interior(self):
        ts = quarter_disc_surface()
        cells = subdivide_rectangle(subdivide_rectangle(
            _single_cell(ts))[0])[0]  # [0, .25]^2
        assert classify_rectangle(cells, list(ts.loops)) is PatchClass.INSIDE

    def test_fully_outside(self):
        ts = quarter_disc_surface()
        cell = subdivide_rectangle(subdivide_rectangle(
            _single_cell(ts))[3])[3]  # [.75, 1]^2, beyond the arc
        assert classify_rectangle(cell, list(ts.loops)) is PatchClass.OUTSIDE

    def test_straddling_cell_matches_point_oracle(self):
        ts = quarter_disc_surface()
        cell = subdivide_rectangle(_single_cell(ts))[3]  # [.5,1]^2
        got = classify_rectangle(cell, list(ts.loops))
        cls = TrimClassifier(list(ts.loops), domain=(0, 1, 0, 1))
        xs = np.linspace(0.5 + 1e-3, 1 - 1e-3, 32)
        U, V = [a.ravel() for a in np.meshgrid(xs, xs)]
        inside, onb = cls.classify_points(np.column_stack([U, V]))
        det = ~onb
        assert inside[det].any() and (~inside[det]).any()
        assert got is PatchClass.BOUNDARY


def _single_cell(ts: TrimmedSurface):
    from breptok.geometry import decompose_surface, elevate_surface_degree

    cells = decompose_surface(ts.surface)
    assert len(cells) == 1
    return elevate_surface_degree(cells[0], (3, 3))


class TestSubdivide:
    def test_depth_overflow_rejected(self):
        from breptok.trimming import subdivide
        from test_geometry import random_bicubic_rect

        rect = random_bicubic_rect(np.random.default_rng(0))
        assert len(subdivide(rect, max_depth=1)) == 4
        with pytest.raises(GeometryError, match="depth"):
            subdivide(rect, max_depth=0)


class TestBuildQuadtree:
    def test_untrimmed_stays_at_grid_depth(self):
        rng = np.random.default_rng(5)
        ts = untrimmed(bicubic_surface(rng, interior_u=1, interior_v=1))
        leaves = build_quadtree(ts, FitConfig())
        assert len(leaves) == 4
        assert all(l.patch_class is PatchClass.INSIDE for l in leaves)
        assert all(l.rect.depth == 1 for l in leaves)

    def test_diagonal_half_domain_terminates_at_root(self):
        half = polygon_loop([(0, 0), (1, 0), (0, 1)])
        ts = TrimmedSurface(flat_square_surface(), (half,))
        leaves = build_quadtree(ts, FitConfig())
        assert len(leaves) == 1
        assert leaves[0].patch_class is PatchClass.BOUNDARY
        assert leaves[0].rect.depth == 0
        assert leaves[0].diagonal == "anti"

    def test_main_diagonal_detected(self):
        half = polygon_loop([(0, 0), (1, 1), (0, 1)])
        ts = TrimmedSurface(flat_square_surface(), (half,))
        leaves = build_quadtree(ts, FitConfig())
        assert len(leaves) == 1
        assert leaves[0].diagonal == "main"

    def test_quarter_disc_area_vs_monte_carlo(self):
        ts = quarter_disc_surface()
        cfg = FitConfig(max_depth=6)
        leaves = build_quadtree(ts, cfg)
        kept_area = (sum(leaf_area(l) for l in leaves
                         if l.patch_class is PatchClass.INSIDE)
                     + 0.5 * sum(leaf_area(l) for l in leaves
                                 if l.patch_class is PatchClass.BOUNDARY))
        cls = TrimClassifier(list(ts.loops), domain=(0, 1, 0, 1))
        rng = np.random.default_rng(7)
        pts = rng.uniform(0, 1, size=(200_000, 2))
        inside, _ = cls.classify_points(pts)
        mc_area = float(np.mean(inside))
        assert abs(kept_area - mc_area) / mc_area <= 0.02

    def test_kept_leaves_cover_inside_area(self):
        ts = quarter_disc_surface()
        leaves = build_quadtree(ts, FitConfig(max_depth=6))
        kept = [l.rect.param_rect for l in leaves
                if l.patch_class is not PatchClass.OUTSIDE]
        cls = TrimClassifier(list(ts.loops), domain=(0, 1, 0, 1))
        rng = np.random.default_rng(11)
        pts = rng.uniform(0, 1, size=(100_000, 2))
        inside, _ = cls.classify_points(pts)
        pts_in = pts[inside]
        covered = np.zeros(len(pts_in), dtype=bool)
        for u0, u1, v0, v1 in kept:
            covered |= ((pts_in[:, 0] >= u0) & (pts_in[:, 0] <= u1)
                        & (pts_in[:, 1] >= v0) & (pts_in[:, 1] <= v1))
        assert np.mean(covered) >= 0.98


class TestFitBoundaryTriangle:
    @staticmethod
    def _setup():
        from helpers import quarter_disc_fit_setup

        return quarter_disc_fit_setup()

    def test_huge_lambda_freezes_control_net(self):
        tri, samples = self._setup()
        out = fit_boundary_triangle(tri, samples, FitConfig(lam=1e9))
        assert np.max(np.abs(out.control_points[:, :3]
                             - tri.control_points[:, :3])) <= 1e-6
        assert out.trim_status == "boundary-fitted"

    def test_round_trip_recovery(self):
        rng = np.random.default_rng(13)
        rect = _single_cell(quarter_disc_surface())
        tri, _ = rect_to_triangles(rect)
        # perturb the Cartesian part; same weights keep the fit linear-exact
        target_ctrl = tri.control_points.copy()
        target_ctrl[:, :3] += 0.05 * rng.normal(size=(len(target_ctrl), 3))
        from breptok.geometry import BezierTriangle

        target = BezierTriangle(tri.degree, target_ctrl,
                                param_corners=tri.param_corners)
        pts = rng.uniform(0, 1, size=(64, 2))
        pts = pts[pts.sum(axis=1) <= 1.0]
        assert len(pts) >= 28
        P = eval_bezier_triangle(target, pts[:, 0], pts[:, 1])
        out = fit_boundary_triangle(tri, (pts[:, 0], pts[:, 1], P),
                                    FitConfig(lam=0.0))
        assert np.max(np.abs(out.control_points[:, :3]
                             - target.control_points[:, :3])) <= 1e-8

    def test_residual_improves_on_curved_boundary(self):
        tri, samples = self._setup()
        out = fit_boundary_triangle(tri, samples, FitConfig(lam=0.1))
        assert fit_residual_sq(out, samples) < fit_residual_sq(tri, samples)
        assert out.fit_residual == pytest.approx(fit_residual_sq(out, samples))

    def test_lambda_monotone_toward_init(self):
        tri, samples = self._setup()
        dists = []
        for lam in [0.0, 0.1, 1.0, 1e9]:
            out = fit_boundary_triangle(tri, samples, FitConfig(lam=lam))
            dists.append(np.linalg.norm(out.control_points[:, :3]
                                        - tri.control_points[:, :3]))
        assert all(d2 <= d1 + 1e-12 for d1, d2 in zip(dists, dists[1:]))

    def test_rank_deficient_flagged(self):
        tri, (s, t, P) = self._setup()
        # plenty of samples but all at one point: rank 1
        n = 16
        s0 = np.full(n, float(s[0]))
        t0 = np.full(n, float(t[0]))
        P0 = np.tile(P[0], (n, 1))
        with pytest.warns(RankDeficientWarning):
            out = fit_boundary_triangle(tri, (s0, t0, P0), FitConfig(lam=0.0))
        # null-space directions stay at the initial net
        assert np.isfinite(out.control_points).all()

    def test_too_few_samples_rejected(self):
        tri, (s, t, P) = self._setup()
        with pytest.raises(GeometryError):
            fit_boundary_triangle(tri, (s[:3], t[:3], P[:3]), FitConfig(lam=0.0))


class TestTessellate:
    def test_untrimmed_single_cell_two_triangles(self):
        rng = np.random.default_rng(17)
        ts = untrimmed(bicubic_surface(rng, interior_u=0, interior_v=0))
        tris = tessellate_trimmed(ts)
        assert len(tris) == 2
        assert [t.provenance[1] for t in tris] == ["lower-left", "upper-right"]

    def test_untrimmed_two_by_two_grid(self):
        rng = np.random.default_rng(19)
        ts = untrimmed(bicubic_surface(rng, interior_u=1, interior_v=1))
        tris = tessellate_trimmed(ts)
        assert len(tris) == 8

    def test_exact_triangles_lie_on_surface(self):
        rng = np.random.default_rng(23)
        ts = untrimmed(bicubic_surface(rng, interior_u=1, interior_v=0))
        diag = 2.0
        for tri in tessellate_trimmed(ts):
            s, t = DEVIATION_PROBES[:, 0], DEVIATION_PROBES[:, 1]
            uv = tri.param_at(s, t)
            got = eval_bezier_triangle(tri, s, t)
            want = eval_surface(ts.surface, uv[:, 0], uv[:, 1])
            assert np.max(np.linalg.norm(got - want, axis=1)) <= 1e-10 * diag

    def test_quarter_disc_triangles_classify_inside(self):
        # the surface is the flat z=0 square, so a triangle point's (x, y)
        # is its surface parameter; every interior sample of every emitted
        # triangle must land in the trim region, on its boundary, or within
        # one terminal-cell diagonal of it (the tessellation resolution)
        depth = 5
        ts = quarter_disc_surface()
        tris = tessellate_trimmed(ts, FitConfig(max_depth=depth))
        cell_diag = np.sqrt(2.0) / 2**depth
        cls = TrimClassifier(list(ts.loops), domain=(0, 1, 0, 1),
                             snap_tol=cell_diag)
        rng = np.random.default_rng(29)
        bary = rng.dirichlet((2.0, 2.0, 2.0), size=10)[:, :2]
        for tri in tris:
            pts3 = eval_bezier_triangle(tri, bary[:, 0], bary[:, 1])
            inside, onb = cls.classify_points(pts3[:, :2])
            assert np.all(inside | onb)

    def test_fitted_deviation_bounds_probe_error(self):
        # the reported deviation is an upper bound: re-measuring against a
        # 3x refinement of the same leaf-local cloud (a superset of the
        # points used for the report) can only shrink the distance
        ts = quarter_disc_surface()
        for tri in tessellate_trimmed(ts, FitConfig(max_depth=4)):
            if tri.trim_status != "boundary-fitted":
                continue
            corners = tri.param_corners
            u0, v0 = corners.min(axis=0)
            u1, v1 = corners.max(axis=0)
            ss = np.linspace(0, 1, 58)  # refines linspace(0, 1, 20)
            U, V = [a.ravel() for a in np.meshgrid(u0 + ss * (u1 - u0),
                                                   v0 + ss * (v1 - v0))]
            cloud = eval_surface(ts.surface, U, V)
            got = eval_bezier_triangle(tri, DEVIATION_PROBES[:, 0],
                                       DEVIATION_PROBES[:, 1])
            d2 = ((got[:, None, :] - cloud[None, :, :]) ** 2).sum(axis=2)
            dev = float(np.sqrt(d2.min(axis=1)).max())
            assert dev <= tri.fit_deviation + 1e-12

    def test_deterministic(self):
        ts = quarter_disc_surface()
        a = tessellate_trimmed(ts, FitConfig(max_depth=4))
        b = tessellate_trimmed(ts, FitConfig(max_depth=4))
        assert len(a) == len(b)
        for x, y in zip(a, b):
            assert np.array_equal(x.control_points, y.control_points)
            assert x.provenance == y.provenance

    def test_hole_area_subtracted(self):
        ts = square_with_hole((0.3, 0.7))
        tris = tessellate_trimmed(ts, FitConfig(max_depth=5))
        area = sum(triangle_param_area(t) for t in tris)
        want = 1.0 - 0.4 * 0.4
        assert abs(area - want) / want <= 0.02
