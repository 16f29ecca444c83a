"""Tests for model records, validation, adjacency, unfolding, z-ordering."""

import numpy as np
import pytest

from breptok.errors import TopologyError
from breptok.geometry import BezierRectangle
from breptok.topology import (
    BRepModel,
    FaceRec,
    LoopRec,
    face_adjacency,
    normalize_model,
    order_patches,
    unfold_loop,
    validate_model,
    zorder_key,
)
from breptok.trimming import tessellate_trimmed

from oracles import brute_force_adjacency, quadtree_dfs_order


def abstract_model(faces_to_edges: dict[int, set[int]]) -> BRepModel:
    """Model with faces/loops/edge-ids only, for adjacency tests.

    Geometry-free records are enough because adjacency reads loop edge ids.
    """
    loops = {}
    faces = {}
    for fid, eids in faces_to_edges.items():
        loops[fid] = LoopRec(fid, tuple((e, False) for e in sorted(eids)))
        faces[fid] = FaceRec.__new__(FaceRec)
        object.__setattr__(faces[fid], "id", fid)
        object.__setattr__(faces[fid], "geometry", None)
        object.__setattr__(faces[fid], "outer_loop", fid)
        object.__setattr__(faces[fid], "inner_loops", ())
        object.__setattr__(faces[fid], "same_sense", True)
    return BRepModel(vertices={}, edges={}, loops=loops, faces=faces, shells={})


class TestValidateModel:
    def test_cube_is_valid(self):
        from breptok.fixtures import generate_cube

        model = generate_cube()
        report = validate_model(model)
        assert report.ok
        assert len(report.violations) == 0

    def test_dangling_edge_reference(self):
        from breptok.fixtures import generate_cube

        model = generate_cube()
        bad_loop = LoopRec(999, ((12345, False),))
        loops = dict(model.loops)
        loops[999] = bad_loop
        faces = dict(model.faces)
        some_face = next(iter(faces.values()))
        object.__setattr__(some_face, "inner_loops", (999,))
        broken = BRepModel(model.vertices, model.edges, loops, faces,
                           model.shells)
        report = validate_model(broken)
        assert not report.ok
        assert any(v.code == "unresolved reference" for v in report.hard())

    def test_non_manifold_edge(self):
        from breptok.fixtures import generate_cube

        model = generate_cube()
        # graft one face's loop onto another edge's id to force 3 uses
        eid = next(iter(model.edges))
        extra = LoopRec(998, ((eid, False),))
        loops = dict(model.loops)
        loops[998] = extra
        faces = dict(model.faces)
        some_face = list(faces.values())[0]
        object.__setattr__(some_face, "inner_loops",
                           some_face.inner_loops + (998,))
        broken = BRepModel(model.vertices, model.edges, loops, faces,
                           model.shells)
        report = validate_model(broken)
        assert any(v.code == "non-manifold edge use" for v in report.hard())


class TestFaceAdjacency:
    def test_cube_four_neighbors(self):
        from breptok.fixtures import generate_cube

        model = generate_cube()
        adjacency = face_adjacency(model)
        assert len(adjacency) == 6
        assert all(len(n) == 4 for n in adjacency.values())

    def test_disjoint_shells_not_adjacent(self):
        model = abstract_model({0: {0, 1, 2}, 1: {2, 3, 4},
                                10: {100, 101}, 11: {101, 102}})
        adjacency = face_adjacency(model)
        assert adjacency[0] == {1}
        assert adjacency[10] == {11}
        assert not (adjacency[0] | adjacency[1]) & {10, 11}

    def test_random_fixtures_match_brute_force(self):
        rng = np.random.default_rng(61)
        for _ in range(20):
            n_faces = int(rng.integers(2, 12))
            n_edges = int(rng.integers(3, 25))
            f2e = {f: set(map(int, rng.choice(
                n_edges, size=rng.integers(1, min(6, n_edges + 1)),
                replace=False)))
                   for f in range(n_faces)}
            model = abstract_model(f2e)
            assert face_adjacency(model) == brute_force_adjacency(f2e)


class TestUnfoldLoop:
    def test_three_edges_pattern(self):
        loop = LoopRec(0, ((7, False), (8, False), (9, False)))
        assert unfold_loop(loop, 0) == [9, 7, 8, 9, 7, 8]

    def test_single_edge_loop(self):
        loop = LoopRec(0, ((4, False),))
        assert unfold_loop(loop, 0) == [4, 4, 4, 4]

    def test_two_edges_break_at_second(self):
        loop = LoopRec(0, ((1, False), (2, False)))
        assert unfold_loop(loop, 1) == [1, 2, 1, 2, 1]

    def test_length_and_multiset(self):
        rng = np.random.default_rng(67)
        for n in range(1, 9):
            ids = list(map(int, rng.choice(1000, size=n, replace=False)))
            loop = LoopRec(0, tuple((e, False) for e in ids))
            k = int(rng.integers(0, n))
            out = unfold_loop(loop, k)
            assert len(out) == n + 3
            assert set(out) == set(ids)

    def test_bad_break_index(self):
        loop = LoopRec(0, ((1, False),))
        with pytest.raises(TopologyError):
            unfold_loop(loop, 1)

    def test_empty_loop_rejected_at_construction(self):
        with pytest.raises(TopologyError):
            LoopRec(0, ())


class TestZorderKey:
    def test_origin(self):
        assert zorder_key(0, 0, 3) == 0

    def test_depth_one_corner(self):
        assert zorder_key(1, 1, 1) == 3

    def test_quadrant_order_depth_one(self):
        keys = [zorder_key(x, y, 1) for x, y in
                [(0, 0), (1, 0), (0, 1), (1, 1)]]
        assert keys == [0, 1, 2, 3]

    def test_bijective(self):
        for d in range(0, 7):
            keys = {zorder_key(x, y, d)
                    for x in range(2**d) for y in range(2**d)}
            assert keys == set(range(4**d))

    def test_sorted_equals_recursive_traversal(self):
        for d in range(1, 6):
            cells = {(x, y, d): None
                     for x in range(2**d) for y in range(2**d)}
            want = quadtree_dfs_order(cells)
            got = sorted(cells, key=lambda c: zorder_key(c[0], c[1], d))
            assert got == want

    def test_out_of_range(self):
        with pytest.raises(TopologyError):
            zorder_key(2, 0, 1)


def dummy_rect(x, y, depth):
    grid = np.zeros((2, 2, 4))
    grid[:, :, 3] = 1.0
    size = 1.0 / 2**depth
    return BezierRectangle(1, 1, grid,
                           (x * size, (x + 1) * size, y * size, (y + 1) * size),
                           grid_coords=(x, y), depth=depth)


class TestOrderPatches:
    def test_single_rect_triangle_order(self):
        rect = dummy_rect(0, 0, 0)
        out = order_patches([(rect, ["ll", "ur"])])
        assert out == ["ll", "ur"]

    def test_uniform_grid_matches_keys(self):
        rects = [dummy_rect(x, y, 1) for x, y in
                 [(1, 1), (0, 1), (1, 0), (0, 0)]]
        out = order_patches([(r, [r.grid_coords]) for r in rects])
        assert out == [(0, 0), (1, 0), (0, 1), (1, 1)]

    def test_mixed_depth_matches_dfs_oracle(self):
        cells = [(0, 0, 1), (0, 1, 1), (1, 1, 1),
                 (2, 0, 2), (3, 0, 2), (2, 1, 2), (3, 1, 2)]
        leaves = {c: None for c in cells}
        want = quadtree_dfs_order(leaves)
        pairs = [(dummy_rect(*c), [c]) for c in cells]
        got = order_patches(pairs)
        assert got == want

    def test_total_order_permutation_invariant(self):
        rng = np.random.default_rng(71)
        cells = [(0, 0, 1), (0, 1, 1), (1, 1, 1),
                 (2, 0, 2), (3, 0, 2), (2, 1, 2), (3, 1, 2)]
        pairs = [(dummy_rect(*c), [c]) for c in cells]
        baseline = order_patches(pairs)
        for _ in range(5):
            perm = list(rng.permutation(len(pairs)))
            assert order_patches([pairs[i] for i in perm]) == baseline

    def test_duplicate_cells_rejected(self):
        pairs = [(dummy_rect(0, 0, 1), [1]), (dummy_rect(0, 0, 1), [2])]
        with pytest.raises(TopologyError):
            order_patches(pairs)


class TestNormalizeModel:
    def test_unit_cube_bounds(self):
        from breptok.fixtures import generate_cube

        model = generate_cube(size=7.0)
        out = normalize_model(model)
        lo, hi = out.bounding_box()
        assert np.max(hi - lo) == pytest.approx(1.0)
        assert np.max(np.abs(lo + hi)) <= 1e-12

    def test_tessellation_still_works(self):
        from breptok.fixtures import generate_cube

        model = normalize_model(generate_cube(size=3.0))
        face = next(iter(model.faces.values()))
        tris = tessellate_trimmed(face.geometry)
        assert len(tris) == 2
