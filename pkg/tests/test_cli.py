"""Command-line behavior: outputs, determinism, exit codes."""

import json

import numpy as np
import pytest

from breptok.cli import main
from breptok.formats import load_tokens


def run(capsys, *argv) -> tuple[int, str]:
    code = main(list(argv))
    return code, capsys.readouterr().out


@pytest.fixture
def cube_path(tmp_path):
    path = tmp_path / "cube.json"
    assert main(["gen", "cube", "-o", str(path)]) == 0
    return str(path)


class TestGenAndValidate:
    def test_gen_cube_validates(self, capsys, cube_path):
        code, out = run(capsys, "validate", cube_path)
        assert code == 0
        assert json.loads(out)["valid"] is True

    def test_gen_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["gen", "extruded-polygon", "--seed", "9", "-o", str(a)])
        main(["gen", "extruded-polygon", "--seed", "9", "-o", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_all_kinds_validate(self, tmp_path, capsys):
        for kind in ("cube", "plate-with-holes", "extruded-polygon",
                     "wavy-bicubic"):
            path = tmp_path / f"{kind}.json"
            assert main(["gen", kind, "--seed", "3", "-o", str(path)]) == 0
            code, _ = run(capsys, "validate", str(path))
            assert code == 0, kind

    def test_validate_broken_model_exits_2(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text(json.dumps({"version": "1.0"}))
        code, out = run(capsys, "validate", str(path))
        assert code == 0  # empty model has nothing to violate
        path.write_text("{not json")
        assert main(["validate", str(path)]) == 2

    def test_usage_error_exits_1(self):
        with pytest.raises(SystemExit) as err:
            main(["gen", "dodecahedron"])
        assert err.value.code == 1


class TestDecompose:
    def test_curve_split(self, tmp_path, capsys):
        doc = {"curve": {"id": 0, "degree": 3,
                         "knots": [0, 0, 0, 0, 0.5, 1, 1, 1, 1],
                         "control_points": [[0, 0, 0], [1, 0, 0], [2, 1, 0],
                                            [3, 0, 0], [4, 0, 0]]}}
        path = tmp_path / "curve.json"
        path.write_text(json.dumps(doc))
        code, out = run(capsys, "decompose", str(path))
        assert code == 0
        segments = json.loads(out)["segments"]
        assert len(segments) == 2
        assert segments[0]["t0"] == 0.0 and segments[1]["t1"] == 1.0

    def test_surface_split(self, tmp_path, capsys):
        grid = [[[float(i), float(j), 0.0, 1.0] for j in range(4)]
                for i in range(5)]
        doc = {"surface": {"id": 0, "degree_u": 3, "degree_v": 3,
                           "knots_u": [0, 0, 0, 0, 0.5, 1, 1, 1, 1],
                           "knots_v": [0, 0, 0, 0, 1, 1, 1, 1],
                           "control_points": grid}}
        path = tmp_path / "surface.json"
        path.write_text(json.dumps(doc))
        code, out = run(capsys, "decompose", str(path))
        assert code == 0
        rects = json.loads(out)["rectangles"]
        assert len(rects) == 2


class TestTessellateAndOrder:
    def test_untrimmed_bicubic_max_deviation(self, tmp_path, capsys):
        model = tmp_path / "wavy.json"
        main(["gen", "wavy-bicubic", "--seed", "2", "-o", str(model)])
        code, out = run(capsys, "tessellate", str(model))
        assert code == 0
        payload = json.loads(out)
        assert payload["overall"]["max_deviation"] <= 1e-10

    def test_reported_deviation_bounds_denser_sampling(self, tmp_path, capsys):
        from breptok.formats import load_model
        from breptok.geometry import eval_bezier_triangle, eval_surface
        from breptok.trimming import FitConfig, tessellate_trimmed

        model_path = tmp_path / "wavy.json"
        main(["gen", "wavy-bicubic", "--seed", "8", "-o", str(model_path)])
        code, out = run(capsys, "tessellate", str(model_path))
        reported = json.loads(out)["overall"]["max_deviation"]
        model = load_model(model_path.read_bytes())
        face = next(iter(model.faces.values()))
        dense = np.array([(i / 12, j / 12) for i in range(13)
                          for j in range(13 - i)])
        worst = 0.0
        for tri in tessellate_trimmed(face.geometry, FitConfig()):
            uv = tri.param_at(dense[:, 0], dense[:, 1])
            got = eval_bezier_triangle(tri, dense[:, 0], dense[:, 1])
            want = eval_surface(face.geometry.surface,
                                np.clip(uv[:, 0], 0, 1), np.clip(uv[:, 1], 0, 1))
            worst = max(worst, float(np.max(np.linalg.norm(got - want, axis=1))))
        assert worst <= reported

    def test_order_output(self, capsys, cube_path):
        code, out = run(capsys, "order", cube_path)
        assert code == 0
        faces = json.loads(out)["faces"]
        assert len(faces) == 6
        halves = [p["half"] for p in faces[0]["patches"]]
        assert halves == ["lower-left", "upper-right"]


class TestTokenizeAndEmbed:
    def test_cube_tokens_shape(self, tmp_path, cube_path):
        out = tmp_path / "cube.tok"
        assert main(["tokenize", cube_path, "-o", str(out), "--seed", "4"]) == 0
        tokens = load_tokens(out.read_bytes())
        assert tokens.tokens.shape == (6, 192)

    def test_tokenize_deterministic(self, tmp_path, cube_path):
        a, b = tmp_path / "a.tok", tmp_path / "b.tok"
        main(["tokenize", cube_path, "-o", str(a), "--seed", "4"])
        main(["tokenize", cube_path, "-o", str(b), "--seed", "4"])
        assert a.read_bytes() == b.read_bytes()

    def test_roundtrip_weights(self, tmp_path, cube_path):
        tok = tmp_path / "cube.tok"
        wts = tmp_path / "w.bin"
        main(["tokenize", cube_path, "-o", str(tok), "--seed", "4",
              "--save-weights", str(wts)])
        again = tmp_path / "again.tok"
        main(["tokenize", cube_path, "-o", str(again), "-w", str(wts),
              "--seed", "4"])
        assert tok.read_bytes() == again.read_bytes()

    def test_embed_preserves_layout(self, tmp_path, cube_path):
        tok = tmp_path / "cube.tok"
        emb = tmp_path / "cube.emb"
        main(["tokenize", cube_path, "-o", str(tok), "--seed", "4"])
        assert main(["embed", str(tok), "-o", str(emb), "--seed", "4"]) == 0
        encoded = load_tokens(emb.read_bytes())
        assert encoded.tokens.shape == (6, 192)
        assert encoded.face_ids == load_tokens(tok.read_bytes()).face_ids

    def test_mask_ratio_flag(self, tmp_path):
        model = tmp_path / "wavy.json"
        main(["gen", "wavy-bicubic", "--seed", "6", "-o", str(model)])
        plain, masked = tmp_path / "p.tok", tmp_path / "m.tok"
        main(["tokenize", str(model), "-o", str(plain), "--seed", "4"])
        main(["tokenize", str(model), "-o", str(masked), "--seed", "4",
              "--mask-ratio", "0.5"])
        assert plain.read_bytes() != masked.read_bytes()


class TestStats:
    def test_cube_stats(self, capsys, cube_path):
        code, out = run(capsys, "stats", cube_path)
        assert code == 0
        payload = json.loads(out)
        assert payload["counts"] == {"vertices": 8, "edges": 12, "loops": 6,
                                     "faces": 6, "shells": 1}
        assert payload["histograms"]["curve_segments_per_edge"] == {"1": 12}
        assert payload["histograms"]["patches_per_face"] == {"2": 6}

    def test_plate_segments_histogram(self, tmp_path, capsys):
        model = tmp_path / "plate.json"
        main(["gen", "plate-with-holes", "--seed", "1", "-o", str(model)])
        code, out = run(capsys, "stats", str(model), "--max-depth", "2")
        assert code == 0
        payload = json.loads(out)
        seg_hist = payload["histograms"]["curve_segments_per_edge"]
        assert "6" in seg_hist  # circles decompose into six cubic segments


class TestExitCodesAndThreads:
    def test_numeric_failure_exits_3(self, tmp_path):
        # unclamped knot vector: decomposition is a geometry error
        doc = {"curve": {"id": 0, "degree": 2,
                         "knots": [0, 1, 2, 3, 4, 5],
                         "control_points": [[0, 0, 0], [1, 1, 0], [2, 0, 0]]}}
        path = tmp_path / "unclamped.json"
        path.write_text(json.dumps(doc))
        assert main(["decompose", str(path)]) == 3

    def test_thread_count_does_not_change_output(self, tmp_path, capsys,
                                                 monkeypatch):
        model = tmp_path / "plate.json"
        main(["gen", "plate-with-holes", "--seed", "2", "-o", str(model)])
        _, serial = run(capsys, "tessellate", str(model), "--max-depth", "2")
        monkeypatch.setenv("BRT_THREADS", "4")
        _, threaded = run(capsys, "tessellate", str(model), "--max-depth", "2")
        assert serial == threaded
