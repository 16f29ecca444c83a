"""Command-line front end: generation, validation, conversion, tokenization.

Exit codes: 0 success, 1 usage error, 2 validation/format failure,
3 numeric/geometry failure. All commands are deterministic given their
inputs, flags, and seed. The environment variable BRT_THREADS caps the
per-face worker threads used by the heavier commands.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import fixtures, formats
from .errors import DomainError, FormatError, GeometryError, ShapeMismatchError, TopologyError
from .geometry import (
    decompose_curve,
    decompose_surface,
    eval_bezier_triangle,
    eval_surface,
)
from .network import EmbedConfig, WeightBundle, encode_tokens, tokenize_model
from .topology import validate_model
from .trimming import DEVIATION_PROBES, FitConfig, tessellate_trimmed

USAGE_EXIT = 1
VALIDATION_EXIT = 2
NUMERIC_EXIT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    with open(path, "rb") as fh:
        return fh.read()


def _write(path: str | None, data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        return
    with open(path, "wb") as fh:
        fh.write(data)


def _emit_json(args, payload: dict) -> None:
    if getattr(args, "report", "json") == "text":
        _write(args.output, _as_text(payload).encode())
    else:
        _write(args.output, (json.dumps(payload, indent=1) + "\n").encode())


def _as_text(payload, indent=0) -> str:
    pad = "  " * indent
    if isinstance(payload, dict):
        lines = []
        for key, value in payload.items():
            if isinstance(value, (dict, list)):
                lines.append(f"{pad}{key}:")
                lines.append(_as_text(value, indent + 1))
            else:
                lines.append(f"{pad}{key}: {value}")
        return "\n".join(lines)
    if isinstance(payload, list):
        return "\n".join(_as_text(v, indent) if isinstance(v, (dict, list))
                         else f"{pad}- {v}" for v in payload)
    return f"{pad}{payload}"


def _thread_map(fn, items):
    workers = int(os.environ.get("BRT_THREADS", "1") or "1")
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fit_config(args) -> FitConfig:
    return FitConfig(lam=args.lam, max_depth=args.max_depth,
                     working_degree=args.degree)


def _embed_config(args, mask_ratio=None) -> EmbedConfig:
    return EmbedConfig(mask_ratio=mask_ratio if mask_ratio is not None
                       else getattr(args, "mask_ratio", 0.0),
                       working_degree=args.degree,
                       seed=args.seed)


def _load_weights_or_random(args, cfg: EmbedConfig) -> WeightBundle:
    if getattr(args, "weights", None):
        return formats.load_weights(_read(args.weights), cfg)
    return WeightBundle.random(cfg, seed=args.seed if args.seed is not None else 0)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    gen = fixtures.GENERATORS[args.kind]
    kwargs = {"seed": args.seed}
    if args.kind == "cube" and args.size is not None:
        kwargs["size"] = args.size
    if args.kind == "extruded-polygon" and args.sides is not None:
        kwargs["n_sides"] = args.sides
    if args.kind == "wavy-bicubic" and args.amplitude is not None:
        kwargs["amplitude"] = args.amplitude
    model = gen(**kwargs)
    _write(args.output, (formats.dumps_model(model) + "\n").encode())
    return 0


def cmd_validate(args) -> int:
    model = formats.load_model(_read(args.model))
    report = validate_model(model)
    payload = {
        "valid": report.ok,
        "violations": [{"code": v.code, "severity": v.severity,
                        "message": v.message} for v in report.violations],
    }
    _emit_json(args, payload)
    return 0 if report.ok else VALIDATION_EXIT


def cmd_decompose(args) -> int:
    doc = json.loads(_read(args.input).decode())
    if "curve" in doc:
        doc = doc["curve"]
    elif "surface" in doc:
        doc = doc["surface"]
    if "knots_u" in doc or doc.get("type") == "plane":
        surface = formats._load_surface(doc, "surface")
        cells = decompose_surface(surface)
        payload = {"rectangles": [{
            "degree_u": c.degree_u, "degree_v": c.degree_v,
            "control_points": c.control_points.tolist(),
            "param_rect": list(c.param_rect),
            "grid_coords": list(c.grid_coords), "depth": c.depth,
        } for c in cells]}
    else:
        dim = len(doc.get("control_points", [[0, 0, 0]])[0])
        curve = formats._load_curve(doc, "curve", dim)
        segments = decompose_curve(curve)
        payload = {"segments": [{
            "degree": s.curve.degree,
            "control_points": s.curve.control_points.tolist(),
            "t0": s.t0, "t1": s.t1,
        } for s in segments]}
    _emit_json(args, payload)
    return 0


def _face_tessellation_report(face, fit_cfg, surface_diag):
    tris = tessellate_trimmed(face.geometry, fit_cfg)
    surface = face.geometry.surface
    devs = []
    for tri in tris:
        if tri.trim_status != "exact":
            continue
        s, t = DEVIATION_PROBES[:, 0], DEVIATION_PROBES[:, 1]
        uv = tri.param_at(s, t)
        got = eval_bezier_triangle(tri, s, t)
        want = eval_surface(surface, np.clip(uv[:, 0], *surface.domain[:2]),
                            np.clip(uv[:, 1], *surface.domain[2:]))
        devs.append(np.linalg.norm(got - want, axis=1))
    noise_pad = 1e-12 * max(surface_diag, 1.0)
    max_dev = (float(np.max(np.concatenate(devs))) + noise_pad) if devs else 0.0
    mean_dev = float(np.mean(np.concatenate(devs))) if devs else 0.0
    return tris, max_dev, mean_dev


def cmd_tessellate(args) -> int:
    model = formats.load_model(_read(args.model))
    fit_cfg = _fit_config(args)
    diag = model.diagonal()
    face_items = sorted(model.faces.items())
    results = _thread_map(
        lambda item: _face_tessellation_report(item[1], fit_cfg, diag),
        face_items)
    faces_payload = []
    for (fid, _), (tris, max_dev, mean_dev) in zip(face_items, results):
        faces_payload.append({
            "face": fid,
            "triangle_count": len(tris),
            "max_deviation": max_dev,
            "mean_deviation": mean_dev,
            "fit_residuals": [t.fit_residual for t in tris
                              if t.trim_status == "boundary-fitted"],
            "triangles": [{
                "degree": t.degree,
                "trim_status": t.trim_status,
                "provenance": {"cell": list(t.provenance[0]),
                               "half": t.provenance[1]},
                "param_corners": t.param_corners.tolist(),
                "fit_deviation": t.fit_deviation,
                "control_points": t.control_points.tolist(),
            } for t in tris],
        })
    payload = {
        "faces": faces_payload,
        "overall": {
            "triangle_count": sum(f["triangle_count"] for f in faces_payload),
            "max_deviation": max((f["max_deviation"] for f in faces_payload),
                                 default=0.0),
        },
    }
    _emit_json(args, payload)
    return 0


def cmd_order(args) -> int:
    model = formats.load_model(_read(args.model))
    fit_cfg = _fit_config(args)
    payload = {"faces": []}
    for fid, face in sorted(model.faces.items()):
        tris = tessellate_trimmed(face.geometry, fit_cfg)
        payload["faces"].append({
            "face": fid,
            "patches": [{"x": t.provenance[0][0], "y": t.provenance[0][1],
                         "depth": t.provenance[0][2],
                         "half": t.provenance[1],
                         "trim_status": t.trim_status} for t in tris],
        })
    _emit_json(args, payload)
    return 0


def cmd_tokenize(args) -> int:
    model = formats.load_model(_read(args.model))
    report = validate_model(model)
    if not report.ok:
        for v in report.hard():
            print(f"invalid model: {v.code}: {v.message}", file=sys.stderr)
        return VALIDATION_EXIT
    cfg = _embed_config(args)
    weights = _load_weights_or_random(args, cfg)
    tokens = tokenize_model(model, weights, cfg, _fit_config(args),
                            normalize=not args.no_normalize)
    _write(args.output, formats.save_tokens(tokens))
    if args.save_weights:
        _write(args.save_weights, formats.save_weights(weights))
    return 0


def cmd_embed(args) -> int:
    tokens = formats.load_tokens(_read(args.tokens))
    cfg = _embed_config(args)
    weights = _load_weights_or_random(args, cfg)
    encoded = encode_tokens(tokens, weights, cfg)
    out = formats.save_tokens(
        type(tokens)(tokens.face_ids, encoded.astype(np.float32)))
    _write(args.output, out)
    return 0


def cmd_stats(args) -> int:
    from .geometry import curve_segments_between

    model = formats.load_model(_read(args.model))
    fit_cfg = _fit_config(args)
    patches = {}
    for fid, face in sorted(model.faces.items()):
        patches[fid] = len(tessellate_trimmed(face.geometry, fit_cfg))
    segments = {}
    for eid, edge in sorted(model.edges.items()):
        segments[eid] = len(curve_segments_between(edge.curve, edge.t0, edge.t1))

    def histogram(values):
        out: dict[str, int] = {}
        for v in values:
            out[str(v)] = out.get(str(v), 0) + 1
        return dict(sorted(out.items(), key=lambda kv: int(kv[0])))

    payload = {
        "counts": {
            "vertices": len(model.vertices),
            "edges": len(model.edges),
            "loops": len(model.loops),
            "faces": len(model.faces),
            "shells": len(model.shells),
        },
        "patches_per_face": {str(k): v for k, v in patches.items()},
        "curve_segments_per_edge": {str(k): v for k, v in segments.items()},
        "histograms": {
            "patches_per_face": histogram(patches.values()),
            "curve_segments_per_edge": histogram(segments.values()),
        },
    }
    _emit_json(args, payload)
    return 0


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def _add_common(p, tessellation=True, network=False):
    p.add_argument("-o", "--output", default=None,
                   help="output path (default: stdout)")
    p.add_argument("--report", choices=("json", "text"), default="json")
    p.add_argument("--seed", type=int, default=0)
    if tessellation:
        p.add_argument("--max-depth", type=int, default=6, dest="max_depth")
        p.add_argument("--lambda", type=float, default=0.1, dest="lam")
        p.add_argument("--degree", type=int, default=3,
                       help="working Bezier degree (inputs above it are rejected)")
    if network:
        p.add_argument("-w", "--weights", default=None,
                       help="weight file (default: seeded random weights)")
        p.add_argument("--mask-ratio", type=float, default=0.0,
                       dest="mask_ratio")
        p.add_argument("--no-normalize", action="store_true",
                       dest="no_normalize")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="breptok",
                     description="Continuous-geometry tokenization for "
                                 "B-rep models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic model")
    p.add_argument("kind", choices=sorted(fixtures.GENERATORS))
    p.add_argument("--size", type=float, default=None)
    p.add_argument("--sides", type=int, default=None)
    p.add_argument("--amplitude", type=float, default=None)
    _add_common(p, tessellation=False)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("validate", help="check a model document")
    p.add_argument("model")
    _add_common(p, tessellation=False)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("decompose", help="split a curve/surface JSON into "
                                         "Bezier pieces")
    p.add_argument("input", help="JSON file with a curve or surface ('-' "
                                 "for stdin)")
    _add_common(p, tessellation=False)
    p.set_defaults(fn=cmd_decompose)

    p = sub.add_parser("tessellate", help="triangles plus error metrics")
    p.add_argument("model")
    _add_common(p)
    p.set_defaults(fn=cmd_tessellate)

    p = sub.add_parser("order", help="z-order patch sequence per face")
    p.add_argument("model")
    _add_common(p)
    p.set_defaults(fn=cmd_order)

    p = sub.add_parser("tokenize", help="write the face token file")
    p.add_argument("model")
    p.add_argument("--save-weights", default=None, dest="save_weights",
                   help="also write the (possibly generated) weight file")
    _add_common(p, network=True)
    p.set_defaults(fn=cmd_tokenize)

    p = sub.add_parser("embed", help="contextualize a token file")
    p.add_argument("tokens")
    _add_common(p, tessellation=False, network=True)
    p.add_argument("--degree", type=int, default=3)
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("stats", help="model statistics and histograms")
    p.add_argument("model")
    _add_common(p)
    p.set_defaults(fn=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (FormatError, TopologyError, ShapeMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return VALIDATION_EXIT
    except (GeometryError, DomainError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return NUMERIC_EXIT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
