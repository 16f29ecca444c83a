"""Serialization: the JSON model interchange, token files, weight files.

The JSON schema mirrors the record tables: geometry pools (curves3d,
pcurves, surfaces) referenced by id from the topology tables (vertices,
edges, loops, faces, shells). Faces attach one p-curve per loop-edge
occurrence so the same edge can carry different parameter-space images on
different faces (or twice on a seam). Planes may be declared analytically
and are converted to bilinear patches on load.

Token and weight files are little-endian binary with 32-bit payloads and
round-trip bit-exactly.
"""

from __future__ import annotations

import json
import struct
import warnings

import numpy as np

from .errors import ConfigHashWarning, FormatError, GeometryError
from .geometry import BSplineCurve, BSplineSurface
from .network import EmbedConfig, TokenSequence, WeightBundle
from .topology import BRepModel, EdgeRec, FaceRec, LoopRec, ShellRec, VertexRec
from .trimming import TrimLoop, TrimmedSurface

SCHEMA_VERSION = "1.0"
TOKEN_MAGIC = b"BRTK"
WEIGHT_MAGIC = b"BRTW"
BINARY_VERSION = 1


# ---------------------------------------------------------------------------
# JSON model: loading
# ---------------------------------------------------------------------------

def _fail(location: str, message: str):
    raise FormatError(f"{location}: {message}")


def _need(obj: dict, key: str, location: str):
    if key not in obj:
        _fail(location, f"missing required field {key!r}")
    return obj[key]


def _finite_array(value, location: str, shape_hint: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        _fail(location, f"{shape_hint} is not numeric")
    if not np.all(np.isfinite(arr)):
        _fail(location, f"non-finite number in {shape_hint}")
    return arr


def _int_id(value, location: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        _fail(location, f"id must be a non-negative integer, got {value!r}")
    return value


def _load_curve(doc: dict, location: str, dim: int) -> BSplineCurve:
    degree = _need(doc, "degree", location)
    knots = _finite_array(_need(doc, "knots", location), location, "knots")
    ctrl = _finite_array(_need(doc, "control_points", location), location,
                         "control points")
    if ctrl.ndim != 2 or ctrl.shape[1] != dim:
        _fail(location, f"control points must be (n, {dim}), got {ctrl.shape}")
    try:
        return BSplineCurve(int(degree), ctrl, knots)
    except GeometryError as exc:
        _fail(location, str(exc))


def _load_surface(doc: dict, location: str) -> BSplineSurface:
    kind = doc.get("type", "bspline")
    if kind == "plane":
        origin = _finite_array(_need(doc, "origin", location), location, "origin")
        u_axis = _finite_array(_need(doc, "u_axis", location), location, "u_axis")
        v_axis = _finite_array(_need(doc, "v_axis", location), location, "v_axis")
        u0, u1 = _need(doc, "u_range", location)
        v0, v1 = _need(doc, "v_range", location)
        if not (u1 > u0 and v1 > v0):
            _fail(location, "plane ranges must be increasing")
        grid = np.ones((2, 2, 4))
        for i, u in enumerate((u0, u1)):
            for j, v in enumerate((v0, v1)):
                grid[i, j, :3] = origin + u * u_axis + v * v_axis
        try:
            return BSplineSurface(1, 1, grid, [u0, u0, u1, u1],
                                  [v0, v0, v1, v1])
        except GeometryError as exc:
            _fail(location, str(exc))
    if kind != "bspline":
        _fail(location, f"unknown surface type {kind!r}")
    ku = _finite_array(_need(doc, "knots_u", location), location, "knots_u")
    kv = _finite_array(_need(doc, "knots_v", location), location, "knots_v")
    grid = _finite_array(_need(doc, "control_points", location), location,
                         "control grid")
    if grid.ndim != 3 or grid.shape[2] != 4:
        _fail(location, f"control grid must be (nu, nv, 4), got {grid.shape}")
    try:
        return BSplineSurface(int(_need(doc, "degree_u", location)),
                              int(_need(doc, "degree_v", location)),
                              grid, ku, kv)
    except GeometryError as exc:
        _fail(location, str(exc))


def load_model(data) -> BRepModel:
    """Parse and fully resolve a model document.

    ``data`` may be bytes, a JSON string, or an already-parsed dict. Every
    reference is resolved; any violation raises a FormatError naming the
    offending location.
    """
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise FormatError(f"document: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise FormatError("document: top level must be an object")

    def table(name) -> dict[int, dict]:
        rows = data.get(name, [])
        if not isinstance(rows, list):
            _fail(name, "must be an array")
        out: dict[int, dict] = {}
        for k, row in enumerate(rows):
            loc = f"{name}[{k}]"
            if not isinstance(row, dict):
                _fail(loc, "must be an object")
            rid = _int_id(_need(row, "id", loc), loc)
            if rid in out:
                _fail(loc, f"duplicate id {rid}")
            out[rid] = row
        return out

    curves3d = {cid: _load_curve(row, f"curves3d[id={cid}]", 3)
                for cid, row in table("curves3d").items()}
    pcurves = {cid: _load_curve(row, f"pcurves[id={cid}]", 2)
               for cid, row in table("pcurves").items()}
    surfaces = {sid: _load_surface(row, f"surfaces[id={sid}]")
                for sid, row in table("surfaces").items()}

    vertices: dict[int, VertexRec] = {}
    for vid, row in table("vertices").items():
        point = _finite_array(_need(row, "point", f"vertices[id={vid}]"),
                              f"vertices[id={vid}]", "point")
        if point.shape != (3,):
            _fail(f"vertices[id={vid}]", f"point must be 3D, got {point.shape}")
        vertices[vid] = VertexRec(vid, point)

    edges: dict[int, EdgeRec] = {}
    for eid, row in table("edges").items():
        loc = f"edges[id={eid}]"
        cid = _int_id(_need(row, "curve", loc), loc)
        if cid not in curves3d:
            _fail(loc, f"unknown curve id {cid}")
        for key in ("start_vertex", "end_vertex"):
            if _int_id(_need(row, key, loc), loc) not in vertices:
                _fail(loc, f"unknown vertex id {row[key]}")
        t0, t1 = float(_need(row, "t0", loc)), float(_need(row, "t1", loc))
        if not (np.isfinite(t0) and np.isfinite(t1)):
            _fail(loc, "non-finite parameter interval")
        edges[eid] = EdgeRec(eid, curves3d[cid], row["start_vertex"],
                             row["end_vertex"], t0, t1)

    loops: dict[int, LoopRec] = {}
    for lid, row in table("loops").items():
        loc = f"loops[id={lid}]"
        entries = _need(row, "edges", loc)
        if not isinstance(entries, list) or not entries:
            _fail(loc, "edges must be a non-empty array")
        parsed = []
        for k, entry in enumerate(entries):
            if (not isinstance(entry, list) or len(entry) != 2
                    or not isinstance(entry[1], bool)):
                _fail(loc, f"edges[{k}] must be [edge id, reversed flag]")
            eid = _int_id(entry[0], loc)
            if eid not in edges:
                _fail(loc, f"unknown edge id {eid}")
            parsed.append((eid, entry[1]))
        loops[lid] = LoopRec(lid, tuple(parsed), bool(row.get("is_outer", True)))

    faces: dict[int, FaceRec] = {}
    for fid, row in table("faces").items():
        loc = f"faces[id={fid}]"
        sid = _int_id(_need(row, "surface", loc), loc)
        if sid not in surfaces:
            _fail(loc, f"unknown surface id {sid}")
        outer = _int_id(_need(row, "outer_loop", loc), loc)
        inner = row.get("inner_loops", [])
        for lid in [outer, *inner]:
            if lid not in loops:
                _fail(loc, f"unknown loop id {lid}")
        loop_pcurves = _need(row, "loop_pcurves", loc)
        trim_loops = []
        for lid in [outer, *inner]:
            entries = loop_pcurves.get(str(lid))
            if entries is None:
                _fail(loc, f"loop_pcurves missing entry for loop {lid}")
            if len(entries) != len(loops[lid].edges):
                _fail(loc, f"loop {lid} has {len(loops[lid].edges)} edges but "
                      f"{len(entries)} p-curves")
            trim_entries = []
            for k, entry in enumerate(entries):
                if (not isinstance(entry, list) or len(entry) != 2
                        or not isinstance(entry[1], bool)):
                    _fail(loc, f"loop_pcurves[{lid}][{k}] must be "
                          "[pcurve id, sense flag]")
                pid = _int_id(entry[0], loc)
                if pid not in pcurves:
                    _fail(loc, f"unknown pcurve id {pid}")
                trim_entries.append((pcurves[pid], entry[1]))
            trim_loops.append(TrimLoop(tuple(trim_entries)))
        try:
            geometry = TrimmedSurface(surfaces[sid], tuple(trim_loops))
        except GeometryError as exc:
            _fail(loc, str(exc))
        faces[fid] = FaceRec(fid, geometry, outer, tuple(inner),
                             bool(row.get("same_sense", True)))

    shells: dict[int, ShellRec] = {}
    for sid, row in table("shells").items():
        loc = f"shells[id={sid}]"
        fids = _need(row, "faces", loc)
        for fid in fids:
            if _int_id(fid, loc) not in faces:
                _fail(loc, f"unknown face id {fid}")
        shells[sid] = ShellRec(sid, tuple(fids))

    return BRepModel(vertices, edges, loops, faces, shells,
                     units=str(data.get("units", "mm")))


# ---------------------------------------------------------------------------
# JSON model: saving
# ---------------------------------------------------------------------------

def _curve_doc(cid: int, curve: BSplineCurve) -> dict:
    return {
        "id": cid,
        "degree": int(curve.degree),
        "knots": [float(x) for x in curve.knots],
        "control_points": [[float(x) for x in p] for p in curve.control_points],
    }


def save_model(model: BRepModel) -> dict:
    """Serialize a model to the interchange document (as a dict).

    3D curves take their owning edge's id; surfaces take their face's id;
    p-curves get fresh sequential ids per face loop entry.
    """
    doc: dict = {"version": SCHEMA_VERSION, "units": model.units}
    doc["curves3d"] = [_curve_doc(eid, e.curve)
                       for eid, e in sorted(model.edges.items())]
    doc["vertices"] = [{"id": vid, "point": [float(x) for x in v.point]}
                       for vid, v in sorted(model.vertices.items())]
    doc["edges"] = [{"id": eid, "curve": eid,
                     "start_vertex": e.start_vertex,
                     "end_vertex": e.end_vertex,
                     "t0": float(e.t0), "t1": float(e.t1)}
                    for eid, e in sorted(model.edges.items())]
    doc["loops"] = [{"id": lid,
                     "edges": [[eid, bool(rev)] for eid, rev in l.edges],
                     "is_outer": bool(l.is_outer)}
                    for lid, l in sorted(model.loops.items())]
    pcurve_rows = []
    surface_rows = []
    face_rows = []
    next_pid = (max([*model.vertices, *model.edges, *model.loops,
                     *model.faces, *model.shells], default=0) + 1)
    for fid, face in sorted(model.faces.items()):
        geom = face.geometry
        surf = geom.surface
        surface_rows.append({
            "id": fid, "type": "bspline",
            "degree_u": int(surf.degree_u), "degree_v": int(surf.degree_v),
            "knots_u": [float(x) for x in surf.knots_u],
            "knots_v": [float(x) for x in surf.knots_v],
            "control_points": [[[float(x) for x in pt] for pt in row]
                               for row in surf.control_points],
        })
        loop_pcurves = {}
        for lid, trim in zip(face.loop_ids, geom.loops):
            entries = []
            for pcurve, sense in trim.curves:
                pcurve_rows.append(_curve_doc(next_pid, pcurve))
                entries.append([next_pid, bool(sense)])
                next_pid += 1
            loop_pcurves[str(lid)] = entries
        face_rows.append({
            "id": fid, "surface": fid, "outer_loop": face.outer_loop,
            "inner_loops": list(face.inner_loops),
            "same_sense": bool(face.same_sense),
            "loop_pcurves": loop_pcurves,
        })
    doc["pcurves"] = pcurve_rows
    doc["surfaces"] = surface_rows
    doc["faces"] = face_rows
    doc["shells"] = [{"id": sid, "faces": list(s.faces)}
                     for sid, s in sorted(model.shells.items())]
    return doc


def dumps_model(model: BRepModel) -> str:
    return json.dumps(save_model(model), indent=1)


def models_structurally_equal(a: BRepModel, b: BRepModel) -> bool:
    """Same ids, same topology, same geometry arrays (exact)."""
    if (set(a.vertices) != set(b.vertices) or set(a.edges) != set(b.edges)
            or set(a.loops) != set(b.loops) or set(a.faces) != set(b.faces)
            or set(a.shells) != set(b.shells)):
        return False
    for vid in a.vertices:
        if not np.array_equal(a.vertices[vid].point, b.vertices[vid].point):
            return False
    for eid in a.edges:
        ea, eb = a.edges[eid], b.edges[eid]
        if (ea.start_vertex, ea.end_vertex, ea.t0, ea.t1) != \
                (eb.start_vertex, eb.end_vertex, eb.t0, eb.t1):
            return False
        if (ea.curve.degree != eb.curve.degree
                or not np.array_equal(ea.curve.knots, eb.curve.knots)
                or not np.array_equal(ea.curve.control_points,
                                      eb.curve.control_points)):
            return False
    for lid in a.loops:
        if (a.loops[lid].edges != b.loops[lid].edges
                or a.loops[lid].is_outer != b.loops[lid].is_outer):
            return False
    for fid in a.faces:
        fa, fb = a.faces[fid], b.faces[fid]
        if (fa.outer_loop, fa.inner_loops, fa.same_sense) != \
                (fb.outer_loop, fb.inner_loops, fb.same_sense):
            return False
        sa, sb = fa.geometry.surface, fb.geometry.surface
        if ((sa.degree_u, sa.degree_v) != (sb.degree_u, sb.degree_v)
                or not np.array_equal(sa.knots_u, sb.knots_u)
                or not np.array_equal(sa.knots_v, sb.knots_v)
                or not np.array_equal(sa.control_points, sb.control_points)):
            return False
        if len(fa.geometry.loops) != len(fb.geometry.loops):
            return False
        for ta, tb in zip(fa.geometry.loops, fb.geometry.loops):
            if len(ta.curves) != len(tb.curves):
                return False
            for (ca, ra), (cb, rb) in zip(ta.curves, tb.curves):
                if (ra != rb or ca.degree != cb.degree
                        or not np.array_equal(ca.knots, cb.knots)
                        or not np.array_equal(ca.control_points,
                                              cb.control_points)):
                    return False
    for sid in a.shells:
        if a.shells[sid].faces != b.shells[sid].faces:
            return False
    return True


# ---------------------------------------------------------------------------
# token file
# ---------------------------------------------------------------------------

def save_tokens(tokens: TokenSequence) -> bytes:
    """16-byte header, int64 face-id table, float32 row-major matrix."""
    F, D = tokens.tokens.shape
    head = TOKEN_MAGIC + struct.pack("<III", BINARY_VERSION, F, D)
    ids = np.asarray(tokens.face_ids, dtype="<i8").tobytes()
    body = np.ascontiguousarray(tokens.tokens, dtype="<f4").tobytes()
    return head + ids + body


def load_tokens(data: bytes) -> TokenSequence:
    if len(data) < 16:
        raise FormatError(f"token file truncated: {len(data)} bytes < 16")
    if data[:4] != TOKEN_MAGIC:
        raise FormatError(f"bad token file magic {data[:4]!r}")
    version, F, D = struct.unpack("<III", data[4:16])
    if version != BINARY_VERSION:
        raise FormatError(f"unsupported token file version {version}")
    want = 16 + 8 * F + 4 * F * D
    if len(data) != want:
        raise FormatError(
            f"token file length {len(data)} != expected {want}")
    ids = np.frombuffer(data, dtype="<i8", count=F, offset=16)
    rows = np.frombuffer(data, dtype="<f4", count=F * D,
                         offset=16 + 8 * F).reshape(F, D)
    return TokenSequence(tuple(int(i) for i in ids), rows.copy())


# ---------------------------------------------------------------------------
# weight file
# ---------------------------------------------------------------------------

def save_weights(bundle: WeightBundle) -> bytes:
    """Manifest JSON (name, shape, byte offset) plus a contiguous blob."""
    names = sorted(bundle.params)
    manifest_params = []
    offset = 0
    chunks = []
    for name in names:
        arr = np.ascontiguousarray(bundle.params[name], dtype="<f4")
        manifest_params.append({"name": name, "shape": list(arr.shape),
                                "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    manifest = json.dumps({
        "config_hash": bundle.config_hash,
        "seed": bundle.seed,
        "blob_len": offset,
        "params": manifest_params,
    }).encode("utf-8")
    head = WEIGHT_MAGIC + struct.pack("<II", BINARY_VERSION, len(manifest))
    return head + manifest + b"".join(chunks)


def load_weights(data: bytes, cfg: EmbedConfig | None = None) -> WeightBundle:
    """Parse a weight file; with a config, enforce the expected shapes.

    A config-hash mismatch only warns (the shapes are authoritative); shape
    mismatches are errors naming both shapes.
    """
    if len(data) < 12:
        raise FormatError(f"weight file truncated: {len(data)} bytes < 12")
    if data[:4] != WEIGHT_MAGIC:
        raise FormatError(f"bad weight file magic {data[:4]!r}")
    version, manifest_len = struct.unpack("<II", data[4:12])
    if version != BINARY_VERSION:
        raise FormatError(f"unsupported weight file version {version}")
    if len(data) < 12 + manifest_len:
        raise FormatError("weight file truncated inside manifest")
    try:
        manifest = json.loads(data[12:12 + manifest_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"weight manifest unreadable: {exc}") from None
    blob = data[12 + manifest_len:]
    if len(blob) != manifest.get("blob_len", -1):
        raise FormatError(
            f"weight blob length {len(blob)} != manifest "
            f"{manifest.get('blob_len')}")
    params: dict[str, np.ndarray] = {}
    spans = []
    for row in manifest["params"]:
        name, shape, offset = row["name"], tuple(row["shape"]), row["offset"]
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = offset + 4 * count
        if offset < 0 or end > len(blob):
            raise FormatError(f"parameter {name!r} spans outside the blob")
        spans.append((offset, end, name))
        params[name] = np.frombuffer(blob, dtype="<f4", count=count,
                                     offset=offset).reshape(shape).copy()
    spans.sort()
    for (_, end_a, name_a), (start_b, _, name_b) in zip(spans, spans[1:]):
        if start_b < end_a:
            raise FormatError(
                f"parameters {name_a!r} and {name_b!r} overlap in the blob")
    bundle = WeightBundle(params, manifest.get("config_hash", ""),
                          manifest.get("seed"))
    if cfg is not None:
        if bundle.config_hash and bundle.config_hash != cfg.config_hash():
            warnings.warn(
                f"weight file config hash {bundle.config_hash} differs from "
                f"the active configuration {cfg.config_hash()}; loading anyway",
                ConfigHashWarning)
        bundle.validate_against(cfg)
    return bundle


__all__ = [
    "load_model", "save_model", "dumps_model", "models_structurally_equal",
    "save_tokens", "load_tokens", "save_weights", "load_weights",
    "SCHEMA_VERSION",
]
