"""Forward-only embedding network: geometry encoders and topology aggregation.

One token per face, assembled in stages: Bezier curve segments and Bezier
triangles are encoded by small dense stacks, sequences of them are fused by
transformer encoders with cosine positional terms and mean pooling, loop
membership runs through a small recurrent unit over the padded unfolded
edge cycle, and pooling MLPs fold inner loops and neighboring faces into
the face token. A final transformer encoder without positional encoding
contextualizes the tokens; it is therefore permutation-equivariant.

All tensors are float32. Given (weights, seed, input), every function here
is bit-deterministic.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import GeometryError, ShapeMismatchError
from .geometry import (
    BezierCurve,
    BezierTriangle,
    bezier_curve_tangent,
    curve_segments_between,
    elevate_degree,
    triangle_center_normal,
    triangle_point_count,
)
from .topology import BRepModel, LoopRec, face_adjacency, normalize_model, unfold_loop
from .trimming import FitConfig, tessellate_trimmed


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmbedConfig:
    """Network dimensions and run controls.

    The face token is three concatenated blocks of ``embed_dim``: geometry,
    loop aggregation, and shell aggregation, 192 in total by default.
    """

    embed_dim: int = 64
    curve_encoder_layers: int = 6
    vertex_encoder_layers: int = 2
    edge_seq_layers: int = 2
    edge_seq_heads: int = 4
    tri_seq_layers: int = 2
    tri_seq_heads: int = 8
    seq_hidden: int = 512
    loop_rnn_hidden: int = 64
    loop_face_hidden: int = 256
    face_shell_hidden: int = 512
    token_layers: int = 2
    token_heads: int = 8
    mask_ratio: float = 0.0
    max_curve_seq: int = 100
    working_degree: int = 3
    seed: int | None = 0

    def __post_init__(self):
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise ValueError(f"mask_ratio {self.mask_ratio} outside [0, 1]")
        for name in ("embed_dim", "seq_hidden", "loop_rnn_hidden",
                     "loop_face_hidden", "face_shell_hidden",
                     "max_curve_seq", "working_degree"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.embed_dim % self.edge_seq_heads or self.embed_dim % self.tri_seq_heads:
            raise ValueError("embed_dim must divide evenly into heads")
        if self.token_dim % self.token_heads:
            raise ValueError("token dim must divide evenly into token heads")

    @property
    def token_dim(self) -> int:
        return 3 * self.embed_dim

    @property
    def triangle_degree(self) -> int:
        return 2 * self.working_degree

    @property
    def curve_feature_dim(self) -> int:
        return 3 * (self.working_degree + 1) + 3

    @property
    def triangle_feature_dim(self) -> int:
        return 4 * triangle_point_count(self.triangle_degree) + 3

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _attention_param_shapes(d: int, hidden: int) -> dict[str, tuple]:
    return {
        "attn_wq": (d, d), "attn_bq": (d,),
        "attn_wk": (d, d), "attn_bk": (d,),
        "attn_wv": (d, d), "attn_bv": (d,),
        "attn_wo": (d, d), "attn_bo": (d,),
        "ln1_g": (d,), "ln1_b": (d,),
        "ffn_w1": (hidden, d), "ffn_b1": (hidden,),
        "ffn_w2": (d, hidden), "ffn_b2": (d,),
        "ln2_g": (d,), "ln2_b": (d,),
    }


def expected_parameter_shapes(cfg: EmbedConfig) -> dict[str, tuple]:
    """Every parameter name the network consumes, with its exact shape."""
    d = cfg.embed_dim
    shapes: dict[str, tuple] = {}

    def dense_stack(prefix, dims):
        for k, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
            shapes[f"{prefix}.l{k}.w"] = (dout, din)
            shapes[f"{prefix}.l{k}.b"] = (dout,)

    dense_stack("vertex", [3] + [d] * cfg.vertex_encoder_layers)
    dense_stack("curve", [cfg.curve_feature_dim]
                + [d] * cfg.curve_encoder_layers)
    dense_stack("tri", [cfg.triangle_feature_dim]
                + [d] * cfg.curve_encoder_layers)
    for prefix, layers, dim in (("edge_seq", cfg.edge_seq_layers, d),
                                ("tri_seq", cfg.tri_seq_layers, d),
                                ("token_enc", cfg.token_layers, cfg.token_dim)):
        for k in range(layers):
            for name, shape in _attention_param_shapes(dim, cfg.seq_hidden).items():
                shapes[f"{prefix}.l{k}.{name}"] = shape
    shapes["loop_rnn.w_he"] = (cfg.loop_rnn_hidden, cfg.token_dim)
    shapes["loop_rnn.w_hh"] = (cfg.loop_rnn_hidden, cfg.loop_rnn_hidden)
    shapes["loop_rnn.w_h"] = (cfg.loop_rnn_hidden, cfg.loop_rnn_hidden)
    dense_stack("loop_face", [3 * d, cfg.loop_face_hidden, d])
    # neighbors arrive 2d wide (face + loop blocks); mean and max pools
    # concatenated make the shell MLP input 4d wide
    dense_stack("face_shell", [4 * d, cfg.face_shell_hidden, d])
    return shapes


@dataclass(frozen=True, eq=False)
class WeightBundle:
    """Named float32 parameters plus provenance metadata."""

    params: dict[str, np.ndarray]
    config_hash: str = ""
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "params", {
            k: np.asarray(v, dtype=np.float32) for k, v in self.params.items()})

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.params[name]
        except KeyError:
            raise KeyError(f"weight bundle has no parameter {name!r}") from None

    @staticmethod
    def random(cfg: EmbedConfig, seed: int = 0) -> "WeightBundle":
        """Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].

        Layer-norm gains start at one and shifts at zero. Parameters are
        drawn in sorted-name order so the bundle is reproducible.
        """
        rng = np.random.default_rng(seed)
        shapes = expected_parameter_shapes(cfg)
        params: dict[str, np.ndarray] = {}
        for name in sorted(shapes):
            shape = shapes[name]
            if name.endswith(("ln1_g", "ln2_g")):
                params[name] = np.ones(shape, dtype=np.float32)
            elif name.endswith(("ln1_b", "ln2_b")):
                params[name] = np.zeros(shape, dtype=np.float32)
            else:
                fan_in = shape[-1] if len(shape) > 1 else _bias_fan_in(
                    name, shapes)
                bound = 1.0 / np.sqrt(fan_in)
                params[name] = rng.uniform(-bound, bound, shape).astype(
                    np.float32)
        return WeightBundle(params, cfg.config_hash(), seed)

    def validate_against(self, cfg: EmbedConfig) -> None:
        shapes = expected_parameter_shapes(cfg)
        for name, shape in shapes.items():
            if name not in self.params:
                raise ShapeMismatchError(f"missing parameter {name!r}")
            got = self.params[name].shape
            if tuple(got) != tuple(shape):
                raise ShapeMismatchError(
                    f"parameter {name!r} has shape {tuple(got)}, "
                    f"expected {tuple(shape)}")
        extra = set(self.params) - set(shapes)
        if extra:
            raise ShapeMismatchError(
                f"unexpected parameters: {sorted(extra)[:5]}")


def _bias_fan_in(name: str, shapes: dict[str, tuple]) -> int:
    weight_name = name[:-2] + ".w" if name.endswith(".b") else name
    for suffix_b, suffix_w in ((".b", ".w"), ("_bq", "_wq"), ("_bk", "_wk"),
                               ("_bv", "_wv"), ("_bo", "_wo"),
                               ("_b1", "_w1"), ("_b2", "_w2")):
        if name.endswith(suffix_b):
            weight_name = name[: -len(suffix_b)] + suffix_w
            break
    if weight_name in shapes:
        return shapes[weight_name][-1]
    return shapes[name][-1]


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def _f32(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float32)


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y = x W^T + b for a vector or a (rows, features) batch."""
    x = _f32(x)
    if x.shape[-1] != w.shape[1]:
        raise ShapeMismatchError(
            f"dense input has shape {x.shape}, weight expects "
            f"(..., {w.shape[1]}) from {w.shape}")
    return x @ w.T.astype(np.float32) + _f32(b)


def mlp_forward(x: np.ndarray, weights: WeightBundle, prefix: str,
                n_layers: int) -> np.ndarray:
    """Dense stack with ReLU between layers and a linear final layer."""
    out = _f32(x)
    for k in range(n_layers):
        out = dense_forward(out, weights[f"{prefix}.l{k}.w"],
                            weights[f"{prefix}.l{k}.b"])
        if k + 1 < n_layers:
            out = np.maximum(out, np.float32(0.0))
    return out


def rnn_step(edge_vec: np.ndarray, h_prev: np.ndarray, w_he: np.ndarray,
             w_hh: np.ndarray, w_h: np.ndarray) -> np.ndarray:
    """h = tanh((W_he e + W_hh h_prev) W_h)."""
    combined = w_he @ _f32(edge_vec) + w_hh @ _f32(h_prev)
    return np.tanh(combined @ w_h)


def layer_norm(x: np.ndarray, gain: np.ndarray, shift: np.ndarray,
               eps: float = 1e-5) -> np.ndarray:
    x = _f32(x)
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + np.float32(eps)) * gain + shift


def mean_pool(rows: np.ndarray) -> np.ndarray:
    return _f32(rows).mean(axis=0)


def max_pool(rows: np.ndarray) -> np.ndarray:
    return _f32(rows).max(axis=0)


def softmax(x: np.ndarray) -> np.ndarray:
    x = _f32(x)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cosine_positional(index: int, dim: int) -> np.ndarray:
    """Interleaved sin/cos position code at the given sequence index."""
    half = np.arange(dim // 2, dtype=np.float64)
    freq = np.power(10000.0, -2.0 * half / dim)
    angles = index * freq
    out = np.empty(dim, dtype=np.float32)
    out[0::2] = np.sin(angles)
    out[1::2] = np.cos(angles)
    return out


def attention_layer(x: np.ndarray, weights: WeightBundle, prefix: str,
                    n_heads: int) -> np.ndarray:
    """One post-norm transformer encoder layer over (rows, dim)."""
    x = _f32(np.atleast_2d(x))
    rows, dim = x.shape
    if dim % n_heads:
        raise ShapeMismatchError(f"dim {dim} not divisible by {n_heads} heads")
    dh = dim // n_heads
    q = dense_forward(x, weights[f"{prefix}.attn_wq"], weights[f"{prefix}.attn_bq"])
    k = dense_forward(x, weights[f"{prefix}.attn_wk"], weights[f"{prefix}.attn_bk"])
    v = dense_forward(x, weights[f"{prefix}.attn_wv"], weights[f"{prefix}.attn_bv"])
    heads = []
    scale = np.float32(1.0 / np.sqrt(dh))
    for h in range(n_heads):
        sl = slice(h * dh, (h + 1) * dh)
        scores = (q[:, sl] @ k[:, sl].T) * scale
        heads.append(softmax(scores) @ v[:, sl])
    attended = dense_forward(np.concatenate(heads, axis=1),
                             weights[f"{prefix}.attn_wo"],
                             weights[f"{prefix}.attn_bo"])
    x = layer_norm(x + attended, weights[f"{prefix}.ln1_g"],
                   weights[f"{prefix}.ln1_b"])
    hidden = np.maximum(dense_forward(x, weights[f"{prefix}.ffn_w1"],
                                      weights[f"{prefix}.ffn_b1"]),
                        np.float32(0.0))
    out = dense_forward(hidden, weights[f"{prefix}.ffn_w2"],
                        weights[f"{prefix}.ffn_b2"])
    return layer_norm(x + out, weights[f"{prefix}.ln2_g"],
                      weights[f"{prefix}.ln2_b"])


def _sequence_encode(rows: np.ndarray, weights: WeightBundle, prefix: str,
                     n_layers: int, n_heads: int,
                     positional: bool = True) -> np.ndarray:
    x = _f32(np.atleast_2d(rows))
    if positional:
        pe = np.stack([cosine_positional(i, x.shape[1])
                       for i in range(x.shape[0])])
        x = x + pe
    for k in range(n_layers):
        x = attention_layer(x, weights, f"{prefix}.l{k}", n_heads)
    return x


# ---------------------------------------------------------------------------
# geometry encoders
# ---------------------------------------------------------------------------

def embed_vertex(point, weights: WeightBundle, cfg: EmbedConfig) -> np.ndarray:
    """3D coordinates through the small dense stack, to embed_dim."""
    p = _f32(point).reshape(3)
    return mlp_forward(p, weights, "vertex", cfg.vertex_encoder_layers)


def curve_feature_vector(bez: BezierCurve, cfg: EmbedConfig) -> np.ndarray:
    """Control coordinates plus the unit tangent at the curve middle."""
    if bez.degree != cfg.working_degree:
        raise GeometryError(
            f"curve encoder expects degree {cfg.working_degree}, "
            f"got {bez.degree}")
    if bez.dim != 3:
        raise GeometryError("curve encoder expects 3D curves")
    tangent = bezier_curve_tangent(bez, 0.5)
    return _f32(np.concatenate([bez.control_points.ravel(), tangent]))


def embed_bezier_curve(bez: BezierCurve, weights: WeightBundle,
                       cfg: EmbedConfig) -> np.ndarray:
    return mlp_forward(curve_feature_vector(bez, cfg), weights, "curve",
                       cfg.curve_encoder_layers)


def embed_edge(segment_embeddings: np.ndarray, weights: WeightBundle,
               cfg: EmbedConfig) -> np.ndarray:
    """Fuse ordered curve-segment embeddings into one edge embedding.

    Adds cosine positional terms, runs the edge sequence encoder, and mean
    pools over positions. At most ``max_curve_seq`` segments are accepted.
    """
    rows = _f32(np.atleast_2d(segment_embeddings))
    if rows.shape[0] < 1:
        raise GeometryError("edge needs at least one curve segment")
    if rows.shape[0] > cfg.max_curve_seq:
        raise GeometryError(
            f"edge decomposes into {rows.shape[0]} curve segments, "
            f"above the limit of {cfg.max_curve_seq}")
    encoded = _sequence_encode(rows, weights, "edge_seq",
                               cfg.edge_seq_layers, cfg.edge_seq_heads)
    return mean_pool(encoded)


def triangle_feature_vector(tri: BezierTriangle, cfg: EmbedConfig,
                            flip_normal: bool = False) -> np.ndarray:
    """Control points (x, y, z, w) plus the center unit normal.

    Degenerate patches contribute a zero normal. ``flip_normal`` accounts
    for faces whose outward side opposes the surface parameterization.
    """
    if tri.degree != cfg.triangle_degree:
        raise GeometryError(
            f"triangle encoder expects degree {cfg.triangle_degree}, "
            f"got {tri.degree}")
    normal, _ = triangle_center_normal(tri)
    if flip_normal:
        normal = -normal
    return _f32(np.concatenate([tri.control_points.ravel(), normal]))


def embed_bezier_triangle(tri: BezierTriangle, weights: WeightBundle,
                          cfg: EmbedConfig, flip_normal: bool = False) -> np.ndarray:
    return mlp_forward(triangle_feature_vector(tri, cfg, flip_normal),
                       weights, "tri", cfg.curve_encoder_layers)


def embed_face_geometry(triangle_embeddings: np.ndarray, weights: WeightBundle,
                        cfg: EmbedConfig) -> np.ndarray:
    """Fuse z-ordered triangle embeddings into the face geometry embedding."""
    rows = _f32(np.atleast_2d(triangle_embeddings))
    if rows.shape[0] < 1:
        raise GeometryError("face needs at least one triangle")
    encoded = _sequence_encode(rows, weights, "tri_seq",
                               cfg.tri_seq_layers, cfg.tri_seq_heads)
    return mean_pool(encoded)


# ---------------------------------------------------------------------------
# topology aggregation
# ---------------------------------------------------------------------------

def aggregate_vertex_edge(edge_emb: np.ndarray, start_emb: np.ndarray,
                          end_emb: np.ndarray) -> np.ndarray:
    """Concatenate (edge, start vertex, end vertex) embeddings."""
    parts = [_f32(edge_emb), _f32(start_emb), _f32(end_emb)]
    dims = {p.shape for p in parts}
    if len(dims) != 1:
        raise ShapeMismatchError(
            f"edge/vertex embeddings disagree in shape: "
            f"{[p.shape for p in parts]}")
    return np.concatenate(parts)


def loop_break_index(loop: LoopRec, seed: int | None) -> int:
    """Seeded break-edge choice; lowest edge id when no seed is given."""
    n = len(loop.edges)
    if seed is None:
        ids = [e for e, _ in loop.edges]
        return int(np.argmin(ids))
    rng = np.random.default_rng(np.random.SeedSequence([seed, loop.id, 0x10]))
    return int(rng.integers(0, n))


def aggregate_edge_loop(loop: LoopRec, edge_embeddings: dict[int, np.ndarray],
                        weights: WeightBundle, seed: int | None = 0) -> np.ndarray:
    """Recurrent pass over the padded unfolded loop, mean over core states.

    The cycle is broken at a seeded edge, padded one step before and two
    after, and run through the recurrent unit from a zero state; the loop
    embedding is the mean of the hidden states at the core positions.
    """
    n = len(loop.edges)
    sequence = unfold_loop(loop, loop_break_index(loop, seed))
    w_he = weights["loop_rnn.w_he"]
    w_hh = weights["loop_rnn.w_hh"]
    w_h = weights["loop_rnn.w_h"]
    h = np.zeros(w_hh.shape[0], dtype=np.float32)
    states = []
    for eid in sequence:
        h = rnn_step(edge_embeddings[eid], h, w_he, w_hh, w_h)
        states.append(h)
    core = np.stack(states[1: n + 1])
    return mean_pool(core)


def aggregate_loop_face(face_emb: np.ndarray, outer_emb: np.ndarray,
                        inner_embs, weights: WeightBundle,
                        cfg: EmbedConfig) -> np.ndarray:
    """Fold outer and pooled inner loops into the face embedding.

    Inner loops enter through mean and max pooling (zero vectors when there
    are none), pass the loop MLP together with the outer loop, and the
    result is concatenated after the face embedding.
    """
    face_emb = _f32(face_emb)
    outer_emb = _f32(outer_emb)
    d = cfg.embed_dim
    if inner_embs is not None and len(inner_embs) > 0:
        inner = _f32(np.atleast_2d(np.stack(inner_embs)))
        pooled = np.concatenate([mean_pool(inner), max_pool(inner)])
    else:
        pooled = np.zeros(2 * d, dtype=np.float32)
    mlp_in = np.concatenate([outer_emb, pooled])
    folded = mlp_forward(mlp_in, weights, "loop_face", 2)
    return np.concatenate([face_emb, folded])


def aggregate_face_shell(face_emb: np.ndarray, neighbor_embs,
                         weights: WeightBundle, cfg: EmbedConfig) -> np.ndarray:
    """Fold pooled 1-ring neighbor embeddings into the face embedding."""
    face_emb = _f32(face_emb)
    if neighbor_embs is not None and len(neighbor_embs) > 0:
        rows = _f32(np.atleast_2d(np.stack(neighbor_embs)))
        pooled = np.concatenate([mean_pool(rows), max_pool(rows)])
    else:
        pooled = np.zeros(4 * cfg.embed_dim, dtype=np.float32)
    folded = mlp_forward(pooled, weights, "face_shell", 2)
    return np.concatenate([face_emb, folded])


# ---------------------------------------------------------------------------
# masking and tokenization
# ---------------------------------------------------------------------------

def apply_mask(triangles: list, ratio: float, seed: int | None = 0) -> list:
    """Drop a seeded random subset of triangles, keeping relative order.

    Exactly round(ratio * n) triangles are removed (never all of them);
    identical seeds select identical subsets.
    """
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"mask ratio {ratio} outside [0, 1)")
    n = len(triangles)
    if n == 0 or ratio == 0.0:
        return list(triangles)
    k = min(n - 1, int(np.floor(ratio * n + 0.5)))
    if k <= 0:
        return list(triangles)
    rng = np.random.default_rng(np.random.SeedSequence([seed or 0, 0x2A]))
    dropped = set(map(int, rng.choice(n, size=k, replace=False)))
    return [t for i, t in enumerate(triangles) if i not in dropped]


@dataclass(frozen=True, eq=False)
class TokenSequence:
    """One fixed-dimension token per face, in face-id order."""

    face_ids: tuple[int, ...]
    tokens: np.ndarray

    def __post_init__(self):
        tokens = np.asarray(self.tokens, dtype=np.float32)
        if tokens.ndim != 2 or tokens.shape[0] != len(self.face_ids):
            raise ShapeMismatchError(
                f"token matrix {tokens.shape} does not match "
                f"{len(self.face_ids)} face ids")
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "face_ids", tuple(int(f) for f in self.face_ids))


def _face_mask_seed(base_seed: int | None, face_id: int) -> int | None:
    if base_seed is None:
        return None
    mix = np.random.SeedSequence([base_seed, face_id, 0x7A]).generate_state(1)
    return int(mix[0])


def _edge_segments_cubic(edge, cfg: EmbedConfig) -> list[BezierCurve]:
    segments = curve_segments_between(edge.curve, edge.t0, edge.t1)
    out = []
    for seg in segments:
        if seg.curve.degree > cfg.working_degree:
            raise GeometryError(
                f"edge {edge.id} has degree {seg.curve.degree} above the "
                f"working degree {cfg.working_degree}")
        out.append(elevate_degree(seg.curve, cfg.working_degree))
    return out


def tokenize_model(model: BRepModel, weights: WeightBundle, cfg: EmbedConfig,
                   fit_cfg: FitConfig | None = None,
                   normalize: bool = True) -> TokenSequence:
    """Full pipeline from a validated model to the F x token_dim matrix.

    Stages per face: tessellate and z-order the triangles, mask, embed and
    fuse them; per edge: decompose, embed segments, fuse, and concatenate
    vertex embeddings; per loop: recurrent aggregation; then loop-face and
    face-shell folding. Rows are ordered by ascending face id.
    """
    weights.validate_against(cfg)
    if normalize:
        model = normalize_model(model)
    if fit_cfg is None:
        fit_cfg = FitConfig(working_degree=cfg.working_degree)
    adjacency = face_adjacency(model)

    vertex_embs = {vid: embed_vertex(v.point, weights, cfg)
                   for vid, v in sorted(model.vertices.items())}

    edge_embs: dict[int, np.ndarray] = {}
    for eid, edge in sorted(model.edges.items()):
        segs = _edge_segments_cubic(edge, cfg)
        seg_rows = np.stack([embed_bezier_curve(s, weights, cfg) for s in segs])
        fused = embed_edge(seg_rows, weights, cfg)
        edge_embs[eid] = aggregate_vertex_edge(
            fused, vertex_embs[edge.start_vertex], vertex_embs[edge.end_vertex])

    loop_embs: dict[int, np.ndarray] = {}
    for lid, loop in sorted(model.loops.items()):
        loop_embs[lid] = aggregate_edge_loop(loop, edge_embs, weights,
                                             cfg.seed)

    face_stage1: dict[int, np.ndarray] = {}
    for fid, face in sorted(model.faces.items()):
        triangles = tessellate_trimmed(face.geometry, fit_cfg)
        if cfg.mask_ratio > 0.0:
            triangles = apply_mask(triangles, cfg.mask_ratio,
                                   _face_mask_seed(cfg.seed, fid))
        tri_rows = np.stack([
            embed_bezier_triangle(t, weights, cfg,
                                  flip_normal=not face.same_sense)
            for t in triangles])
        geometry_emb = embed_face_geometry(tri_rows, weights, cfg)
        face_stage1[fid] = aggregate_loop_face(
            geometry_emb, loop_embs[face.outer_loop],
            [loop_embs[l] for l in face.inner_loops], weights, cfg)

    rows = []
    face_ids = sorted(model.faces)
    for fid in face_ids:
        neighbors = [face_stage1[n] for n in sorted(adjacency[fid])]
        rows.append(aggregate_face_shell(face_stage1[fid], neighbors,
                                         weights, cfg))
    return TokenSequence(tuple(face_ids), np.stack(rows))


def encode_tokens(tokens: TokenSequence | np.ndarray, weights: WeightBundle,
                  cfg: EmbedConfig) -> np.ndarray:
    """Contextualize face tokens; no positional encoding is added.

    Without positional terms the encoder commutes with any permutation of
    the token rows.
    """
    rows = tokens.tokens if isinstance(tokens, TokenSequence) else tokens
    rows = _f32(np.atleast_2d(rows))
    if rows.shape[0] < 1:
        raise ShapeMismatchError("need at least one token row")
    if rows.shape[1] != cfg.token_dim:
        raise ShapeMismatchError(
            f"token rows have dim {rows.shape[1]}, expected {cfg.token_dim}")
    return _sequence_encode(rows, weights, "token_enc", cfg.token_layers,
                            cfg.token_heads, positional=False)
