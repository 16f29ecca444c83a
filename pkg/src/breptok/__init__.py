"""Continuous-geometry tokenization kernel for B-rep CAD models.

The package turns boundary-representation solids into fixed-dimension
face tokens: B-spline curves and surfaces are decomposed exactly into
Bezier curves and Bezier triangles, trimmed regions are tessellated with
a classifying quadtree and boundary fitting, patches are ordered along a
z-order curve, and a forward-only embedding network aggregates geometry
through the model's topology into one token per face.
"""

__version__ = "0.1.0"

from . import cli, errors, fixtures, formats, geometry, network, topology, trimming  # noqa: F401
from .formats import load_model, load_tokens, load_weights, save_model, save_tokens, save_weights  # noqa: F401
from .geometry import (  # noqa: F401
    BezierCurve,
    BezierRectangle,
    BezierTriangle,
    BSplineCurve,
    BSplineSurface,
    decompose_curve,
    decompose_surface,
    eval_bezier_curve,
    eval_bezier_triangle,
    eval_curve,
    eval_surface,
    insert_knot,
    rect_to_triangles,
)
from .network import EmbedConfig, TokenSequence, WeightBundle, encode_tokens, tokenize_model  # noqa: F401
from .topology import BRepModel, face_adjacency, order_patches, validate_model, zorder_key  # noqa: F401
from .trimming import FitConfig, TrimLoop, TrimmedSurface, tessellate_trimmed  # noqa: F401
