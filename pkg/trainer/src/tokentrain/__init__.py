"""Toy-scale training over exported face-token files.

Self-contained consumer of the documented token-file format: it reads
token exports plus a labels manifest, trains a linear softmax model (whole
models or per-face), and reports accuracy and intersection-over-union.
"""

__version__ = "0.1.0"

from .data import LabeledTokenSet, load_manifest  # noqa: F401
from .metrics import compute_accuracy, compute_iou  # noqa: F401
from .tokenfile import read_token_file, write_token_file  # noqa: F401
from .train import TrainResult, train  # noqa: F401
