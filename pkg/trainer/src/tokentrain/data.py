"""Labels manifest and dataset assembly from token exports.

The manifest is JSON:

    {
      "classes": 3,
      "items": [
        {"model": "m0001", "label": 0,
         "tokens": {"0.0": "exports/m0001_r0.tok",
                    "0.25": "exports/m0001_r25.tok"},
         "face_labels": [0, 0, 1, ...]          # optional, per face row
        },
        ...
      ]
    }

``tokens`` maps a mask ratio (as written by the exporter) to a token file
for the same model; training schedules pick which exports are consumed.
Relative paths resolve against the manifest's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tokenfile import read_token_file


@dataclass(frozen=True)
class TokenItem:
    model: str
    label: int
    token_paths: dict[str, str]
    face_labels: tuple[int, ...] | None = None


@dataclass(frozen=True)
class LabeledTokenSet:
    n_classes: int
    items: tuple[TokenItem, ...]
    consumed: list = field(default_factory=list)  # export paths actually read

    def __post_init__(self):
        for item in self.items:
            if not 0 <= item.label < self.n_classes:
                raise ValueError(
                    f"{item.model}: label {item.label} outside "
                    f"[0, {self.n_classes})")
            if item.face_labels is not None and any(
                    not 0 <= l < self.n_classes for l in item.face_labels):
                raise ValueError(f"{item.model}: face label outside range")

    def ratios_available(self) -> set[str]:
        out = set(self.items[0].token_paths) if self.items else set()
        for item in self.items:
            out &= set(item.token_paths)
        return out

    def load_tokens(self, item: TokenItem, ratio: str) -> np.ndarray:
        if ratio not in item.token_paths:
            raise KeyError(
                f"{item.model} has no export at mask ratio {ratio!r}; "
                f"available: {sorted(item.token_paths)}")
        path = item.token_paths[ratio]
        self.consumed.append(path)
        _, tokens = read_token_file(path)
        return tokens

    def model_features(self, item: TokenItem, ratio: str) -> np.ndarray:
        """Mean pool over the face tokens of one export."""
        tokens = self.load_tokens(item, ratio)
        if len(tokens) == 0:
            raise ValueError(f"{item.model}: empty token file")
        return tokens.mean(axis=0)


def _ratio_key(value) -> str:
    return repr(float(value))


def normalize_ratio_keys(mapping: dict) -> dict[str, str]:
    return {_ratio_key(k): v for k, v in mapping.items()}


def load_manifest(path) -> LabeledTokenSet:
    path = Path(path)
    doc = json.loads(path.read_text())
    n_classes = int(doc["classes"])
    items = []
    for k, row in enumerate(doc.get("items", [])):
        tokens = row.get("tokens")
        if not tokens:
            raise ValueError(f"items[{k}]: missing token exports")
        resolved = {_ratio_key(r): str((path.parent / p).resolve())
                    for r, p in tokens.items()}
        face_labels = row.get("face_labels")
        items.append(TokenItem(
            model=str(row.get("model", f"item{k}")),
            label=int(row["label"]),
            token_paths=resolved,
            face_labels=tuple(face_labels) if face_labels is not None else None,
        ))
    return LabeledTokenSet(n_classes, tuple(items))


def stratified_split(labels, seed: int,
                     fractions=(0.70, 0.15, 0.15)) -> tuple[list, list, list]:
    """Deterministic per-class shuffle into train/validation/test indices."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train: list[int] = []
    val: list[int] = []
    test: list[int] = []
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        n = len(idx)
        n_train = min(n, max(1, int(round(fractions[0] * n))))
        n_val = min(n - n_train, int(round(fractions[1] * n)))
        train.extend(idx[:n_train].tolist())
        val.extend(idx[n_train:n_train + n_val].tolist())
        test.extend(idx[n_train + n_val:].tolist())
    return sorted(train), sorted(val), sorted(test)
