"""Structured conditions and their one-hot embeddings.

A condition is an attribute tuple (color, shape, count, position) plus an
optional second object (color2, shape2) used by binding-style examples.
The embedding concatenates one-hot blocks, one per token, in an explicit
token order; re-ordering the tokens yields a different, equally-sized
vector, which is how corrupted "captions" are represented.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

COLORS = ("red", "green", "blue", "yellow")
SHAPES = ("square", "circle", "triangle")
COUNTS = (1, 2, 3, 4)
POSITIONS = ("top-left", "top-right", "bottom-left", "bottom-right")

# Canonical token order; models are trained with this order only.
CANONICAL_TOKEN_ORDER = ("color", "shape", "count", "position", "color2", "shape2")

_BLOCK_SIZES = {
    "color": len(COLORS),
    "shape": len(SHAPES),
    "count": len(COUNTS),
    "position": len(POSITIONS),
    "color2": len(COLORS),
    "shape2": len(SHAPES),
}

EMBEDDING_DIM = sum(_BLOCK_SIZES.values())


def _one_hot(value, vocab, size) -> np.ndarray:
    block = np.zeros(size, dtype=np.float64)
    if value is not None:
        block[vocab.index(value)] = 1.0
    return block


@dataclass(frozen=True)
class Condition:
    """Immutable attribute tuple with an explicit embedding token order."""

    color: str
    shape: str
    count: int
    position: str
    color2: str | None = None
    shape2: str | None = None
    token_order: tuple = CANONICAL_TOKEN_ORDER

    def __post_init__(self):
        if self.color not in COLORS:
            raise ParameterError(f"unknown color {self.color!r}")
        if self.shape not in SHAPES:
            raise ParameterError(f"unknown shape {self.shape!r}")
        if self.count not in COUNTS:
            raise ParameterError(f"count must be one of {COUNTS}, got {self.count}")
        if self.position not in POSITIONS:
            raise ParameterError(f"unknown position {self.position!r}")
        if (self.color2 is None) != (self.shape2 is None):
            raise ParameterError("color2 and shape2 must be set together")
        if self.color2 is not None and self.color2 not in COLORS:
            raise ParameterError(f"unknown color2 {self.color2!r}")
        if self.shape2 is not None and self.shape2 not in SHAPES:
            raise ParameterError(f"unknown shape2 {self.shape2!r}")
        if sorted(self.token_order) != sorted(CANONICAL_TOKEN_ORDER):
            raise ParameterError("token_order must be a permutation of the tokens")
        object.__setattr__(self, "token_order", tuple(self.token_order))

    @property
    def has_second_object(self) -> bool:
        return self.color2 is not None

    def _block(self, token: str) -> np.ndarray:
        if token == "color":
            return _one_hot(self.color, COLORS, len(COLORS))
        if token == "shape":
            return _one_hot(self.shape, SHAPES, len(SHAPES))
        if token == "count":
            return _one_hot(self.count, COUNTS, len(COUNTS))
        if token == "position":
            return _one_hot(self.position, POSITIONS, len(POSITIONS))
        if token == "color2":
            return _one_hot(self.color2, COLORS, len(COLORS))
        if token == "shape2":
            return _one_hot(self.shape2, SHAPES, len(SHAPES))
        raise ParameterError(f"unknown token {token!r}")

    def embedding(self) -> np.ndarray:
        """Concatenated one-hot blocks in this condition's token order."""
        return np.concatenate([self._block(tok) for tok in self.token_order])

    def key(self) -> str:
        """Stable string id used in maps and dataset files."""
        parts = [self.color, self.shape, str(self.count), self.position]
        if self.has_second_object:
            parts.append(f"{self.color2}+{self.shape2}")
        key = "|".join(parts)
        if self.token_order != CANONICAL_TOKEN_ORDER:
            key += "@" + ",".join(self.token_order)
        return key

    def with_token_order(self, order) -> "Condition":
        return Condition(
            color=self.color,
            shape=self.shape,
            count=self.count,
            position=self.position,
            color2=self.color2,
            shape2=self.shape2,
            token_order=tuple(order),
        )

    def replace_attribute(self, name: str, value) -> "Condition":
        fields = {
            "color": self.color,
            "shape": self.shape,
            "count": self.count,
            "position": self.position,
            "color2": self.color2,
            "shape2": self.shape2,
        }
        if name not in fields:
            raise ParameterError(f"unknown attribute {name!r}")
        fields[name] = value
        return Condition(token_order=self.token_order, **fields)

    def swap_object_colors(self) -> "Condition":
        """Re-bind the colors across the two objects (binding distractor)."""
        if not self.has_second_object:
            raise ParameterError("swap_object_colors needs a two-object condition")
        return Condition(
            color=self.color2,
            shape=self.shape,
            count=self.count,
            position=self.position,
            color2=self.color,
            shape2=self.shape2,
            token_order=self.token_order,
        )

    def to_json_dict(self) -> dict:
        return {
            "color": self.color,
            "shape": self.shape,
            "count": self.count,
            "position": self.position,
            "color2": self.color2,
            "shape2": self.shape2,
            "tokenOrder": list(self.token_order),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Condition":
        return cls(
            color=obj["color"],
            shape=obj["shape"],
            count=obj["count"],
            position=obj["position"],
            color2=obj.get("color2"),
            shape2=obj.get("shape2"),
            token_order=tuple(obj.get("tokenOrder", CANONICAL_TOKEN_ORDER)),
        )


def vocabulary_json() -> dict:
    """Vocabulary block embedded in checkpoints and manifests."""
    return {
        "colors": list(COLORS),
        "shapes": list(SHAPES),
        "counts": list(COUNTS),
        "positions": list(POSITIONS),
        "tokens": list(CANONICAL_TOKEN_ORDER),
        "embeddingDim": EMBEDDING_DIM,
    }
