"""Micro-image benchmark: procedural rendering and task construction.

Six image-text-matching tasks probe one facet of conditioning each:
attribute binding (2 candidates), color (4), count (4), shape (3),
spatial (4) and text corruption (5).  Chance accuracy is 1/candidates,
i.e. 50/25/25/33/25/20 percent.  Every example carries exactly one
correct condition at a uniformly random index, so a condition-blind
scorer lands at chance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .conditions import (
    CANONICAL_TOKEN_ORDER,
    COLORS,
    COUNTS,
    POSITIONS,
    SHAPES,
    Condition,
)
from .errors import DataError, ParameterError
from .rng import DOMAIN_RENDER, DOMAIN_SUITE, derive_seed, stream
from .training import ConditionedSample

TASK_NAMES = ("attributeBinding", "color", "count", "shape", "spatial", "textCorruption")


@dataclass(frozen=True)
class TaskSpec:
    """Task id and its candidate-set size."""

    task: str
    num_candidates: int

    @property
    def chance_accuracy(self) -> float:
        return 1.0 / self.num_candidates

    @property
    def chance_pct(self) -> float:
        return 100.0 / self.num_candidates


TASKS = {
    "attributeBinding": TaskSpec("attributeBinding", 2),
    "color": TaskSpec("color", 4),
    "count": TaskSpec("count", 4),
    "shape": TaskSpec("shape", 3),
    "spatial": TaskSpec("spatial", 4),
    "textCorruption": TaskSpec("textCorruption", 5),
}


@dataclass(frozen=True)
class MicroScene:
    """Rendered image (or oracle sample vector) for one condition."""

    condition: Condition
    image: np.ndarray
    render_seed: int

    def __post_init__(self):
        image = np.asarray(self.image, dtype=np.float32)
        image.setflags(write=False)
        object.__setattr__(self, "image", image)

    def flat_x0(self) -> np.ndarray:
        """Model-space vector for the diffusion process.

        Rendered images (H, W, 3) in [0, 1] enter the chain in the standard
        centered convention 2*img - 1; oracle sample vectors are already
        model-space and pass through unchanged.
        """
        flat = self.image.reshape(-1).astype(np.float64)
        if self.image.ndim == 3:
            return 2.0 * flat - 1.0
        return flat


@dataclass(frozen=True)
class ItmExample:
    """One image with its candidate conditions; exactly one is correct."""

    example_id: str
    task: str
    scene: MicroScene
    candidates: tuple
    correct_index: int

    def __post_init__(self):
        spec = TASKS[self.task]
        if len(self.candidates) != spec.num_candidates:
            raise DataError(
                f"{self.task} needs {spec.num_candidates} candidates, "
                f"got {len(self.candidates)}"
            )
        if not 0 <= self.correct_index < len(self.candidates):
            raise DataError("correct_index out of range")
        correct = self.candidates[self.correct_index]
        if correct != self.scene.condition:
            raise DataError("correct candidate must equal the scene condition")
        correct_bytes = correct.embedding().tobytes()
        for i, cand in enumerate(self.candidates):
            if i != self.correct_index and cand.embedding().tobytes() == correct_bytes:
                raise DataError("distractor coincides with the correct condition")

    @property
    def correct_condition(self) -> Condition:
        return self.candidates[self.correct_index]


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

BACKGROUND = 0.35

COLOR_RGB = {
    "red": (0.90, 0.15, 0.15),
    "green": (0.15, 0.90, 0.15),
    "blue": (0.15, 0.15, 0.90),
    "yellow": (0.90, 0.90, 0.15),
}

_SHAPE_MASKS = {
    "square": np.array([[1, 1, 1], [1, 1, 1], [1, 1, 1]], dtype=bool),
    "circle": np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    "triangle": np.array([[0, 1, 0], [1, 1, 1], [1, 1, 1]], dtype=bool),
}

_QUADRANT_ROW_COL = {
    "top-left": (0, 0),
    "top-right": (0, 1),
    "bottom-left": (1, 0),
    "bottom-right": (1, 1),
}

_OPPOSITE = {
    "top-left": "bottom-right",
    "top-right": "bottom-left",
    "bottom-left": "top-right",
    "bottom-right": "top-left",
}


def _paint(canvas, quadrant, cell_ids, offsets, shape, color, size):
    half = size // 2
    cell = half // 2
    qr, qc = _QUADRANT_ROW_COL[quadrant]
    mask = _SHAPE_MASKS[shape]
    rgb = np.asarray(COLOR_RGB[color], dtype=np.float32)
    for cell_id, (dr, dc) in zip(cell_ids, offsets):
        row0 = qr * half + (cell_id // 2) * cell + dr
        col0 = qc * half + (cell_id % 2) * cell + dc
        region = canvas[row0 : row0 + 3, col0 : col0 + 3]
        region[mask] = rgb


def render_scene(c: Condition, render_seed: int, size: int = 16) -> MicroScene:
    """Draw ``count`` instances of the shape in its quadrant, deterministically.

    Each quadrant is split into a 2x2 grid of cells; instances occupy
    distinct cells with a seeded sub-cell offset, which keeps instances
    disconnected (the connected-component count equals ``count``).
    """
    if size < 16 or size % 4 != 0:
        raise ParameterError("image size must be a multiple of 4, at least 16")
    cell = size // 4
    if c.count > 4:
        raise ParameterError(
            f"impossible placement: count {c.count} exceeds the 4 quadrant cells"
        )
    gen = stream(render_seed, DOMAIN_RENDER)
    canvas = np.full((size, size, 3), BACKGROUND, dtype=np.float32)
    cell_ids = gen.permutation(4)[: c.count]
    max_off = cell - 3  # keep a 1px gap to the next cell
    offsets = gen.integers(0, max_off, size=(c.count, 2))
    _paint(canvas, c.position, cell_ids, offsets, c.shape, c.color, size)
    if c.has_second_object:
        cell_id2 = int(gen.integers(0, 4))
        offset2 = gen.integers(0, max_off, size=(1, 2))
        _paint(
            canvas, _OPPOSITE[c.position], [cell_id2], offset2,
            c.shape2, c.color2, size,
        )
    return MicroScene(condition=c, image=canvas, render_seed=render_seed)


# ---------------------------------------------------------------------------
# Candidate synthesis
# ---------------------------------------------------------------------------


def _distractors(task: str, correct: Condition, gen) -> list:
    if task == "color":
        return [correct.replace_attribute("color", v) for v in COLORS if v != correct.color]
    if task == "count":
        return [correct.replace_attribute("count", v) for v in COUNTS if v != correct.count]
    if task == "shape":
        return [correct.replace_attribute("shape", v) for v in SHAPES if v != correct.shape]
    if task == "spatial":
        return [
            correct.replace_attribute("position", v)
            for v in POSITIONS
            if v != correct.position
        ]
    if task == "attributeBinding":
        if not correct.has_second_object:
            raise ParameterError("attributeBinding requires a two-object condition")
        if correct.color2 == correct.color:
            raise ParameterError("attributeBinding objects must differ in color")
        return [correct.swap_object_colors()]
    if task == "textCorruption":
        chosen = []
        seen = {correct.embedding().tobytes()}
        perms = list(itertools.permutations(CANONICAL_TOKEN_ORDER))
        order = gen.permutation(len(perms))
        for idx in order:
            cand = correct.with_token_order(perms[idx])
            key = cand.embedding().tobytes()
            if key in seen:
                continue
            seen.add(key)
            chosen.append(cand)
            if len(chosen) == TASKS[task].num_candidates - 1:
                return chosen
        raise DataError("vocabulary too small for distinct corrupted orders")
    raise ParameterError(f"unknown task {task!r}")


def candidates_for(task: str, correct: Condition, seed: int):
    """Candidate list with the correct condition at a uniform random index."""
    gen = stream(seed, DOMAIN_SUITE, 1)
    distractors = _distractors(task, correct, gen)
    candidates = list(distractors)
    correct_index = int(gen.integers(0, len(distractors) + 1))
    candidates.insert(correct_index, correct)
    return tuple(candidates), correct_index


def sample_condition(task: str, seed: int) -> Condition:
    """Uniform task-appropriate condition.

    Binding examples get a second object with a distinct color; corrupted
    examples start from the canonical token order (the correct caption).
    """
    gen = stream(seed, DOMAIN_SUITE, 0)
    color = COLORS[gen.integers(0, len(COLORS))]
    shape = SHAPES[gen.integers(0, len(SHAPES))]
    count = COUNTS[gen.integers(0, len(COUNTS))]
    position = POSITIONS[gen.integers(0, len(POSITIONS))]
    if task != "attributeBinding":
        return Condition(color, shape, count, position)
    others = [v for v in COLORS if v != color]
    color2 = others[gen.integers(0, len(others))]
    shape2 = SHAPES[gen.integers(0, len(SHAPES))]
    return Condition(color, shape, count, position, color2=color2, shape2=shape2)


def make_itm_example(
    task: str,
    correct: Condition,
    seed: int,
    image_size: int = 16,
    example_id: str | None = None,
) -> ItmExample:
    """Render the scene for ``correct`` and attach its candidate set."""
    render_seed = derive_seed(seed, 0, 0)
    scene = render_scene(correct, render_seed, image_size)
    candidates, correct_index = candidates_for(task, correct, seed)
    return ItmExample(
        example_id=example_id or f"{task}-{seed}",
        task=task,
        scene=scene,
        candidates=candidates,
        correct_index=correct_index,
    )


def build_task_suite(task: str, size: int, seed: int, image_size: int = 16):
    """``size`` examples with uniformly random correct conditions."""
    if size < 1:
        raise ParameterError("size must be >= 1")
    if task not in TASKS:
        raise ParameterError(f"unknown task {task!r}")
    task_salt = 40 + TASK_NAMES.index(task)  # decorrelate same-size candidate draws
    examples = []
    for i in range(size):
        ex_seed = derive_seed(seed, i, task_salt)
        correct = sample_condition(task, ex_seed)
        examples.append(
            make_itm_example(
                task, correct, ex_seed, image_size,
                example_id=f"{task}-s{seed}-{i:05d}",
            )
        )
    return examples


@dataclass(frozen=True)
class WinogroundPair:
    """Two scenes whose conditions differ by one swapped attribute."""

    pair_id: str
    scene_a: MicroScene
    scene_b: MicroScene

    @property
    def condition_a(self) -> Condition:
        return self.scene_a.condition

    @property
    def condition_b(self) -> Condition:
        return self.scene_b.condition


_SWAP_AXES = ("color", "shape", "count", "position")


def contrast_condition(base: Condition, seed: int) -> Condition:
    """Change exactly one attribute of ``base`` to a different value."""
    gen = stream(seed, DOMAIN_SUITE, 2)
    axis = _SWAP_AXES[gen.integers(0, len(_SWAP_AXES))]
    vocab = {"color": COLORS, "shape": SHAPES, "count": COUNTS, "position": POSITIONS}[axis]
    others = [v for v in vocab if v != getattr(base, axis)]
    return base.replace_attribute(axis, others[gen.integers(0, len(others))])


def build_winoground_pairs(size: int, seed: int, image_size: int = 16):
    """Minimal-contrast pairs with rendered images for each side."""
    if size < 1:
        raise ParameterError("size must be >= 1")
    pairs = []
    for i in range(size):
        ex_seed = derive_seed(seed, i, 1)
        cond_a = sample_condition("color", ex_seed)  # uniform single-object
        cond_b = contrast_condition(cond_a, ex_seed)
        scene_a = render_scene(cond_a, derive_seed(ex_seed, 0, 2), image_size)
        scene_b = render_scene(cond_b, derive_seed(ex_seed, 1, 2), image_size)
        pairs.append(
            WinogroundPair(
                pair_id=f"pair-s{seed}-{i:05d}", scene_a=scene_a, scene_b=scene_b
            )
        )
    return pairs


def build_training_set(size: int, seed: int, image_size: int = 16):
    """(image, condition) pairs covering single- and two-object scenes."""
    if size < 1:
        raise ParameterError("size must be >= 1")
    samples = []
    for i in range(size):
        ex_seed = derive_seed(seed, i, 3)
        task = "attributeBinding" if i % 3 == 0 else "color"
        cond = sample_condition(task, ex_seed)
        scene = render_scene(cond, derive_seed(ex_seed, 0, 3), image_size)
        samples.append(ConditionedSample(x0=scene.flat_x0(), condition=cond))
    return samples


def example_x0(example: ItmExample) -> np.ndarray:
    return example.scene.flat_x0()
