"""Gaussian-oracle worlds: closed-form ground truth for the estimator.

A ``GaussianWorld`` maps every condition embedding through a fixed
orthogonal projection to a class mean, so conditions differing in any
attribute (or token order) sit at a known, uniform distance.  Data are
exact class samples and the matching ``GaussianClassModel`` is the exact
denoiser, which makes Bayes-optimal behaviour computable in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .benchmark import (
    MicroScene,
    TASKS,
    WinogroundPair,
    candidates_for,
    contrast_condition,
    sample_condition,
)
from .conditions import COLORS, EMBEDDING_DIM, Condition
from .denoisers import GaussianClassModel
from .errors import ParameterError
from .rng import DOMAIN_SAMPLE, derive_seed, stream
from .benchmark import ItmExample


@dataclass(frozen=True)
class GaussianWorld:
    """Deterministic embedding-to-mean map plus a shared class variance."""

    projection: np.ndarray  # (dim, EMBEDDING_DIM), orthogonal columns * scale
    class_var: float
    seed: int

    @property
    def dim(self) -> int:
        return int(self.projection.shape[0])

    def mean_for(self, c: Condition) -> np.ndarray:
        return self.projection @ c.embedding()

    def sample_x0(self, c: Condition, sample_seed: int) -> np.ndarray:
        gen = stream(sample_seed, DOMAIN_SAMPLE, 1)
        return self.mean_for(c) + np.sqrt(self.class_var) * gen.standard_normal(self.dim)

    def class_model(self, conditions) -> GaussianClassModel:
        """Exact denoiser covering the given conditions."""
        means = {}
        for c in conditions:
            means.setdefault(c.key(), self.mean_for(c))
        return GaussianClassModel(means, class_var=self.class_var)


def build_gaussian_world(
    dim: int = 24, scale: float = 6.0, class_var: float = 1.0, seed: int = 0
) -> GaussianWorld:
    """Orthogonal projection world: any one-hot flip moves the mean by
    scale * sqrt(2), i.e. well-separated classes for scale >> sqrt(class_var)."""
    if dim < EMBEDDING_DIM:
        raise ParameterError(f"dim must be >= {EMBEDDING_DIM} to embed all tokens")
    gen = stream(seed, DOMAIN_SAMPLE, 0)
    a = gen.standard_normal((dim, EMBEDDING_DIM))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # fix QR sign ambiguity for determinism
    return GaussianWorld(projection=scale * q, class_var=class_var, seed=seed)


def build_gaussian_task_suite(task: str, size: int, seed: int, world: GaussianWorld):
    """Task suite whose 'images' are exact class samples from the world.

    Returns (examples, model) where the model covers every candidate that
    appears in the suite.
    """
    if task not in TASKS:
        raise ParameterError(f"unknown task {task!r}")
    if size < 1:
        raise ParameterError("size must be >= 1")
    task_salt = 60 + sorted(TASKS).index(task)  # decorrelate same-size candidate draws
    examples = []
    all_conditions = []
    for i in range(size):
        ex_seed = derive_seed(seed, i, task_salt)
        correct = sample_condition(task, ex_seed)
        candidates, correct_index = candidates_for(task, correct, ex_seed)
        sample_seed = derive_seed(ex_seed, 0, 11)
        scene = MicroScene(
            condition=correct,
            image=world.sample_x0(correct, sample_seed).astype(np.float32),
            render_seed=sample_seed,
        )
        examples.append(
            ItmExample(
                example_id=f"{task}-g{seed}-{i:05d}",
                task=task,
                scene=scene,
                candidates=candidates,
                correct_index=correct_index,
            )
        )
        all_conditions.extend(candidates)
    return examples, world.class_model(all_conditions)


def build_gaussian_pairs(size: int, seed: int, world: GaussianWorld):
    """Winoground-style swap pairs with exact class samples as images."""
    if size < 1:
        raise ParameterError("size must be >= 1")
    pairs = []
    conditions = []
    for i in range(size):
        ex_seed = derive_seed(seed, i, 12)
        cond_a = sample_condition("color", ex_seed)
        cond_b = contrast_condition(cond_a, ex_seed)
        scene_a = MicroScene(
            condition=cond_a,
            image=world.sample_x0(cond_a, derive_seed(ex_seed, 0, 13)).astype(np.float32),
            render_seed=derive_seed(ex_seed, 0, 13),
        )
        scene_b = MicroScene(
            condition=cond_b,
            image=world.sample_x0(cond_b, derive_seed(ex_seed, 1, 13)).astype(np.float32),
            render_seed=derive_seed(ex_seed, 1, 13),
        )
        pairs.append(
            WinogroundPair(
                pair_id=f"gpair-s{seed}-{i:05d}", scene_a=scene_a, scene_b=scene_b
            )
        )
        conditions.extend([cond_a, cond_b])
    return pairs, world.class_model(conditions)


def bayes_square_fixture(separation: float = 6.0, class_var: float = 1.0):
    """Four classes at the corners of a square in D=2.

    The side length is ``separation`` standard deviations, matching the
    well-separated regime used for Bayes-agreement checks.
    """
    side = separation * np.sqrt(class_var)
    conditions = [
        Condition(color, "square", 1, "top-left") for color in COLORS
    ]
    corners = [(0.0, 0.0), (side, 0.0), (0.0, side), (side, side)]
    means = {c.key(): np.asarray(m) for c, m in zip(conditions, corners)}
    return conditions, GaussianClassModel(means, class_var=class_var)


def exact_bayes_index(x0, conditions, model: GaussianClassModel) -> int:
    """argmax_c log N(x0; m_c, s_c^2 I) under a uniform prior."""
    x0 = np.asarray(x0, dtype=np.float64)
    best_idx, best_val = 0, -np.inf
    for i, c in enumerate(conditions):
        m = model.mean_for(c)
        s2 = np.broadcast_to(model.var_for(c), x0.shape)
        diff = x0 - m
        val = -0.5 * float(np.sum(diff * diff / s2) + np.sum(np.log(s2)))
        if val > best_val:
            best_idx, best_val = i, val
    return best_idx


def scale_mismatch_fixture(
    n_pairs: int,
    seed: int,
    pattern_dims: int = 16,
    energy_dims: int = 48,
    pattern_var: float = 1e-3,
    pattern_mean: float = 0.10,
    energy_var: float = 1.0,
    energy_scale: float = 3.0,
):
    """Two worlds at different energy scales (x and 3x) with matched denoisers.

    Conditions differ in low-variance "pattern" dimensions (where the
    caption-matching signal lives) while the second world carries
    ``energy_scale``-times larger standard deviation on many "energy"
    dimensions.  Per-image eps-prediction error is then dominated by the
    image's own energy scale, which breaks cross-image comparisons for the
    eps-MSE proxy; exact transition densities normalise per dimension and
    keep them comparable.
    """
    if n_pairs < 1:
        raise ParameterError("n_pairs must be >= 1")
    dim = pattern_dims + energy_dims
    cond_a = Condition("red", "square", 1, "top-left")
    cond_b = Condition("blue", "square", 3, "top-left")
    mean_a = np.concatenate([
        np.full(pattern_dims, pattern_mean), np.zeros(energy_dims)
    ])
    mean_b = np.concatenate([
        np.full(pattern_dims, -pattern_mean), np.zeros(energy_dims)
    ])
    var_a = np.concatenate([
        np.full(pattern_dims, pattern_var), np.full(energy_dims, energy_var)
    ])
    var_b = np.concatenate([
        np.full(pattern_dims, pattern_var),
        np.full(energy_dims, energy_var * energy_scale**2),
    ])
    model = GaussianClassModel(
        {cond_a.key(): mean_a, cond_b.key(): mean_b},
        class_var=1.0,
        class_vars={cond_a.key(): var_a, cond_b.key(): var_b},
    )
    pairs = []
    for i in range(n_pairs):
        pair_seed = derive_seed(seed, i, 14)
        gen_a = stream(derive_seed(pair_seed, 0, 15), DOMAIN_SAMPLE, 1)
        gen_b = stream(derive_seed(pair_seed, 1, 15), DOMAIN_SAMPLE, 1)
        x_a = mean_a + np.sqrt(var_a) * gen_a.standard_normal(dim)
        x_b = mean_b + np.sqrt(var_b) * gen_b.standard_normal(dim)
        scene_a = MicroScene(cond_a, x_a.astype(np.float32), derive_seed(pair_seed, 0, 15))
        scene_b = MicroScene(cond_b, x_b.astype(np.float32), derive_seed(pair_seed, 1, 15))
        pairs.append(
            WinogroundPair(
                pair_id=f"scale-s{seed}-{i:05d}", scene_a=scene_a, scene_b=scene_b
            )
        )
    return pairs, model
