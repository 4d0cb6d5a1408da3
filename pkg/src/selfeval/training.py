"""Trainer for the eps-prediction MSE objective.

Plain SGD with momentum on minibatches.  All randomness (shuffles, timestep
draws, noise) comes from counter-based streams keyed by the training seed,
and the dataset is canonically ordered before the first shuffle, so the
final parameters depend only on the dataset contents, the hyperparameters
and the seed -- not on the order samples were supplied in.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .conditions import Condition
from .denoisers import MlpDenoiser
from .errors import NumericalError, ParameterError
from .rng import DOMAIN_TRAINING, stream
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class ConditionedSample:
    """One training point: data vector plus its condition."""

    x0: np.ndarray
    condition: Condition

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=np.float64)
        if x0.ndim != 1:
            raise ParameterError("x0 must be a 1-D vector")
        object.__setattr__(self, "x0", x0)

    def sort_key(self):
        digest = hashlib.sha256(np.ascontiguousarray(self.x0).tobytes()).hexdigest()
        return (self.condition.key(), digest)


@dataclass
class TrainingLog:
    """Per-epoch mean eps-MSE (first entry is the pre-training loss)."""

    epoch_mse: list = field(default_factory=list)

    @property
    def initial_mse(self) -> float:
        return self.epoch_mse[0]

    @property
    def final_mse(self) -> float:
        return self.epoch_mse[-1]


def _batch_loss_and_cache(model, sched, x0s, cond_rows, ts, noise, want_cache):
    sqrt_abar = np.sqrt(sched.alpha_bars[ts - 1])[:, None]
    sqrt_rest = np.sqrt(1.0 - sched.alpha_bars[ts - 1])[:, None]
    x_t = sqrt_abar * x0s + sqrt_rest * noise
    out = model.forward_batch(x_t, ts, cond_rows, want_cache=want_cache)
    if want_cache:
        raw, cache = out
    else:
        raw, cache = out, None
    eps_hat = model.eps_from_output(x_t, ts, raw, sched)
    resid = eps_hat - noise
    loss = float(np.mean(resid * resid))
    return loss, resid, cache


def train_mlp(
    dataset,
    sched: NoiseSchedule,
    epochs: int,
    lr: float,
    seed: int,
    hidden=(256, 256),
    momentum: float = 0.9,
    batch_size: int = 128,
    t_embed_dim: int = 16,
    clip_norm: float = 1.0,
    lr_milestones=(0.6, 0.85),
    lr_decay: float = 0.2,
    model: MlpDenoiser | None = None,
) -> tuple[MlpDenoiser, TrainingLog]:
    """Train an ``MlpDenoiser`` on (x0, condition) pairs.

    Gradients are clipped to ``clip_norm`` (global norm); low-noise
    timesteps demand near-singular gains and produce occasional huge
    gradients that would otherwise blow up plain SGD.  Pass ``model`` to
    resume from existing weights (zero epochs leaves them untouched).
    Returns the trained model and the per-epoch loss log.  Raises
    ``NumericalError`` if the loss stops being finite.
    """
    samples = list(dataset)
    if not samples:
        raise ParameterError("dataset must be non-empty")
    dim = samples[0].x0.size
    if any(s.x0.size != dim for s in samples):
        raise ParameterError("all samples must have the same dimension")
    samples.sort(key=ConditionedSample.sort_key)

    x0s = np.stack([s.x0 for s in samples])
    cond_rows = np.stack([s.condition.embedding() for s in samples]).astype(np.float32)

    if model is None:
        model = MlpDenoiser(dim=dim, hidden=hidden, t_embed_dim=t_embed_dim, seed=seed)
    elif model.dim != dim:
        raise ParameterError("resumed model dimension does not match the dataset")
    params = model.parameters()
    velocity = [np.zeros_like(p) for p in params]
    n = len(samples)
    log = TrainingLog()

    def epoch_draws(epoch, lo, hi):
        gen = stream(seed, DOMAIN_TRAINING, 1 + epoch, lo)
        ts = gen.integers(1, sched.t_count + 1, size=hi - lo)
        noise = gen.standard_normal((hi - lo, dim))
        return ts, noise

    # Pre-training loss on the full (canonically ordered) set.
    ts0, noise0 = epoch_draws(0, 0, n)
    loss0, _, _ = _batch_loss_and_cache(
        model, sched, x0s, cond_rows, ts0, noise0, want_cache=False
    )
    log.epoch_mse.append(loss0)

    boundaries = sorted(int(m * epochs) for m in lr_milestones)
    for epoch in range(epochs):
        epoch_lr = lr * lr_decay ** sum(epoch >= b for b in boundaries)
        order = stream(seed, DOMAIN_TRAINING, 1 + epoch, 1 << 32).permutation(n)
        epoch_losses = []
        for lo in range(0, n, batch_size):
            hi = min(lo + batch_size, n)
            idx = order[lo:hi]
            ts, noise = epoch_draws(1 + epoch, lo, hi)
            loss, resid, cache = _batch_loss_and_cache(
                model, sched, x0s[idx], cond_rows[idx], ts, noise, want_cache=True
            )
            if not np.isfinite(loss):
                raise NumericalError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"batch starting at {lo}"
                )
            epoch_losses.append((hi - lo) * loss)
            d_eps = (2.0 / resid.size) * resid
            d_out = d_eps * model.output_grad_factor(ts, sched)[:, None]
            grads = model.backward_batch(cache, d_out)
            if clip_norm > 0:
                total = np.sqrt(
                    sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads)
                )
                if total > clip_norm:
                    scale = np.float32(clip_norm / total)
                    grads = [g * scale for g in grads]
            for p, v, g in zip(params, velocity, grads):
                v *= momentum
                v -= epoch_lr * g
                p += v
        log.epoch_mse.append(sum(epoch_losses) / n)

    return model, log
