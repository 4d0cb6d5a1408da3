"""Monte-Carlo likelihood estimation and the derived classifier/scorers.

For a data vector x0 and condition c, each trial draws one noise vector,
noises x0 to every timestep with it (x_t = sqrt(abar_t) x0 +
sqrt(1 - abar_t) eps, the forward-marginal form), and accumulates the log
density of the standard-normal prior at x_T plus the log densities of
every reverse transition p(x_{t-1} | anchor_t, c).  Anchors are the
forward latents by default (``forwardAnchored``); ``reverseAnchored``
instead feeds the denoiser latents generated by simulating the reverse
chain from x_T.

Sharing one noise draw across a trial's timesteps keeps consecutive
latents coupled the way the forward chain couples them, which is what
makes estimates comparable across different inputs (scores of two images
under the same condition); per-step independent draws would bury that
comparison in per-image noise.

Per-trial log values are aggregated either by summation (``jensenSum``,
the lower-bound form) or by a numerically stable log-mean-exp
(``logSumExp``, the exact Monte-Carlo mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .conditions import Condition
from .denoisers import Denoiser
from .errors import NumericalError, ParameterError
from .rng import reverse_noise, trial_noise
from .schedule import LOG_2PI, NoiseSchedule, Trajectory

LATENT_MODES = ("forwardAnchored", "reverseAnchored")
AGGREGATIONS = ("jensenSum", "logSumExp")


@dataclass(frozen=True)
class EstimatorConfig:
    """Trial count, chain length, seed and estimator variants."""

    n_trials: int = 10
    t_count: int = 100
    seed: int = 1
    latent_mode: str = "forwardAnchored"
    aggregation: str = "jensenSum"

    def __post_init__(self):
        if self.n_trials < 1:
            raise ParameterError("n_trials must be >= 1")
        if self.t_count < 1:
            raise ParameterError("t_count must be >= 1")
        if self.latent_mode not in LATENT_MODES:
            raise ParameterError(f"latent_mode must be one of {LATENT_MODES}")
        if self.aggregation not in AGGREGATIONS:
            raise ParameterError(f"aggregation must be one of {AGGREGATIONS}")

    def to_json_dict(self) -> dict:
        return {
            "N": self.n_trials,
            "T": self.t_count,
            "seed": self.seed,
            "latentMode": self.latent_mode,
            "aggregation": self.aggregation,
        }


@dataclass(frozen=True)
class LikelihoodEstimate:
    """Aggregated log p(x0 | c) with per-trial diagnostics."""

    log_likelihood: float
    per_trial_logs: np.ndarray
    prior_term_log: float  # mean over trials of log p(x_T)
    seed: int
    config: EstimatorConfig

    def __post_init__(self):
        logs = np.asarray(self.per_trial_logs, dtype=np.float64)
        logs.setflags(write=False)
        object.__setattr__(self, "per_trial_logs", logs)
        if not np.all(np.isfinite(logs)):
            raise NumericalError("per-trial logs must be finite")
        expected = aggregate_trial_logs(logs, self.config.aggregation)
        if self.log_likelihood != expected:
            raise NumericalError("logLikelihood inconsistent with aggregation")


@dataclass(frozen=True)
class Posterior:
    """Per-candidate likelihoods converted to p(c | x0) under a uniform prior."""

    candidate_ids: tuple
    log_likelihoods: np.ndarray
    probabilities: np.ndarray
    argmax_index: int
    estimates: tuple

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=np.float64)
        if np.any(probs < 0) or abs(float(probs.sum()) - 1.0) > 1e-12:
            raise NumericalError("probabilities must be nonnegative and sum to 1")


def aggregate_trial_logs(trial_logs: np.ndarray, aggregation: str) -> float:
    """Combine per-trial log values per the configured mode."""
    logs = np.asarray(trial_logs, dtype=np.float64)
    if aggregation == "jensenSum":
        return float(np.sum(logs))
    if aggregation == "logSumExp":
        m = float(np.max(logs))
        return m + math.log(float(np.mean(np.exp(logs - m))))
    raise ParameterError(f"unknown aggregation {aggregation!r}")


class _TrialSet:
    """Forward trajectories for all trials of one (x0, seed) evaluation.

    Built once and shared across candidate conditions so likelihoods are
    compared under common random numbers.
    """

    def __init__(self, x0, sched, cfg, on_trajectory=None):
        x0 = np.asarray(x0, dtype=np.float64)
        if x0.ndim != 1:
            raise ParameterError("x0 must be a 1-D vector")
        if not np.all(np.isfinite(x0)):
            raise ParameterError("x0 must be finite")
        if cfg.t_count != sched.t_count:
            raise ParameterError(
                f"config T={cfg.t_count} does not match schedule T={sched.t_count}"
            )
        n, t_count, dim = cfg.n_trials, sched.t_count, x0.size
        self.x0 = x0
        self.cfg = cfg
        trial_eps = np.empty((n, dim))
        for trial in range(n):
            trial_eps[trial] = trial_noise(cfg.seed, trial, dim)
        # One draw per trial, broadcast over timesteps (q_sample at t = 1..T).
        noises = np.broadcast_to(trial_eps[:, None, :], (n, t_count, dim))
        sqrt_abar = np.sqrt(sched.alpha_bars)
        sqrt_rest = np.sqrt(1.0 - sched.alpha_bars)
        latents = (
            sqrt_abar[None, :, None] * x0[None, None, :]
            + sqrt_rest[None, :, None] * noises
        )
        if on_trajectory is not None:
            for trial in range(n):
                on_trajectory(
                    trial,
                    Trajectory(
                        latents=latents[trial],
                        noises=noises[trial].copy(),
                        seed=cfg.seed,
                    ),
                )
        self.trial_eps = trial_eps
        self.noises = noises
        self.latents = latents
        # x_{t-1} rows: x0 at t=1, then the forward latents.
        prev = np.empty_like(latents)
        prev[:, 0] = x0
        prev[:, 1:] = latents[:, :-1]
        self.prev_flat = prev.reshape(n * t_count, dim)
        self.latents_flat = latents.reshape(n * t_count, dim)
        self.noises_flat = noises.reshape(n * t_count, dim)
        self.ts_flat = np.tile(np.arange(1, t_count + 1), n)
        terminal = latents[:, -1, :]
        self.prior_logs = -0.5 * (
            dim * LOG_2PI + np.einsum("nd,nd->n", terminal, terminal)
        )
        self.n = n
        self.t_count = t_count
        self.dim = dim


def _reverse_anchors(trial_set, c, model, sched):
    """Simulate the reverse chain from each trial's x_T; anchors[t-1] = xbar_t."""
    n, t_count, dim = trial_set.n, trial_set.t_count, trial_set.dim
    anchors = np.empty((n, t_count, dim))
    for trial in range(n):
        xbar = trial_set.latents[trial, -1]
        for t in range(t_count, 0, -1):
            anchors[trial, t - 1] = xbar
            if t > 1:
                mean, var = model.reverse_params_batch(
                    xbar[None, :], np.asarray([t]), c, sched
                )
                sigma = np.sqrt(np.asarray(var[0], dtype=np.float64))
                z = reverse_noise(trial_set.cfg.seed, trial, t, dim)
                xbar = mean[0] + sigma * z
    return anchors.reshape(n * t_count, dim)


# Fixed scoring block size: keeps cache locality independent of (N, T) and,
# because it never varies, keeps results bit-reproducible at every workload.
CHUNK_ROWS = 512


def _log_terms_block(prev, mean, var, dim):
    """log N(prev; mean, var) per row of one block."""
    diff = prev - mean
    if var.ndim == 1:
        quad = np.einsum("bd,bd->b", diff, diff) / var
        log_det = dim * np.log(var)
    else:
        quad = np.einsum("bd,bd->b", diff, diff / var)
        log_det = np.sum(np.log(var), axis=1)
    return -0.5 * (dim * LOG_2PI + log_det + quad)


def _score_candidate(trial_set, c, model, sched, precomputed=None):
    """Per-trial log values for one candidate under shared trajectories."""
    cfg = trial_set.cfg
    if cfg.latent_mode == "forwardAnchored":
        anchors = trial_set.latents_flat
    else:
        anchors = _reverse_anchors(trial_set, c, model, sched)
        precomputed = None
    n_rows, dim = anchors.shape
    terms_flat = np.empty(n_rows)
    for lo in range(0, n_rows, CHUNK_ROWS):
        block = slice(lo, min(lo + CHUNK_ROWS, n_rows))
        mean, var = model.reverse_params_batch(
            anchors[block],
            trial_set.ts_flat[block],
            c,
            sched,
            None if precomputed is None else precomputed[block],
        )
        mean = np.asarray(mean, dtype=np.float64)
        var = np.asarray(var, dtype=np.float64)
        if np.any(var <= 0.0):
            raise NumericalError("non-positive reverse variance")
        terms_flat[block] = _log_terms_block(
            trial_set.prev_flat[block], mean, var, dim
        )
    terms = terms_flat.reshape(trial_set.n, trial_set.t_count)
    trial_logs = trial_set.prior_logs + terms.sum(axis=1)
    if not np.all(np.isfinite(trial_logs)):
        bad_n, bad_t = np.argwhere(~np.isfinite(terms))[0]
        raise NumericalError(
            f"non-finite density term at trial {int(bad_n)}, timestep {int(bad_t) + 1} "
            f"for candidate {c.key()!r}"
        )
    return trial_logs


def _estimate_from_trial_logs(trial_logs, trial_set):
    cfg = trial_set.cfg
    return LikelihoodEstimate(
        log_likelihood=aggregate_trial_logs(trial_logs, cfg.aggregation),
        per_trial_logs=trial_logs,
        prior_term_log=float(np.mean(trial_set.prior_logs)),
        seed=cfg.seed,
        config=cfg,
    )


def estimate_log_likelihood(
    x0: np.ndarray,
    c: Condition,
    model: Denoiser,
    sched: NoiseSchedule,
    cfg: EstimatorConfig,
    on_trajectory=None,
) -> LikelihoodEstimate:
    """Monte-Carlo estimate of log p(x0 | c)."""
    trial_set = _TrialSet(x0, sched, cfg, on_trajectory)
    precomputed = None
    if cfg.latent_mode == "forwardAnchored":
        precomputed = model.precompute(trial_set.latents_flat, trial_set.ts_flat, sched)
    trial_logs = _score_candidate(trial_set, c, model, sched, precomputed)
    return _estimate_from_trial_logs(trial_logs, trial_set)


def classify(
    x0: np.ndarray,
    candidates,
    model: Denoiser,
    sched: NoiseSchedule,
    cfg: EstimatorConfig,
    on_trajectory=None,
) -> Posterior:
    """Posterior over candidate conditions under a uniform prior.

    All candidates are scored against the same noise trajectories
    (common random numbers); ties break toward the lowest index.
    """
    candidates = list(candidates)
    if not candidates:
        raise ParameterError("candidates must be non-empty")
    trial_set = _TrialSet(x0, sched, cfg, on_trajectory)
    precomputed = None
    if cfg.latent_mode == "forwardAnchored":
        precomputed = model.precompute(trial_set.latents_flat, trial_set.ts_flat, sched)
    estimates = []
    for c in candidates:
        trial_logs = _score_candidate(trial_set, c, model, sched, precomputed)
        estimates.append(_estimate_from_trial_logs(trial_logs, trial_set))
    logliks = np.asarray([e.log_likelihood for e in estimates])
    shifted = np.exp(logliks - np.max(logliks))
    probs = shifted / shifted.sum()
    return Posterior(
        candidate_ids=tuple(c.key() for c in candidates),
        log_likelihoods=logliks,
        probabilities=probs,
        argmax_index=int(np.argmax(logliks)),
        estimates=tuple(estimates),
    )


def elbo_proxy_score(
    x0: np.ndarray,
    c: Condition,
    model: Denoiser,
    sched: NoiseSchedule,
    cfg: EstimatorConfig,
) -> float:
    """Baseline score: negative mean eps-prediction squared error.

    Uses the same (trial, timestep) grid and noise streams as the
    likelihood estimator, so candidate scores share random numbers.
    """
    trial_set = _TrialSet(x0, sched, cfg)
    precomputed = model.precompute(trial_set.latents_flat, trial_set.ts_flat, sched)
    n_rows = trial_set.latents_flat.shape[0]
    sq = np.empty(n_rows)
    for lo in range(0, n_rows, CHUNK_ROWS):
        block = slice(lo, min(lo + CHUNK_ROWS, n_rows))
        eps_hat = model.predict_eps_batch(
            trial_set.latents_flat[block],
            trial_set.ts_flat[block],
            c,
            sched,
            None if precomputed is None else precomputed[block],
        )
        resid = np.asarray(eps_hat, dtype=np.float64) - trial_set.noises_flat[block]
        sq[block] = np.einsum("bd,bd->b", resid, resid)
    if not np.all(np.isfinite(sq)):
        raise NumericalError("non-finite eps residual in elbo_proxy_score")
    return -float(np.mean(sq))


def pair_scores(pair_x, candidates, model, sched, cfg, scorer: str):
    """Scores s(c, x) for one image against each candidate (shared noise)."""
    if scorer == "selfeval":
        trial_set = _TrialSet(pair_x, sched, cfg)
        precomputed = None
        if cfg.latent_mode == "forwardAnchored":
            precomputed = model.precompute(
                trial_set.latents_flat, trial_set.ts_flat, sched
            )
        return [
            aggregate_trial_logs(
                _score_candidate(trial_set, c, model, sched, precomputed),
                cfg.aggregation,
            )
            for c in candidates
        ]
    if scorer == "elbo":
        return [elbo_proxy_score(pair_x, c, model, sched, cfg) for c in candidates]
    raise ParameterError(f"unknown scorer {scorer!r}")


def image_text_scores(
    pairs,
    scorer: str,
    model: Denoiser,
    sched: NoiseSchedule,
    cfg: EstimatorConfig,
) -> dict:
    """Winoground-style paired-contrast accuracies, in percent.

    ``pairs`` yields (x_a, x_b, c_a, c_b, seed_a, seed_b).  A pair counts
    toward the text score iff s(c_a, x_a) > s(c_b, x_a) and
    s(c_b, x_b) > s(c_a, x_b); toward the image score iff
    s(c_a, x_a) > s(c_a, x_b) and s(c_b, x_b) > s(c_b, x_a); and toward the
    group score iff both.  Comparisons are strict, so ties fail.
    """
    pairs = list(pairs)
    if not pairs:
        raise ParameterError("pairs must be non-empty")
    text_ok = image_ok = group_ok = 0
    for x_a, x_b, c_a, c_b, seed_a, seed_b in pairs:
        s_aa, s_ba = pair_scores(
            x_a, [c_a, c_b], model, sched, replace(cfg, seed=seed_a), scorer
        )
        s_ab, s_bb = pair_scores(
            x_b, [c_a, c_b], model, sched, replace(cfg, seed=seed_b), scorer
        )
        text = s_aa > s_ba and s_bb > s_ab
        image = s_aa > s_ab and s_bb > s_ba
        text_ok += text
        image_ok += image
        group_ok += text and image
    n = len(pairs)
    return {
        "imageScore": 100.0 * image_ok / n,
        "textScore": 100.0 * text_ok / n,
        "groupScore": 100.0 * group_ok / n,
    }
