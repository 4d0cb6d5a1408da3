"""Noise schedules, the forward (noising) process, and Gaussian log densities.

The forward process corrupts a data vector x0 over T timesteps,

    q(x_t | x_{t-1}) = N(x_t; sqrt(1 - beta_t) x_{t-1}, beta_t I),

which has the closed-form marginal x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
with abar_t = prod_{s<=t} (1 - beta_s).  Everything downstream (denoisers,
the likelihood estimator) works in terms of (beta_t, abar_t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ParameterError
from .rng import trajectory_noise

LOG_2PI = math.log(2.0 * math.pi)

# abar_T below this is treated as "terminal state is essentially pure noise".
TERMINAL_NOISE_THRESHOLD = 0.05


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step noise strengths and their cumulative signal-retention products.

    ``betas[t-1]`` is the noise added at timestep t (1-based); ``alpha_bars``
    holds the running products prod(1 - beta).  Immutable and safe to share
    across workers.
    """

    kind: str
    betas: np.ndarray
    beta_min: float
    beta_max: float
    alpha_bars: np.ndarray = field(init=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ParameterError("betas must be a non-empty 1-D vector")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ParameterError("betas must lie strictly in (0, 1)")
        betas.setflags(write=False)
        object.__setattr__(self, "betas", betas)
        alpha_bars = np.cumprod(1.0 - betas)
        alpha_bars.setflags(write=False)
        object.__setattr__(self, "alpha_bars", alpha_bars)

    @property
    def t_count(self) -> int:
        return int(self.betas.size)

    @property
    def terminal_alpha_bar(self) -> float:
        return float(self.alpha_bars[-1])

    @property
    def terminal_is_noise(self) -> bool:
        """Whether x_T retains essentially no signal (abar_T < 0.05)."""
        return self.terminal_alpha_bar < TERMINAL_NOISE_THRESHOLD

    def beta(self, t: int) -> float:
        self._check_t(t)
        return float(self.betas[t - 1])

    def alpha_bar(self, t: int) -> float:
        """abar_t for t in 1..T; abar_0 == 1 by convention."""
        if t == 0:
            return 1.0
        self._check_t(t)
        return float(self.alpha_bars[t - 1])

    def _check_t(self, t: int) -> None:
        if not 1 <= t <= self.t_count:
            raise ParameterError(f"timestep {t} outside 1..{self.t_count}")

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "T": self.t_count,
            "betaMin": self.beta_min,
            "betaMax": self.beta_max,
            "betas": [float(b) for b in self.betas],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "NoiseSchedule":
        sched = cls(
            kind=obj["kind"],
            betas=np.asarray(obj["betas"], dtype=np.float64),
            beta_min=float(obj["betaMin"]),
            beta_max=float(obj["betaMax"]),
        )
        if sched.t_count != int(obj["T"]):
            raise ParameterError("schedule T does not match betas length")
        return sched


def build_schedule(
    kind: str = "linear",
    t_count: int = 100,
    beta_min: float = 1e-4,
    beta_max: float = 0.02,
) -> NoiseSchedule:
    """Construct a noise schedule.

    ``linear`` interpolates beta evenly from beta_min to beta_max; ``cosine``
    follows the squared-cosine signal curve with betas clipped into
    [beta_min, beta_max].
    """
    if t_count < 1:
        raise ParameterError(f"t_count must be >= 1, got {t_count}")
    if not 0.0 < beta_min <= beta_max < 1.0:
        raise ParameterError(
            f"need 0 < beta_min <= beta_max < 1, got ({beta_min}, {beta_max})"
        )
    if kind == "linear":
        betas = np.linspace(beta_min, beta_max, t_count, dtype=np.float64)
    elif kind == "cosine":
        s = 0.008
        steps = np.arange(t_count + 1, dtype=np.float64) / t_count
        f = np.cos((steps + s) / (1.0 + s) * math.pi / 2.0) ** 2
        betas = np.clip(1.0 - f[1:] / f[:-1], beta_min, beta_max)
    else:
        raise ParameterError(f"unknown schedule kind {kind!r}")
    return NoiseSchedule(kind=kind, betas=betas, beta_min=beta_min, beta_max=beta_max)


@dataclass(frozen=True)
class DiagGaussian:
    """Gaussian with isotropic (scalar) or diagonal (vector) variance."""

    mean: np.ndarray
    variance: np.ndarray  # scalar array or vector matching mean

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        var = np.asarray(self.variance, dtype=np.float64)
        if mean.ndim != 1:
            raise ParameterError("mean must be a 1-D vector")
        if var.ndim not in (0, 1):
            raise ParameterError("variance must be a scalar or 1-D vector")
        if var.ndim == 1 and var.shape != mean.shape:
            raise ParameterError("diagonal variance must match mean dimension")
        if np.any(var <= 0.0):
            raise ParameterError("variance components must be > 0")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)

    @property
    def dim(self) -> int:
        return int(self.mean.size)


def gaussian_log_pdf(x: np.ndarray, g: DiagGaussian) -> float:
    """log N(x; g.mean, diag(g.variance)).

    Evaluated as -0.5 * [D log(2 pi) + sum(log var_i) + sum((x_i - mu_i)^2 / var_i)].
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != g.mean.shape:
        raise ParameterError(
            f"dimension mismatch: x has shape {x.shape}, mean {g.mean.shape}"
        )
    dim = g.dim
    if g.variance.ndim == 0:
        log_det = dim * math.log(float(g.variance))
        quad = float(np.dot(x - g.mean, x - g.mean)) / float(g.variance)
    else:
        log_det = float(np.sum(np.log(g.variance)))
        diff = x - g.mean
        quad = float(np.sum(diff * diff / g.variance))
    out = -0.5 * (dim * LOG_2PI + log_det + quad)
    if not math.isfinite(out):
        raise NumericalError("gaussian_log_pdf produced a non-finite value")
    return out


def q_sample(
    x0: np.ndarray, t: int, noise: np.ndarray, sched: NoiseSchedule
) -> np.ndarray:
    """Forward-marginal draw x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise."""
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != x0.shape:
        raise ParameterError("noise must have the same shape as x0")
    sched._check_t(t)
    abar = sched.alpha_bar(t)
    return math.sqrt(abar) * x0 + math.sqrt(1.0 - abar) * noise


@dataclass(frozen=True)
class Trajectory:
    """Forward latents x_1..x_T and the noise draws that produced them.

    ``latents[t-1]`` is x_t.  Bit-exactly reproducible from
    (x0, schedule, seed, trial).
    """

    latents: np.ndarray  # (T, D)
    noises: np.ndarray  # (T, D)
    seed: int

    def __post_init__(self):
        if self.latents.shape != self.noises.shape:
            raise ParameterError("latents and noises must have equal shapes")

    @property
    def t_count(self) -> int:
        return int(self.latents.shape[0])

    def latent(self, t: int) -> np.ndarray:
        return self.latents[t - 1]


def forward_trajectory(
    x0: np.ndarray, sched: NoiseSchedule, seed: int, trial: int = 0
) -> Trajectory:
    """Noise x0 through all T timesteps with counter-based draws.

    The noise block is keyed by (seed, trial); timestep t consumes row t-1.
    Pure function of its arguments: any two calls agree bit-for-bit.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.ndim != 1:
        raise ParameterError("x0 must be a 1-D vector")
    t_count = sched.t_count
    noises = trajectory_noise(seed, trial, t_count, x0.size)
    sqrt_abar = np.sqrt(sched.alpha_bars)
    sqrt_one_minus = np.sqrt(1.0 - sched.alpha_bars)
    latents = sqrt_abar[:, None] * x0[None, :] + sqrt_one_minus[:, None] * noises
    return Trajectory(latents=latents, noises=noises, seed=seed)
