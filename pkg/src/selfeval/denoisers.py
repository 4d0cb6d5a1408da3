"""Conditional denoisers: the reverse-transition family p(x_{t-1} | x_t, c).

Two families are provided:

* ``GaussianClassModel`` -- a closed-form oracle for class-conditional
  Gaussian data.  Its reverse transitions are the exact conditional chain,
  which makes it the ground truth for verifying the likelihood estimator.
* ``MlpDenoiser`` -- a small fully-connected noise predictor trained with
  the standard eps-prediction MSE objective (see ``training``).

Both expose the same batched interface consumed by the estimator:
``reverse_params_batch`` returns the Gaussian (mean, variance) of each
reverse transition and ``predict_eps_batch`` the implied noise estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conditions import EMBEDDING_DIM, Condition
from .errors import DataError, NumericalError, ParameterError
from .rng import DOMAIN_TRAINING, stream
from .schedule import DiagGaussian, NoiseSchedule


@dataclass(frozen=True)
class DenoiserOutput:
    """Reverse-transition parameters for one latent."""

    mean: np.ndarray
    variance: np.ndarray  # scalar array (isotropic) or vector (diagonal)

    def as_gaussian(self) -> DiagGaussian:
        return DiagGaussian(mean=self.mean, variance=self.variance)


def _schedule_coeffs(sched: NoiseSchedule, ts: np.ndarray):
    """Per-row (beta, alpha, abar, abar_prev) for 1-based timesteps ``ts``."""
    ts = np.asarray(ts, dtype=np.int64)
    if ts.size and (ts.min() < 1 or ts.max() > sched.t_count):
        raise ParameterError(f"timesteps outside 1..{sched.t_count}")
    idx = ts - 1
    beta = sched.betas[idx]
    abar = sched.alpha_bars[idx]
    abar_prev = np.where(idx > 0, sched.alpha_bars[np.maximum(idx - 1, 0)], 1.0)
    return beta, 1.0 - beta, abar, abar_prev


class Denoiser:
    """Interface shared by all denoisers.

    Subclasses implement ``predict_eps_batch``; the reverse mean follows from
    the eps reparameterization and the variance is fixed to beta_t (the
    standard upper-bound choice).  Oracles override ``reverse_params_batch``
    with their exact transition parameters.
    """

    dim: int

    def predict_eps_batch(self, x, ts, c, sched, precomputed=None):
        raise NotImplementedError

    def precompute(self, x, ts, sched):
        """Optional per-batch work reusable across candidate conditions."""
        return None

    def reverse_params_batch(self, x, ts, c, sched, precomputed=None):
        eps = self.predict_eps_batch(x, ts, c, sched, precomputed)
        beta, alpha, abar, _ = _schedule_coeffs(sched, ts)
        coeff = beta / np.sqrt(1.0 - abar)
        mean = (x - coeff[:, None] * eps) / np.sqrt(alpha)[:, None]
        return mean, beta


def denoise(
    x_t: np.ndarray, t: int, c: Condition, model: Denoiser, sched: NoiseSchedule
) -> DenoiserOutput:
    """Reverse-transition parameters mu, Sigma for a single latent."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.ndim != 1:
        raise ParameterError("x_t must be a 1-D vector")
    sched._check_t(t)
    mean, var = model.reverse_params_batch(
        x_t[None, :], np.asarray([t]), c, sched
    )
    variance = np.asarray(var[0], dtype=np.float64)
    if np.any(variance <= 0.0):
        raise NumericalError(
            f"degenerate reverse variance at t={t}; class variance too small"
        )
    return DenoiserOutput(mean=np.asarray(mean[0], dtype=np.float64), variance=variance)


# ---------------------------------------------------------------------------
# Analytic oracle for Gaussian class-conditional data
# ---------------------------------------------------------------------------


class GaussianClassModel(Denoiser):
    """Exact denoiser for x0 | c ~ N(m_c, s_c^2 I).

    ``class_var`` is the shared variance; ``class_vars`` optionally overrides
    it per condition with a scalar or a per-dimension vector (diagonal), in
    which case the reverse variance is diagonal as well.
    """

    def __init__(self, class_means, class_var=1.0, class_vars=None):
        self.class_means = {}
        dim = None
        for key, mean in class_means.items():
            mean = np.asarray(mean, dtype=np.float64)
            if mean.ndim != 1:
                raise ParameterError(f"class mean {key!r} must be a vector")
            if dim is None:
                dim = mean.size
            elif mean.size != dim:
                raise ParameterError("all class means must share one dimension")
            self.class_means[key] = mean
        if dim is None:
            raise ParameterError("at least one class is required")
        self.dim = dim
        self.class_var = self._check_var(class_var)
        self.class_vars = {}
        for key, var in (class_vars or {}).items():
            if key not in self.class_means:
                raise ParameterError(f"variance override for unknown class {key!r}")
            self.class_vars[key] = self._check_var(var)

    def _check_var(self, var):
        var = np.asarray(var, dtype=np.float64)
        if var.ndim not in (0, 1):
            raise ParameterError("class variance must be scalar or vector")
        if var.ndim == 1 and var.size != self.dim:
            raise ParameterError("diagonal class variance must match dimension")
        if np.any(var < 0.0):
            raise ParameterError("class variance must be nonnegative")
        return var

    def mean_for(self, c: Condition) -> np.ndarray:
        key = c.key()
        if key not in self.class_means:
            raise DataError(f"unknown condition id {key!r}")
        return self.class_means[key]

    def var_for(self, c: Condition):
        return self.class_vars.get(c.key(), self.class_var)

    def posterior_x0_batch(self, x, ts, c, sched):
        """E[x0 | x_t, c] for each row of x."""
        m = self.mean_for(c)
        s2 = self.var_for(c)
        _, _, abar, _ = _schedule_coeffs(sched, ts)
        abar_col = abar[:, None]
        # coef = sqrt(abar) s^2 / (abar s^2 + 1 - abar), per dimension if diagonal
        coef = np.sqrt(abar_col) * s2 / (abar_col * s2 + 1.0 - abar_col)
        return m + coef * (x - np.sqrt(abar_col) * m)

    def reverse_params_batch(self, x, ts, c, sched, precomputed=None):
        s2 = self.var_for(c)
        beta, alpha, abar, abar_prev = _schedule_coeffs(sched, ts)
        x0_hat = self.posterior_x0_batch(x, ts, c, sched)
        one_minus = 1.0 - abar
        c1 = np.sqrt(abar_prev) * beta / one_minus
        c2 = np.sqrt(alpha) * (1.0 - abar_prev) / one_minus
        mean = c1[:, None] * x0_hat + c2[:, None] * x
        if s2.ndim == 0:
            var = beta * (abar_prev * float(s2) + 1.0 - abar_prev) / (
                abar * float(s2) + one_minus
            )
        else:
            var = (
                beta[:, None]
                * (abar_prev[:, None] * s2 + (1.0 - abar_prev)[:, None])
                / (abar[:, None] * s2 + one_minus[:, None])
            )
        return mean, var

    def predict_eps_batch(self, x, ts, c, sched, precomputed=None):
        _, _, abar, _ = _schedule_coeffs(sched, ts)
        x0_hat = self.posterior_x0_batch(x, ts, c, sched)
        abar_col = abar[:, None]
        return (x - np.sqrt(abar_col) * x0_hat) / np.sqrt(1.0 - abar_col)


def analytic_posterior_x0(
    x_t: np.ndarray,
    t: int,
    c: Condition,
    gm: GaussianClassModel,
    sched: NoiseSchedule,
) -> np.ndarray:
    """Closed-form E[x0 | x_t, c] = m + sqrt(abar) s^2 / (abar s^2 + 1 - abar) (x_t - sqrt(abar) m)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    sched._check_t(t)
    return gm.posterior_x0_batch(x_t[None, :], np.asarray([t]), c, sched)[0]


# ---------------------------------------------------------------------------
# Trainable MLP noise predictor
# ---------------------------------------------------------------------------


def time_embedding(ts, dim: int, dtype=np.float32) -> np.ndarray:
    """Sinusoidal features of the integer timestep, shape (B, dim)."""
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half, dtype=np.float64) / half)
    args = np.asarray(ts, dtype=np.float64)[:, None] * freqs[None, :]
    return np.concatenate([np.sin(args), np.cos(args)], axis=1).astype(dtype)


class MlpDenoiser(Denoiser):
    """Fully-connected noise predictor conditioned by concatenation.

    Input is [x_t | sinusoidal t features | condition embedding]; the first
    layer is stored as three blocks so the x_t projection can be shared
    across candidate conditions during evaluation.  Forward passes are pure:
    a row's output depends only on that row's inputs.

    With ``parameterization="x0"`` (default) the network predicts the clean
    input and eps_hat = (x_t - sqrt(abar_t) x0_hat) / sqrt(1 - abar_t) is
    derived analytically.  Direct eps prediction contains a full-rank
    near-identity component that a narrow hidden layer cannot represent;
    x0 lives on the low-dimensional data manifold, which is what a
    bottleneck can learn.  ``parameterization="eps"`` keeps the raw output.
    """

    def __init__(self, dim, hidden=(256, 256), t_embed_dim=16, seed=0,
                 dtype=np.float32, cond_dim=EMBEDDING_DIM,
                 parameterization="x0"):
        if len(hidden) < 1:
            raise ParameterError("need at least one hidden layer")
        if parameterization not in ("x0", "eps"):
            raise ParameterError("parameterization must be 'x0' or 'eps'")
        self.parameterization = parameterization
        self.dim = int(dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.t_embed_dim = int(t_embed_dim)
        self.cond_dim = int(cond_dim)
        self.dtype = np.dtype(dtype)
        self.seed = int(seed)
        h0 = self.hidden[0]
        gen = stream(seed, DOMAIN_TRAINING, 0, 0)
        in_dim = self.dim + self.t_embed_dim + self.cond_dim

        def init(rows, cols, fan_in):
            w = gen.standard_normal((rows, cols)) * math.sqrt(2.0 / fan_in)
            return w.astype(self.dtype)

        self.w0x = init(self.dim, h0, in_dim)
        self.w0t = init(self.t_embed_dim, h0, in_dim)
        self.w0c = init(self.cond_dim, h0, in_dim)
        self.b0 = np.zeros(h0, dtype=self.dtype)
        self.ws = []
        self.bs = []
        prev = h0
        for h in self.hidden[1:]:
            self.ws.append(init(prev, h, prev))
            self.bs.append(np.zeros(h, dtype=self.dtype))
            prev = h
        self.w_out = init(prev, self.dim, prev)
        self.b_out = np.zeros(self.dim, dtype=self.dtype)

    def parameters(self):
        """Canonical parameter list (checkpoint and optimizer order)."""
        params = [self.w0x, self.w0t, self.w0c, self.b0]
        for w, b in zip(self.ws, self.bs):
            params.extend([w, b])
        params.extend([self.w_out, self.b_out])
        return params

    def set_parameters(self, params):
        own = self.parameters()
        if len(params) != len(own):
            raise DataError("parameter count mismatch")
        for dst, src in zip(own, params):
            if dst.shape != src.shape:
                raise DataError("parameter shape mismatch")
            dst[...] = src.astype(self.dtype)

    def arch_json(self) -> dict:
        return {
            "dim": self.dim,
            "hidden": list(self.hidden),
            "tEmbedDim": self.t_embed_dim,
            "condDim": self.cond_dim,
            "activation": "relu",
            "parameterization": self.parameterization,
            "initSeed": self.seed,
        }

    # -- forward ------------------------------------------------------------

    def precompute(self, x, ts, sched):
        """Candidate-independent first-layer part: x@W0x + temb@W0t + b0."""
        x32 = np.ascontiguousarray(x, dtype=self.dtype)
        temb = time_embedding(ts, self.t_embed_dim, self.dtype)
        return (x32 @ self.w0x + temb @ self.w0t) + self.b0

    def _forward_from_base(self, base, cond_rows, want_cache=False):
        cpart = np.ascontiguousarray(cond_rows, dtype=self.dtype) @ self.w0c
        z = base + cpart
        cache = {"zs": [z]} if want_cache else None
        a = np.maximum(z, 0.0)
        if want_cache:
            cache["as"] = [a]
        for w, b in zip(self.ws, self.bs):
            z = a @ w + b
            a = np.maximum(z, 0.0)
            if want_cache:
                cache["zs"].append(z)
                cache["as"].append(a)
        out = a @ self.w_out + self.b_out
        return (out, cache) if want_cache else out

    def forward_batch(self, x, ts, cond_rows, sched=None, want_cache=False):
        """eps_hat for a batch; ``cond_rows`` is (B, E) or a single (E,) row."""
        base = self.precompute(x, ts, sched)
        cond_rows = np.asarray(cond_rows, dtype=self.dtype)
        if cond_rows.ndim == 1:
            cond_rows = cond_rows[None, :]
        out = self._forward_from_base(base, cond_rows, want_cache)
        if want_cache:
            out, cache = out
            cache["x"] = np.ascontiguousarray(x, dtype=self.dtype)
            cache["temb"] = time_embedding(ts, self.t_embed_dim, self.dtype)
            cache["cond"] = cond_rows
            return out, cache
        return out

    def eps_from_output(self, x, ts, output, sched):
        """Noise estimate implied by the raw network output."""
        out = np.asarray(output, dtype=np.float64)
        if self.parameterization == "eps":
            return out
        _, _, abar, _ = _schedule_coeffs(sched, ts)
        x = np.asarray(x, dtype=np.float64)
        return (x - np.sqrt(abar)[:, None] * out) / np.sqrt(1.0 - abar)[:, None]

    def output_grad_factor(self, ts, sched):
        """d(eps_hat)/d(output) per row, used by the trainer's chain rule."""
        if self.parameterization == "eps":
            return np.ones(np.asarray(ts).shape[0])
        _, _, abar, _ = _schedule_coeffs(sched, ts)
        return -np.sqrt(abar) / np.sqrt(1.0 - abar)

    def predict_eps_batch(self, x, ts, c, sched, precomputed=None):
        base = self.precompute(x, ts, sched) if precomputed is None else precomputed
        cond = c.embedding().astype(self.dtype)[None, :]
        out = self._forward_from_base(base, cond)
        return self.eps_from_output(x, ts, out, sched)

    # -- backward -----------------------------------------------------------

    def backward_batch(self, cache, d_out):
        """Gradients of the canonical parameters given dLoss/d(eps_hat)."""
        d_out = d_out.astype(self.dtype)
        grads_rev = []
        a_list = cache["as"]
        z_list = cache["zs"]
        d_w_out = a_list[-1].T @ d_out
        d_b_out = d_out.sum(axis=0)
        grads_rev.extend([d_b_out, d_w_out])
        da = d_out @ self.w_out.T
        for i in range(len(self.ws) - 1, -1, -1):
            dz = da * (z_list[i + 1] > 0)
            grads_rev.append(dz.sum(axis=0))
            grads_rev.append(a_list[i].T @ dz)
            da = dz @ self.ws[i].T
        dz0 = da * (z_list[0] > 0)
        d_b0 = dz0.sum(axis=0)
        d_w0c = cache["cond"].T @ dz0
        d_w0t = cache["temb"].T @ dz0
        d_w0x = cache["x"].T @ dz0
        grads_rev.extend([d_b0, d_w0c, d_w0t, d_w0x])
        return list(reversed(grads_rev))


# ---------------------------------------------------------------------------
# Degenerate denoisers used for calibration checks
# ---------------------------------------------------------------------------


class ZeroEpsDenoiser(Denoiser):
    """Predicts eps = 0 and ignores the condition entirely."""

    def __init__(self, dim):
        self.dim = int(dim)

    def predict_eps_batch(self, x, ts, c, sched, precomputed=None):
        return np.zeros_like(np.asarray(x, dtype=np.float64))


class ConditionBlindDenoiser(Denoiser):
    """Wraps a denoiser and feeds it a fixed condition regardless of input."""

    def __init__(self, inner: Denoiser, fixed_condition: Condition):
        self.inner = inner
        self.fixed_condition = fixed_condition
        self.dim = inner.dim

    def precompute(self, x, ts, sched):
        return self.inner.precompute(x, ts, sched)

    def predict_eps_batch(self, x, ts, c, sched, precomputed=None):
        return self.inner.predict_eps_batch(
            x, ts, self.fixed_condition, sched, precomputed
        )

    def reverse_params_batch(self, x, ts, c, sched, precomputed=None):
        return self.inner.reverse_params_batch(
            x, ts, self.fixed_condition, sched, precomputed
        )
