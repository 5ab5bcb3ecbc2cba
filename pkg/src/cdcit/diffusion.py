"""Conditional score models: denoising training and reverse-SDE sampling.

The forward noising process is the variance-preserving OU diffusion whose
marginal at time t is exp(-t/2) x0 + sqrt(1 - exp(-t)) eps. A ReLU network
s(x, z, t) (inputs concatenated in that order) is fit by full-batch Adam on
the summed denoising score-matching loss, then samples are drawn by
integrating the approximate reverse SDE with K Euler-Maruyama steps on the
grid t_k = k (T - t_min)/K, evaluating the score at time T - t_k.

Per-draw randomness is keyed: row i of a batch uses the stream
(key, i) and draws its start point first, then its K step noises. This
makes sampling independent of how draws are scheduled across workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .dataset import Dataset
from .errors import DomainError, InputError, NumericError, ShapeError
from .seeding import Seed, rng_for, seed_key

TIME_DRAW_MODES = ("per-sample", "shared")


@dataclass(frozen=True)
class DiffusionConfig:
    terminal_time: float = 10.0
    t_min: float = 0.01
    sampler_steps: int = 1000
    epochs: int = 1500
    learning_rate: float = 0.01
    hidden_widths: tuple[int, ...] = (128, 128, 128)
    time_draw_mode: str = "per-sample"

    def __post_init__(self):
        if not (0.0 < self.t_min < self.terminal_time):
            raise DomainError(f"need 0 < t_min < T, got t_min={self.t_min} T={self.terminal_time}")
        if self.sampler_steps < 1:
            raise DomainError(f"sampler_steps must be >= 1, got {self.sampler_steps}")
        # epochs == 0 is allowed (untrained model, used by degenerate-case tests)
        if self.epochs < 0:
            raise DomainError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0:
            raise DomainError(f"learning_rate must be positive, got {self.learning_rate}")
        if not self.hidden_widths or any(w < 1 for w in self.hidden_widths):
            raise DomainError(f"hidden_widths must be positive, got {self.hidden_widths}")
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.time_draw_mode not in TIME_DRAW_MODES:
            raise InputError(f"time_draw_mode must be one of {TIME_DRAW_MODES}")


@dataclass(eq=False)
class ScoreModel:
    """Trained conditional score network plus its diffusion schedule."""

    network: nn.DenseNetwork
    d_x: int
    d_z: int
    schedule: DiffusionConfig

    def __post_init__(self):
        want_in = self.d_x + self.d_z + 1
        if self.network.d_in != want_in:
            raise ShapeError(f"network input width {self.network.d_in} != d_x+d_z+1 = {want_in}")
        if self.network.d_out != self.d_x:
            raise ShapeError(f"network output width {self.network.d_out} != d_x = {self.d_x}")

    def score(self, x: np.ndarray, z: np.ndarray, t: float) -> np.ndarray:
        """Evaluate s(x, z, t) on a batch of rows at a shared time."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        if z.shape[0] == 1 and x.shape[0] > 1:
            z = np.broadcast_to(z, (x.shape[0], z.shape[1]))
        t_col = np.full((x.shape[0], 1), float(t))
        return nn.forward(self.network, np.concatenate([x, z, t_col], axis=1))


def forward_marginal(x0: np.ndarray, t, noise: np.ndarray) -> np.ndarray:
    """Closed-form OU marginal: exp(-t/2) x0 + sqrt(1 - exp(-t)) noise."""
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise DomainError("diffusion time must be non-negative")
    if x0.ndim == 2 and t_arr.ndim == 1:
        t_arr = t_arr[:, None]
    return np.exp(-t_arr / 2.0) * x0 + np.sqrt(1.0 - np.exp(-t_arr)) * noise


def score_matching_loss(model: ScoreModel, x0: np.ndarray, z: np.ndarray,
                        times: np.ndarray, noises: np.ndarray):
    """Summed denoising loss and its exact parameter gradients.

    Per sample: || s(X(t), z, t) + (X(t) - exp(-t/2) X(0)) / (1 - exp(-t)) ||^2
    with X(t) built from the closed-form marginal and the given noise.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    noises = np.atleast_2d(np.asarray(noises, dtype=np.float64))
    t = np.broadcast_to(np.asarray(times, dtype=np.float64), (x0.shape[0],)).astype(np.float64)
    if np.any(t < model.schedule.t_min):
        raise DomainError(
            f"drawn time below t_min={model.schedule.t_min}: min t = {t.min()}"
        )
    x_t = forward_marginal(x0, t, noises)
    decay = np.exp(-t)[:, None]
    residual = (x_t - np.sqrt(decay) * x0) / (1.0 - decay)
    inputs = np.concatenate([x_t, z, t[:, None]], axis=1)
    out, pres, acts = nn._forward_cached(model.network, inputs)
    mismatch = out + residual
    loss = float(np.sum(mismatch * mismatch))
    grads = nn._backward_cached(model.network, pres, acts, 2.0 * mismatch)
    return loss, grads


def init_score_model(d_x: int, d_z: int, config: DiffusionConfig, seed: Seed = 0) -> ScoreModel:
    dims = (d_x + d_z + 1, *config.hidden_widths, d_x)
    return ScoreModel(nn.init_network(dims, "identity", seed), d_x, d_z, config)


def train_score(unlabeled: Dataset, config: DiffusionConfig, seed: Seed = 0) -> ScoreModel:
    """Fit the conditional score network on an (X, Z) set.

    Each epoch draws times uniform on [t_min, T] (one per sample, or one
    shared scalar under ``time_draw_mode="shared"``), standard-normal
    noises, and takes one full-batch Adam step on the summed loss.
    """
    if unlabeled.n < 2:
        raise InputError(f"need at least 2 training rows, got {unlabeled.n}")
    model = init_score_model(unlabeled.d_x, unlabeled.d_z, config, seed=seed_key(seed, 0))
    state = nn.init_adam(model.network, config.learning_rate)
    rng = rng_for(seed, 1)
    x0, z = unlabeled.x_block, unlabeled.z_block
    n = unlabeled.n
    for epoch in range(config.epochs):
        if config.time_draw_mode == "shared":
            times = np.full(n, rng.uniform(config.t_min, config.terminal_time))
        else:
            times = rng.uniform(config.t_min, config.terminal_time, size=n)
        noises = rng.standard_normal((n, unlabeled.d_x))
        loss, grads = score_matching_loss(model, x0, z, times, noises)
        if not np.isfinite(loss):
            raise NumericError(f"score-matching loss became non-finite at epoch {epoch}")
        nn.adam_step(model.network, state, grads)
    return model


def reverse_sample(score_fn, d_x: int, z_rows: np.ndarray, steps: int,
                   terminal_time: float, t_min: float, seed: Seed) -> np.ndarray:
    """Euler-Maruyama integration of the approximate reverse SDE.

    ``score_fn(x, z, t)`` maps an (n, d_x) batch, its (n, d_z) conditions
    and a scalar time to an (n, d_x) score. Row i draws its start point
    and step noises from the stream (seed, i).
    """
    z_rows = np.atleast_2d(np.asarray(z_rows, dtype=np.float64))
    n = z_rows.shape[0]
    dt = (terminal_time - t_min) / steps
    start = np.empty((n, d_x))
    noise = np.empty((n, steps, d_x))
    for i in range(n):
        rng = rng_for(seed, i)
        start[i] = rng.standard_normal(d_x)
        noise[i] = rng.standard_normal((steps, d_x))
    x = start
    sqrt_dt = np.sqrt(dt)
    for k in range(steps):
        s = score_fn(x, z_rows, terminal_time - k * dt)
        x = x + (0.5 * x + s) * dt + sqrt_dt * noise[:, k, :]
    return x


def sample_batch(z_rows: np.ndarray, model: ScoreModel, config: DiffusionConfig,
                 seed: Seed) -> np.ndarray:
    """One pseudo-sample per condition row; row i keyed (seed, i).

    The time grid uses the model's trained schedule (T, t_min); the step
    count comes from ``config.sampler_steps``.
    """
    z_rows = np.atleast_2d(np.asarray(z_rows, dtype=np.float64))
    if z_rows.shape[1] != model.d_z:
        raise ShapeError(f"z has width {z_rows.shape[1]}, model expects {model.d_z}")
    return reverse_sample(model.score, model.d_x, z_rows, config.sampler_steps,
                          model.schedule.terminal_time, model.schedule.t_min, seed)


def sample(z: np.ndarray, model: ScoreModel, config: DiffusionConfig, seed: Seed) -> np.ndarray:
    """Single conditional pseudo-sample for one z vector."""
    return sample_batch(np.asarray(z, dtype=np.float64)[None, :], model, config, seed)[0]


def analytic_gaussian_score(mu: np.ndarray, sigma2: float, t, x: np.ndarray) -> np.ndarray:
    """Exact score of the OU marginal when X(0)|Z ~ N(mu, sigma2 I).

    grad log p_t(x) = -(x - exp(-t/2) mu) / v_t, v_t = exp(-t) sigma2 + 1 - exp(-t).
    """
    if sigma2 <= 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise DomainError("diffusion time must be non-negative")
    mu = np.asarray(mu, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2 and t_arr.ndim == 1:
        t_arr = t_arr[:, None]
    decay = np.exp(-t_arr)
    v_t = decay * sigma2 + 1.0 - decay
    return -(x - np.sqrt(decay) * mu) / v_t


def score_model_to_doc(model: ScoreModel) -> dict:
    """Cache document: the network JSON extended with {d_x, d_z, T, t_min}."""
    doc = nn.network_to_doc(model.network)
    doc.update({
        "d_x": model.d_x,
        "d_z": model.d_z,
        "terminal_time": model.schedule.terminal_time,
        "t_min": model.schedule.t_min,
    })
    return doc


def score_model_from_doc(doc: dict, config: DiffusionConfig | None = None) -> ScoreModel:
    """Rebuild a cached model; sampler-time settings come from ``config``."""
    try:
        d_x, d_z = int(doc["d_x"]), int(doc["d_z"])
        terminal_time, t_min = float(doc["terminal_time"]), float(doc["t_min"])
    except KeyError as exc:
        raise InputError(f"score-model document missing field {exc}") from None
    network = nn.network_from_doc(doc)
    schedule = replace(config or DiffusionConfig(), terminal_time=terminal_time, t_min=t_min)
    return ScoreModel(network, d_x, d_z, schedule)
