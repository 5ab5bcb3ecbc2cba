"""Experiment harness: error-rate sweeps and sampler-quality diagnostics.

``run_trials`` repeats the full test on freshly generated data and reports
the rejection rate at level alpha (strict p < alpha). ``quantile_mse``
scores a conditional sampler by the squared error between the empirical
quantiles of its draws at a random z and the true conditional quantiles
obtained by direct simulation at that z. Both are pure functions of
(scenario, config, seed); trials fan out over processes without changing
results.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial

import numpy as np

from . import synthetic
from .crt import TestConfig, run_cdcit
from .dataset import Dataset
from .diffusion import DiffusionConfig, sample_batch, train_score
from .errors import InputError
from .seeding import Seed, rng_for, seed_key
from .synthetic import ScenarioSpec

TAUS = (0.05, 0.25, 0.50, 0.75, 0.95)

SAMPLER_KINDS = ("diffusion", "true-conditional", "marginal")

# hidden widths for the low-dimensional sampler benchmarks (m1-m3)
BENCH_HIDDEN = (16, 16, 16)


@dataclass(frozen=True)
class TrialReport:
    scenario: ScenarioSpec
    trials: int
    alpha: float
    p_values: tuple[float, ...]
    rejection_rate: float
    binomial_se: float
    seconds_per_trial: tuple[float, ...]
    n_unlabeled: int
    n_test: int
    seed: Seed

    def to_doc(self) -> dict:
        return {
            "scenario": self.scenario.to_doc(),
            "trials": self.trials,
            "alpha": self.alpha,
            "p_values": list(self.p_values),
            "rejection_rate": self.rejection_rate,
            "binomial_se": self.binomial_se,
            "seconds_per_trial": list(self.seconds_per_trial),
            "n_unlabeled": self.n_unlabeled,
            "n_test": self.n_test,
            "seed": seed_key(self.seed),
        }


@dataclass(frozen=True)
class QuantileReport:
    model: str
    sampler: str
    taus: tuple[float, ...]
    mse: tuple[float, ...]
    sd: tuple[float, ...]
    reps: int
    samples_per_rep: int
    seed: Seed

    def to_doc(self) -> dict:
        return {
            "model": self.model,
            "sampler": self.sampler,
            "taus": list(self.taus),
            "mse": list(self.mse),
            "sd": list(self.sd),
            "reps": self.reps,
            "samples_per_rep": self.samples_per_rep,
            "seed": seed_key(self.seed),
        }


def _one_trial(trial: int, scenario: ScenarioSpec, test_config: TestConfig,
               n_unlabeled: int, n_test: int, seed: Seed):
    data, _ = synthetic.generate(replace(scenario, n=n_unlabeled + n_test),
                                 seed=seed_key(seed, trial, 0))
    d_u = data.take(range(n_unlabeled)).without_y()
    d_t = data.take(range(n_unlabeled, n_unlabeled + n_test))
    t0 = time.perf_counter()
    result = run_cdcit(d_t, d_u, replace(test_config, seed=seed_key(seed, trial, 1)))
    return result.p_value, time.perf_counter() - t0


def run_trials(scenario: ScenarioSpec, trials: int, test_config: TestConfig,
               n_unlabeled: int, n_test: int, seed: Seed = 0, threads: int = 1) -> TrialReport:
    """Repeat the test on fresh data; D_U and D_T are disjoint splits."""
    if trials < 1:
        raise InputError(f"trials must be >= 1, got {trials}")
    if scenario.model in ("m1", "m2", "m3"):
        raise InputError(f"scenario {scenario.model!r} has no response block to test")
    one = partial(_one_trial, scenario=scenario, test_config=test_config,
                  n_unlabeled=n_unlabeled, n_test=n_test, seed=seed)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(trials)))
    else:
        outcomes = [one(t) for t in range(trials)]
    p_values = tuple(p for p, _ in outcomes)
    seconds = tuple(s for _, s in outcomes)
    alpha = test_config.alpha
    rate = sum(p < alpha for p in p_values) / trials
    return TrialReport(
        scenario=replace(scenario, n=n_unlabeled + n_test),
        trials=trials,
        alpha=alpha,
        p_values=p_values,
        rejection_rate=rate,
        binomial_se=math.sqrt(rate * (1.0 - rate) / trials),
        seconds_per_trial=seconds,
        n_unlabeled=n_unlabeled,
        n_test=n_test,
        seed=seed,
    )


def empirical_quantile(samples, tau: float) -> float:
    """Linear-interpolation quantile of a sample list."""
    arr = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if arr.size == 0:
        raise InputError("samples must be nonempty")
    if not (0.0 <= tau <= 1.0):
        raise InputError(f"tau must lie in [0, 1], got {tau}")
    pos = (arr.size - 1) * tau
    lo = int(np.floor(pos))
    if lo == arr.size - 1:
        return float(arr[-1])
    frac = pos - lo
    return float(arr[lo] + frac * (arr[lo + 1] - arr[lo]))


def _draw_for_rep(model_id: str, sampler: str, z: np.ndarray, count: int,
                  trained_model, config: DiffusionConfig, key) -> np.ndarray:
    if sampler == "diffusion":
        return sample_batch(np.broadcast_to(z, (count, z.shape[0])), trained_model,
                            config, key)[:, 0]
    if sampler == "true-conditional":
        return synthetic.conditional_draws(model_id, z, count, key)
    if sampler == "marginal":
        # unconditional draws: fresh (X, Z) pairs with the z thrown away
        data, _ = synthetic.generate(ScenarioSpec(model_id, n=count), seed=key)
        return data.x_block[:, 0]
    raise InputError(f"sampler must be one of {SAMPLER_KINDS}, got {sampler!r}")


def quantile_mse(model_id: str, reps: int, samples_per_rep: int = 500, seed: Seed = 0,
                 config: DiffusionConfig | None = None, sampler: str = "diffusion",
                 train_n: int = 500, true_draws: int = 1_000_000,
                 taus: tuple[float, ...] = TAUS) -> QuantileReport:
    """Per-tau mean squared quantile error of a conditional sampler.

    The diffusion sampler is trained once on ``train_n`` model draws; each
    repetition draws one z, generates ``samples_per_rep`` conditional
    samples, and compares their empirical quantiles against the true
    conditional quantiles from a ``true_draws``-sized direct simulation.
    """
    if model_id not in ("m1", "m2", "m3"):
        raise InputError(f"unknown sampler-benchmark model {model_id!r}")
    if sampler not in SAMPLER_KINDS:
        raise InputError(f"sampler must be one of {SAMPLER_KINDS}, got {sampler!r}")
    if reps < 1:
        raise InputError(f"reps must be >= 1, got {reps}")
    config = config or DiffusionConfig(hidden_widths=BENCH_HIDDEN)
    trained = None
    if sampler == "diffusion":
        train_set, _ = synthetic.generate(ScenarioSpec(model_id, n=train_n),
                                          seed=seed_key(seed, 0))
        trained = train_score(train_set, config, seed_key(seed, 1))
    errors = np.empty((reps, len(taus)))
    for rep in range(reps):
        z = synthetic.draw_z(model_id, 1, seed_key(seed, 2, rep))[0]
        draws = _draw_for_rep(model_id, sampler, z, samples_per_rep, trained, config,
                              seed_key(seed, 3, rep))
        truth = synthetic.conditional_draws(model_id, z, true_draws, seed_key(seed, 4, rep))
        for j, tau in enumerate(taus):
            gap = empirical_quantile(draws, tau) - empirical_quantile(truth, tau)
            errors[rep, j] = gap * gap
    sd = np.std(errors, axis=0, ddof=1) if reps > 1 else np.zeros(len(taus))
    return QuantileReport(
        model=model_id,
        sampler=sampler,
        taus=tuple(taus),
        mse=tuple(float(v) for v in errors.mean(axis=0)),
        sd=tuple(float(v) for v in sd),
        reps=reps,
        samples_per_rep=samples_per_rep,
        seed=seed,
    )


def ks_distance(samples_a, samples_b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic: sup |F_a - F_b|."""
    a = np.sort(np.asarray(samples_a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(samples_b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise InputError("both sample lists must be nonempty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def gaussian_kde(samples, eval_points) -> np.ndarray:
    """Gaussian-kernel density estimate with the 1.06 sigma m^(-1/5) bandwidth."""
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if samples.size < 2:
        raise InputError(f"need at least 2 samples, got {samples.size}")
    sigma = float(np.std(samples, ddof=1))
    if sigma == 0.0:
        raise InputError("constant samples give a degenerate bandwidth")
    bandwidth = 1.06 * sigma * samples.size ** (-0.2)
    pts = np.asarray(eval_points, dtype=np.float64).ravel()
    u = (pts[:, None] - samples[None, :]) / bandwidth
    kernel = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    return kernel.sum(axis=1) / (samples.size * bandwidth)
