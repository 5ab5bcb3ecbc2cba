"""Conditional randomization test driven by a conditional sampler.

The observed statistic is the classifier-based CMI estimate on the test
set. For each repetition b the X block is replaced by fresh conditional
draws (stream keyed (seed, 1, b), one sub-stream per row) and the same
estimator, with its own classifier stream keyed (seed, 0, b), produces a
null statistic. The p-value is (1 + #{null >= observed}) / (1 + B); ties
count toward the numerator. The B repetitions are mutually independent
and can fan out over processes without changing any output.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .cmi import CmiConfig, estimate_cmi
from .dataset import Dataset
from .diffusion import DiffusionConfig, ScoreModel, sample_batch, train_score
from .errors import DomainError, InputError, ShapeError
from .seeding import Seed, rng_for, seed_key

SAMPLER_KINDS = ("learned-diffusion", "analytic-gaussian-oracle")


@dataclass(frozen=True)
class TestConfig:
    repetitions: int = 100
    alpha: float = 0.05
    seed: Seed = 0
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    cmi: CmiConfig = field(default_factory=CmiConfig)
    sampler_kind: str = "learned-diffusion"
    oracle_sigma2: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.repetitions < 1:
            raise DomainError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.sampler_kind not in SAMPLER_KINDS:
            raise InputError(f"sampler_kind must be one of {SAMPLER_KINDS}")
        if self.oracle_sigma2 <= 0:
            raise DomainError(f"oracle_sigma2 must be positive, got {self.oracle_sigma2}")

    def to_doc(self) -> dict:
        return {
            "repetitions": self.repetitions,
            "alpha": self.alpha,
            "seed": seed_key(self.seed),
            "sampler_kind": self.sampler_kind,
            "oracle_sigma2": self.oracle_sigma2,
            "diffusion": {
                "terminal_time": self.diffusion.terminal_time,
                "t_min": self.diffusion.t_min,
                "sampler_steps": self.diffusion.sampler_steps,
                "epochs": self.diffusion.epochs,
                "learning_rate": self.diffusion.learning_rate,
                "hidden_widths": list(self.diffusion.hidden_widths),
                "time_draw_mode": self.diffusion.time_draw_mode,
            },
            "cmi": {
                "probability_clip": self.cmi.probability_clip,
                "hidden_widths": list(self.cmi.hidden_widths),
                "epochs": self.cmi.epochs,
                "learning_rate": self.cmi.learning_rate,
            },
        }


@dataclass(frozen=True)
class TestResult:
    p_value: float
    cmi_observed: float
    cmi_null: tuple[float, ...]
    reject: bool
    config: TestConfig
    seed: Seed
    timings: dict

    def to_doc(self) -> dict:
        return {
            "p_value": self.p_value,
            "reject": self.reject,
            "alpha": self.config.alpha,
            "b": len(self.cmi_null),
            "cmi_observed": self.cmi_observed,
            "cmi_null": list(self.cmi_null),
            "seed": seed_key(self.seed),
            "config": self.config.to_doc(),
            "timings": dict(self.timings),
        }


def p_value(stat_observed: float, stats_null) -> float:
    """(1 + #{null >= observed}) / (1 + B), ties counted in the numerator."""
    stats_null = np.asarray(stats_null, dtype=np.float64)
    if stats_null.size == 0:
        raise InputError("need at least one null statistic")
    return float((1 + np.sum(stats_null >= stat_observed)) / (1 + stats_null.size))


class GaussianOracleSampler:
    """Exact conditional draws X|Z ~ N(mean(Z), sigma2); validity testing only."""

    def __init__(self, sigma2: float = 1.0):
        if sigma2 <= 0:
            raise DomainError(f"sigma2 must be positive, got {sigma2}")
        self.sigma2 = float(sigma2)

    def draw(self, z_rows: np.ndarray, seed: Seed) -> np.ndarray:
        z_rows = np.atleast_2d(np.asarray(z_rows, dtype=np.float64))
        zbar = np.mean(z_rows, axis=1)
        scale = np.sqrt(self.sigma2)
        eps = np.array([rng_for(seed, i).standard_normal() for i in range(z_rows.shape[0])])
        return (zbar + scale * eps)[:, None]


class DiffusionSampler:
    """Reverse-SDE draws from a trained score model."""

    def __init__(self, model: ScoreModel, config: DiffusionConfig):
        self.model = model
        self.config = config

    def draw(self, z_rows: np.ndarray, seed: Seed) -> np.ndarray:
        return sample_batch(z_rows, self.model, self.config, seed)


def _null_statistic(b: int, sampler, test_data: Dataset, cmi_config: CmiConfig,
                    seed: Seed) -> float:
    x_b = sampler.draw(test_data.z_block, seed_key(seed, 1, b))
    return estimate_cmi(test_data.with_x(x_b), cmi_config, seed_key(seed, 0, b)).value


def run_cdcit(test_data: Dataset, unlabeled, config: TestConfig, threads: int = 1) -> TestResult:
    """Full conditional-independence test; deterministic given config.seed.

    ``unlabeled`` is the (X, Z) training set for the diffusion sampler, or
    an already-trained ScoreModel; it is ignored by the oracle sampler.
    """
    if test_data.n < 12:
        raise InputError(f"test set needs at least 12 rows, got {test_data.n}")
    if test_data.d_y < 1:
        raise ShapeError("test set needs at least one y column")
    seed = config.seed
    timings: dict[str, float] = {}
    t_start = time.perf_counter()

    if config.sampler_kind == "analytic-gaussian-oracle":
        if test_data.d_x != 1:
            raise ShapeError("analytic-gaussian-oracle supports d_x = 1 only")
        sampler = GaussianOracleSampler(config.oracle_sigma2)
        timings["train_sampler"] = 0.0
    else:
        t0 = time.perf_counter()
        if isinstance(unlabeled, ScoreModel):
            model = unlabeled
        elif isinstance(unlabeled, Dataset):
            model = train_score(unlabeled.without_y(), config.diffusion, seed_key(seed, 2))
        else:
            raise InputError("learned-diffusion sampler needs an unlabeled Dataset or a ScoreModel")
        if model.d_x != test_data.d_x or model.d_z != test_data.d_z:
            raise ShapeError(
                f"sampler trained for (d_x={model.d_x}, d_z={model.d_z}) but test data has "
                f"(d_x={test_data.d_x}, d_z={test_data.d_z})"
            )
        sampler = DiffusionSampler(model, config.diffusion)
        timings["train_sampler"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    cmi_observed = estimate_cmi(test_data, config.cmi, seed_key(seed, 0, 0)).value
    timings["observed_statistic"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    bs = range(1, config.repetitions + 1)
    stat = partial(_null_statistic, sampler=sampler, test_data=test_data,
                   cmi_config=config.cmi, seed=seed)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            cmi_null = list(pool.map(stat, bs))
    else:
        cmi_null = [stat(b) for b in bs]
    timings["null_statistics"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start

    p = p_value(cmi_observed, cmi_null)
    return TestResult(
        p_value=p,
        cmi_observed=cmi_observed,
        cmi_null=tuple(cmi_null),
        reject=p < config.alpha,
        config=config,
        seed=seed,
        timings=timings,
    )
