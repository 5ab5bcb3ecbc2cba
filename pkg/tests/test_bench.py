import json
import math

import numpy as np
import pytest
import scipy.stats

from cdcit.bench import (TAUS, empirical_quantile, gaussian_kde, ks_distance,
                         quantile_mse, run_trials)
from cdcit.cmi import CmiConfig
from cdcit.crt import TestConfig
from cdcit.diffusion import DiffusionConfig
from cdcit.errors import InputError
from cdcit.synthetic import ScenarioSpec, conditional_draws, draw_z


# ---------------------------------------------------------------- quantiles

def test_quantile_median_of_three():
    assert empirical_quantile([1.0, 2.0, 3.0], 0.5) == 2.0


def test_quantile_extremes():
    samples = [5.0, -1.0, 2.0, 9.0]
    assert empirical_quantile(samples, 0.0) == -1.0
    assert empirical_quantile(samples, 1.0) == 9.0


def test_quantile_matches_numpy_linear_interpolation():
    rng = np.random.default_rng(1)
    for _ in range(10):
        samples = rng.standard_normal(int(rng.integers(2, 50)))
        tau = float(rng.random())
        assert empirical_quantile(samples, tau) == pytest.approx(
            float(np.quantile(samples, tau)), rel=1e-12, abs=1e-12)


def test_quantile_rejects_empty():
    with pytest.raises(InputError):
        empirical_quantile([], 0.5)


# ---------------------------------------------------------------- KS

def test_ks_identical_samples_zero():
    samples = np.random.default_rng(2).standard_normal(100)
    assert ks_distance(samples, samples) == 0.0


def test_ks_disjoint_supports_one():
    assert ks_distance([1.0, 2.0, 3.0], [10.0, 11.0]) == 1.0


def test_ks_matches_scipy():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = rng.standard_normal(int(rng.integers(5, 200)))
        b = rng.standard_normal(int(rng.integers(5, 200))) + rng.normal() * 0.5
        ours = ks_distance(a, b)
        ref = scipy.stats.ks_2samp(a, b).statistic
        assert ours == pytest.approx(float(ref), abs=1e-12)


def test_ks_null_distribution_frequency():
    rng = np.random.default_rng(4)
    below = sum(
        ks_distance(rng.standard_normal(5000), rng.standard_normal(5000)) < 0.05
        for _ in range(100)
    )
    assert below >= 95


def test_ks_rejects_empty():
    with pytest.raises(InputError):
        ks_distance([], [1.0])


# ---------------------------------------------------------------- KDE

def test_kde_normalizes_to_one():
    samples = np.random.default_rng(5).standard_normal(2000)
    grid = np.linspace(-6.0, 6.0, 1200)
    dens = gaussian_kde(samples, grid)
    assert np.all(dens >= 0.0)
    assert np.trapezoid(dens, grid) == pytest.approx(1.0, abs=0.02)


def test_kde_symmetric_inputs_give_symmetric_density():
    samples = np.array([-2.0, -1.0, 1.0, 2.0])
    pts = np.array([-1.5, 1.5])
    dens = gaussian_kde(samples, pts)
    assert dens[0] == pytest.approx(dens[1], rel=1e-12)


def test_kde_recovers_standard_normal():
    samples = np.random.default_rng(6).standard_normal(5000)
    grid = np.linspace(-3.0, 3.0, 121)
    dens = gaussian_kde(samples, grid)
    truth = np.exp(-0.5 * grid ** 2) / math.sqrt(2.0 * math.pi)
    assert np.max(np.abs(dens - truth)) <= 0.05


def test_kde_rejects_constant_samples():
    with pytest.raises(InputError):
        gaussian_kde(np.ones(10), np.linspace(0, 1, 5))


# ---------------------------------------------------------------- trials

def fast_oracle_config(seed=0, b=5):
    return TestConfig(repetitions=b, seed=seed, cmi=CmiConfig(epochs=40),
                      diffusion=DiffusionConfig(epochs=5, hidden_widths=(4,), sampler_steps=5),
                      sampler_kind="analytic-gaussian-oracle")


def test_run_trials_single_trial_support():
    scenario = ScenarioSpec("gaussian-oracle", d_z=2, n=0, seed=0)
    report = run_trials(scenario, 1, fast_oracle_config(), n_unlabeled=12, n_test=36, seed=1)
    assert report.rejection_rate in (0.0, 1.0)
    assert len(report.p_values) == 1
    assert report.scenario.n == 48


def test_run_trials_fixed_seed_identical_json():
    scenario = ScenarioSpec("gaussian-oracle", d_z=2, n=0, seed=0)
    docs = []
    for _ in range(2):
        rep = run_trials(scenario, 2, fast_oracle_config(), 12, 36, seed=7)
        doc = rep.to_doc()
        doc.pop("seconds_per_trial")
        docs.append(json.dumps(doc, sort_keys=True))
    assert docs[0] == docs[1]


def test_run_trials_threads_invariant():
    scenario = ScenarioSpec("gaussian-oracle", d_z=2, n=0, seed=0)
    a = run_trials(scenario, 3, fast_oracle_config(), 12, 36, seed=8, threads=1)
    b = run_trials(scenario, 3, fast_oracle_config(), 12, 36, seed=8, threads=2)
    assert a.p_values == b.p_values


def test_run_trials_rejection_rate_strict_inequality():
    scenario = ScenarioSpec("gaussian-oracle", d_z=2, n=0, seed=0)
    report = run_trials(scenario, 4, fast_oracle_config(), 12, 36, seed=9)
    assert report.rejection_rate == sum(p < report.alpha for p in report.p_values) / 4
    assert report.binomial_se == pytest.approx(
        math.sqrt(report.rejection_rate * (1 - report.rejection_rate) / 4))


def test_run_trials_rejects_xz_only_models():
    with pytest.raises(InputError):
        run_trials(ScenarioSpec("m1", n=0, seed=0), 1, fast_oracle_config(), 10, 20)


def test_run_trials_rejects_zero_trials():
    with pytest.raises(InputError):
        run_trials(ScenarioSpec("gaussian-oracle", d_z=2, n=0, seed=0), 0,
                   fast_oracle_config(), 10, 20)


# ---------------------------------------------------------------- quantile MSE

def test_perfect_sampler_mse_near_zero():
    report = quantile_mse("m3", reps=5, samples_per_rep=500, seed=3,
                          sampler="true-conditional", true_draws=200_000)
    assert report.taus == TAUS
    assert all(m <= 0.02 for m in report.mse)


def test_perfect_sampler_beats_marginal_on_m1():
    perfect = quantile_mse("m1", reps=5, samples_per_rep=500, seed=4,
                           sampler="true-conditional", true_draws=200_000)
    marginal = quantile_mse("m1", reps=5, samples_per_rep=500, seed=4,
                            sampler="marginal", true_draws=200_000)
    mid = TAUS.index(0.50)
    assert perfect.mse[mid] < marginal.mse[mid]


def test_true_median_of_m3_at_zero_z():
    z = np.zeros(20)
    draws = conditional_draws("m3", z, 1_000_000, seed=5)
    assert abs(empirical_quantile(draws, 0.5)) < 0.005


def test_quantile_mse_unknown_model():
    with pytest.raises(InputError):
        quantile_mse("m9", reps=1)


def test_quantile_mse_diffusion_smoke():
    # minimal end-to-end run of the trained-sampler path
    cfg = DiffusionConfig(epochs=200, hidden_widths=(16, 16, 16), sampler_steps=50)
    report = quantile_mse("m3", reps=2, samples_per_rep=100, seed=6,
                          config=cfg, train_n=200, true_draws=50_000)
    assert report.reps == 2 and len(report.mse) == 5
    assert all(np.isfinite(report.mse))
