"""Classifier-based conditional mutual information estimation.

The dataset is shuffled and halved; the second half provides positive
samples from the joint law, and a 1-NN resample of the first half
provides negatives approximating p(x,z) p(y|z). A logistic-output MLP is
trained on the merged 2:1 train split to minimize binary cross-entropy,
and its probability ratio alpha/(1-alpha) plugs into the Donsker-Varadhan
form: the estimate is mean log-ratio over positive test rows minus the
log of the mean ratio over negative test rows, each truncated to d rows.

Train/test splitting is fixed at 2:1; with half-size m the test
partitions have exactly d = floor(m/3) rows.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import nn
from .dataset import Dataset
from .errors import DomainError, InputError, NumericError
from .knn import one_nn_resample
from .seeding import Seed, rng_for, seed_key

MIN_ROWS = 12


@dataclass(frozen=True)
class CmiConfig:
    # The classifier must stay calibrated for the ratio plug-in to work:
    # a gentle learning rate, label smoothing (which caps the optimal
    # logits) and degree-2 feature lifting (the log-ratio of near-Gaussian
    # laws is quadratic in (x, y)) together keep the Donsker-Varadhan
    # terms accurate without saturating; see README for the calibration
    # study behind these defaults.
    probability_clip: float = 1e-3
    hidden_widths: tuple[int, ...] = (32, 32)
    epochs: int = 400
    learning_rate: float = 0.001
    label_smoothing: float = 0.1
    quadratic_features: bool = True

    def __post_init__(self):
        if not (0.0 < self.probability_clip < 0.5):
            raise DomainError(f"probability_clip must be in (0, 0.5), got {self.probability_clip}")
        if self.epochs < 0:
            raise DomainError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0:
            raise DomainError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0.0 <= self.label_smoothing < 0.5):
            raise DomainError(f"label_smoothing must be in [0, 0.5), got {self.label_smoothing}")
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))


@dataclass(frozen=True, eq=False)
class LabeledSet:
    """Feature rows (x, y, z concatenated) with 0/1 source labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.float64))
        if self.features.shape[0] != self.labels.shape[0]:
            raise InputError("features and labels disagree on row count")


@dataclass(frozen=True)
class CmiEstimate:
    value: float
    d: int
    mean_log_ratio_f: float
    mean_ratio_g: float
    classifier_train_loss: float


def build_labeled_sets(v: Dataset, seed: Seed = 0):
    """Shuffle, halve, 1-NN resample, label, and 2:1-split a dataset.

    Returns (train LabeledSet, positive test features, negative test
    features). The test partitions have floor(m/3) rows each, m = n // 2.
    """
    if v.n < MIN_ROWS:
        raise InputError(f"need at least {MIN_ROWS} rows, got {v.n}")
    m = v.n // 2
    perm = rng_for(seed, 0).permutation(v.n)
    v1 = v.take(perm[:m])
    v2 = v.take(perm[m:2 * m])
    v_neg = one_nn_resample(v1, v2)
    feat_f = v2.features()
    feat_g = v_neg.features()
    d = m // 3
    cut = m - d
    train = LabeledSet(
        np.concatenate([feat_f[:cut], feat_g[:cut]], axis=0),
        np.concatenate([np.ones(cut), np.zeros(cut)]),
    )
    return train, feat_f[cut:], feat_g[cut:]


def bce_loss(classifier: nn.DenseNetwork, labeled: LabeledSet) -> float:
    """Mean binary cross-entropy of a sigmoid-output classifier."""
    logits = nn.forward(replace_output(classifier, "identity"), labeled.features)[:, 0]
    return float(np.mean(np.logaddexp(0.0, logits) - labeled.labels * logits))


# product features are skipped for very wide X/Y blocks to keep the
# classifier input from exploding quadratically
_MAX_PRODUCT_FEATURES = 400


def lift_features(w: np.ndarray, d_x: int, d_y: int) -> np.ndarray:
    """Append degree-2 terms of the x and y blocks to raw (x, y, z) rows.

    The log likelihood ratio log p(y|x,z) - log p(y|z) of near-Gaussian
    laws is quadratic in (x, y), so x^2, y^2 and the x*y products make it
    close to linear in the lifted features.
    """
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    x = w[:, :d_x]
    y = w[:, d_x:d_x + d_y]
    parts = [w, x * x, y * y]
    if d_x * d_y <= _MAX_PRODUCT_FEATURES:
        parts.append(np.einsum("ni,nj->nij", x, y).reshape(w.shape[0], -1))
    return np.concatenate(parts, axis=1)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Lift-and-standardize transform fitted on the training rows."""

    d_x: int
    d_y: int
    lifted: bool
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, train_features: np.ndarray, d_x: int, d_y: int, lifted: bool) -> "FeatureMap":
        base = lift_features(train_features, d_x, d_y) if lifted else np.asarray(train_features)
        scale = base.std(axis=0)
        scale[scale == 0.0] = 1.0
        return cls(d_x, d_y, lifted, base.mean(axis=0), scale)

    def apply(self, w: np.ndarray) -> np.ndarray:
        base = lift_features(w, self.d_x, self.d_y) if self.lifted else np.atleast_2d(w)
        return (base - self.mean) / self.scale


def replace_output(net: nn.DenseNetwork, activation: str) -> nn.DenseNetwork:
    """View of a network with a different output activation (shared arrays)."""
    return nn.DenseNetwork(net.layer_dims, net.weights, net.biases, activation)


def train_classifier(train: LabeledSet, config: CmiConfig, seed: Seed = 0) -> nn.DenseNetwork:
    """Full-batch Adam on mean BCE; returns the sigmoid-output classifier.

    Gradients flow through the logits (sigma(logit) - label), which is the
    numerically stable form of the BCE derivative.
    """
    labels = train.labels
    if not (np.any(labels == 1.0) and np.any(labels == 0.0)):
        raise InputError("training set must contain both labels")
    d_w = train.features.shape[1]
    net = nn.init_network((d_w, *config.hidden_widths, 1), "sigmoid", seed_key(seed, 0))
    if config.epochs == 0:
        return net
    logits_view = replace_output(net, "identity")
    state = nn.init_adam(net, config.learning_rate)
    n = train.features.shape[0]
    target = labels[:, None]
    for epoch in range(config.epochs):
        out, pres, acts = nn._forward_cached(logits_view, train.features)
        upstream = (nn.sigmoid(out) - target) / n
        if not np.isfinite(out).all():
            raise NumericError(f"classifier logits became non-finite at epoch {epoch}")
        grads = nn._backward_cached(logits_view, pres, acts, upstream)
        nn.adam_step(net, state, grads)
    return net


def likelihood_ratio(classifier: nn.DenseNetwork, w: np.ndarray, probability_clip: float):
    """Clipped probability ratio alpha/(1-alpha) for one row or a batch."""
    alpha = nn.forward(classifier, w)
    single = alpha.ndim == 1
    alpha = np.clip(alpha[..., 0] if not single else alpha[0],
                    probability_clip, 1.0 - probability_clip)
    return alpha / (1.0 - alpha)


def dv_estimate(ratios_f: np.ndarray, ratios_g: np.ndarray):
    """Donsker-Varadhan combination of likelihood ratios.

    Returns (value, mean log ratio over f, mean ratio over g) with
    value = mean_log_ratio_f - log(mean_ratio_g) exactly.
    """
    ratios_f = np.asarray(ratios_f, dtype=np.float64)
    ratios_g = np.asarray(ratios_g, dtype=np.float64)
    if ratios_f.size == 0 or ratios_g.size == 0:
        raise InputError("ratio lists must be nonempty")
    mean_log_f = float(np.mean(np.log(ratios_f)))
    mean_g = float(np.mean(ratios_g))
    return mean_log_f - np.log(mean_g), mean_log_f, mean_g


def estimate_cmi(v: Dataset, config: CmiConfig, seed: Seed = 0) -> CmiEstimate:
    """Full classifier-based estimate of I(X;Y|Z) on one dataset."""
    train, test_f, test_g = build_labeled_sets(v, seed)
    classifier = train_classifier(train, config, seed_key(seed, 1))
    d = (v.n // 2) // 3
    ratios_f = likelihood_ratio(classifier, test_f[:d], config.probability_clip)
    ratios_g = likelihood_ratio(classifier, test_g[:d], config.probability_clip)
    value, mean_log_f, mean_g = dv_estimate(ratios_f, ratios_g)
    return CmiEstimate(
        value=float(value),
        d=d,
        mean_log_ratio_f=mean_log_f,
        mean_ratio_g=mean_g,
        classifier_train_loss=bce_loss(classifier, train),
    )
