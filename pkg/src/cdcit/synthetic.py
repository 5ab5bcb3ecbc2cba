"""Seeded generators for the synthetic benchmark models.

Each generator documents its draw order so tests can reconstruct every
noise vector from the seed. The closed-form response maps are exposed as
``*_response`` helpers, which double as the direct conditional simulators
used to compute true conditional quantiles.

Models:
  m1, m2, m3      sampler benchmarks, (X, Z) only; m3 has a mixed-type Z.
  postnonlinear   (X, Y, Z) with X, Y post-nonlinear maps of the Z mean.
  mixed           (X, Y, Z) with half-continuous, half +/-1 Z.
  multivariate    vector X, Y through random l1-normalized projections.
  gaussian-oracle Gaussian model with known conditional law and CMI.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import CONTINUOUS, DISCRETE, Dataset
from .errors import DomainError, InputError
from .seeding import Seed, rng_for

FUNCTION_IDS = ("x", "x2", "x3", "tanh", "cos")

_FUNCTIONS = {
    "x": lambda a: a,
    "x2": np.square,
    "x3": lambda a: a ** 3,
    "tanh": np.tanh,
    "cos": np.cos,
}

MODEL_IDS = ("m1", "m2", "m3", "postnonlinear", "mixed", "multivariate", "gaussian-oracle")
HYPOTHESES = ("h0", "h1")


def apply_function(name: str, arr: np.ndarray) -> np.ndarray:
    if name not in _FUNCTIONS:
        raise InputError(f"unknown function id {name!r}, expected one of {FUNCTION_IDS}")
    return _FUNCTIONS[name](arr)


@dataclass(frozen=True)
class ScenarioSpec:
    """Identity of one synthetic scenario (family or concrete dataset)."""

    model: str
    hypothesis: str | None = None
    d_x: int = 1
    d_y: int = 1
    d_z: int = 1
    n: int = 0
    seed: Seed = 0
    functions: tuple[str, ...] = ()

    def __post_init__(self):
        if self.model not in MODEL_IDS:
            raise InputError(f"unknown model id {self.model!r}")
        if self.hypothesis is not None and self.hypothesis not in HYPOTHESES:
            raise InputError(f"hypothesis must be h0 or h1, got {self.hypothesis!r}")

    def to_doc(self) -> dict:
        from .seeding import seed_key

        return {
            "model": self.model,
            "hypothesis": self.hypothesis,
            "d_x": self.d_x,
            "d_y": self.d_y,
            "d_z": self.d_z,
            "n": self.n,
            "seed": seed_key(self.seed),
            "functions": list(self.functions),
        }


@dataclass(frozen=True, eq=False)
class GaussianOracleMeta:
    """Analytic facts about a gaussian-oracle draw."""

    rho: float
    conditional_mean: np.ndarray   # E[X|Z] per row (the Z row mean)
    conditional_variance: float    # Var(X|Z), constant
    cmi: float                     # I(X;Y|Z) = -0.5 ln(1 - rho^2)


def _check_hypothesis(hypothesis: str) -> str:
    if hypothesis not in HYPOTHESES:
        raise InputError(f"hypothesis must be h0 or h1, got {hypothesis!r}")
    return hypothesis


def m1_response(z: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """X = Z1^2 + exp(Z2 + Z3/3) + Z4 - Z5 + 0.5 (1 + Z2^2 + Z5^2) eps."""
    z = np.atleast_2d(z)
    return (z[:, 0] ** 2 + np.exp(z[:, 1] + z[:, 2] / 3.0) + z[:, 3] - z[:, 4]
            + 0.5 * (1.0 + z[:, 1] ** 2 + z[:, 4] ** 2) * eps)


def m2_response(z: np.ndarray, r: np.ndarray) -> np.ndarray:
    """X = (5 + Z1^2/3 + Z2^2 + Z3^2 + Z4^2 + Z5^2) exp(r)."""
    z = np.atleast_2d(z)
    factor = 5.0 + z[:, 0] ** 2 / 3.0 + np.sum(z[:, 1:5] ** 2, axis=1)
    return factor * np.exp(r)


def m3_response(z: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """X = sum(Z1..Z13)/13 + 0.33 eps; coordinates 14..20 are inert."""
    z = np.atleast_2d(z)
    return np.sum(z[:, :13], axis=1) / 13.0 + 0.33 * eps


def gen_m1(n: int, seed: Seed = 0) -> Dataset:
    """Draw order: Z (n,5) normal, eps (n,) normal."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    rng = rng_for(seed)
    z = rng.standard_normal((n, 5))
    eps = rng.standard_normal(n)
    return Dataset(m1_response(z, eps)[:, None], np.empty((n, 0)), z)


def gen_m2(n: int, seed: Seed = 0) -> Dataset:
    """Draw order: Z (n,5) normal, mixture flags (n,) in {0,1}, r-noise (n,) normal."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    rng = rng_for(seed)
    z = rng.standard_normal((n, 5))
    flags = rng.integers(0, 2, size=n)
    r = rng.standard_normal(n) + np.where(flags == 1, -2.0, 2.0)
    return Dataset(m2_response(z, r)[:, None], np.empty((n, 0)), z)


def gen_m3(n: int, seed: Seed = 0) -> Dataset:
    """Draw order: Z cont (n,10) normal, Z disc (n,10) in {-1,+1}, eps (n,) normal."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    rng = rng_for(seed)
    z_cont = rng.standard_normal((n, 10))
    z_disc = 2.0 * rng.integers(0, 2, size=(n, 10)) - 1.0
    z = np.concatenate([z_cont, z_disc], axis=1)
    eps = rng.standard_normal(n)
    roles = (CONTINUOUS,) * 10 + (DISCRETE,) * 10
    return Dataset(m3_response(z, eps)[:, None], np.empty((n, 0)), z, roles)


def postnonlinear_blocks(z: np.ndarray, eps_x: np.ndarray, eps_y: np.ndarray,
                         eps_b: np.ndarray, f1: str, f2: str, hypothesis: str):
    """Post-nonlinear response pair; H1 adds the same 0.5 eps_b to both."""
    zbar = np.mean(np.atleast_2d(z), axis=1)
    x = apply_function(f1, zbar + 0.25 * eps_x)
    y = apply_function(f2, zbar + 0.25 * eps_y)
    if _check_hypothesis(hypothesis) == "h1":
        x = x + 0.5 * eps_b
        y = y + 0.5 * eps_b
    return x, y


def gen_postnonlinear(d_z: int, n: int, hypothesis: str, seed: Seed = 0):
    """Draw order: f indices (2,), Z (n,d_z) normal, eps_x, eps_y, eps_b (n,) normal.

    eps_b is drawn under both hypotheses (used only under h1) so the
    other draws agree between the h0 and h1 variants of one seed.
    """
    if d_z < 1:
        raise InputError(f"d_z must be >= 1, got {d_z}")
    _check_hypothesis(hypothesis)
    rng = rng_for(seed)
    f1, f2 = (FUNCTION_IDS[i] for i in rng.integers(0, len(FUNCTION_IDS), size=2))
    z = rng.standard_normal((n, d_z))
    eps_x = rng.standard_normal(n)
    eps_y = rng.standard_normal(n)
    eps_b = rng.standard_normal(n)
    x, y = postnonlinear_blocks(z, eps_x, eps_y, eps_b, f1, f2, hypothesis)
    spec = ScenarioSpec("postnonlinear", hypothesis, 1, 1, d_z, n, seed, (f1, f2))
    return Dataset(x[:, None], y[:, None], z), spec


def mixed_blocks(z: np.ndarray, eps_x: np.ndarray, eps_y: np.ndarray,
                 eps_b: np.ndarray, hypothesis: str):
    """Mixed-model response pair: mean of the first floor(2 d_z/3) coordinates
    plus 0.33 noise; H1 reuses eps_b in both X and Y."""
    z = np.atleast_2d(z)
    used = (2 * z.shape[1]) // 3
    signal = np.sum(z[:, :used], axis=1) / used
    if _check_hypothesis(hypothesis) == "h1":
        return signal + 0.33 * eps_b, signal + 0.33 * eps_b
    return signal + 0.33 * eps_x, signal + 0.33 * eps_y


def gen_mixed(d_z: int, n: int, hypothesis: str, seed: Seed = 0) -> Dataset:
    """Draw order: Z cont (n, floor(d_z/2)) normal, Z disc (n, rest) in {-1,+1},
    eps_x, eps_y, eps_b (n,) normal."""
    if d_z < 2:
        raise InputError(f"d_z must be >= 2, got {d_z}")
    _check_hypothesis(hypothesis)
    rng = rng_for(seed)
    n_cont = d_z // 2
    z_cont = rng.standard_normal((n, n_cont))
    z_disc = 2.0 * rng.integers(0, 2, size=(n, d_z - n_cont)) - 1.0
    z = np.concatenate([z_cont, z_disc], axis=1)
    eps_x = rng.standard_normal(n)
    eps_y = rng.standard_normal(n)
    eps_b = rng.standard_normal(n)
    x, y = mixed_blocks(z, eps_x, eps_y, eps_b, hypothesis)
    roles = (CONTINUOUS,) * n_cont + (DISCRETE,) * (d_z - n_cont)
    return Dataset(x[:, None], y[:, None], z, roles)


def multivariate_blocks(z: np.ndarray, a_x: np.ndarray, a_y: np.ndarray,
                        eps_x: np.ndarray, eps_y: np.ndarray,
                        f: str, g: str, h: str, hypothesis: str):
    """Multivariate response pair; under h1 both X and Y reuse eps_x."""
    if _check_hypothesis(hypothesis) == "h0":
        x = apply_function(f, z @ a_x + 0.33 * eps_x)
        y = apply_function(g, z @ a_y + 0.33 * eps_y)
    else:
        x = apply_function(f, z @ a_x) + 0.33 * eps_x
        y = apply_function(h, z @ a_y) + 0.33 * eps_x
    return x, y


def gen_multivariate(d_x: int, d_y: int, d_z: int, n: int, hypothesis: str, seed: Seed = 0):
    """Draw order: A_x (d_z,d_x) uniform, A_y (d_z,d_y) uniform, f/g/h indices (3,),
    Z (n,d_z) normal, eps_x (n,d_x) normal, eps_y (n,d_y) normal.

    Columns of A_x and A_y are normalized to unit l1 norm.
    """
    if d_x != d_y or d_x < 1:
        raise InputError(f"need d_x == d_y >= 1, got d_x={d_x} d_y={d_y}")
    _check_hypothesis(hypothesis)
    rng = rng_for(seed)
    a_x = rng.uniform(0.0, 1.0, size=(d_z, d_x))
    a_x /= np.sum(np.abs(a_x), axis=0, keepdims=True)
    a_y = rng.uniform(0.0, 1.0, size=(d_z, d_y))
    a_y /= np.sum(np.abs(a_y), axis=0, keepdims=True)
    f, g, h = (FUNCTION_IDS[i] for i in rng.integers(0, len(FUNCTION_IDS), size=3))
    z = rng.standard_normal((n, d_z))
    eps_x = rng.standard_normal((n, d_x))
    eps_y = rng.standard_normal((n, d_y))
    x, y = multivariate_blocks(z, a_x, a_y, eps_x, eps_y, f, g, h, hypothesis)
    spec = ScenarioSpec("multivariate", hypothesis, d_x, d_y, d_z, n, seed, (f, g, h))
    return Dataset(x, y, z), spec


def gen_gaussian_oracle(d_z: int, n: int, rho: float, seed: Seed = 0):
    """Gaussian verification model: X|Z ~ N(Zbar, 1), partial corr(X,Y|Z) = rho.

    Draw order: Z (n,d_z) normal, eps_x (n,) normal, eps_y (n,) normal.
    Y = Zbar + rho eps_x + sqrt(1-rho^2) eps_y, so I(X;Y|Z) = -ln(1-rho^2)/2.
    """
    if not abs(rho) < 1:
        raise DomainError(f"|rho| must be < 1, got {rho}")
    rng = rng_for(seed)
    z = rng.standard_normal((n, d_z))
    eps_x = rng.standard_normal(n)
    eps_y = rng.standard_normal(n)
    zbar = np.mean(z, axis=1)
    x = zbar + eps_x
    y = zbar + rho * eps_x + np.sqrt(1.0 - rho ** 2) * eps_y
    meta = GaussianOracleMeta(
        rho=float(rho),
        conditional_mean=zbar,
        conditional_variance=1.0,
        cmi=float(-0.5 * np.log1p(-rho ** 2)),
    )
    return Dataset(x[:, None], y[:, None], z), meta


def generate(spec: ScenarioSpec, seed: Seed | None = None):
    """Generate a dataset for a scenario family; returns (Dataset, filled spec).

    ``seed`` overrides ``spec.seed`` (used for per-trial regeneration).
    Gaussian-oracle scenarios use rho = 0, the H0 verification model.
    """
    use = spec.seed if seed is None else seed
    if spec.model == "m1":
        return gen_m1(spec.n, use), replace(spec, seed=use, d_x=1, d_y=0, d_z=5)
    if spec.model == "m2":
        return gen_m2(spec.n, use), replace(spec, seed=use, d_x=1, d_y=0, d_z=5)
    if spec.model == "m3":
        return gen_m3(spec.n, use), replace(spec, seed=use, d_x=1, d_y=0, d_z=20)
    if spec.model == "postnonlinear":
        data, filled = gen_postnonlinear(spec.d_z, spec.n, spec.hypothesis or "h0", use)
        return data, filled
    if spec.model == "mixed":
        data = gen_mixed(spec.d_z, spec.n, spec.hypothesis or "h0", use)
        return data, replace(spec, seed=use, d_x=1, d_y=1)
    if spec.model == "multivariate":
        data, filled = gen_multivariate(spec.d_x, spec.d_y, spec.d_z, spec.n,
                                        spec.hypothesis or "h0", use)
        return data, filled
    if spec.model == "gaussian-oracle":
        data, _ = gen_gaussian_oracle(spec.d_z, spec.n, 0.0, use)
        return data, replace(spec, seed=use, d_x=1, d_y=1)
    raise InputError(f"unknown model id {spec.model!r}")


def draw_z(model_id: str, count: int, seed: Seed = 0) -> np.ndarray:
    """Draw condition rows from a sampler-benchmark model's Z law."""
    rng = rng_for(seed)
    if model_id in ("m1", "m2"):
        return rng.standard_normal((count, 5))
    if model_id == "m3":
        z_cont = rng.standard_normal((count, 10))
        z_disc = 2.0 * rng.integers(0, 2, size=(count, 10)) - 1.0
        return np.concatenate([z_cont, z_disc], axis=1)
    raise InputError(f"model {model_id!r} has no standalone Z law here (use m1, m2 or m3)")


def conditional_draws(model_id: str, z: np.ndarray, count: int, seed: Seed = 0) -> np.ndarray:
    """Direct simulation of X | Z = z for the sampler-benchmark models."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1:
        raise InputError("z must be a single condition vector")
    rng = rng_for(seed)
    tiled = np.broadcast_to(z, (count, z.shape[0]))
    if model_id == "m1":
        return m1_response(tiled, rng.standard_normal(count))
    if model_id == "m2":
        flags = rng.integers(0, 2, size=count)
        r = rng.standard_normal(count) + np.where(flags == 1, -2.0, 2.0)
        return m2_response(tiled, r)
    if model_id == "m3":
        return m3_response(tiled, rng.standard_normal(count))
    raise InputError(f"no conditional simulator for model {model_id!r}")
