"""Dense feedforward networks with exact backpropagation and Adam.

Weight matrix i has shape (layer_dims[i+1], layer_dims[i]) and activations
are row vectors, so a batch forward is ``h @ W.T + b``. Hidden layers are
ReLU (subgradient 0 at 0); the output layer is identity or a logistic
sigmoid. All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericError, ShapeError
from .seeding import Seed, rng_for

OUTPUT_ACTIVATIONS = ("identity", "sigmoid")


@dataclass(eq=False)
class DenseNetwork:
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output_activation: str = "identity"

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.layer_dims) < 2 or any(d < 1 for d in self.layer_dims):
            raise ShapeError(f"layer_dims must be >= 2 positive ints, got {self.layer_dims}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise InputError(f"unknown output activation {self.output_activation!r}")
        if len(self.weights) != self.n_layers or len(self.biases) != self.n_layers:
            raise ShapeError("one weight matrix and bias vector required per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            want_w = (self.layer_dims[i + 1], self.layer_dims[i])
            if w.shape != want_w:
                raise ShapeError(f"weight {i} has shape {w.shape}, expected {want_w}")
            if b.shape != (self.layer_dims[i + 1],):
                raise ShapeError(f"bias {i} has shape {b.shape}, expected ({self.layer_dims[i + 1]},)")

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def d_in(self) -> int:
        return self.layer_dims[0]

    @property
    def d_out(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            self.layer_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.output_activation,
        )


def init_network(layer_dims, output_activation: str = "identity", seed: Seed = 0) -> DenseNetwork:
    """Uniform +/-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    rng = rng_for(seed)
    dims = tuple(int(d) for d in layer_dims)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return DenseNetwork(dims, weights, biases, output_activation)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _as_batch(x: np.ndarray, width: int, what: str) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ShapeError(f"{what} has shape {np.shape(x)}, expected width {width}")
    return arr, single


def _forward_cached(net: DenseNetwork, x: np.ndarray):
    """Returns (output, pre-activations, layer inputs) for a 2-D batch."""
    pres = []
    inputs = [x]
    h = x
    last = net.n_layers - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        pres.append(z)
        if i < last:
            h = np.maximum(z, 0.0)
        elif net.output_activation == "sigmoid":
            h = sigmoid(z)
        else:
            h = z
        inputs.append(h)
    return h, pres, inputs


def forward(net: DenseNetwork, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on one input vector or a batch of rows."""
    batch, single = _as_batch(x, net.d_in, "input")
    out, _, _ = _forward_cached(net, batch)
    return out[0] if single else out


def _backward_cached(net: DenseNetwork, pres, inputs, upstream: np.ndarray):
    if net.output_activation == "sigmoid":
        a = inputs[-1]
        delta = upstream * a * (1.0 - a)
    else:
        delta = upstream
    grad_w = [None] * net.n_layers
    grad_b = [None] * net.n_layers
    for i in range(net.n_layers - 1, -1, -1):
        grad_w[i] = delta.T @ inputs[i]
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i]) * (pres[i - 1] > 0)
    return grad_w, grad_b


def backward(net: DenseNetwork, x: np.ndarray, upstream: np.ndarray):
    """Exact gradients of sum(output * upstream) w.r.t. every weight and bias.

    For batch inputs the gradient is summed over rows. Returns
    (grad_weights, grad_biases) shaped like the network parameters.
    """
    batch, single = _as_batch(x, net.d_in, "input")
    up, up_single = _as_batch(upstream, net.d_out, "upstream gradient")
    if single != up_single or batch.shape[0] != up.shape[0]:
        raise ShapeError(
            f"input rows {batch.shape[0]} and upstream rows {up.shape[0]} disagree"
        )
    _, pres, inputs = _forward_cached(net, batch)
    return _backward_cached(net, pres, inputs, up)


@dataclass(eq=False)
class AdamState:
    """Bias-corrected Adam moments, shape-congruent with the parameters."""

    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0


def init_adam(net: DenseNetwork, learning_rate: float,
              beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    if learning_rate <= 0:
        raise InputError(f"learning rate must be positive, got {learning_rate}")
    if not (0 < beta1 < 1 and 0 < beta2 < 1):
        raise InputError("beta1 and beta2 must lie in (0, 1)")
    return AdamState(
        m_weights=[np.zeros_like(w) for w in net.weights],
        v_weights=[np.zeros_like(w) for w in net.weights],
        m_biases=[np.zeros_like(b) for b in net.biases],
        v_biases=[np.zeros_like(b) for b in net.biases],
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def _adam_update(param, grad, m, v, state, corr1, corr2):
    m *= state.beta1
    m += (1.0 - state.beta1) * grad
    v *= state.beta2
    v += (1.0 - state.beta2) * np.square(grad)
    step = state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
    param -= step


def adam_step(net: DenseNetwork, state: AdamState, grads) -> tuple[DenseNetwork, AdamState]:
    """One in-place bias-corrected Adam update; returns the mutated pair."""
    grad_w, grad_b = grads
    if len(grad_w) != net.n_layers or len(grad_b) != net.n_layers:
        raise ShapeError("gradient lists must have one entry per layer")
    for i in range(net.n_layers):
        if grad_w[i].shape != net.weights[i].shape or grad_b[i].shape != net.biases[i].shape:
            raise ShapeError(f"gradient {i} not congruent with parameters")
        if not (np.isfinite(grad_w[i]).all() and np.isfinite(grad_b[i]).all()):
            raise NumericError(f"non-finite gradient in layer {i}")
    state.step_count += 1
    corr1 = 1.0 - state.beta1 ** state.step_count
    corr2 = 1.0 - state.beta2 ** state.step_count
    for i in range(net.n_layers):
        _adam_update(net.weights[i], grad_w[i], state.m_weights[i], state.v_weights[i],
                     state, corr1, corr2)
        _adam_update(net.biases[i], grad_b[i], state.m_biases[i], state.v_biases[i],
                     state, corr1, corr2)
    return net, state


def network_to_doc(net: DenseNetwork) -> dict:
    """JSON-ready document: {layer_dims, output_activation, weights, biases}."""
    return {
        "layer_dims": list(net.layer_dims),
        "output_activation": net.output_activation,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def network_from_doc(doc: dict) -> DenseNetwork:
    try:
        return DenseNetwork(
            tuple(doc["layer_dims"]),
            [np.asarray(w, dtype=np.float64) for w in doc["weights"]],
            [np.asarray(b, dtype=np.float64) for b in doc["biases"]],
            doc["output_activation"],
        )
    except KeyError as exc:
        raise InputError(f"network document missing field {exc}") from None
