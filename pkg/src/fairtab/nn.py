"""Minimal dense feed-forward network engine.

Plain numpy, full-batch, float64. Supplies exactly what the debiasing loop
and the audit protocol need: forward pass, exact backpropagation, MSE and
cross-entropy losses, SGD/Adam updates, Xavier initialization. Everything
here is a pure function over value types; no shared mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, ShapeError, TrainingError

ACTIVATIONS = ("identity", "relu", "tanh", "sigmoid", "softmax")

PROB_FLOOR = 1e-12  # clip probabilities before log


@dataclass
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str

    def copy(self):
        return Layer(self.weights.copy(), self.bias.copy(), self.activation)


@dataclass
class NetworkParams:
    """Ordered dense layers; layer i feeds layer i+1."""

    layers: list[Layer]

    @property
    def input_width(self):
        return self.layers[0].weights.shape[1]

    @property
    def output_width(self):
        return self.layers[-1].weights.shape[0]

    def copy(self):
        return NetworkParams([layer.copy() for layer in self.layers])

    def is_finite(self):
        return all(
            np.all(np.isfinite(l.weights)) and np.all(np.isfinite(l.bias))
            for l in self.layers
        )

    def validate(self):
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        for i, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {layer.activation!r}")
            out, _ = layer.weights.shape
            if layer.bias.shape != (out,):
                raise ShapeError(
                    f"layer {i}: bias shape {layer.bias.shape} does not match "
                    f"weight rows {out}"
                )
            if i > 0 and layer.weights.shape[1] != self.layers[i - 1].weights.shape[0]:
                raise ShapeError(
                    f"layer {i}: input width {layer.weights.shape[1]} does not "
                    f"chain with layer {i - 1} output "
                    f"{self.layers[i - 1].weights.shape[0]}"
                )
        if not self.is_finite():
            raise InputError("network parameters contain non-finite entries")


@dataclass
class GradientSet:
    """Per-layer gradients, shape-congruent with a NetworkParams.

    ``input_grad`` is the loss gradient with respect to the network input;
    the adversarial coupling needs it to push gradients through the
    reconstruction into the autoencoder.
    """

    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]
    input_grad: np.ndarray | None = None

    def is_finite(self):
        return all(np.all(np.isfinite(g)) for g in self.weight_grads) and all(
            np.all(np.isfinite(g)) for g in self.bias_grads
        )


@dataclass
class OptimizerState:
    algorithm: str  # "sgd" | "adam"
    lr: float
    weight_decay: float = 0.0
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # Adam first/second moments, mirroring the parameter shapes.
    m_w: list[np.ndarray] = field(default_factory=list)
    v_w: list[np.ndarray] = field(default_factory=list)
    m_b: list[np.ndarray] = field(default_factory=list)
    v_b: list[np.ndarray] = field(default_factory=list)

    def copy(self):
        return OptimizerState(
            self.algorithm,
            self.lr,
            self.weight_decay,
            self.step,
            self.beta1,
            self.beta2,
            self.eps,
            [m.copy() for m in self.m_w],
            [v.copy() for v in self.v_w],
            [m.copy() for m in self.m_b],
            [v.copy() for v in self.v_b],
        )


def init_optimizer(params, algorithm="adam", lr=1e-3, weight_decay=0.0):
    if algorithm not in ("sgd", "adam"):
        raise ConfigError(f"unknown optimizer {algorithm!r}")
    if lr < 0:
        raise ConfigError("learning rate must be >= 0")
    if weight_decay < 0:
        raise ConfigError("weight decay must be >= 0")
    state = OptimizerState(algorithm, lr, weight_decay)
    if algorithm == "adam":
        for layer in params.layers:
            state.m_w.append(np.zeros_like(layer.weights))
            state.v_w.append(np.zeros_like(layer.weights))
            state.m_b.append(np.zeros_like(layer.bias))
            state.v_b.append(np.zeros_like(layer.bias))
    return state


def init_params(layer_sizes, activations, seed):
    """Xavier-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.

    ``layer_sizes`` is [d_in, h1, ..., d_out]; ``activations`` has one entry
    per weight layer. Deterministic for a given seed.
    """
    if len(layer_sizes) < 2:
        raise ConfigError("need an input size and at least one layer size")
    if len(activations) != len(layer_sizes) - 1:
        raise ConfigError(
            f"{len(layer_sizes) - 1} layers but {len(activations)} activations"
        )
    if any(int(s) <= 0 for s in layer_sizes):
        raise ConfigError("layer sizes must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(layer_sizes[:-1], layer_sizes[1:], activations):
        if act not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {act!r}")
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append(Layer(w, np.zeros(fan_out), act))
    return NetworkParams(layers)


def _activate(z, activation):
    if activation == "identity":
        return z
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "tanh":
        return np.tanh(z)
    if activation == "sigmoid":
        # split by sign for numerical stability
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if activation == "softmax":
        shifted = z - z.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
    raise ConfigError(f"unknown activation {activation!r}")


def _activation_backward(grad_out, z, a, activation):
    """Map dL/da back to dL/dz for one layer."""
    if activation == "identity":
        return grad_out
    if activation == "relu":
        return grad_out * (z > 0)
    if activation == "tanh":
        return grad_out * (1.0 - a * a)
    if activation == "sigmoid":
        return grad_out * a * (1.0 - a)
    if activation == "softmax":
        # dL/dz_k = a_k * (g_k - sum_j g_j a_j), rowwise
        inner = (grad_out * a).sum(axis=1, keepdims=True)
        return a * (grad_out - inner)
    raise ConfigError(f"unknown activation {activation!r}")


def _check_input(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"input must be 2-D, got shape {x.shape}")
    if x.shape[1] != params.input_width:
        raise ShapeError(
            f"input has {x.shape[1]} columns, network expects {params.input_width}"
        )
    if not np.all(np.isfinite(x)):
        raise InputError("input contains non-finite values")
    return x


def forward(params, x):
    """Row-wise forward pass through every layer."""
    x = _check_input(params, x)
    a = x
    for layer in params.layers:
        a = _activate(a @ layer.weights.T + layer.bias, layer.activation)
    return a


def forward_cache(params, x):
    """Forward pass that also returns the (z, a) pairs backward() needs."""
    x = _check_input(params, x)
    a = x
    cache = []
    for layer in params.layers:
        z = a @ layer.weights.T + layer.bias
        a = _activate(z, layer.activation)
        cache.append((z, a))
    return a, cache


def backward(params, x, output_grad, cache=None):
    """Exact gradients of a scalar loss given its gradient at the output.

    Recomputes the forward activations unless a cache from
    ``forward_cache(params, x)`` for the same input is supplied.
    """
    x = _check_input(params, x)
    if cache is None:
        _, cache = forward_cache(params, x)
    output_grad = np.asarray(output_grad, dtype=np.float64)
    if output_grad.shape != cache[-1][1].shape:
        raise ShapeError(
            f"loss gradient shape {output_grad.shape} does not match network "
            f"output {cache[-1][1].shape}"
        )
    weight_grads = [None] * len(params.layers)
    bias_grads = [None] * len(params.layers)
    grad = output_grad
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        z, a = cache[i]
        prev_a = x if i == 0 else cache[i - 1][1]
        grad_z = _activation_backward(grad, z, a, layer.activation)
        weight_grads[i] = grad_z.T @ prev_a
        bias_grads[i] = grad_z.sum(axis=0)
        grad = grad_z @ layer.weights
    return GradientSet(weight_grads, bias_grads, input_grad=grad)


def optimizer_step(params, grads, state):
    """Apply one SGD or Adam update; returns (new params, new state)."""
    if len(grads.weight_grads) != len(params.layers):
        raise ShapeError("gradient set does not match network layer count")
    if not grads.is_finite():
        raise TrainingError("non-finite gradients")
    new_layers = []
    new_state = state.copy()
    new_state.step = state.step + 1
    t = new_state.step
    for i, layer in enumerate(params.layers):
        gw = grads.weight_grads[i] + state.weight_decay * layer.weights
        gb = grads.bias_grads[i]
        if gw.shape != layer.weights.shape or gb.shape != layer.bias.shape:
            raise ShapeError(f"gradient shapes do not match layer {i}")
        if state.algorithm == "sgd":
            w = layer.weights - state.lr * gw
            b = layer.bias - state.lr * gb
        else:
            new_state.m_w[i] = state.beta1 * state.m_w[i] + (1 - state.beta1) * gw
            new_state.v_w[i] = state.beta2 * state.v_w[i] + (1 - state.beta2) * gw**2
            new_state.m_b[i] = state.beta1 * state.m_b[i] + (1 - state.beta1) * gb
            new_state.v_b[i] = state.beta2 * state.v_b[i] + (1 - state.beta2) * gb**2
            mw_hat = new_state.m_w[i] / (1 - state.beta1**t)
            vw_hat = new_state.v_w[i] / (1 - state.beta2**t)
            mb_hat = new_state.m_b[i] / (1 - state.beta1**t)
            vb_hat = new_state.v_b[i] / (1 - state.beta2**t)
            w = layer.weights - state.lr * mw_hat / (np.sqrt(vw_hat) + state.eps)
            b = layer.bias - state.lr * mb_hat / (np.sqrt(vb_hat) + state.eps)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise TrainingError("parameter update produced non-finite values")
        new_layers.append(Layer(w, b, layer.activation))
    return NetworkParams(new_layers), new_state


def mse(y, x):
    """Mean over all entries of the squared difference."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if y.shape != x.shape:
        raise ShapeError(f"shape mismatch {y.shape} vs {x.shape}")
    d = y - x
    return float(np.mean(d * d))


def mse_gradient(y, x):
    """d mse(y, x) / dy."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if y.shape != x.shape:
        raise ShapeError(f"shape mismatch {y.shape} vs {x.shape}")
    return 2.0 * (y - x) / y.size


def one_hot(labels, n_classes):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ShapeError("labels must be 1-D")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise InputError("label outside [0, n_classes)")
    out = np.zeros((labels.shape[0], n_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _check_probs_targets(probs, targets):
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if probs.shape != targets.shape:
        raise ShapeError(f"shape mismatch {probs.shape} vs {targets.shape}")
    if probs.ndim != 2:
        raise ShapeError("expected 2-D probability matrix")
    if np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
        raise InputError("probability rows must sum to 1 within 1e-6")
    row_sums = targets.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 0) or not np.all(
        (targets == 0) | (targets == 1)
    ):
        raise InputError("target rows must be one-hot")
    return probs, targets


def cross_entropy(probs, targets):
    """-(1/n) sum log p[i, class(i)], probabilities floored at 1e-12."""
    probs, targets = _check_probs_targets(probs, targets)
    picked = (probs * targets).sum(axis=1)
    return float(-np.mean(np.log(np.maximum(picked, PROB_FLOOR))))


def cross_entropy_gradient(probs, targets):
    """d cross_entropy / d probs. Zero where the floor clips."""
    probs, targets = _check_probs_targets(probs, targets)
    n = probs.shape[0]
    grad = np.zeros_like(probs)
    mask = targets > 0
    clipped = probs[mask] < PROB_FLOOR
    vals = -1.0 / (n * np.maximum(probs[mask], PROB_FLOOR))
    vals[clipped] = 0.0
    grad[mask] = vals
    return grad
