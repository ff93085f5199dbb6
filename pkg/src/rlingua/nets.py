"""Dense feed-forward networks with analytic gradients, Adam, and Polyak averaging.

Everything runs in float64 so unit tests can compare against hand computations
at tight tolerances.  Inputs may be single vectors of shape ``(d,)`` or batches
of shape ``(n, d)``; parameter gradients returned for a batch are summed over
the batch dimension.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_VERSION = 1


class Mlp:
    """Multilayer perceptron with ReLU hidden layers.

    The output head is either ``linear`` or ``tanh``.  A tanh head is scaled
    per dimension by ``output_scale`` and therefore stays strictly inside
    ``(-scale_d, +scale_d)``.
    """

    def __init__(self, layer_sizes, weights, biases, output_activation="linear",
                 output_scale=None):
        layer_sizes = [int(s) for s in layer_sizes]
        if len(layer_sizes) < 2 or any(s <= 0 for s in layer_sizes):
            raise ValueError(f"layer_sizes must be >=2 positive ints, got {layer_sizes}")
        if output_activation not in ("linear", "tanh"):
            raise ValueError(f"unknown output activation {output_activation!r}")
        if len(weights) != len(layer_sizes) - 1 or len(biases) != len(layer_sizes) - 1:
            raise ValueError("one weight matrix and bias vector per layer required")
        for l, (w, b) in enumerate(zip(weights, biases)):
            want = (layer_sizes[l + 1], layer_sizes[l])
            if w.shape != want:
                raise ValueError(f"weight {l} has shape {w.shape}, expected {want}")
            if b.shape != (layer_sizes[l + 1],):
                raise ValueError(f"bias {l} has shape {b.shape}, expected ({layer_sizes[l + 1]},)")
        self.layer_sizes = layer_sizes
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.output_activation = output_activation
        if output_activation == "tanh":
            if output_scale is None:
                output_scale = np.ones(layer_sizes[-1])
            output_scale = np.asarray(output_scale, dtype=np.float64)
            if output_scale.shape != (layer_sizes[-1],):
                raise ValueError("output_scale must have one entry per output dimension")
            self.output_scale = output_scale
        else:
            self.output_scale = None

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def output_dim(self):
        return self.layer_sizes[-1]

    def copy(self) -> "Mlp":
        return Mlp(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.output_activation,
            None if self.output_scale is None else self.output_scale.copy(),
        )

    def same_topology(self, other: "Mlp") -> bool:
        return (self.layer_sizes == other.layer_sizes
                and self.output_activation == other.output_activation)


@dataclass
class AdamState:
    """First/second moment estimates and step counter for one Mlp."""

    weight_m: list
    weight_v: list
    bias_m: list
    bias_v: list
    step_count: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_stab: float = 1e-8

    @classmethod
    def for_net(cls, net: Mlp, learning_rate=1e-3, beta1=0.9, beta2=0.999,
                epsilon_stab=1e-8) -> "AdamState":
        return cls(
            weight_m=[np.zeros_like(w) for w in net.weights],
            weight_v=[np.zeros_like(w) for w in net.weights],
            bias_m=[np.zeros_like(b) for b in net.biases],
            bias_v=[np.zeros_like(b) for b in net.biases],
            step_count=0,
            learning_rate=float(learning_rate),
            beta1=float(beta1),
            beta2=float(beta2),
            epsilon_stab=float(epsilon_stab),
        )


@dataclass
class GradientBundle:
    """Parameter gradients mirroring an Mlp, plus the gradient w.r.t. the input."""

    weight_grads: list
    bias_grads: list
    input_gradient: np.ndarray

    def add_(self, other: "GradientBundle") -> "GradientBundle":
        """Accumulate another bundle's parameter gradients in place.

        Input gradients refer to different inputs, so they are not combined.
        """
        for g, o in zip(self.weight_grads, other.weight_grads):
            g += o
        for g, o in zip(self.bias_grads, other.bias_grads):
            g += o
        return self


def mlp_init(layer_sizes, rng: np.random.Generator, output_activation="linear",
             output_scale=None, final_layer_scale=1.0) -> Mlp:
    """Create an Mlp with uniform(+-1/sqrt(fan_in)) weights and biases.

    ``final_layer_scale`` shrinks the last layer; actors use 1e-3 so initial
    actions are near zero.
    """
    weights, biases = [], []
    n_layers = len(layer_sizes) - 1
    for l in range(n_layers):
        fan_in = layer_sizes[l]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(layer_sizes[l + 1], layer_sizes[l]))
        b = rng.uniform(-bound, bound, size=layer_sizes[l + 1])
        if l == n_layers - 1 and final_layer_scale != 1.0:
            w *= final_layer_scale
            b *= final_layer_scale
        weights.append(w)
        biases.append(b)
    return Mlp(layer_sizes, weights, biases, output_activation, output_scale)


def _as_batch(x, dim, what):
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"{what} has shape {np.asarray(x).shape}, expected (..., {dim})")
    return x, squeeze


def _forward_trace(net: Mlp, x):
    """Forward pass keeping pre-activations; returns (activations, pre_acts)."""
    acts = [x]
    pres = []
    h = x
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        pres.append(z)
        if l < last:
            h = np.maximum(z, 0.0)
        elif net.output_activation == "tanh":
            h = np.tanh(z) * net.output_scale
        else:
            h = z
        acts.append(h)
    return acts, pres


def mlp_forward(net: Mlp, x) -> np.ndarray:
    """Evaluate the network on a vector or a batch of row vectors."""
    xb, squeeze = _as_batch(x, net.input_dim, "input")
    out = _forward_trace(net, xb)[0][-1]
    return out[0] if squeeze else out


def mlp_backward(net: Mlp, x, output_gradient) -> GradientBundle:
    """Analytic gradients of ``sum(output * output_gradient)``.

    For batched inputs the parameter gradients are summed over the batch while
    ``input_gradient`` keeps one row per input.
    """
    xb, squeeze = _as_batch(x, net.input_dim, "input")
    gb, gsq = _as_batch(output_gradient, net.output_dim, "output_gradient")
    if gb.shape[0] != xb.shape[0]:
        raise ValueError(
            f"batch mismatch: {xb.shape[0]} inputs vs {gb.shape[0]} output gradients")
    if squeeze != gsq:
        raise ValueError("input and output_gradient must both be vectors or both batches")

    acts, pres = _forward_trace(net, xb)
    if net.output_activation == "tanh":
        t = np.tanh(pres[-1])
        delta = gb * net.output_scale * (1.0 - t * t)
    else:
        delta = gb

    weight_grads = [None] * len(net.weights)
    bias_grads = [None] * len(net.biases)
    for l in range(len(net.weights) - 1, -1, -1):
        weight_grads[l] = delta.T @ acts[l]
        bias_grads[l] = delta.sum(axis=0)
        delta = delta @ net.weights[l]
        if l > 0:
            delta = delta * (pres[l - 1] > 0.0)
    input_gradient = delta[0] if squeeze else delta
    return GradientBundle(weight_grads, bias_grads, input_gradient)


def _adam_update(p, g, m, v, lr, b1, b2, eps, t):
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * g * g
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    p -= lr * m_hat / (np.sqrt(v_hat) + eps)


def adam_step(net: Mlp, grads: GradientBundle, state: AdamState) -> None:
    """Apply one bias-corrected Adam update in place and bump ``step_count``."""
    if len(grads.weight_grads) != len(net.weights):
        raise ValueError("gradient bundle does not match network depth")
    for w, g in zip(net.weights, grads.weight_grads):
        if w.shape != g.shape:
            raise ValueError(f"weight gradient shape {g.shape} != {w.shape}")
    state.step_count += 1
    t = state.step_count
    for l in range(len(net.weights)):
        _adam_update(net.weights[l], grads.weight_grads[l], state.weight_m[l],
                     state.weight_v[l], state.learning_rate, state.beta1,
                     state.beta2, state.epsilon_stab, t)
        _adam_update(net.biases[l], grads.bias_grads[l], state.bias_m[l],
                     state.bias_v[l], state.learning_rate, state.beta1,
                     state.beta2, state.epsilon_stab, t)


def polyak_update(target: Mlp, online: Mlp, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, elementwise."""
    if not target.same_topology(online):
        raise ValueError("polyak_update requires identical topologies")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    for tw, ow in zip(target.weights, online.weights):
        tw *= 1.0 - tau
        tw += tau * ow
    for tb, ob in zip(target.biases, online.biases):
        tb *= 1.0 - tau
        tb += tau * ob


def net_to_arrays(net: Mlp, prefix: str) -> dict:
    """Flatten a network into npz-ready arrays under a key prefix."""
    out = {
        f"{prefix}.layer_sizes": np.asarray(net.layer_sizes, dtype=np.int64),
        f"{prefix}.output_activation": np.asarray(net.output_activation),
    }
    if net.output_scale is not None:
        out[f"{prefix}.output_scale"] = net.output_scale
    for l in range(len(net.weights)):
        out[f"{prefix}.w{l}"] = net.weights[l]
        out[f"{prefix}.b{l}"] = net.biases[l]
    return out


def net_from_arrays(data, prefix: str) -> Mlp:
    layer_sizes = [int(s) for s in data[f"{prefix}.layer_sizes"]]
    activation = str(data[f"{prefix}.output_activation"])
    scale_key = f"{prefix}.output_scale"
    scale = data[scale_key] if scale_key in data else None
    weights = [data[f"{prefix}.w{l}"] for l in range(len(layer_sizes) - 1)]
    biases = [data[f"{prefix}.b{l}"] for l in range(len(layer_sizes) - 1)]
    return Mlp(layer_sizes, weights, biases, activation, scale)


def adam_to_arrays(state: AdamState, prefix: str) -> dict:
    out = {
        f"{prefix}.meta": np.asarray(json.dumps({
            "step_count": state.step_count,
            "learning_rate": state.learning_rate,
            "beta1": state.beta1,
            "beta2": state.beta2,
            "epsilon_stab": state.epsilon_stab,
        })),
    }
    for l in range(len(state.weight_m)):
        out[f"{prefix}.wm{l}"] = state.weight_m[l]
        out[f"{prefix}.wv{l}"] = state.weight_v[l]
        out[f"{prefix}.bm{l}"] = state.bias_m[l]
        out[f"{prefix}.bv{l}"] = state.bias_v[l]
    return out


def adam_from_arrays(data, prefix: str, n_layers: int) -> AdamState:
    meta = json.loads(str(data[f"{prefix}.meta"]))
    return AdamState(
        weight_m=[data[f"{prefix}.wm{l}"] for l in range(n_layers)],
        weight_v=[data[f"{prefix}.wv{l}"] for l in range(n_layers)],
        bias_m=[data[f"{prefix}.bm{l}"] for l in range(n_layers)],
        bias_v=[data[f"{prefix}.bv{l}"] for l in range(n_layers)],
        step_count=int(meta["step_count"]),
        learning_rate=meta["learning_rate"],
        beta1=meta["beta1"],
        beta2=meta["beta2"],
        epsilon_stab=meta["epsilon_stab"],
    )


def save_checkpoint(path, net: Mlp, adam: AdamState | None = None) -> None:
    """Write a single-network checkpoint; round-trips bit-exactly."""
    payload = {"version": np.asarray(CHECKPOINT_VERSION, dtype=np.int64)}
    payload.update(net_to_arrays(net, "net"))
    if adam is not None:
        payload.update(adam_to_arrays(adam, "adam"))
    np.savez(path, **payload)


def load_checkpoint(path):
    """Load a checkpoint written by :func:`save_checkpoint`.

    Returns ``(net, adam_or_None)``.
    """
    with np.load(path, allow_pickle=False) as data:
        data = dict(data.items())
    version = int(data["version"])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    net = net_from_arrays(data, "net")
    adam = None
    if "adam.meta" in data:
        adam = adam_from_arrays(data, "adam", len(net.weights))
    return net, adam
