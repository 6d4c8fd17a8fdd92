"""Windowed convolutional feature extractor over sequences.

Layer 1 is the raw feature matrix.  Each transition k applies a shared
position-independent weight stack W[k] of shape (2*N_k+1, M_{k+1}, M_k):
the pre-activation at position i sums windowed contributions from
positions i+n for n in [-N_k, N_k], with out-of-range positions
contributing zero.  The top layer's activations feed the chain model's
unary potentials; its error signal propagates back through the same
windows to weight gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# activation -> (forward, derivative expressed in the output value)
ACTIVATIONS = {
    "sigmoid": (_sigmoid, lambda v: v * (1.0 - v)),
    "tanh": (np.tanh, lambda v: 1.0 - v * v),
}


@dataclass(frozen=True)
class ConvNetArch:
    """Layer widths (input first), per-transition half-windows, activation."""

    layer_sizes: tuple[int, ...]
    half_windows: tuple[int, ...]
    activation: str = "sigmoid"

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and a top layer")
        if any(m < 1 for m in self.layer_sizes):
            raise ValueError("layer widths must be >= 1")
        if len(self.half_windows) != len(self.layer_sizes) - 1:
            raise ValueError("one half-window per layer transition required")
        if any(n < 0 for n in self.half_windows):
            raise ValueError("half-windows must be >= 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def num_layers(self) -> int:
        return len(self.layer_sizes)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def top_dim(self) -> int:
        return self.layer_sizes[-1]

    def weight_shapes(self) -> list[tuple[int, int, int]]:
        return [
            (2 * n + 1, self.layer_sizes[k + 1], self.layer_sizes[k])
            for k, n in enumerate(self.half_windows)
        ]


def default_arch(input_dim: int, hidden_layers: int = 5, neurons: int = 50,
                 window: int = 11, activation: str = "sigmoid") -> ConvNetArch:
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    half = (window - 1) // 2
    return ConvNetArch(
        layer_sizes=(input_dim,) + (neurons,) * hidden_layers,
        half_windows=(half,) * hidden_layers,
        activation=activation,
    )


def check_weights(arch: ConvNetArch, weights: list[np.ndarray]) -> None:
    shapes = arch.weight_shapes()
    if len(weights) != len(shapes):
        raise ValueError(f"expected {len(shapes)} weight stacks, got {len(weights)}")
    for k, (w, shape) in enumerate(zip(weights, shapes)):
        if w.shape != shape:
            raise ValueError(f"weight stack {k}: expected shape {shape}, got {w.shape}")


def conv_forward(features: np.ndarray, arch: ConvNetArch,
                 weights: list[np.ndarray]) -> list[np.ndarray]:
    """Run the feed-forward pass; returns activations per layer.

    The returned trace has one (L, M_k) matrix per layer; entry 0 is the
    input itself and the last entry holds the top-layer activations.
    """
    if features.ndim != 2 or features.shape[1] != arch.input_dim:
        raise ValueError(
            f"features must be (L, {arch.input_dim}), got {features.shape}")
    check_weights(arch, weights)
    act, _ = ACTIVATIONS[arch.activation]
    length = features.shape[0]
    trace = [features]
    for k, w in enumerate(weights):
        half = arch.half_windows[k]
        pre = np.zeros((length, w.shape[1]))
        h = trace[-1]
        for n in range(-half, half + 1):
            lo, hi = max(0, -n), min(length, length - n)
            if lo < hi:
                pre[lo:hi] += h[lo + n:hi + n] @ w[n + half].T
        trace.append(act(pre))
    return trace


def conv_backward(trace: list[np.ndarray], arch: ConvNetArch,
                  weights: list[np.ndarray], top_error: np.ndarray,
                  label_weights: np.ndarray) -> list[np.ndarray]:
    """Backpropagate a top error signal to gradients of every weight stack.

    ``top_error`` is the (L, n_labels) derivative of the objective with
    respect to the unary potentials; ``label_weights`` is the
    (n_labels, M_K) matrix mapping top activations to those potentials.
    Returns one gradient array per weight stack, shaped like the weights.
    """
    check_weights(arch, weights)
    length = trace[0].shape[0]
    if top_error.shape != (length, label_weights.shape[0]):
        raise ValueError("top_error shape does not match sequence/labels")
    if label_weights.shape[1] != arch.top_dim:
        raise ValueError("label_weights width does not match top layer")
    _, deriv = ACTIVATIONS[arch.activation]

    # error w.r.t. the top layer's pre-activations
    delta = deriv(trace[-1]) * (top_error @ label_weights)
    grads: list[np.ndarray] = [np.zeros_like(w) for w in weights]
    for k in range(len(weights) - 1, -1, -1):
        w = weights[k]
        half = arch.half_windows[k]
        h = trace[k]
        for n in range(-half, half + 1):
            lo, hi = max(0, -n), min(length, length - n)
            if lo < hi:
                grads[k][n + half] = delta[lo:hi].T @ h[lo + n:hi + n]
        if k > 0:
            down = np.zeros_like(h)
            for n in range(-half, half + 1):
                lo, hi = max(0, -n), min(length, length - n)
                if lo < hi:
                    down[lo + n:hi + n] += delta[lo:hi] @ w[n + half]
            delta = deriv(h) * down
    return grads
