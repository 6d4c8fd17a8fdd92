"""Training objectives: log-likelihood, labelwise accuracy, ranking AUC.

Every objective exposes the same surface: a scalar value to MAXIMIZE and
its gradient over all parameters as one flat vector in the shared layout.
The labelwise and AUC objectives are functionals of the position-wise
marginals; both reduce to weighted-marginal gradients computed by the
chain's augmented forward/backward tables, batched per target label.

The AUC objective scores, for each label, how well that label's marginal
probability ranks its positions above the rest.  The pairwise ranking sum
is factorized through the step-approximation's binomial pair coefficients
into per-position power sums, making one evaluation linear in the total
sequence length.  Power sums are taken in the variable u = P - 1/2
(an exact reparametrization of the same polynomial identity) to avoid the
heavy cancellation that raw powers of P produce at higher degrees.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .convnet import conv_backward, conv_forward
from .crf import (compute_potentials, expected_transition_counts,
                  forward_backward, sequence_log_probability,
                  weighted_marginal_grads)
from .data import Dataset, LabeledSequence
from .errors import DegenerateLabelingError
from .model import ModelParams, pack, pack_arrays
from .stepapprox import StepApprox

DEFAULT_SMOOTHING = 15.0

_POWER_SHIFT = 0.5


@dataclass(frozen=True)
class ObjectiveKind:
    """One of 'likelihood', 'labelwise' (sigmoid smoothing) or 'auc'."""

    name: str
    smoothing: float = DEFAULT_SMOOTHING  # labelwise sigmoid steepness
    degree: int = 15                      # auc polynomial degree

    def __post_init__(self):
        if self.name not in ("likelihood", "labelwise", "auc"):
            raise ValueError(f"unknown objective {self.name!r}")
        if self.smoothing <= 0:
            raise ValueError("smoothing must be positive")


@dataclass(frozen=True)
class RegConfig:
    """Uniform L2 penalty: value -= l2 * ||theta||^2, grad -= 2 * l2 * theta."""

    l2: float = 0.0

    def __post_init__(self):
        if self.l2 < 0:
            raise ValueError("l2 coefficient must be >= 0")


@dataclass
class ValueGrad:
    value: float
    grad: np.ndarray  # flat, shared parameter layout


def _sequence_tables(params: ModelParams, seq: LabeledSequence):
    trace = conv_forward(seq.features, params.arch, params.conv)
    pot = compute_potentials(trace[-1], params.crf)
    fb = forward_backward(pot)
    return trace, pot, fb


def _assemble(params: ModelParams, trace, unary_error: np.ndarray,
              trans_grad: np.ndarray) -> np.ndarray:
    """Flat gradient from the unary error signal and transition gradient."""
    label_grad = unary_error.T @ trace[-1]
    conv_grads = conv_backward(trace, params.arch, params.conv,
                               unary_error, params.crf.label_weights)
    return pack_arrays(conv_grads, label_grad, trans_grad)


def loglik_seq(params: ModelParams, seq: LabeledSequence) -> ValueGrad:
    """log P(labels | features) and its gradient for one sequence."""
    if seq.labels is None:
        raise ValueError(f"sequence {seq.id!r} is unlabeled")
    trace, pot, fb = _sequence_tables(params, seq)
    value = sequence_log_probability(pot, seq.labels, fb)

    n = params.n_labels
    one_hot = np.zeros((seq.length, n))
    one_hot[np.arange(seq.length), seq.labels] = 1.0
    unary_error = one_hot - fb.marginals

    trans_grad = -expected_transition_counts(fb)
    if seq.length > 1:
        np.add.at(trans_grad, (seq.labels[:-1], seq.labels[1:]), 1.0)
    return ValueGrad(value=value, grad=_assemble(params, trace, unary_error, trans_grad))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


def runner_up_labels(marginals: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per position, the non-true label with the largest marginal."""
    masked = marginals.copy()
    masked[np.arange(len(labels)), labels] = -np.inf
    return np.argmax(masked, axis=1)


def labelwise_seq(params: ModelParams, seq: LabeledSequence,
                  smoothing: float = DEFAULT_SMOOTHING,
                  runners: np.ndarray | None = None) -> ValueGrad:
    """Smoothed count of positions where the true label's marginal wins.

    Each position contributes a sigmoid of the margin between the true
    label's marginal and the runner-up label's.  The runner-up is treated
    as locally constant for the gradient; tests may pin it via ``runners``.
    """
    if seq.labels is None:
        raise ValueError(f"sequence {seq.id!r} is unlabeled")
    trace, pot, fb = _sequence_tables(params, seq)
    length, n = fb.marginals.shape
    idx = np.arange(length)
    if runners is None:
        runners = runner_up_labels(fb.marginals, seq.labels)

    margin = fb.marginals[idx, seq.labels] - fb.marginals[idx, runners]
    q = _sigmoid(smoothing * margin)
    value = float(q.sum())
    q_slope = smoothing * q * (1.0 - q)

    weight_table = np.zeros((length, n))
    weight_table[idx, seq.labels] += q_slope
    weight_table[idx, runners] -= q_slope
    trans_grad, unary_error = weighted_marginal_grads(pot, fb, weight_table)
    return ValueGrad(value=value, grad=_assemble(params, trace, unary_error, trans_grad))


def _shifted_power_sums(marg_col: np.ndarray, mask: np.ndarray, degree: int) -> np.ndarray:
    u = marg_col[mask] - _POWER_SHIFT
    if u.size == 0:
        return np.zeros(degree + 1)
    return np.vander(u, degree + 1, increasing=True).sum(axis=0)


def auc_dataset(params: ModelParams, data: Dataset, approx: StepApprox) -> ValueGrad:
    """Polynomial ranking-AUC surrogate summed over labels, with gradient.

    For label t with n1 positive and n0 negative positions the surrogate is
    the mean of the step polynomial over all positive-negative marginal
    differences, computed in factorized form.  Labels with no positive or
    no negative positions are skipped with a warning; if every label is
    skipped the labeling is degenerate and an error is raised.
    """
    if not data.fully_labeled:
        raise ValueError("auc objective needs fully labeled data")
    d = approx.degree
    n_labels = len(data.alphabet)
    pair = approx.pair_coeffs

    cached = []
    pos_counts = np.zeros(n_labels, dtype=np.int64)
    total_positions = 0
    s_sums = np.zeros((n_labels, d + 1))
    v_sums = np.zeros((n_labels, d + 1))
    for seq in data.sequences:
        trace, pot, fb = _sequence_tables(params, seq)
        cached.append((seq, trace, pot, fb))
        pos_counts += np.bincount(seq.labels, minlength=n_labels)
        total_positions += seq.length
        for t in range(n_labels):
            mask = seq.labels == t
            s_sums[t] += _shifted_power_sums(fb.marginals[:, t], mask, d)
            v_sums[t] += _shifted_power_sums(fb.marginals[:, t], ~mask, d)

    neg_counts = total_positions - pos_counts
    kept = [t for t in range(n_labels) if pos_counts[t] > 0 and neg_counts[t] > 0]
    for t in range(n_labels):
        if t not in kept:
            warnings.warn(
                f"label {data.alphabet.names[t]!r} has no "
                f"{'positive' if pos_counts[t] == 0 else 'negative'} positions; "
                "skipped in the auc objective", stacklevel=2)
    if not kept:
        raise DegenerateLabelingError("degenerate labeling: no label has both classes")

    value = 0.0
    # per-label polynomials (in u = P - 1/2) giving each position's weight
    # in the gradient: one for positive positions, one for negative ones
    pos_poly = np.zeros((n_labels, d))
    neg_poly = np.zeros((n_labels, d))
    for t in kept:
        norm = 1.0 / (pos_counts[t] * neg_counts[t])
        for mu in range(d + 1):
            low = np.arange(mu + 1)
            value += norm * float(pair[mu, low] @ (s_sums[t, low] * v_sums[t, mu - low]))
        for low in range(1, d + 1):
            mus = np.arange(low, d + 1)
            pos_poly[t, low - 1] = low * norm * float(
                pair[mus, low] @ v_sums[t, mus - low])
        for m in range(1, d + 1):
            lows = np.arange(0, d - m + 1)
            neg_poly[t, m - 1] = m * norm * float(
                pair[lows + m, lows] @ s_sums[t, lows])

    grad = None
    for seq, trace, pot, fb in cached:
        weight_table = np.zeros((seq.length, n_labels))
        u = fb.marginals - _POWER_SHIFT
        for t in kept:
            mask = seq.labels == t
            weight_table[:, t] = np.where(
                mask,
                np.polynomial.polynomial.polyval(u[:, t], pos_poly[t]),
                np.polynomial.polynomial.polyval(u[:, t], neg_poly[t]),
            )
        trans_grad, unary_error = weighted_marginal_grads(pot, fb, weight_table)
        part = _assemble(params, trace, unary_error, trans_grad)
        grad = part if grad is None else grad + part
    return ValueGrad(value=value, grad=grad)


def _sum_over_sequences(fn, params: ModelParams, data: Dataset,
                        threads: int) -> ValueGrad:
    def one(seq):
        try:
            return fn(params, seq)
        except Exception as e:
            raise type(e)(f"sequence {seq.id!r}: {e}") from e

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, data.sequences))
    else:
        parts = [one(seq) for seq in data.sequences]
    value = 0.0
    grad = np.zeros_like(parts[0].grad)
    for p in parts:  # fixed order keeps the reduction deterministic
        value += p.value
        grad += p.grad
    return ValueGrad(value=value, grad=grad)


def objective_value_grad(kind: ObjectiveKind, params: ModelParams, data: Dataset,
                         reg: RegConfig = RegConfig(),
                         approx: StepApprox | None = None,
                         threads: int = 1) -> ValueGrad:
    """Dataset objective value and flat gradient, minus the L2 penalty.

    For the auc kind a prebuilt ``approx`` may be supplied to avoid
    rebuilding the polynomial on every call.
    """
    if not data.fully_labeled:
        raise ValueError("training objectives need fully labeled data")
    if kind.name == "likelihood":
        out = _sum_over_sequences(loglik_seq, params, data, threads)
    elif kind.name == "labelwise":
        out = _sum_over_sequences(
            lambda p, s: labelwise_seq(p, s, smoothing=kind.smoothing),
            params, data, threads)
    else:
        if approx is None:
            from .stepapprox import build_step_approx
            approx = build_step_approx(kind.degree)
        out = auc_dataset(params, data, approx)

    if reg.l2 > 0.0:
        flat = pack(params)
        out.value -= reg.l2 * float(flat @ flat)
        out.grad -= 2.0 * reg.l2 * flat
    if not (np.isfinite(out.value) and np.all(np.isfinite(out.grad))):
        from .errors import NumericalError
        raise NumericalError("objective produced non-finite value or gradient")
    return out
