"""Linear-chain conditional random field over per-position potentials.

The chain scores a label path y as

    score(y) = sum_i unary[i, y_i] + sum_{i>=1} pairwise[y_{i-1}, y_i]

(no transition into the first position) and defines P(y|X) through the
partition function Z.  Forward/backward recurrences run in the exp domain
with per-position rescaling so that sequences of length 10^4 and beyond
stay representable; the stored ``alpha``/``beta`` tables are the scaled
quantities, with per-position log scales recorded in ``log_scale``.

Under this scaling the tables compose directly into probabilities:

    marginals[i, a]            = alpha[i, a] * beta[i, a]
    P(y_{i-1}=a, y_i=b | X)    = alpha[i-1, a] * trans_mats[i, a, b] * beta[i, b]

where ``trans_mats[i]`` is the scaled transition-and-unary factor
exp(pairwise[a, b] + unary[i, b] - log_scale[i]).

The weighted tables (`augmented_forward_backward`) extend the recurrences
so that each path is additionally weighted by the accumulated per-position
weights at positions carrying one chosen label.  They provide, through
`marginal_functional_grads`, the exact gradient of any functional of the
form  sum_i weights[i] * d P(y_i = target | X) / d(potentials),  which is
the building block for all marginal-based training objectives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError


@dataclass
class CrfParams:
    """Top-layer-to-label weights and label-transition weights."""

    label_weights: np.ndarray  # (n_labels, top_dim)
    trans_weights: np.ndarray  # (n_labels, n_labels)

    def __post_init__(self):
        n = self.label_weights.shape[0]
        if self.trans_weights.shape != (n, n):
            raise ValueError("transition matrix must be square in the label count")
        if not (np.all(np.isfinite(self.label_weights))
                and np.all(np.isfinite(self.trans_weights))):
            raise ValueError("non-finite chain parameters")

    @property
    def n_labels(self) -> int:
        return self.label_weights.shape[0]


@dataclass
class PotentialTable:
    unary: np.ndarray     # (L, n_labels)
    pairwise: np.ndarray  # (n_labels, n_labels), position independent

    @property
    def length(self) -> int:
        return self.unary.shape[0]

    @property
    def n_labels(self) -> int:
        return self.unary.shape[1]


@dataclass
class FBTables:
    alpha: np.ndarray       # (L, S) scaled forward
    beta: np.ndarray        # (L, S) scaled backward
    log_scale: np.ndarray   # (L,) log of the per-position scaling factors
    log_z: float
    marginals: np.ndarray   # (L, S) position-wise label marginals
    trans_mats: np.ndarray  # (L, S, S) scaled factors; index 0 unused

    @property
    def scaling_factors(self) -> np.ndarray:
        return np.exp(self.log_scale)


@dataclass
class AugmentedTables:
    """Weighted forward/backward tables for one target label."""

    alpha_aug: np.ndarray          # (L, S), same scaling as alpha
    beta_aug: np.ndarray           # (L, S), same scaling as beta
    weighted_marginal_sum: float   # sum_i weights[i] * marginals[i, target]


def compute_potentials(top_activations: np.ndarray, params: CrfParams) -> PotentialTable:
    """Unary potentials from top activations; pairwise from the transitions."""
    if top_activations.ndim != 2 or top_activations.shape[1] != params.label_weights.shape[1]:
        raise ValueError(
            f"top activations must be (L, {params.label_weights.shape[1]}), "
            f"got {top_activations.shape}")
    return PotentialTable(
        unary=top_activations @ params.label_weights.T,
        pairwise=params.trans_weights.copy(),
    )


def forward_backward(pot: PotentialTable) -> FBTables:
    """Scaled forward/backward pass with partition value and marginals.

    Raises NumericalError if the potentials are pathological enough to
    produce zero or non-finite mass despite rescaling.
    """
    unary, pairwise = pot.unary, pot.pairwise
    length, n = unary.shape
    if not (np.all(np.isfinite(unary)) and np.all(np.isfinite(pairwise))):
        raise NumericalError("non-finite potentials")

    alpha = np.empty((length, n))
    log_scale = np.empty(length)
    trans_mats = np.zeros((length, n, n))
    pair_max = pairwise.max()

    shift = unary[0].max()
    row = np.exp(unary[0] - shift)
    mass = row.sum()
    if not np.isfinite(mass) or mass <= 0.0:
        raise NumericalError("forward pass lost all mass at position 0")
    alpha[0] = row / mass
    log_scale[0] = np.log(mass) + shift

    for i in range(1, length):
        shift = unary[i].max() + pair_max
        mat = np.exp(pairwise + unary[i][None, :] - shift)
        row = alpha[i - 1] @ mat
        mass = row.sum()
        if not np.isfinite(mass) or mass <= 0.0:
            raise NumericalError(f"forward pass lost all mass at position {i}")
        alpha[i] = row / mass
        log_scale[i] = np.log(mass) + shift
        trans_mats[i] = mat / mass

    beta = np.empty((length, n))
    beta[length - 1] = 1.0
    for i in range(length - 2, -1, -1):
        beta[i] = trans_mats[i + 1] @ beta[i + 1]
    if not np.all(np.isfinite(beta)):
        raise NumericalError("backward pass produced non-finite values")

    marginals = alpha * beta
    log_z = float(log_scale.sum())
    return FBTables(alpha=alpha, beta=beta, log_scale=log_scale,
                    log_z=log_z, marginals=marginals, trans_mats=trans_mats)


def sequence_log_probability(pot: PotentialTable, labels: np.ndarray, fb: FBTables) -> float:
    """log P(labels | X) for one full label path."""
    labels = np.asarray(labels)
    if labels.shape != (pot.length,):
        raise ValueError(f"expected {pot.length} labels, got {labels.shape}")
    score = float(pot.unary[np.arange(pot.length), labels].sum())
    if pot.length > 1:
        score += float(pot.pairwise[labels[:-1], labels[1:]].sum())
    return score - fb.log_z


def decode_posterior(fb: FBTables) -> np.ndarray:
    """Per-position argmax of the marginals; ties take the lowest index."""
    return np.argmax(fb.marginals, axis=1)


def augmented_forward_backward(pot: PotentialTable, fb: FBTables, target: int,
                               weights: np.ndarray) -> AugmentedTables:
    """Weighted tables for the functional sum_i weights[i] * P(y_i = target).

    Each label path contributes its probability mass times the summed
    weights of its positions labeled ``target``; the recurrences mirror the
    plain forward/backward ones with an extra injection term and reuse the
    same per-position scaling.
    """
    length, n = pot.unary.shape
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (length,):
        raise ValueError(f"weights must have length {length}")
    if not 0 <= target < n:
        raise ValueError(f"target label {target} out of range")

    alpha_aug = np.zeros((length, n))
    alpha_aug[0, target] = weights[0] * fb.alpha[0, target]
    for i in range(1, length):
        alpha_aug[i] = alpha_aug[i - 1] @ fb.trans_mats[i]
        alpha_aug[i, target] += weights[i] * fb.alpha[i, target]

    beta_aug = np.zeros((length, n))
    for i in range(length - 2, -1, -1):
        carry = beta_aug[i + 1].copy()
        carry[target] += weights[i + 1] * fb.beta[i + 1, target]
        beta_aug[i] = fb.trans_mats[i + 1] @ carry

    total = float(weights @ fb.marginals[:, target])
    return AugmentedTables(alpha_aug=alpha_aug, beta_aug=beta_aug,
                           weighted_marginal_sum=total)


def marginal_functional_grads(pot: PotentialTable, fb: FBTables, aug: AugmentedTables,
                              target: int, weights: np.ndarray
                              ) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of sum_i weights[i] * P(y_i = target | X) w.r.t. potentials.

    Returns ``(trans_grad, unary_error)`` where ``trans_grad`` is the
    (S, S) derivative with respect to the pairwise weights and
    ``unary_error`` the (L, S) derivative with respect to the unary
    potentials.  ``unary_error`` doubles as the top error signal for
    backpropagation into the feature extractor, and contracts with the top
    activations to give the label-weight gradient.
    """
    length, n = pot.unary.shape
    weights = np.asarray(weights, dtype=float)
    total = aug.weighted_marginal_sum

    unary_error = aug.alpha_aug * fb.beta + fb.alpha * aug.beta_aug - fb.marginals * total

    if length == 1:
        return np.zeros((n, n)), unary_error

    # beta-side companions for the pairwise contraction at transitions into
    # positions 1..L-1: plain beta for the weighted-forward term, and the
    # weighted-backward term with the local injection and -total correction.
    inject = np.zeros((length, n))
    inject[:, target] = weights
    companion = aug.beta_aug + (inject - total) * fb.beta
    trans_grad = (
        np.einsum("ia,iab,ib->ab", aug.alpha_aug[:-1], fb.trans_mats[1:], fb.beta[1:])
        + np.einsum("ia,iab,ib->ab", fb.alpha[:-1], fb.trans_mats[1:], companion[1:])
    )
    return trans_grad, unary_error


def weighted_marginal_grads(pot: PotentialTable, fb: FBTables,
                            weight_table: np.ndarray
                            ) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of sum_{i,u} weight_table[i, u] * P(y_i = u | X).

    Dense-injection form of the per-label machinery: because the augmented
    recurrences are linear in the injected weights, the per-label tables
    summed over all target labels satisfy the same recurrences with the
    whole weight row injected at once.  One forward and one backward pass
    therefore cover every label simultaneously; the result equals the sum
    of `marginal_functional_grads` over the labels.
    """
    length, n = pot.unary.shape
    weight_table = np.asarray(weight_table, dtype=float)
    if weight_table.shape != (length, n):
        raise ValueError(f"weight table must be (L, {n})")

    at = np.empty((length, n))
    at[0] = weight_table[0] * fb.alpha[0]
    for i in range(1, length):
        at[i] = at[i - 1] @ fb.trans_mats[i] + weight_table[i] * fb.alpha[i]
    bt = np.zeros((length, n))
    for i in range(length - 2, -1, -1):
        bt[i] = fb.trans_mats[i + 1] @ (bt[i + 1] + weight_table[i + 1] * fb.beta[i + 1])

    total = float(np.sum(weight_table * fb.marginals))
    unary_error = at * fb.beta + fb.alpha * bt - fb.marginals * total
    if length == 1:
        return np.zeros((n, n)), unary_error
    companion = bt + (weight_table - total) * fb.beta
    trans_grad = (
        np.einsum("ia,iab,ib->ab", at[:-1], fb.trans_mats[1:], fb.beta[1:])
        + np.einsum("ia,iab,ib->ab", fb.alpha[:-1], fb.trans_mats[1:], companion[1:])
    )
    return trans_grad, unary_error


def expected_transition_counts(fb: FBTables) -> np.ndarray:
    """Sum over positions of the pairwise marginals P(y_{i-1}=a, y_i=b)."""
    if fb.alpha.shape[0] == 1:
        n = fb.alpha.shape[1]
        return np.zeros((n, n))
    return np.einsum("ia,iab,ib->ab", fb.alpha[:-1], fb.trans_mats[1:], fb.beta[1:])
