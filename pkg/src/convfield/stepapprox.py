"""Polynomial approximation of the 0/1 step indicator on [-1, 1].

The approximation is a degree-d polynomial in monomial form, built from a
Chebyshev series.  The monomial coefficients ``mono_coeffs`` allow the
pairwise ranking sum over score differences to be factorized into
per-position power sums via the binomial pair coefficients ``pair_coeffs``:

    sum_l pair_coeffs[mu, l] * x**l * y**(mu-l)  ==  mono_coeffs[mu] * (x-y)**mu

The target of the Chebyshev projection is a steep regularized step (a tanh
ramp of half-width ``_TRANSITION_HALF_WIDTH``) rather than the exact
discontinuous step: a hard 0/1 target leaves Gibbs ripples of ~0.09 at
degree 15, too large away from the transition, while the regularized
target keeps the grid error below 0.08 for |x| >= 0.2 at degree 15 and
converges monotonically in L2 as the degree grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_DEGREE = 63
DEFAULT_DEGREE = 15

# Half-width of the tanh transition used as the projection target, and the
# number of Chebyshev-Gauss quadrature nodes (power of two keeps the
# constant-term quadrature weights exact in binary floating point).
_TRANSITION_HALF_WIDTH = 0.08
_QUADRATURE_NODES = 4096


@dataclass(frozen=True)
class StepApprox:
    """Degree-d polynomial approximation of the indicator delta(x > 0)."""

    degree: int
    mono_coeffs: np.ndarray  # (degree+1,) monomial coefficients, low order first
    pair_coeffs: np.ndarray  # (degree+1, degree+1) lower-triangular binomial expansion

    def __post_init__(self):
        if self.mono_coeffs.shape != (self.degree + 1,):
            raise ValueError("coefficient vector does not match degree")


def _regularized_step(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(x / _TRANSITION_HALF_WIDTH))


def chebyshev_series_coeffs(degree: int, nodes: int = _QUADRATURE_NODES) -> np.ndarray:
    """Chebyshev series coefficients of the regularized step by quadrature.

    The step minus 1/2 is odd, so every even-order coefficient vanishes
    identically and the constant term is exactly 1/2; only the odd
    coefficients are computed numerically, from nodes in (0, pi/2) paired
    with their mirror images.
    """
    theta = (2.0 * np.arange(1, nodes + 1) - 1.0) * np.pi / (2.0 * nodes)
    half = theta[theta < np.pi / 2.0]
    odd_part = _regularized_step(np.cos(half)) - 0.5
    coeffs = np.zeros(degree + 1)
    coeffs[0] = 0.5
    for k in range(1, degree + 1, 2):
        coeffs[k] = (4.0 / nodes) * np.sum(odd_part * np.cos(k * half))
    return coeffs


def build_step_approx(degree: int = DEFAULT_DEGREE) -> StepApprox:
    """Construct the degree-d step approximation in monomial form.

    ``degree`` must lie in [1, 63]; the upper cap bounds the conditioning of
    the Chebyshev-to-monomial conversion in double precision.
    """
    if not 1 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must be in [1, {MAX_DEGREE}], got {degree}")
    series = chebyshev_series_coeffs(degree)
    mono = np.polynomial.chebyshev.cheb2poly(series)
    mono = np.asarray(mono, dtype=float)
    if mono.shape[0] < degree + 1:  # trailing zero-degree case
        mono = np.pad(mono, (0, degree + 1 - mono.shape[0]))
    pair = np.zeros((degree + 1, degree + 1))
    for mu in range(degree + 1):
        for low in range(mu + 1):
            pair[mu, low] = mono[mu] * math.comb(mu, low) * (-1.0) ** (mu - low)
    return StepApprox(degree=degree, mono_coeffs=mono, pair_coeffs=pair)


def _check_domain(x: float) -> None:
    if abs(x) > 1.0:
        raise ValueError(f"argument {x} outside [-1, 1]")


def eval_poly(approx: StepApprox, x: float) -> float:
    """Evaluate the approximation at x in [-1, 1] (Horner scheme)."""
    _check_domain(x)
    acc = 0.0
    for c in approx.mono_coeffs[::-1]:
        acc = acc * x + c
    return acc


def eval_poly_derivative(approx: StepApprox, x: float) -> float:
    """Evaluate the derivative of the approximation at x in [-1, 1]."""
    _check_domain(x)
    acc = 0.0
    degree = approx.degree
    for mu in range(degree, 0, -1):
        acc = acc * x + mu * approx.mono_coeffs[mu]
    return acc
