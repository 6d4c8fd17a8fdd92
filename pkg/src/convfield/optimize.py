"""Batch L-BFGS maximization with strong Wolfe line search.

The optimizer minimizes the negated objective using the two-loop
recursion over a bounded history of curvature pairs.  Accepted steps
satisfy the strong Wolfe conditions, so the recorded objective values are
non-decreasing; the best-seen iterate is returned even if a late line
search fails.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .convnet import ConvNetArch
from .crf import CrfParams
from .data import LabelAlphabet
from .model import ModelParams, pack, unpack


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 10
    max_iterations: int = 200
    grad_tolerance: float = 1e-5     # on the max-norm of the gradient
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_line_search_steps: int = 40

    def __post_init__(self):
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.memory < 1 or self.max_iterations < 0:
            raise ValueError("memory and iteration budget must be positive")


@dataclass(frozen=True)
class InitConfig:
    seed: int = 0
    scale: float = 0.1  # uniform [-scale, scale] for conv and label weights


@dataclass
class TraceRow:
    iteration: int
    value: float
    grad_max_norm: float
    step: float
    seconds: float


@dataclass
class TrainingTrace:
    rows: list[TraceRow] = field(default_factory=list)
    status: str = "running"  # converged | max_iterations | line_search_failed


def init_params(arch: ConvNetArch, alphabet: LabelAlphabet,
                cfg: InitConfig = InitConfig()) -> ModelParams:
    """Seeded uniform init for conv and label weights; zero transitions."""
    rng = np.random.default_rng(cfg.seed)
    conv = [rng.uniform(-cfg.scale, cfg.scale, size=shape)
            for shape in arch.weight_shapes()]
    n = len(alphabet)
    label_weights = rng.uniform(-cfg.scale, cfg.scale, size=(n, arch.top_dim))
    trans_weights = np.zeros((n, n))
    return ModelParams(arch=arch, conv=conv,
                       crf=CrfParams(label_weights=label_weights,
                                     trans_weights=trans_weights))


def _finite_or_inf(v: float) -> float:
    return v if np.isfinite(v) else np.inf


class _LineSearchBudget(Exception):
    pass


def _zoom(phi, lo, f_lo, g_lo, hi, f_hi, f0, g0, c1, c2, budget):
    for _ in range(budget[0]):
        # safeguarded quadratic interpolation using the low endpoint slope
        denom = f_hi - f_lo - g_lo * (hi - lo)
        if np.isfinite(denom) and abs(denom) > 1e-18:
            cand = lo - 0.5 * g_lo * (hi - lo) ** 2 / denom
        else:
            cand = 0.5 * (lo + hi)
        span = abs(hi - lo)
        if not np.isfinite(cand) or abs(cand - lo) < 0.1 * span or abs(cand - hi) < 0.1 * span:
            cand = 0.5 * (lo + hi)
        f_c, g_c = phi(cand)
        budget[0] -= 1
        if not np.isfinite(f_c) or f_c > f0 + c1 * cand * g0 or f_c >= f_lo:
            hi, f_hi = cand, _finite_or_inf(f_c)
        else:
            if abs(g_c) <= -c2 * g0:
                return cand, f_c, g_c
            if g_c * (hi - lo) >= 0:
                hi, f_hi = lo, f_lo
            lo, f_lo, g_lo = cand, f_c, g_c
        if abs(hi - lo) < 1e-16:
            break
    raise _LineSearchBudget


def _strong_wolfe(phi, f0, g0, a_init, c1, c2, max_steps):
    """Strong Wolfe search on phi(a); returns (a, f, slope) or raises."""
    if g0 >= 0:
        raise _LineSearchBudget  # not a descent direction
    budget = [max_steps]
    a_prev, f_prev, g_prev = 0.0, f0, g0
    a = a_init
    first = True
    while budget[0] > 0:
        f_a, g_a = phi(a)
        budget[0] -= 1
        if not np.isfinite(f_a) or f_a > f0 + c1 * a * g0 or (f_a >= f_prev and not first):
            return _zoom(phi, a_prev, f_prev, g_prev, a, _finite_or_inf(f_a),
                         f0, g0, c1, c2, budget)
        if abs(g_a) <= -c2 * g0:
            return a, f_a, g_a
        if g_a >= 0:
            return _zoom(phi, a, f_a, g_a, a_prev, f_prev, f0, g0, c1, c2, budget)
        a_prev, f_prev, g_prev = a, f_a, g_a
        a = 2.0 * a
        first = False
    raise _LineSearchBudget


def lbfgs_maximize_vector(value_grad, x0: np.ndarray, cfg: LbfgsConfig = LbfgsConfig()
                          ) -> tuple[np.ndarray, TrainingTrace]:
    """Maximize a callable x -> (value, grad) over a flat vector.

    Returns the best-seen point and the per-iteration trace.
    """
    start = time.perf_counter()
    x = np.asarray(x0, dtype=float).copy()

    def neg(xv):
        v, g = value_grad(xv)
        return -float(v), -np.asarray(g, dtype=float)

    f, g = neg(x)
    if not np.isfinite(f):
        raise ValueError("objective is non-finite at the starting point")
    trace = TrainingTrace()
    trace.rows.append(TraceRow(0, -f, float(np.abs(g).max(initial=0.0)), 0.0,
                               time.perf_counter() - start))
    best_f, best_x = f, x.copy()

    s_hist: deque[np.ndarray] = deque(maxlen=cfg.memory)
    y_hist: deque[np.ndarray] = deque(maxlen=cfg.memory)
    rho_hist: deque[float] = deque(maxlen=cfg.memory)

    def direction(grad):
        q = grad.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if y_hist:
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
            q *= gamma
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = rho * (y @ q)
            q += s * (a - b)
        return -q

    for it in range(1, cfg.max_iterations + 1):
        gmax = float(np.abs(g).max(initial=0.0))
        if gmax <= cfg.grad_tolerance:
            trace.status = "converged"
            return best_x, trace
        d = direction(g)
        slope = float(d @ g)
        if slope >= 0:
            s_hist.clear(), y_hist.clear(), rho_hist.clear()
            d = -g
            slope = float(d @ g)

        last_eval = {}  # step -> (value, full gradient), avoids a re-evaluation

        def phi(a, _d=d, _x=x):
            fv, gv = neg(_x + a * _d)
            last_eval.clear()
            last_eval[a] = (fv, gv)
            return fv, float(gv @ _d)

        a_init = min(1.0, 1.0 / max(1.0, float(np.abs(g).sum()))) if it == 1 else 1.0
        try:
            a, f_new, _ = _strong_wolfe(phi, f, slope, a_init,
                                        cfg.wolfe_c1, cfg.wolfe_c2,
                                        cfg.max_line_search_steps)
        except _LineSearchBudget:
            trace.status = "line_search_failed"
            return best_x, trace

        x_new = x + a * d
        if a in last_eval:
            f_val, g_new = last_eval[a]
        else:
            f_val, g_new = neg(x_new)
        s, y = x_new - x, g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_hist.append(s), y_hist.append(y), rho_hist.append(1.0 / sy)
        x, f, g = x_new, f_val, g_new
        if f < best_f:
            best_f, best_x = f, x.copy()
        trace.rows.append(TraceRow(it, -f, float(np.abs(g).max(initial=0.0)),
                                   float(a), time.perf_counter() - start))

    if trace.status == "running":
        gmax = float(np.abs(g).max(initial=0.0))
        trace.status = "converged" if gmax <= cfg.grad_tolerance else "max_iterations"
    return best_x, trace


def lbfgs_maximize(objective, init: ModelParams, cfg: LbfgsConfig = LbfgsConfig()
                   ) -> tuple[ModelParams, TrainingTrace]:
    """Maximize a model-level objective (params -> ValueGrad)."""
    arch, n_labels = init.arch, init.n_labels

    def vec_objective(x):
        vg = objective(unpack(x, arch, n_labels))
        return vg.value, vg.grad

    best_x, trace = lbfgs_maximize_vector(vec_objective, pack(init), cfg)
    return unpack(best_x, arch, n_labels), trace
