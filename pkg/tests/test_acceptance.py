"""Acceptance suite: one test per release criterion, frozen tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
pass lines and timings.  The regime-comparison criteria (5 and 6) train
real models and dominate the runtime.
"""

import time
import warnings

import numpy as np
import pytest

import convfield as cf
from convfield.model import pack, unpack
from convfield.objectives import ObjectiveKind, RegConfig, objective_value_grad
from convfield.optimize import LbfgsConfig, lbfgs_maximize, lbfgs_maximize_vector
from convfield.stepapprox import build_step_approx, eval_poly

from _oracles import (all_paths, enum_log_z, enum_marginals, max_rel_err,
                      path_scores, direct_pairwise_rank_auc)


def report(num, ok, detail):
    line = f"ACCEPTANCE {num:2d} {'PASS' if ok else 'FAIL'} - {detail}"
    print("\n" + line)
    assert ok, line


def random_instance(rng, n_labels, length, scale=2.0):
    return cf.PotentialTable(
        unary=rng.normal(scale=scale, size=(length, n_labels)),
        pairwise=rng.normal(scale=scale / 2, size=(n_labels, n_labels)))


def test_criterion_01_enumeration_equivalence():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    cases = 0
    families = [(2, 12), (2, 8), (3, 7), (3, 5), (4, 6)]
    while cases < 100:
        n_labels, max_len = families[cases % len(families)]
        length = int(rng.integers(1, max_len + 1))
        pot = random_instance(rng, n_labels, length)
        fb = cf.forward_backward(pot)
        log_z = enum_log_z(pot.unary, pot.pairwise)
        assert abs(fb.log_z - log_z) < 1e-9
        assert np.max(np.abs(fb.marginals - enum_marginals(pot.unary, pot.pairwise))) < 1e-9
        paths = all_paths(n_labels, length)
        scores = path_scores(pot.unary, pot.pairwise, paths)
        for idx in rng.integers(0, len(paths), size=3):
            direct = scores[idx] - log_z
            assert abs(cf.sequence_log_probability(pot, paths[idx], fb) - direct) < 1e-9
        cases += 1
    elapsed = time.perf_counter() - start
    report(1, elapsed < 10.0,
           f"enumeration equivalence on {cases} instances in {elapsed:.1f}s (< 10s)")


def _tiny_dataset(rng):
    n_labels = int(rng.integers(2, 4))
    priors = np.full(n_labels, 1.0 / n_labels)
    priors[-1] = 1.0 - priors[:-1].sum()
    spec = cf.SyntheticSpec(
        num_sequences=2, length_range=(3, 5), alphabet_size=n_labels,
        label_priors=tuple(priors), transition_stickiness=0.3, feature_dim=2,
        emission_separation=1.0, seed=int(rng.integers(0, 2 ** 31)))
    return cf.generate_synthetic(spec)


def _tiny_params(rng, data):
    if rng.integers(0, 2):
        arch = cf.ConvNetArch(layer_sizes=(2, 3, 2), half_windows=(1, 1),
                              activation=("sigmoid", "tanh")[int(rng.integers(0, 2))])
    else:
        arch = cf.ConvNetArch(layer_sizes=(2, 4), half_windows=(1,))
    return arch, cf.init_params(arch, data.alphabet,
                                cf.InitConfig(seed=int(rng.integers(0, 2 ** 31)),
                                              scale=0.4))


def test_criterion_02_gradient_suite():
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    kinds = [ObjectiveKind("likelihood"),
             ObjectiveKind("labelwise", smoothing=15.0),
             ObjectiveKind("auc", degree=7)]
    approx = build_step_approx(7)
    worst = {k.name: 0.0 for k in kinds}
    for kind in kinds:
        for _ in range(20):
            data = _tiny_dataset(rng)
            arch, params = _tiny_params(rng, data)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                out = objective_value_grad(kind, params, data, approx=approx)
                x0 = pack(params)
                numeric = np.empty_like(x0)
                for i in range(x0.size):
                    step = np.zeros_like(x0)
                    step[i] = 1e-5
                    up = objective_value_grad(
                        kind, unpack(x0 + step, arch, len(data.alphabet)),
                        data, approx=approx).value
                    dn = objective_value_grad(
                        kind, unpack(x0 - step, arch, len(data.alphabet)),
                        data, approx=approx).value
                    numeric[i] = (up - dn) / 2e-5
            err = max_rel_err(out.grad, numeric)
            worst[kind.name] = max(worst[kind.name], err)
            assert err < 1e-4, (kind.name, err)
    elapsed = time.perf_counter() - start
    report(2, elapsed < 60.0,
           "gradient suite (20 models x 3 objectives), worst rel err "
           + ", ".join(f"{k}={v:.2e}" for k, v in worst.items())
           + f", {elapsed:.1f}s (< 60s)")


def test_criterion_03_surrogate_decomposition_identity():
    from convfield.objectives import _sequence_tables

    spec = cf.SyntheticSpec(
        num_sequences=10, length_range=(63, 63), alphabet_size=2,
        label_priors=(0.5, 0.5), transition_stickiness=0.3, feature_dim=2,
        emission_separation=1.0, seed=33)
    data = cf.generate_synthetic(spec)
    labels = np.concatenate([s.labels for s in data.sequences])
    n1 = int((labels == 1).sum())
    n0 = labels.size - n1
    assert n0 * n1 <= 10 ** 5
    arch = cf.ConvNetArch(layer_sizes=(2, 3), half_windows=(1,))
    params = cf.init_params(arch, data.alphabet, cf.InitConfig(seed=4, scale=0.4))
    margs = [fb.marginals for _, _, fb in
             (_sequence_tables(params, s) for s in data.sequences)]
    gaps = []
    for degree in (3, 7, 15):
        approx = build_step_approx(degree)
        factorized = cf.auc_dataset(params, data, approx).value
        direct = 0.0
        marg = np.vstack(margs)
        for t in range(2):
            pos = marg[labels == t, t]
            neg = marg[labels != t, t]
            diffs = (pos[:, None] - neg[None, :]).ravel()
            vals = np.polynomial.polynomial.polyval(diffs, approx.mono_coeffs)
            direct += float(vals.sum()) / (pos.size * neg.size)
        gaps.append(abs(factorized - direct))
        assert gaps[-1] < 1e-9, (degree, gaps[-1])
    report(3, True,
           f"surrogate decomposition identity, n0*n1={n0 * n1}, gaps "
           + ", ".join(f"{g:.1e}" for g in gaps) + " (< 1e-9)")


def test_criterion_04_chebyshev_quality():
    a15 = build_step_approx(15)
    assert a15.mono_coeffs[0] == 0.5
    assert np.max(np.abs(a15.mono_coeffs[2::2])) < 1e-12
    grid = np.arange(-1.0, 1.0001, 0.005)
    step = (grid > 0).astype(float) + 0.5 * (grid == 0)
    vals15 = np.array([eval_poly(a15, float(x)) for x in grid])
    interior = np.abs(grid) >= 0.2
    max_err = float(np.max(np.abs((vals15 - step)[interior])))
    assert max_err < 0.08
    l2 = []
    for degree in (3, 7, 15, 31):
        a = build_step_approx(degree)
        vals = np.array([eval_poly(a, float(x)) for x in grid])
        l2.append(float(np.sqrt(np.mean((vals - step) ** 2))))
    assert all(hi > lo for hi, lo in zip(l2, l2[1:]))
    report(4, True,
           f"step approximation: c0=0.5 exact, even coeffs < 1e-12, "
           f"d=15 max err {max_err:.4f} (< 0.08), L2 "
           + " > ".join(f"{v:.4f}" for v in l2))


def _train_and_score(train, test, kind, init, l2, iters, approx=None):
    cfg = LbfgsConfig(max_iterations=iters, grad_tolerance=1e-4)
    params, trace = lbfgs_maximize(
        lambda p: objective_value_grad(kind, p, train, RegConfig(l2=l2),
                                       approx=approx),
        init, cfg)
    return cf.evaluate_model(params, test), trace


def test_criterion_05_imbalanced_regime_ordering():
    start = time.perf_counter()
    approx = build_step_approx(15)
    auc_wins = mcc_wins = 0
    details = []
    for seed in (1, 2, 3, 4, 5):
        def make(count, s):
            return cf.generate_synthetic(cf.SyntheticSpec(
                num_sequences=count, length_range=(100, 100), alphabet_size=2,
                label_priors=(0.95, 0.05), transition_stickiness=0.5,
                feature_dim=4, emission_separation=1.0, seed=s))

        train, test = make(200, seed), make(100, seed + 10000)
        arch = cf.default_arch(4, hidden_layers=1, neurons=8, window=5)
        init = cf.init_params(arch, train.alphabet, cf.InitConfig(seed=seed))
        rep_mle, _ = _train_and_score(train, test, ObjectiveKind("likelihood"),
                                      init, 1e-4, 60)
        rep_lab, _ = _train_and_score(train, test, ObjectiveKind("labelwise"),
                                      init, 1e-4, 60)
        rep_auc, _ = _train_and_score(train, test, ObjectiveKind("auc", degree=15),
                                      init, 1e-4, 60, approx=approx)
        assert 0.7 <= rep_mle.auc[1] <= 0.9, ("likelihood outside tuning regime",
                                              rep_mle.auc[1])
        auc_wins += rep_auc.auc[1] >= rep_lab.auc[1]
        mcc_wins += rep_auc.mean_mcc > rep_lab.mean_mcc
        details.append(f"seed{seed}: auc1 {rep_auc.auc[1]:.3f} vs {rep_lab.auc[1]:.3f}, "
                       f"mcc {rep_auc.mean_mcc:.3f} vs {rep_lab.mean_mcc:.3f}")
    elapsed = time.perf_counter() - start
    ok = auc_wins >= 4 and mcc_wins >= 3 and elapsed < 900.0
    report(5, ok,
           f"imbalanced 95:5 ordering: auc-vs-labelwise AUC wins {auc_wins}/5 "
           f"(need >= 4), mcc wins {mcc_wins}/5 (need >= 3), {elapsed:.0f}s (< 900s); "
           + "; ".join(details))


def test_criterion_06_balanced_regime_parity():
    start = time.perf_counter()
    approx = build_step_approx(15)
    spreads = []
    for seed in (1, 2, 3):
        def make(count, s):
            return cf.generate_synthetic(cf.SyntheticSpec(
                num_sequences=count, length_range=(80, 80), alphabet_size=3,
                label_priors=(0.34, 0.33, 0.33), transition_stickiness=0.4,
                feature_dim=4, emission_separation=1.0, seed=s))

        train, test = make(100, seed), make(60, seed + 10000)
        arch = cf.default_arch(4, hidden_layers=1, neurons=8, window=5)
        init = cf.init_params(arch, train.alphabet, cf.InitConfig(seed=seed))
        aucs = []
        for kind, ap in [(ObjectiveKind("likelihood"), None),
                         (ObjectiveKind("labelwise"), None),
                         (ObjectiveKind("auc", degree=15), approx)]:
            rep, _ = _train_and_score(train, test, kind, init, 1e-4, 50, approx=ap)
            aucs.append(rep.mean_auc)
        spreads.append(max(aucs) - min(aucs))
        assert spreads[-1] <= 0.05, (seed, aucs)
    elapsed = time.perf_counter() - start
    report(6, True,
           "balanced 1:1:1 parity: mean-AUC spreads "
           + ", ".join(f"{s:.3f}" for s in spreads) + f" (<= 0.05), {elapsed:.0f}s")


def test_criterion_07_linear_scaling():
    approx = build_step_approx(15)
    kind = ObjectiveKind("auc", degree=15)

    def eval_time(length):
        data = cf.generate_synthetic(cf.SyntheticSpec(
            num_sequences=1, length_range=(length, length), alphabet_size=3,
            label_priors=(0.34, 0.33, 0.33), transition_stickiness=0.4,
            feature_dim=4, emission_separation=1.5, seed=9))
        arch = cf.default_arch(4, hidden_layers=2, neurons=10, window=5)
        params = cf.init_params(arch, data.alphabet, cf.InitConfig(seed=1))
        objective_value_grad(kind, params, data, approx=approx)  # warm-up
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            objective_value_grad(kind, params, data, approx=approx)
            best = min(best, time.perf_counter() - t0)
        return best

    t1, t2 = eval_time(1000), eval_time(2000)
    ratio = t2 / t1
    report(7, 1.6 <= ratio <= 2.6,
           f"auc objective time L=2000/L=1000 ratio {ratio:.2f} in [1.6, 2.6] "
           f"({t1 * 1e3:.0f}ms vs {t2 * 1e3:.0f}ms)")


def test_criterion_08_metric_correctness():
    from convfield.metrics import ConfusionCounts, empirical_auc, per_label_metrics

    def mcc_of(tp, tn, fp, fn):
        counts = ConfusionCounts(tp=np.array([tp]), tn=np.array([tn]),
                                 fp=np.array([fp]), fn=np.array([fn]))
        return per_label_metrics(counts)[3][0]

    assert mcc_of(50, 50, 0, 0) == 1.0
    assert mcc_of(25, 25, 25, 25) == 0.0
    assert mcc_of(0, 0, 50, 50) == -1.0

    rng = np.random.default_rng(808)
    checked = 0
    for _ in range(10 ** 4):
        n = int(rng.integers(3, 26))
        scores = np.round(rng.uniform(size=n), 1)
        pos = rng.uniform(size=n) < 0.5
        if pos.all() or (~pos).all():
            pos[0] = True
            pos[1] = False
        assert np.isclose(empirical_auc(scores, pos),
                          direct_pairwise_rank_auc(scores, pos), atol=1e-12)
        checked += 1

    scores = rng.uniform(0.01, 0.99, size=200)
    pos = rng.uniform(size=200) < 0.3
    pos[0], pos[1] = True, False
    base = empirical_auc(scores, pos)
    for transform in (lambda s: 10 * s - 4, np.log, lambda s: s ** 5,
                      lambda s: np.exp(3 * s)):
        assert np.isclose(empirical_auc(transform(scores), pos), base, atol=1e-12)
    report(8, True,
           f"metric correctness: Mcc anchors 1/0/-1, rank AUC == pairwise on "
           f"{checked} score sets, monotone-transform invariant")


def test_criterion_09_optimizer_sanity():
    rng = np.random.default_rng(909)
    center = rng.normal(size=50)

    def quad(x):
        d = x - center
        return -float(d @ d), -2.0 * d

    x, trace_q = lbfgs_maximize_vector(quad, np.zeros(50),
                                       LbfgsConfig(grad_tolerance=1e-12))
    quad_err = float(np.max(np.abs(x - center)))
    assert quad_err < 1e-8
    assert len(trace_q.rows) - 1 <= 200

    def neg_rosen(x):
        a, b = x
        v = (1 - a) ** 2 + 100.0 * (b - a * a) ** 2
        g = np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])
        return -v, -g

    x, trace_r = lbfgs_maximize_vector(neg_rosen, np.array([-1.2, 1.0]),
                                       LbfgsConfig(max_iterations=200,
                                                   grad_tolerance=1e-10))
    rosen_val = neg_rosen(x)[0]
    assert rosen_val > -1e-6
    assert len(trace_r.rows) - 1 <= 200
    for trace in (trace_q, trace_r):
        values = [r.value for r in trace.rows]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    report(9, True,
           f"optimizer: quadratic max-err {quad_err:.1e} (< 1e-8), rosenbrock "
           f"value {rosen_val:.1e} (> -1e-6) in {len(trace_r.rows) - 1} iterations, "
           "traces monotone")


def test_criterion_10_determinism_and_round_trips(tmp_path):
    from convfield.cli import main

    data = tmp_path / "d.tsv"
    assert main(["synth", "--out", str(data), "--sequences", "10", "--length", "15",
                 "--priors", "0.8,0.2", "--separation", "1.5", "--stickiness", "0.3",
                 "--feature-dim", "3", "--seed", "6"]) == 0

    args = lambda m: ["train", "--data", str(data), "--model-out", str(m),
                      "--objective", "auc", "--degree", "7",
                      "--arch", "layers=1,neurons=4,window=3", "--iterations", "12",
                      "--l2", "1e-4", "--seed", "2", "--deterministic"]
    m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
    assert main(args(m1)) == 0
    assert main(args(m2)) == 0
    assert m1.read_bytes() == m2.read_bytes()

    ds = cf.load_dataset(data)
    second = tmp_path / "d2.tsv"
    cf.save_dataset(ds, second)
    assert data.read_bytes() == second.read_bytes()

    params, alphabet, _ = cf.load_model(m1)
    m3 = tmp_path / "m3.json"
    cf.save_model(m3, params, alphabet, {})
    back, _, _ = cf.load_model(m3)
    assert np.array_equal(pack(back), pack(params))
    report(10, True,
           "determinism: byte-identical deterministic retrains, dataset and "
           "model files round-trip exactly")
