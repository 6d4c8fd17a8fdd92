"""Command-line interface: train, predict, evaluate, gradcheck, synth, bench.

Exit codes: 0 success, 1 usage error, 2 data/compatibility error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from .convnet import conv_forward, default_arch
from .crf import compute_potentials, decode_posterior, forward_backward
from .data import (Dataset, SyntheticSpec, generate_synthetic, label_frequencies,
                   load_dataset, save_dataset)
from .errors import (CompatibilityError, DataFormatError, DegenerateLabelingError,
                     NumericalError)
from .metrics import evaluate_model
from .model import pack, unpack
from .modelio import load_model, save_model
from .objectives import ObjectiveKind, RegConfig, objective_value_grad
from .optimize import InitConfig, LbfgsConfig, TrainingTrace, init_params, lbfgs_maximize
from .stepapprox import build_step_approx

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

OBJECTIVE_NAMES = {"mle": "likelihood", "label": "labelwise", "auc": "auc"}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_arch(text: str, input_dim: int):
    fields = dict(layers=5, neurons=50, window=11)
    if text:
        for part in text.split(","):
            key, sep, value = part.partition("=")
            if not sep or key not in fields:
                raise _UsageError(f"bad --arch component {part!r}")
            try:
                fields[key] = int(value)
            except ValueError:
                raise _UsageError(f"bad --arch value {part!r}") from None
    try:
        return default_arch(input_dim, hidden_layers=fields["layers"],
                            neurons=fields["neurons"], window=fields["window"])
    except ValueError as e:
        raise _UsageError(str(e)) from None


def _parse_priors(text: str) -> tuple[float, ...]:
    try:
        priors = tuple(float(tok) for tok in text.split(","))
    except ValueError:
        raise _UsageError(f"bad --priors {text!r}") from None
    return priors


def _parse_length(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition(":")
    try:
        low = int(lo)
        high = int(hi) if sep else low
    except ValueError:
        raise _UsageError(f"bad --length {text!r}") from None
    return low, high


def _objective_kind(args) -> ObjectiveKind:
    return ObjectiveKind(name=OBJECTIVE_NAMES[args.objective],
                         smoothing=args.smoothing, degree=args.degree)


def _threads(args) -> int:
    if getattr(args, "deterministic", False):
        return 1
    return max(1, args.threads)


def _print_trace(trace: TrainingTrace, out=None):
    out = out if out is not None else sys.stdout
    print("iteration\tvalue\tgrad_max_norm\tstep\tseconds", file=out)
    for row in trace.rows:
        print(f"{row.iteration}\t{row.value:.10g}\t{row.grad_max_norm:.6g}"
              f"\t{row.step:.6g}\t{row.seconds:.3f}", file=out)
    print(f"# status: {trace.status}", file=out)


def _check_compat(data: Dataset, params, alphabet):
    if data.feature_dim != params.arch.input_dim:
        raise CompatibilityError(
            f"model expects {params.arch.input_dim} features, data has {data.feature_dim}")
    if data.alphabet.names != alphabet.names:
        raise CompatibilityError(
            f"model alphabet {alphabet.names} does not match data alphabet "
            f"{data.alphabet.names}")


def _train_model(data: Dataset, kind: ObjectiveKind, args):
    arch = _parse_arch(args.arch, data.feature_dim)
    params0 = init_params(arch, data.alphabet,
                          InitConfig(seed=args.seed, scale=args.init_scale))
    reg = RegConfig(l2=args.l2)
    cfg = LbfgsConfig(max_iterations=args.iterations, grad_tolerance=args.grad_tol,
                      memory=args.memory)
    approx = build_step_approx(kind.degree) if kind.name == "auc" else None
    threads = _threads(args)

    def objective(p):
        return objective_value_grad(kind, p, data, reg, approx=approx, threads=threads)

    return lbfgs_maximize(objective, params0, cfg)


def cmd_train(args) -> int:
    data = load_dataset(args.data)
    if not data.fully_labeled:
        raise DataFormatError("training data must be fully labeled")
    kind = _objective_kind(args)
    start = time.perf_counter()
    params, trace = _train_model(data, kind, args)
    elapsed = time.perf_counter() - start
    metadata = {
        "objective": args.objective,
        "degree": args.degree,
        "smoothing": args.smoothing,
        "l2": args.l2,
        "seed": args.seed,
        "iterations": len(trace.rows) - 1,
        "status": trace.status,
    }
    if not args.deterministic:  # wall clock would break byte-level reproducibility
        metadata["train_seconds"] = round(elapsed, 3)
    save_model(args.model_out, params, data.alphabet, metadata)
    _print_trace(trace)
    return EXIT_OK


def cmd_predict(args) -> int:
    params, alphabet, _ = load_model(args.model)
    data = load_dataset(args.data)
    _check_compat(data, params, alphabet)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("#labels " + ",".join(alphabet.names) + "\n")
        for seq in data.sequences:
            trace = conv_forward(seq.features, params.arch, params.conv)
            fb = forward_backward(compute_potentials(trace[-1], params.crf))
            decoded = decode_posterior(fb)
            fh.write("\n> " + seq.id + "\n")
            for i in range(seq.length):
                feats = " ".join(repr(float(v)) for v in seq.features[i])
                margs = " ".join(repr(float(v)) for v in fb.marginals[i])
                fh.write(f"{alphabet.names[int(decoded[i])]}\t{feats}\t{margs}\n")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    params, alphabet, _ = load_model(args.model)
    data = load_dataset(args.data)
    _check_compat(data, params, alphabet)
    if not data.fully_labeled:
        raise DataFormatError("evaluation data must be fully labeled")
    report = evaluate_model(params, data)
    print(report.to_text())
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())
            fh.write("\n")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    spec = SyntheticSpec(
        num_sequences=2, length_range=(4, 5), alphabet_size=min(3, max(2, args.labels)),
        label_priors=_uniform_priors(min(3, max(2, args.labels))),
        transition_stickiness=0.2, feature_dim=2, emission_separation=1.0,
        seed=args.seed)
    data = generate_synthetic(spec)
    arch = _parse_arch(args.arch or "layers=2,neurons=3,window=3", data.feature_dim)
    params = init_params(arch, data.alphabet, InitConfig(seed=args.seed + 1, scale=0.3))
    kind = _objective_kind(args)
    approx = build_step_approx(kind.degree) if kind.name == "auc" else None
    reg = RegConfig(l2=args.l2)

    x0 = pack(params)

    def value_at(x):
        p = unpack(x, arch, len(data.alphabet))
        return objective_value_grad(kind, p, data, reg, approx=approx).value

    analytic = objective_value_grad(kind, params, data, reg, approx=approx).grad
    if args.corrupt_gradient:
        analytic = analytic + 0.5
    eps = args.epsilon
    worst_err, worst_idx = 0.0, -1
    for i in range(x0.size):
        step = np.zeros_like(x0)
        step[i] = eps
        numeric = (value_at(x0 + step) - value_at(x0 - step)) / (2 * eps)
        denom = max(abs(analytic[i]), abs(numeric), 1e-2)
        err = abs(analytic[i] - numeric) / denom
        if err > worst_err:
            worst_err, worst_idx = err, i
    ok = worst_err < args.tolerance
    print(f"objective={args.objective} params={x0.size} "
          f"max_rel_err={worst_err:.3e} worst_coordinate={worst_idx} "
          f"tolerance={args.tolerance:g} -> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERIC


def _uniform_priors(n: int) -> tuple[float, ...]:
    base = [1.0 / n] * n
    base[-1] = 1.0 - sum(base[:-1])
    return tuple(base)


def cmd_synth(args) -> int:
    priors = _parse_priors(args.priors)
    spec = SyntheticSpec(
        num_sequences=args.sequences,
        length_range=_parse_length(args.length),
        alphabet_size=len(priors),
        label_priors=priors,
        transition_stickiness=args.stickiness,
        feature_dim=args.feature_dim,
        emission_separation=args.separation,
        seed=args.seed,
    )
    save_dataset(generate_synthetic(spec), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    priors = _parse_priors(args.priors)
    length = _parse_length(args.length)

    def make(count, seed):
        return generate_synthetic(SyntheticSpec(
            num_sequences=count, length_range=length, alphabet_size=len(priors),
            label_priors=priors, transition_stickiness=args.stickiness,
            feature_dim=args.feature_dim, emission_separation=args.separation,
            seed=seed))

    train_data = make(args.train_sequences, args.seed)
    test_data = make(args.test_sequences, args.seed + 1)
    imbalance = label_frequencies(train_data)

    results = {}
    for objective in ("mle", "label", "auc"):
        sub = argparse.Namespace(**vars(args))
        sub.objective = objective
        kind = _objective_kind(sub)
        start = time.perf_counter()
        params, trace = _train_model(train_data, kind, sub)
        seconds = time.perf_counter() - start
        report = evaluate_model(params, test_data)
        results[objective] = {
            "report": report,
            "train_seconds": seconds,
            "iterations": len(trace.rows) - 1,
            "status": trace.status,
        }

    names = train_data.alphabet.names
    print("train label frequencies:\t"
          + "\t".join(f"{n}={f:.4f}" for n, f in zip(names, imbalance)))
    print("objective\tqx\tmean_mcc\tmean_auc\ttrain_seconds\titerations")
    for objective, res in results.items():
        rep = res["report"]
        print(f"{objective}\t{rep.qx:.4f}\t{rep.mean_mcc:.4f}\t{rep.mean_auc:.4f}"
              f"\t{res['train_seconds']:.2f}\t{res['iterations']}")
    if args.json:
        doc = {
            "imbalance": {n: float(f) for n, f in zip(names, imbalance)},
            "objectives": {
                obj: {
                    "metrics": res["report"].to_json_dict(),
                    "train_seconds": res["train_seconds"],
                    "iterations": res["iterations"],
                    "status": res["status"],
                }
                for obj, res in results.items()
            },
        }
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _add_shared(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--deterministic", action="store_true",
                   help="force single-threaded, ordered reduction")


def _add_training(p: argparse.ArgumentParser, with_objective: bool = True):
    if with_objective:
        p.add_argument("--objective", choices=sorted(OBJECTIVE_NAMES), required=True)
    p.add_argument("--arch", default="",
                   help="layers=<hidden>,neurons=<per layer>,window=<odd>")
    p.add_argument("--degree", type=int, default=15, help="auc polynomial degree")
    p.add_argument("--lambda", dest="smoothing", type=float, default=15.0,
                   help="labelwise sigmoid steepness")
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--init-scale", type=float, default=0.1)
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--grad-tol", type=float, default=1e-5)
    p.add_argument("--memory", type=int, default=10)


def build_parser() -> _Parser:
    parser = _Parser(prog="convfield",
                     description="Sequence labeling with a convolutional neural field")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a model and write it to disk")
    p.add_argument("--data", required=True)
    p.add_argument("--model-out", required=True)
    _add_training(p)
    _add_shared(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="decode labels and marginals for a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_shared(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a labeled dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--json", default="", help="also write the report as JSON")
    _add_shared(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="compare analytic and numeric gradients")
    p.add_argument("--objective", choices=sorted(OBJECTIVE_NAMES), required=True)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--labels", type=int, default=2)
    p.add_argument("--arch", default="")
    p.add_argument("--degree", type=int, default=7)
    p.add_argument("--lambda", dest="smoothing", type=float, default=15.0)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)
    _add_shared(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="generate a synthetic dataset file")
    p.add_argument("--out", required=True)
    p.add_argument("--sequences", type=int, required=True)
    p.add_argument("--length", required=True, help="fixed length or min:max")
    p.add_argument("--priors", required=True, help="comma-separated, sums to 1")
    p.add_argument("--stickiness", type=float, default=0.0)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--feature-dim", type=int, default=4)
    _add_shared(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="compare the three objectives on synthetic data")
    p.add_argument("--train-sequences", type=int, default=200)
    p.add_argument("--test-sequences", type=int, default=100)
    p.add_argument("--length", default="100")
    p.add_argument("--priors", required=True)
    p.add_argument("--stickiness", type=float, default=0.0)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--feature-dim", type=int, default=4)
    p.add_argument("--json", default="")
    _add_training(p, with_objective=False)
    _add_shared(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, CompatibilityError, DegenerateLabelingError,
            FileNotFoundError, ValueError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
