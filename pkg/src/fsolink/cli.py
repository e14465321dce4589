"""Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

Es/N0 convention: Es is the mean constellation energy (1) and N0 the total
complex noise variance, so N0 = 10**(-EsN0_dB / 10).
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .channel import parse_turbulence, sample_intensity, scintillation_index
from .config import parse_config
from .exceptions import ConfigError, ParameterDomainError
from .neural import NetworkSpec, gradient_check, init_network, kink_free_probe, softmax_cross_entropy
from .numerics import derive_substream
from .pipelines import KINDS, LinkPipeline, resolve_kind

GRADCHECK_TOLERANCE = 1e-4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _cmd_sweep(args):
    cfg = parse_config(args.config)
    if args.jobs is not None:
        cfg.jobs = args.jobs
    out = args.out or cfg.output
    records = harness.run_sweep(cfg)
    report = harness.immunity_report(records, cfg.immunity_es_n0_db)
    if out:
        harness.write_csv(records, out)
        if report:
            harness.write_immunity_csv(report, str(Path(out).with_suffix(".immunity.csv")))
    else:
        harness._write_records(records, sys.stdout)
    for row in report:
        print(f"# immunity {row['regime']} @ {row['es_n0_db']:g} dB: "
              f"SER(e)/SER(b) = {row['ratio_e_over_b']:.4g}", file=sys.stderr)
    return 0


def _cmd_train(args):
    cfg = parse_config(args.config)
    t = cfg.train
    pipe = LinkPipeline(
        kind=resolve_kind(args.kind), M=cfg.M, responsivity=cfg.responsivity,
        hidden_layers=cfg.hidden_layers, neurons=cfg.neurons, activation=cfg.activation,
        batch_size=t.batch_size, dataset_batches=t.dataset_batches, iterations=t.iterations,
        optimizer=t.optimizer, learning_rate=t.learning_rate, train_es_n0_db=t.es_n0_db,
        turbulence=t.turbulence.label, temperature=t.temperature, fresh_samples=t.fresh_samples,
        random_state=cfg.seed,
    ).fit()
    pipe.save(args.out)
    trace = pipe.loss_trace_
    if trace:
        print(f"{pipe.kind_}: loss {trace[0]:.6g} -> {trace[-1]:.6g} over {len(trace)} iterations")
    else:
        print(f"{pipe.kind_}: nothing to train")
    print(f"saved {args.out}")
    return 0


def _cmd_moments(args):
    params = parse_turbulence(args.regime)
    draws = sample_intensity(derive_substream(args.seed, 0), params, args.samples)
    mean = float(np.mean(draws))
    si = float(np.var(draws) / mean ** 2)
    print(f"regime {params.label}: alpha={params.alpha:g} beta={params.beta:g} samples={args.samples}")
    print(f"mean intensity        {mean:.6f}")
    print(f"scintillation index   {si:.6f} (analytic {scintillation_index(params):.6f})")
    return 0


def gradcheck_shapes(M=16, hidden_layers=4, neurons=40, activation="relu"):
    """Network shapes used by the trainable structures: detector, shaper, estimator."""
    return {
        "detector": NetworkSpec(2, M, hidden_layers, neurons, activation, "softmax"),
        "shaper": NetworkSpec(M, 2, hidden_layers, neurons, activation, "linear_pair"),
        "estimator": NetworkSpec(2, 2, hidden_layers, neurons, activation, "linear_pair"),
    }


def run_gradcheck(seed=0, batch=32, M=16, step=1e-5):
    """Max relative backprop error per network shape."""
    results = {}
    for i, (name, spec) in enumerate(gradcheck_shapes(M).items()):
        rng = derive_substream(seed, i)
        net = init_network(spec, rng)
        for b in net.biases:
            b += 0.1 * rng.standard_normal(b.shape)
        if spec.input_dim == M:
            pool = np.eye(M)[rng.integers(M, 200 * batch)]
        else:
            pool = rng.standard_normal((200 * batch, spec.input_dim))
        probe = kink_free_probe(net, pool, batch)
        if spec.output_head == "softmax":
            targets = np.eye(spec.output_dim)[rng.integers(spec.output_dim, batch)]

            def loss_fn(logits, targets=targets):
                return softmax_cross_entropy(logits, targets)
        else:
            goal = rng.standard_normal((batch, spec.output_dim))

            def loss_fn(out, goal=goal):
                diff = out - goal
                return 0.5 * np.sum(diff * diff) / len(out), diff / len(out)
        results[name] = gradient_check(net, loss_fn, probe, step)
    return results


def _cmd_gradcheck(args):
    results = run_gradcheck(args.seed, args.batch, args.m)
    ok = True
    for name, err in results.items():
        passed = err < GRADCHECK_TOLERANCE
        ok &= passed
        print(f"{name:10s} max relative error {err:.3e} {'ok' if passed else 'FAIL'}")
    return 0 if ok else 2


def _cmd_oracle(args):
    print(f"{harness.awgn_qam_ser_analytic(args.m, args.esn0):.10g}")
    return 0


def build_parser():
    p = _Parser(prog="fsolink", description="Gamma-Gamma FSO link simulator with learned transceivers.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", help="SER vs Es/N0 for every configured kind and regime",
                       description="Es/N0 uses N0 = total complex noise variance, Es = 1.")
    s.add_argument("config")
    s.add_argument("--out", help="CSV path (default: config 'output', else stdout)")
    s.add_argument("--jobs", type=int)
    s.set_defaults(func=_cmd_sweep)

    t = sub.add_parser("train", help="train one structure and save it")
    t.add_argument("config")
    t.add_argument("--kind", required=True, help=f"one of {', '.join(KINDS)} (or a-f)")
    t.add_argument("--out", required=True)
    t.set_defaults(func=_cmd_train)

    m = sub.add_parser("moments", help="empirical Gamma-Gamma intensity moments")
    m.add_argument("--regime", required=True, help="weak | moderate | strong | custom:alpha,beta")
    m.add_argument("--samples", type=int, default=10 ** 6)
    m.add_argument("--seed", type=int, default=0)
    m.set_defaults(func=_cmd_moments)

    g = sub.add_parser("gradcheck", help="backprop vs central differences for the pipeline network shapes")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--batch", type=int, default=32)
    g.add_argument("--m", type=int, default=16)
    g.set_defaults(func=_cmd_gradcheck)

    o = sub.add_parser("oracle", help="analytic M-QAM SER on an unfaded AWGN link")
    o.add_argument("--m", type=int, required=True)
    o.add_argument("--esn0", type=float, required=True)
    o.set_defaults(func=_cmd_oracle)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParameterDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
