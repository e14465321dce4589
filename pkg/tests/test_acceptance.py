"""End-to-end acceptance checks.

Each test records one pass/fail line, printed in the terminal summary.
Run on their own with ``pytest tests/test_acceptance.py -v``.
"""
import math

import numpy as np

from fsolink.channel import NO_FADING, TurbulenceParams, sample_intensity, scintillation_index
from fsolink.cli import gradcheck_shapes, main, run_gradcheck
from fsolink.config import ExperimentConfig
from fsolink.harness import awgn_qam_ser_analytic, immunity_report, measure_ser, read_csv, run_sweep
from fsolink.numerics import derive_substream
from fsolink.pipelines import KINDS, LinkPipeline, NaiveBaseline, TrainConfig

DESK = dict(batch_size=4096, iterations=300, learning_rate=0.005, random_state=1)


def desk_pipeline(kind, regime="moderate", es_n0_db=14.0):
    return LinkPipeline(kind=kind, turbulence=regime, train_es_n0_db=es_n0_db, **DESK).fit()


def test_gamma_gamma_moments(acceptance_report):
    worst_mean = worst_si = 0.0
    for i, name in enumerate(("weak", "moderate", "strong")):
        params = TurbulenceParams.named(name)
        draws = sample_intensity(derive_substream(2024, i), params, 10 ** 6)
        mean = draws.mean()
        si = draws.var() / mean ** 2
        worst_mean = max(worst_mean, abs(mean - 1.0))
        worst_si = max(worst_si, abs(si / scintillation_index(params) - 1.0))
    ok = worst_mean <= 0.005 and worst_si <= 0.02
    acceptance_report(1, ok, f"moments: worst mean dev {worst_mean:.2e}, worst SI rel dev {worst_si:.2e}")
    assert ok


def test_awgn_oracle_equivalence(acceptance_report):
    pipe = LinkPipeline(kind="a").fit()
    details, ok = [], True
    for i, db in enumerate((6.0, 10.0, 14.0)):
        rec = measure_ser(pipe, NO_FADING, db, derive_substream(77, i), 10 ** 6, 1000)
        expected = awgn_qam_ser_analytic(16, db)
        z = abs(rec.ser - expected) / rec.standard_error
        ok &= z <= 3 and rec.errors_observed >= 300
        details.append(f"{db:g}dB z={z:.2f} errs={rec.errors_observed}")
    acceptance_report(2, ok, "AWGN oracle: " + ", ".join(details))
    assert ok


def test_gradient_integrity(acceptance_report):
    assert [tuple(s.layer_sizes) for s in gradcheck_shapes().values()] == [
        (2, 40, 40, 40, 40, 16), (16, 40, 40, 40, 40, 2), (2, 40, 40, 40, 40, 2)]
    results = run_gradcheck(seed=0, batch=32, M=16)
    ok = max(results.values()) < 1e-4
    acceptance_report(3, ok, "gradcheck: " + ", ".join(f"{k} {v:.2e}" for k, v in results.items()))
    assert ok


def test_perfect_csi_parity(acceptance_report):
    a = LinkPipeline(kind="a").fit()
    b = desk_pipeline("b")
    ra = measure_ser(a, "moderate", 14.0, derive_substream(9, 0), 10 ** 6, 1000)
    rb = measure_ser(b, "moderate", 14.0, derive_substream(9, 0), 10 ** 6, 1000)
    ok = rb.ser <= 1.3 * ra.ser
    acceptance_report(4, ok, f"parity: SER(b)={rb.ser:.4f} vs 1.3*SER(a)={1.3 * ra.ser:.4f}")
    assert ok


def test_estimator_beats_naive(acceptance_report):
    naive = measure_ser(NaiveBaseline(16), "strong", 20.0, derive_substream(11, 0), 10 ** 6, 1000)
    details, ok = [f"naive {naive.ser:.4f}"], naive.errors_observed >= 200
    for kind in ("d", "e"):
        rec = measure_ser(desk_pipeline(kind, "strong", 20.0), "strong", 20.0,
                          derive_substream(11, 0), 10 ** 6, 1000)
        ok &= rec.errors_observed >= 200 and rec.ser < naive.ser
        details.append(f"{kind} {rec.ser:.4f}")
    acceptance_report(5, ok, "estimator utility: " + ", ".join(details))
    assert ok


def test_physical_orderings(acceptance_report):
    cfg = ExperimentConfig(kinds=("a",), baseline=False, max_symbols=300000, target_errors=1000, seed=21)
    by = {(r.regime, r.es_n0_db): r for r in run_sweep(cfg)}
    grid = cfg.grid

    def within(lo, hi):
        return lo.ser <= hi.ser + 3 * math.hypot(lo.standard_error, hi.standard_error)

    monotone = all(within(by[reg, b], by[reg, a]) for reg in cfg.regimes for a, b in zip(grid, grid[1:]))
    ordered = all(within(by["weak", db], by["moderate", db]) and within(by["moderate", db], by["strong", db])
                  for db in grid)
    ok = monotone and ordered
    acceptance_report(6, ok, f"orderings over {len(grid)} points: monotone={monotone}, regime order={ordered}")
    assert ok


def test_sweep_determinism(tmp_path, acceptance_report):
    cfg = tmp_path / "det.cfg"
    cfg.write_text("kinds = a, c, f\nregimes = weak, strong\nes_n0_start = 8\nes_n0_stop = 16\n"
                   "es_n0_step = 8\nmax_symbols = 20000\ntarget_errors = 100\nbatch_size = 512\n"
                   "iterations = 20\nseed = 3\n")
    first, second = tmp_path / "one.csv", tmp_path / "two.csv"
    codes = (main(["sweep", str(cfg), "--out", str(first)]), main(["sweep", str(cfg), "--out", str(second)]))
    ok = codes == (0, 0) and first.read_bytes() == second.read_bytes()
    acceptance_report(7, ok, f"determinism: {len(read_csv(first))} records, identical={ok}")
    assert ok


def test_training_sanity(acceptance_report):
    details, ok = [], True
    for kind in KINDS[1:]:
        trace = np.asarray(desk_pipeline(kind).loss_trace_)
        ratio = trace[-1] / trace[0]
        ok &= bool(np.all(np.isfinite(trace))) and ratio <= 0.5
        details.append(f"{kind[0]} {ratio:.2f}")
    acceptance_report(8, ok, "final/initial loss: " + ", ".join(details))
    assert ok


def test_regime_immunity_report(acceptance_report):
    cfg = ExperimentConfig(kinds=("b", "e"), es_n0_start=20, es_n0_stop=20, baseline=False,
                           max_symbols=10 ** 6, target_errors=200, seed=1,
                           train=TrainConfig(batch_size=4096, iterations=300, learning_rate=0.005, seed=1))
    rows = immunity_report(run_sweep(cfg), cfg.immunity_es_n0_db)
    ok = [r["regime"] for r in rows] == list(cfg.regimes) and all(
        math.isfinite(r["ratio_e_over_b"]) for r in rows)
    acceptance_report(9, ok, "immunity SER(e)/SER(b) @20dB: "
                      + ", ".join(f"{r['regime']} {r['ratio_e_over_b']:.3g}" for r in rows))
    assert ok
