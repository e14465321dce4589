"""Monte Carlo SER measurement, Es/N0 sweeps and CSV output."""
import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .channel import NO_FADING, LinkConfig, apply_link, parse_turbulence, sample_intensity
from .exceptions import NotFittedError, ParameterDomainError
from .modem import SUPPORTED_QAM
from .numerics import derive_substream
from .pipelines import LinkPipeline, NaiveBaseline

log = logging.getLogger(__name__)

CSV_HEADER = ["pipeline", "regime", "es_n0_db", "ser", "std_err", "symbols", "errors", "seed"]
IMMUNITY_HEADER = ["regime", "es_n0_db", "ser_b", "ser_e", "ratio_e_over_b"]
_CHUNK = 1 << 15


class SweepError(RuntimeError):
    pass


@dataclass(frozen=True)
class SerRecord:
    pipeline: str
    regime: str
    es_n0_db: float
    ser: float
    standard_error: float
    symbols_simulated: int
    errors_observed: int
    seed: int

    @classmethod
    def from_counts(cls, pipeline, regime, es_n0_db, errors, symbols, seed):
        ser = errors / symbols
        return cls(pipeline, regime, float(es_n0_db), ser,
                   math.sqrt(ser * (1.0 - ser) / symbols), int(symbols), int(errors), int(seed))


def _regime_label(regime):
    return regime.label if hasattr(regime, "label") else str(regime)


def measure_ser(pipeline, regime, es_n0_db, rng, max_symbols=10 ** 6, target_errors=1000,
                noise_variance=None, seed=None):
    """Count symbol errors until ``target_errors`` or ``max_symbols``, whichever comes first.

    ``regime`` is a TurbulenceParams, the NO_FADING sentinel or a regime name.
    """
    if not getattr(pipeline, "trained_", False):
        raise NotFittedError(f"pipeline {getattr(pipeline, 'kind_', pipeline)} is not trained")
    if isinstance(regime, str):
        regime = parse_turbulence(regime)
    link = LinkConfig(responsivity=pipeline.responsivity, es_n0_db=es_n0_db, turbulence=regime)
    M = pipeline.M
    symbols = errors = 0
    while symbols < max_symbols and errors < target_errors:
        n = min(_CHUNK, max_symbols - symbols)
        k = rng.integers(M, n)
        intensity = sample_intensity(rng, regime, n)
        y = apply_link(pipeline.transmit(k), intensity, link, rng, noise_variance)
        wrong = pipeline.receive(y, intensity) != k
        hits = int(wrong.sum())
        if errors + hits >= target_errors:
            # stop exactly on the target-th error
            n = int(np.flatnonzero(wrong)[target_errors - errors - 1]) + 1
            hits = target_errors - errors
        symbols += n
        errors += hits
    return SerRecord.from_counts(pipeline.kind_, _regime_label(regime), es_n0_db, errors, symbols,
                                 rng.seed if seed is None else seed)


def q_function(x):
    return 0.5 * erfc(x / math.sqrt(2.0))


def awgn_qam_ser_analytic(M, es_n0_db):
    """Exact SER of square M-QAM on an unfaded AWGN link."""
    if M not in SUPPORTED_QAM:
        raise ParameterDomainError(f"unsupported QAM order {M}")
    snr = 10.0 ** (es_n0_db / 10.0)
    p = 2.0 * (1.0 - 1.0 / math.sqrt(M)) * q_function(math.sqrt(3.0 * snr / (M - 1)))
    return 1.0 - (1.0 - p) ** 2


def _make_pipeline(cfg, kind, regime, es_n0_db):
    t = cfg.train
    pipe = LinkPipeline(
        kind=kind, M=cfg.M, responsivity=cfg.responsivity, hidden_layers=cfg.hidden_layers,
        neurons=cfg.neurons, activation=cfg.activation, batch_size=t.batch_size,
        dataset_batches=t.dataset_batches, iterations=t.iterations, optimizer=t.optimizer,
        learning_rate=t.learning_rate, train_es_n0_db=es_n0_db, turbulence=regime,
        temperature=t.temperature, fresh_samples=t.fresh_samples, random_state=cfg.seed,
    )
    return pipe.fit()


def _run_unit(args):
    """All grid points for one (pipeline kind, regime) pair."""
    cfg, kind, regime_index = args
    regime_name = cfg.regimes[regime_index]
    regime = parse_turbulence(regime_name)
    grid = cfg.grid
    records = []
    shared = None
    for si, es_n0_db in enumerate(grid):
        try:
            if kind == "naive":
                pipe = NaiveBaseline(cfg.M, cfg.responsivity)
            elif kind == "a_qam_perfect_ml":
                pipe = LinkPipeline(kind=kind, M=cfg.M, responsivity=cfg.responsivity).fit()
            elif cfg.retrain_per_point:
                pipe = _make_pipeline(cfg, kind, regime_name, es_n0_db)
            else:
                if shared is None:
                    shared = _make_pipeline(cfg, kind, regime_name, cfg.train.es_n0_db)
                pipe = shared
            # Grid-point keyed streams: every kind sees the same channel draws.
            rng = derive_substream(cfg.seed, regime_index * len(grid) + si)
            rec = measure_ser(pipe, regime, es_n0_db, rng, cfg.max_symbols, cfg.target_errors,
                              seed=cfg.seed)
        except Exception as exc:
            raise SweepError(f"sweep failed at ({kind}, {regime_name}, {es_n0_db} dB): {exc}") from exc
        log.info("%s %s %.1f dB: SER %.4g (%d/%d)", kind, regime_name, es_n0_db, rec.ser,
                 rec.errors_observed, rec.symbols_simulated)
        records.append(rec)
    return records


def run_sweep(cfg):
    """SER records for every (kind, regime, Es/N0) triple, in grid order.

    The fixed-gain ``naive`` baseline is appended as an extra kind unless
    ``cfg.baseline`` is off.
    """
    kinds = list(cfg.kinds) + (["naive"] if cfg.baseline else [])
    units = [(cfg, kind, ri) for kind in kinds for ri in range(len(cfg.regimes))]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            chunks = list(pool.map(_run_unit, units))
    else:
        chunks = [_run_unit(u) for u in units]
    return [rec for chunk in chunks for rec in chunk]


def immunity_report(records, es_n0_db):
    """Per regime: SER of kind e over SER of kind b at the grid point nearest ``es_n0_db``."""
    by_key = {(r.pipeline, r.regime, r.es_n0_db): r for r in records}
    points = sorted({r.es_n0_db for r in records})
    if not points:
        return []
    at = min(points, key=lambda p: abs(p - es_n0_db))
    rows = []
    regimes = list(dict.fromkeys(r.regime for r in records))
    for regime in regimes:
        b = by_key.get(("b_qam_perfect_dnn", regime, at))
        e = by_key.get(("e_qam_dnnest_dnn", regime, at))
        if b is None or e is None:
            continue
        ratio = e.ser / b.ser if b.ser > 0 else math.inf
        rows.append({"regime": regime, "es_n0_db": at, "ser_b": b.ser, "ser_e": e.ser,
                     "ratio_e_over_b": ratio})
    return rows


def _fmt(v):
    return f"{v:.16e}"


def write_csv(records, path):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            _write_records(records, fh)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _write_records(records, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([r.pipeline, r.regime, _fmt(r.es_n0_db), _fmt(r.ser), _fmt(r.standard_error),
                    r.symbols_simulated, r.errors_observed, r.seed])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [SerRecord(r["pipeline"], r["regime"], float(r["es_n0_db"]), float(r["ser"]),
                      float(r["std_err"]), int(r["symbols"]), int(r["errors"]), int(r["seed"]))
            for r in rows]


def write_immunity_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(IMMUNITY_HEADER)
        for row in rows:
            w.writerow([row["regime"], _fmt(row["es_n0_db"]), _fmt(row["ser_b"]),
                        _fmt(row["ser_e"]), _fmt(row["ratio_e_over_b"])])


def no_fading_sweep(M, grid, seed=0, max_symbols=10 ** 6, target_errors=1000):
    """Kind a on an unfaded link; the reference for the analytic AWGN oracle."""
    pipe = LinkPipeline(kind="a_qam_perfect_ml", M=M).fit()
    return [measure_ser(pipe, NO_FADING, db, derive_substream(seed, i), max_symbols, target_errors, seed=seed)
            for i, db in enumerate(grid)]


__all__ = [
    "SerRecord", "SweepError", "awgn_qam_ser_analytic", "immunity_report",
    "measure_ser", "no_fading_sweep", "q_function", "read_csv", "run_sweep", "write_csv",
    "write_immunity_csv",
]
