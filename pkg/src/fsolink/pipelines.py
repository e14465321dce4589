"""The six transmitter / channel-estimator / receiver structures.

Each structure is an sklearn-style estimator.  ``fit`` builds the networks
and trains them end to end on self-generated link data; ``predict`` maps
received samples to symbol indices.  ``X`` rows are ``[Re y, Im y]`` or
``[Re y, Im y, I]``; the third column (the true intensity) is required by
the perfect-CSI kinds and ignored by the estimator kinds.

Tags::

    a_qam_perfect_ml      QAM        -> true I  -> ML
    b_qam_perfect_dnn     QAM        -> true I  -> DNN detector
    c_shaper_perfect_dnn  DNN shaper -> true I  -> DNN detector
    d_qam_dnnest_ml       QAM        -> DNN est -> ML
    e_qam_dnnest_dnn      QAM        -> DNN est -> DNN detector
    f_shaper_dnnest_dnn   DNN shaper -> DNN est -> DNN detector
"""
import json
import zipfile
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .channel import LinkConfig, TurbulenceParams, noise_variance_for_snr, parse_turbulence, sample_intensity
from .exceptions import DegenerateConstellationError, NotFittedError, ParameterDomainError, UsageError
from .modem import Constellation, gray_qam_constellation, ml_detect, naive_detect, one_hot
from .neural import (
    NetworkSpec, backward, forward, init_network, make_optimizer, network_from_bytes,
    network_to_bytes, optimizer_step, softmax_cross_entropy,
)
from .numerics import derive_substream, sample_gaussian_pair

KINDS = (
    "a_qam_perfect_ml",
    "b_qam_perfect_dnn",
    "c_shaper_perfect_dnn",
    "d_qam_dnnest_ml",
    "e_qam_dnnest_dnn",
    "f_shaper_dnnest_dnn",
)
SHORT_KINDS = {k[0]: k for k in KINDS}

GAIN_FLOOR = 1e-6


def resolve_kind(kind):
    kind = SHORT_KINDS.get(kind, kind)
    if kind not in KINDS:
        raise ParameterDomainError(f"unknown pipeline kind '{kind}'")
    return kind


def _structure(kind):
    """(has_shaper, has_estimator, has_detector) for a kind tag."""
    return {
        "a_qam_perfect_ml": (False, False, False),
        "b_qam_perfect_dnn": (False, False, True),
        "c_shaper_perfect_dnn": (True, False, True),
        "d_qam_dnnest_ml": (False, True, False),
        "e_qam_dnnest_dnn": (False, True, True),
        "f_shaper_dnnest_dnn": (True, True, True),
    }[kind]


@dataclass
class TrainConfig:
    """Training hyperparameters; defaults follow the tuned values of the reference setup."""

    batch_size: int = 2 ** 16
    dataset_batches: int = 4
    iterations: int = 1000
    optimizer: str = "adam"
    learning_rate: float = 0.005
    es_n0_db: float = 14.0
    turbulence: TurbulenceParams = field(default_factory=lambda: TurbulenceParams.named("moderate"))
    seed: int = 0
    temperature: float = 1.0
    fresh_samples: bool = False

    def __post_init__(self):
        if isinstance(self.turbulence, str):
            self.turbulence = parse_turbulence(self.turbulence)
        for name in ("batch_size", "dataset_batches", "iterations"):
            if int(getattr(self, name)) < 1:
                raise ParameterDomainError(f"{name} must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ParameterDomainError(f"unknown optimizer '{self.optimizer}'")
        if not self.learning_rate >= 0:
            raise ParameterDomainError("learning_rate must be non-negative")
        if not self.temperature > 0:
            raise ParameterDomainError("temperature must be positive")


def _pair(z):
    return np.column_stack([z.real, z.imag])


def _cplx(p):
    return p[:, 0] + 1j * p[:, 1]


def _normalize_points(P):
    """Scale raw (M, 2) shaper outputs to unit mean energy; returns (C, s)."""
    energy = np.mean(np.sum(P * P, axis=1))
    if energy < 1e-12:
        raise DegenerateConstellationError("shaper outputs collapsed to the origin")
    s = np.sqrt(energy)
    return P / s, s


def _normalize_points_backward(P, s, dC):
    M = P.shape[0]
    return dC / s - P * np.sum(dC * P) / (M * s ** 3)


def _clamp_gain(h):
    mag = np.abs(h)
    small = mag < GAIN_FLOOR
    if not np.any(small):
        return h, small
    # keep the phase where there is one, otherwise fall back to a real gain
    direction = np.where(mag > 0, h / np.where(mag > 0, mag, 1.0), 1.0)
    return np.where(small, direction * GAIN_FLOOR, h), small


class LinkPipeline(ClassifierMixin, BaseEstimator):
    """One FSO structure, trainable end to end.

    Parameters mirror :class:`TrainConfig` plus the network shape.  After
    ``fit``, networks live in ``shaper_net_``, ``estimator_net_`` and
    ``detector_net_`` (``None`` where the kind has no such block).
    """

    def __init__(self, kind="e_qam_dnnest_dnn", M=16, responsivity=1.0, hidden_layers=4,
                 neurons=40, activation="relu", batch_size=2 ** 16, dataset_batches=4,
                 iterations=1000, optimizer="adam", learning_rate=0.005, train_es_n0_db=14.0,
                 turbulence="moderate", temperature=1.0, fresh_samples=False, random_state=0):
        self.kind = kind
        self.M = M
        self.responsivity = responsivity
        self.hidden_layers = hidden_layers
        self.neurons = neurons
        self.activation = activation
        self.batch_size = batch_size
        self.dataset_batches = dataset_batches
        self.iterations = iterations
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.train_es_n0_db = train_es_n0_db
        self.turbulence = turbulence
        self.temperature = temperature
        self.fresh_samples = fresh_samples
        self.random_state = random_state

    def train_config(self):
        return TrainConfig(
            batch_size=self.batch_size, dataset_batches=self.dataset_batches,
            iterations=self.iterations, optimizer=self.optimizer,
            learning_rate=self.learning_rate, es_n0_db=self.train_es_n0_db,
            turbulence=self.turbulence, seed=self.random_state,
            temperature=self.temperature, fresh_samples=self.fresh_samples,
        )

    @property
    def kind_(self):
        return resolve_kind(self.kind)

    @property
    def link(self):
        return LinkConfig(responsivity=self.responsivity)

    # -- construction -------------------------------------------------------

    def _build(self, rng):
        kind = self.kind_
        self.base_constellation_ = gray_qam_constellation(self.M)
        self.classes_ = np.arange(self.M)
        shaper, estimator, detector = _structure(kind)

        def spec(i, o, head):
            return NetworkSpec(i, o, self.hidden_layers, self.neurons, self.activation, head)

        # Fixed creation order keeps initial weights reproducible per seed.
        self.shaper_net_ = init_network(spec(self.M, 2, "linear_pair"), rng) if shaper else None
        self.estimator_net_ = init_network(spec(2, 2, "linear_pair"), rng) if estimator else None
        self.detector_net_ = init_network(spec(2, self.M, "softmax"), rng) if detector else None
        self.loss_trace_ = []
        self.trained_ = kind == "a_qam_perfect_ml"
        return self

    def fit(self, X=None, y=None):
        """Build fresh networks and train them; ``X`` and ``y`` are ignored.

        Training data is generated internally from the link model.
        """
        self._build(derive_substream(self.random_state, 0))
        if self.kind_ != "a_qam_perfect_ml":
            train(self, self.train_config(), derive_substream(self.random_state, 1))
        return self

    def _check_trained(self):
        check_is_fitted(self, "base_constellation_")
        if not self.trained_:
            raise NotFittedError(f"pipeline {self.kind_} has not been trained")

    # -- transmitter --------------------------------------------------------

    def learned_constellation(self):
        check_is_fitted(self, "base_constellation_")
        if self.shaper_net_ is None:
            raise UsageError(f"pipeline {self.kind} has no constellation shaper")
        raw, _ = forward(self.shaper_net_, np.eye(self.M))
        return Constellation.from_points(_cplx(raw), "learned")

    @property
    def constellation_(self):
        check_is_fitted(self, "base_constellation_")
        if self.shaper_net_ is not None:
            return self.learned_constellation()
        return self.base_constellation_

    def transmit(self, k):
        """Complex symbol(s) for label(s) ``k``."""
        check_is_fitted(self, "base_constellation_")
        k = np.asarray(k)
        if np.any(k < 0) or np.any(k >= self.M):
            raise IndexError(f"symbol index out of range for M={self.M}")
        pts = self.constellation_.points[k]
        return complex(pts) if pts.ndim == 0 else pts

    # -- receiver -----------------------------------------------------------

    def estimate_channel(self, y):
        """Blind per-symbol gain estimate from received sample(s); |h| >= 1e-6."""
        check_is_fitted(self, "base_constellation_")
        if self.estimator_net_ is None:
            raise UsageError(f"pipeline {self.kind_} has no channel estimator")
        y = np.atleast_1d(np.asarray(y, dtype=complex))
        out, _ = forward(self.estimator_net_, _pair(y))
        return _clamp_gain(_cplx(out))[0]

    def receive(self, y, true_intensity=None):
        """Symbol decisions for complex received samples."""
        self._check_trained()
        kind = self.kind_
        y = np.atleast_1d(np.asarray(y, dtype=complex))
        R = self.responsivity
        _, has_est, has_det = _structure(kind)
        if has_est:
            gain = self.estimate_channel(y)
        else:
            if true_intensity is None:
                raise UsageError(f"pipeline {kind} needs the true channel intensity")
            gain = np.broadcast_to(np.asarray(true_intensity, dtype=float), y.shape).astype(complex)
        if not has_det:
            return ml_detect(y, gain, R, self.base_constellation_)
        z = y / (R * gain)
        probs, _ = forward(self.detector_net_, _pair(z))
        return np.argmax(probs, axis=1)

    def predict_proba(self, X):
        self._check_trained()
        if self.detector_net_ is None:
            raise UsageError("maximum-likelihood kinds produce hard decisions only")
        y, intensity = self._split(X)
        gain = self.estimate_channel(y) if self.estimator_net_ is not None else intensity
        if gain is None:
            raise UsageError(f"pipeline {self.kind_} needs the true channel intensity")
        return forward(self.detector_net_, _pair(y / (self.responsivity * gain)))[0]

    def _split(self, X):
        X = check_array(X, dtype=float)
        if X.shape[1] not in (2, 3):
            raise ValueError(f"X must have 2 or 3 columns [Re y, Im y(, I)], got {X.shape[1]}")
        intensity = X[:, 2] if X.shape[1] == 3 else None
        return X[:, 0] + 1j * X[:, 1], intensity

    def predict(self, X):
        y, intensity = self._split(X)
        return self.receive(y, intensity)

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.requires_fit = True
        return tags

    # -- persistence --------------------------------------------------------

    def save(self, path):
        self._check_trained()
        with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
            header = {"format": 1, "kind": self.kind_, "params": self.get_params(),
                      "loss_trace": list(self.loss_trace_)}
            zf.writestr("pipeline.json", json.dumps(header, indent=2, sort_keys=True))
            for name in ("shaper", "estimator", "detector"):
                net = getattr(self, f"{name}_net_")
                if net is not None:
                    zf.writestr(f"{name}.mlp", network_to_bytes(net))

    @classmethod
    def load(cls, path):
        with zipfile.ZipFile(path) as zf:
            header = json.loads(zf.read("pipeline.json"))
            if header.get("format") != 1:
                raise ValueError(f"unsupported pipeline format {header.get('format')}")
            pipe = cls(**header["params"])
            pipe._build(derive_substream(0, 0))
            names = set(zf.namelist())
            for name in ("shaper", "estimator", "detector"):
                expected = getattr(pipe, f"{name}_net_") is not None
                if expected != (f"{name}.mlp" in names):
                    raise ValueError(f"{name} network presence does not match kind {pipe.kind_}")
                if expected:
                    setattr(pipe, f"{name}_net_", network_from_bytes(zf.read(f"{name}.mlp")))
        pipe.loss_trace_ = header["loss_trace"]
        pipe.trained_ = True
        return pipe


class NaiveBaseline:
    """Fixed-gain ML detector (assumes I = 1); the no-estimation reference."""

    kind_ = "naive"
    trained_ = True

    def __init__(self, M=16, responsivity=1.0):
        self.M = M
        self.responsivity = responsivity
        self.base_constellation_ = gray_qam_constellation(M)

    def transmit(self, k):
        return self.base_constellation_.points[np.asarray(k)]

    def receive(self, y, true_intensity=None):
        return naive_detect(np.atleast_1d(np.asarray(y, dtype=complex)), self.responsivity,
                            self.base_constellation_)


def build_pipeline(kind, M=16, link=None, rng=None, **params):
    """Untrained pipeline with freshly initialized networks for ``kind``."""
    kind = resolve_kind(kind)
    link = link or LinkConfig()
    pipe = LinkPipeline(kind=kind, M=M, responsivity=link.responsivity,
                        random_state=rng.seed if rng is not None else 0, **params)
    return pipe._build(rng if rng is not None else derive_substream(0, 0))


def transmit(pipeline, k):
    return pipeline.transmit(k)


def learned_constellation(pipeline):
    return pipeline.learned_constellation()


def estimate_channel(pipeline, y):
    return pipeline.estimate_channel(y)


def receive(pipeline, y, true_intensity=None):
    return pipeline.receive(y, true_intensity)


# -- training ---------------------------------------------------------------


@dataclass
class _Batch:
    labels: np.ndarray
    intensity: np.ndarray
    noise: np.ndarray
    targets: np.ndarray


def _draw_batch(rng, M, K, cfg):
    labels = rng.integers(M, K)
    intensity = sample_intensity(rng, cfg.turbulence, K)
    noise = sample_gaussian_pair(rng, noise_variance_for_snr(cfg.es_n0_db), K)
    return _Batch(labels, np.asarray(intensity, dtype=float), noise, one_hot(labels, M))


def loss_and_gradients(pipeline, batch, temperature=1.0):
    """Cross-entropy of one batch through the full graph, and its parameter gradients.

    Returns ``(loss, grads)`` with ``grads`` keyed by block name.
    """
    shaper_net, est_net, det_net = pipeline.shaper_net_, pipeline.estimator_net_, pipeline.detector_net_
    R = pipeline.responsivity
    base = pipeline.base_constellation_.points
    I = batch.intensity

    if shaper_net is not None:
        raw, shaper_cache = forward(shaper_net, np.eye(pipeline.M))
        C, s = _normalize_points(raw)
        x = _cplx(C)[batch.labels]
    else:
        x = base[batch.labels]
    y = R * I * x + batch.noise

    if est_net is not None:
        h_raw, est_cache = forward(est_net, _pair(y))
        h, clamped = _clamp_gain(_cplx(h_raw))
        z = y / (R * h)
    else:
        z = y / (R * I)

    if det_net is not None:
        _, det_cache = forward(det_net, _pair(z))
        logits = det_cache.logits
    else:
        diff = z[:, None] - base[None, :]
        logits = -np.abs(diff) ** 2 / temperature
    loss, d_logits = softmax_cross_entropy(logits, batch.targets)

    grads = {}
    # Complex gradients below carry dL/dRe + j dL/dIm.
    if det_net is not None:
        g = backward(det_net, det_cache, d_logits)
        grads["detector"] = g
        Gz = _cplx(g.input)
    else:
        Gz = np.sum(d_logits * (-2.0 / temperature) * diff, axis=1)

    if shaper_net is None and est_net is None:
        return loss, grads

    if est_net is not None:
        Gy = Gz * np.conj(1.0 / (R * h))
        Gh = Gz * np.conj(-z / h)
        Gh[clamped] = 0.0
        g = backward(est_net, est_cache, _pair(Gh))
        grads["estimator"] = g
        Gy = Gy + _cplx(g.input)
    else:
        Gy = Gz / (R * I)

    if shaper_net is not None:
        Gx = Gy * (R * I)
        dC = np.zeros((pipeline.M, 2))
        np.add.at(dC, batch.labels, _pair(Gx))
        d_raw = _normalize_points_backward(raw, s, dC)
        grads["shaper"] = backward(shaper_net, shaper_cache, d_raw)
    return loss, grads


def train(pipeline, cfg, rng):
    """Optimize every network of ``pipeline`` jointly; returns the per-iteration loss trace."""
    kind = resolve_kind(pipeline.kind)
    if kind == "a_qam_perfect_ml":
        raise UsageError("nothing to train: the QAM/perfect-CSI/ML structure has no networks")
    if not hasattr(pipeline, "base_constellation_"):
        raise UsageError("build the pipeline before training it")
    nets = {name: getattr(pipeline, f"{name}_net_") for name in ("shaper", "estimator", "detector")}
    nets = {k: v for k, v in nets.items() if v is not None}
    states = {k: make_optimizer(v, cfg.optimizer, cfg.learning_rate) for k, v in nets.items()}

    M, K = pipeline.M, int(cfg.batch_size)
    dataset = None
    if not cfg.fresh_samples:
        dataset = [_draw_batch(rng, M, K, cfg) for _ in range(int(cfg.dataset_batches))]

    trace = []
    for m in range(int(cfg.iterations)):
        batch = _draw_batch(rng, M, K, cfg) if dataset is None else dataset[m % len(dataset)]
        loss, grads = loss_and_gradients(pipeline, batch, cfg.temperature)
        trace.append(loss)
        for name, net in nets.items():
            optimizer_step(net, grads[name], states[name])
    pipeline.loss_trace_ = trace
    pipeline.trained_ = True
    return trace
