"""A small dense network engine in float64 numpy.

Weights are stored as ``(fan_in, fan_out)`` so a layer is ``x @ W + b``.
Backward for a softmax head expects the gradient with respect to the
logits (the loss fuses softmax with cross-entropy).
"""
import io
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from .exceptions import ParameterDomainError, ShapeError, UsageError

ACTIVATIONS = ("relu", "tanh", "sigmoid")
HEADS = ("linear", "softmax", "linear_pair")


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    output_dim: int
    hidden_layers: int = 4
    neurons_per_layer: int = 40
    activation: str = "relu"
    output_head: str = "linear"

    def __post_init__(self):
        if min(self.input_dim, self.output_dim, self.hidden_layers, self.neurons_per_layer) < 1:
            raise ParameterDomainError(f"all network dimensions must be >= 1: {self}")
        if self.activation not in ACTIVATIONS:
            raise ParameterDomainError(f"unknown activation '{self.activation}'")
        if self.output_head not in HEADS:
            raise ParameterDomainError(f"unknown output head '{self.output_head}'")
        if self.output_head == "linear_pair" and self.output_dim != 2:
            raise ParameterDomainError("linear_pair head needs exactly two outputs")

    @property
    def layer_sizes(self):
        return [self.input_dim] + [self.neurons_per_layer] * self.hidden_layers + [self.output_dim]


class MlpNetwork:
    def __init__(self, spec, weights, biases):
        self.spec = spec
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        sizes = spec.layer_sizes
        expected = list(zip(sizes[:-1], sizes[1:]))
        if [w.shape for w in self.weights] != expected or [b.shape for b in self.biases] != [
            (n,) for _, n in expected
        ]:
            raise ShapeError("parameter shapes do not chain from input_dim to output_dim")
        # bumped on every in-place update so stale caches can be detected
        self.version = 0

    def __repr__(self):
        return f"MlpNetwork({'->'.join(map(str, self.spec.layer_sizes))}, {self.spec.activation})"

    @property
    def n_params(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def copy(self):
        return MlpNetwork(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def predict(self, x):
        return forward(self, x)[0]


@dataclass
class ParamGradients:
    weights: list
    biases: list
    input: np.ndarray = None

    def parameters(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b


@dataclass
class ForwardCache:
    net_id: int
    version: int
    inputs: np.ndarray
    pre_activations: list
    activations: list
    logits: np.ndarray


def init_network(spec, rng):
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    sizes = spec.layer_sizes
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append((2.0 * rng.uniform((fan_in, fan_out)) - 1.0) * limit)
        biases.append(np.zeros(fan_out))
    return MlpNetwork(spec, weights, biases)


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _act_grad(name, z, a):
    if name == "relu":
        return (z > 0.0).astype(float)
    if name == "tanh":
        return 1.0 - a * a
    return a * (1.0 - a)


def _propagate(weights, biases, activation, x):
    pre, post = [], [x]
    a = x
    for w, b in zip(weights[:-1], biases[:-1]):
        z = a @ w + b
        a = _act(activation, z)
        pre.append(z)
        post.append(a)
    return pre, post, a @ weights[-1] + biases[-1]


def forward(net, inputs):
    """Returns ``(output, cache)``; the cache feeds :func:`backward`."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.spec.input_dim:
        raise ShapeError(f"expected input width {net.spec.input_dim}, got shape {np.shape(inputs)}")
    pre, post, logits = _propagate(net.weights, net.biases, net.spec.activation, x)
    out = softmax(logits, axis=1) if net.spec.output_head == "softmax" else logits
    return out, ForwardCache(id(net), net.version, x, pre, post, logits)


def softmax_cross_entropy(logits, targets):
    """Batch-mean cross-entropy of softmax(logits) against one-hot targets.

    Returns ``(loss, dloss_dlogits)``.  Works in log-space so no log(0) occurs.
    """
    logits = np.asarray(logits)
    if logits.dtype.kind != "f":
        logits = logits.astype(float)
    targets = np.asarray(targets, dtype=logits.dtype)
    if logits.shape != targets.shape:
        raise ShapeError(f"logits {logits.shape} vs targets {targets.shape}")
    K = logits.shape[0]
    # max-shifted log-sum-exp by hand so extended-precision inputs stay extended
    top = np.max(logits, axis=1, keepdims=True)
    log_probs = logits - top - np.log(np.sum(np.exp(logits - top), axis=1, keepdims=True))
    loss = -np.sum(targets * log_probs) / K
    grad = (np.exp(log_probs) - targets) / K
    return loss, grad


def backward(net, cache, d_out):
    if cache.net_id != id(net) or cache.version != net.version:
        raise UsageError("forward cache is stale or belongs to another network")
    g = np.asarray(d_out, dtype=float)
    if g.shape != cache.logits.shape:
        raise ShapeError(f"upstream gradient {g.shape} does not match output {cache.logits.shape}")
    n_layers = len(net.weights)
    dW = [None] * n_layers
    db = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        a_in = cache.activations[i]
        dW[i] = a_in.T @ g
        db[i] = g.sum(axis=0)
        g = g @ net.weights[i].T
        if i > 0:
            g = g * _act_grad(net.spec.activation, cache.pre_activations[i - 1], a_in)
    return ParamGradients(dW, db, g)


@dataclass
class OptimizerState:
    kind: str = "adam"
    learning_rate: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ParameterDomainError(f"unknown optimizer '{self.kind}'")
        if not self.learning_rate >= 0:
            raise ParameterDomainError("learning rate must be non-negative")


def make_optimizer(net, kind="adam", learning_rate=0.005, **kwargs):
    state = OptimizerState(kind, learning_rate, **kwargs)
    if kind == "adam":
        state.m = [np.zeros_like(p) for p in net.parameters()]
        state.v = [np.zeros_like(p) for p in net.parameters()]
    return state


def sgd_step(net, grads, state):
    if state.kind != "sgd":
        raise UsageError("sgd_step needs an sgd optimizer state")
    for p, g in zip(net.parameters(), grads.parameters()):
        p -= state.learning_rate * g
    net.version += 1
    return net


def adam_step(net, grads, state):
    if state.kind != "adam":
        raise UsageError("adam_step needs an adam optimizer state")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(net.parameters(), grads.parameters(), state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
    net.version += 1
    return net, state


def optimizer_step(net, grads, state):
    if state.kind == "sgd":
        return sgd_step(net, grads, state)
    return adam_step(net, grads, state)[0]


def gradient_check(net, loss_fn, probe_batch, step=1e-5):
    """Max relative error between backprop and central differences.

    ``loss_fn(logits) -> (loss, dloss_dlogits)`` acts on the final affine
    output, before any softmax head, and must preserve the input dtype.
    The difference quotients are evaluated in extended precision; in double
    the roundoff floor (~eps * loss / step) swamps gradients below ~1e-7.
    """
    if not step > 0:
        raise ParameterDomainError("finite-difference step must be positive")
    _, cache = forward(net, probe_batch)
    _, d_logits = loss_fn(cache.logits)
    analytic = [g.reshape(-1) for g in backward(net, cache, d_logits).parameters()]

    ext = np.longdouble
    weights = [w.astype(ext) for w in net.weights]
    biases = [b.astype(ext) for b in net.biases]
    act = net.spec.activation
    _, layer_inputs, _ = _propagate(weights, biases, act, cache.inputs.astype(ext))
    h = ext(step)

    def loss_from(layer):
        # re-run only the layers downstream of the perturbed one
        tail = _propagate(weights[layer:], biases[layer:], act, layer_inputs[layer])[2]
        return loss_fn(tail)[0]

    worst = 0.0
    params = [(i, p) for i, pair in enumerate(zip(weights, biases)) for p in pair]
    for (layer, p), g in zip(params, analytic):
        flat = p.reshape(-1)
        for j in range(flat.size):
            keep = flat[j]
            flat[j] = keep + h
            up = loss_from(layer)
            flat[j] = keep - h
            down = loss_from(layer)
            flat[j] = keep
            fd = float((up - down) / (2 * h))
            err = abs(fd - g[j]) / max(abs(fd), abs(g[j]), 1e-12)
            worst = max(worst, err)
    return worst


def kink_free_probe(net, candidates, size, margin=1e-3):
    """First ``size`` candidate rows whose hidden pre-activations all clear ``margin``.

    Only relu has a kink; other activations take the first rows unchanged.
    """
    candidates = np.asarray(candidates, dtype=float)
    if net.spec.activation != "relu":
        keep = np.arange(len(candidates))
    else:
        _, cache = forward(net, candidates)
        clear = np.ones(len(candidates), dtype=bool)
        for z in cache.pre_activations:
            clear &= np.min(np.abs(z), axis=1) >= margin
        keep = np.flatnonzero(clear)
    if keep.size < size:
        raise UsageError(f"only {keep.size} of {len(candidates)} candidate rows clear the kink margin")
    return candidates[keep[:size]]


_MAGIC = b"FSOMLP"
_FORMAT_VERSION = 1
_HEADER = struct.Struct("<6sHIIIIBB")


def network_to_bytes(net):
    """Versioned little-endian blob: header, then each layer's W (row-major) and b."""
    s = net.spec
    buf = io.BytesIO()
    buf.write(_HEADER.pack(
        _MAGIC, _FORMAT_VERSION, s.input_dim, s.output_dim, s.hidden_layers,
        s.neurons_per_layer, ACTIVATIONS.index(s.activation), HEADS.index(s.output_head),
    ))
    for w, b in zip(net.weights, net.biases):
        buf.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        buf.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    return buf.getvalue()


def network_from_bytes(blob):
    magic, version, i, o, h, n, act, head = _HEADER.unpack_from(blob, 0)
    if magic != _MAGIC:
        raise ValueError("not a serialized network")
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported network format version {version}")
    spec = NetworkSpec(i, o, h, n, ACTIVATIONS[act], HEADS[head])
    offset = _HEADER.size
    weights, biases = [], []
    sizes = spec.layer_sizes
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(blob, "<f8", fan_in * fan_out, offset).reshape(fan_in, fan_out)
        offset += w.nbytes
        b = np.frombuffer(blob, "<f8", fan_out, offset)
        offset += b.nbytes
        weights.append(w.astype(float))
        biases.append(b.astype(float))
    if offset != len(blob):
        raise ValueError("trailing bytes after network parameters")
    return MlpNetwork(spec, weights, biases)


def save_network(net, path):
    with open(path, "wb") as fh:
        fh.write(network_to_bytes(net))


def load_network(path):
    with open(path, "rb") as fh:
        return network_from_bytes(fh.read())
