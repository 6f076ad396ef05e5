"""Central finite-difference verification of every layer adjoint.

Checks run in float64 with step h=1e-5. For hidden layers the scalar probe
loss is sum(forward(x) * R) for a fixed random R, whose exact output gradient
is R; the classifier head is checked through the fused softmax/cross-entropy
loss. Coordinates are sampled (not exhaustive) so the whole suite stays fast
while still exercising every indexing path; each sampled coordinate must
match to the stated relative tolerance.

Stochastic layers (dropout) are excluded here: their adjoint is fixed-mask
scaling, covered directly by unit tests.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..models import ModelConfig, build_model
from . import layers as L

DEFAULT_TOL = 1e-4
DEFAULT_H = 1e-5


@dataclass
class GradCheckResult:
    name: str
    max_rel_err: float
    n_checked: int

    @property
    def ok(self):
        return self.max_rel_err <= DEFAULT_TOL


def _rel_err(a, b, floor=1e-6):
    return abs(a - b) / max(abs(a), abs(b), floor)


def _sample_indices(rng, size, n_coords):
    if size <= n_coords:
        return np.arange(size)
    return rng.choice(size, size=n_coords, replace=False)


def _fd_check(loss_fn, arrays_and_grads, rng, n_coords, h):
    """Compare analytic grads against central differences at sampled coords."""
    worst = 0.0
    checked = 0
    for arr, grad in arrays_and_grads:
        flat = arr.reshape(-1)
        gflat = np.asarray(grad).reshape(-1)
        for idx in _sample_indices(rng, flat.size, n_coords):
            keep = flat[idx]
            flat[idx] = keep + h
            up = loss_fn()
            flat[idx] = keep - h
            down = loss_fn()
            flat[idx] = keep
            fd = (up - down) / (2.0 * h)
            worst = max(worst, _rel_err(fd, gflat[idx]))
            checked += 1
    return worst, checked


def check_probe(name, layer, x, rng, n_coords=32, h=DEFAULT_H):
    """FD-check dL/dx and dL/dparams for L = sum(forward(x) * R)."""
    out = layer.forward(x, train=True)
    r = rng.normal(size=out.shape)
    dx = layer.backward(r)

    def loss_fn():
        return float((layer.forward(x, train=True) * r).sum())

    pairs = [(x, dx)] + [(p.value, p.grad) for p in layer.params()]
    worst, checked = _fd_check(loss_fn, pairs, rng, n_coords, h)
    return GradCheckResult(name, worst, checked)


def check_dense_softmax(rng, n=4, m=12, n_classes=2, n_coords=32, h=DEFAULT_H):
    """FD-check the fused dense -> softmax -> mean cross-entropy head."""
    layer = L.DenseSoftmax(m, n_classes, norm_rate=0.25, rng=rng, dtype=np.float64)
    x = rng.normal(size=(n, m))
    labels = rng.integers(0, n_classes, size=n)
    layer.forward(x, train=True)
    dx = layer.backward(labels)

    def loss_fn():
        return L.cross_entropy(layer.forward(x, train=True), labels)

    pairs = [(x, dx)] + [(p.value, p.grad) for p in layer.params()]
    worst, checked = _fd_check(loss_fn, pairs, rng, n_coords, h)
    return GradCheckResult("dense_softmax_cross_entropy", worst, checked)


def _layer_cases(rng):
    """One randomly shaped instance of every deterministic layer kind.

    Shapes stay small (N<=4, F<=8, C<=8, T<=32) so the suite runs in seconds.
    """
    n = int(rng.integers(1, 5))
    c = int(rng.integers(1, 9))
    t = int(rng.integers(2, 9)) * 4
    cases = []

    f_out = int(rng.integers(1, 9))
    f_in = int(rng.integers(1, 4))
    k = int(rng.integers(1, 10))
    conv = L.TemporalConv(f_out, f_in, k, rng, dtype=np.float64)
    cases.append(("temporal_conv", conv, rng.normal(size=(n, f_in, c, t))))

    f1 = int(rng.integers(1, 5))
    d = int(rng.integers(1, 4))
    dw = L.DepthwiseConv(f1, d, c, rng, dtype=np.float64)
    cases.append(("depthwise_conv", dw, rng.normal(size=(n, f1, c, t))))

    fi = int(rng.integers(1, 9))
    fo = int(rng.integers(1, 9))
    ks = int(rng.integers(1, 10))
    sep = L.SeparableConv(fi, fo, ks, rng, dtype=np.float64)
    cases.append(("separable_conv", sep, rng.normal(size=(n, fi, 1, t))))

    nb = max(n, 2)
    fb = int(rng.integers(1, 9))
    bn = L.BatchNorm(fb, dtype=np.float64)
    bn.gamma.value[:] = rng.normal(size=fb)
    bn.beta.value[:] = rng.normal(size=fb)
    cases.append(("batch_norm", bn, rng.normal(size=(nb, fb, c, t))))

    for kind in ("elu", "relu", "swish", "mish"):
        act = L.Activation(kind)
        x = rng.normal(size=(n, 2, c, t))
        if kind == "relu":
            # keep coordinates away from the non-differentiable kink
            x = np.where(np.abs(x) < 1e-3, x + 0.01, x)
        cases.append((f"activation_{kind}", act, x))

    width = int(rng.choice([2, 4]))
    cases.append(("avg_pool", L.AvgPool(width), rng.normal(size=(n, 3, 1, t))))
    return cases


def run_layer_suite(seeds=range(20), n_coords=32, h=DEFAULT_H):
    """The full per-layer FD suite; returns one aggregated result per kind."""
    worst = {}
    counts = {}
    for seed in seeds:
        rng = np.random.default_rng(seed)
        for name, layer, x in _layer_cases(rng):
            res = check_probe(name, layer, x, rng, n_coords=n_coords, h=h)
            worst[name] = max(worst.get(name, 0.0), res.max_rel_err)
            counts[name] = counts.get(name, 0) + res.n_checked
        res = check_dense_softmax(rng, n_coords=n_coords, h=h)
        worst[res.name] = max(worst.get(res.name, 0.0), res.max_rel_err)
        counts[res.name] = counts.get(res.name, 0) + res.n_checked
    return [GradCheckResult(k, worst[k], counts[k]) for k in worst]


def check_model(config=None, seed=0, batch=3, n_coords=8, h=DEFAULT_H):
    """End-to-end FD check of the assembled model under cross-entropy.

    Dropout is disabled (rate 0) so the train-mode forward is deterministic.
    Returns one result per parameter tensor plus one for the input.
    """
    if config is None:
        config = ModelConfig(arch="cn-eegnet", f1=2, f2=4, d=2, kernel_length=8,
                             dropout_rate=0.0, norm_rate=0.25, activation="mish",
                             channels=4, samples=32)
    if config.dropout_rate != 0.0:
        raise DataError("model-level gradient check requires dropout_rate 0")
    model = build_model(config, seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 1)
    x = rng.normal(size=(batch, config.channels, config.samples))
    labels = rng.integers(0, config.n_classes, size=batch)

    def loss_fn():
        return L.cross_entropy(model.forward(x, train=True), labels)

    model.forward(x, train=True)
    dx = model.backward(labels)
    results = []
    for arr, grad, name in [(x, dx.reshape(x.shape), "input")] + [
        (p.value, p.grad, p.name) for p in model.params()
    ]:
        worst, checked = _fd_check(loss_fn, [(arr, grad)], rng, n_coords, h)
        results.append(GradCheckResult(name, worst, checked))
    return results
