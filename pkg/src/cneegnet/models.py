"""Model assembly for the compact ERP classifier and its baseline.

Two architectures share one layer vocabulary:

- ``cn-eegnet``: block 1 is reshape, temporal conv, batch norm, activation,
  depthwise conv, batch norm, activation, avg pool(4); block 2 is separable
  conv, spatial dropout, separable conv, batch norm, activation, avg pool(8);
  block 3 is flatten, dense+softmax. Exactly one dropout layer (spatial).
- ``eegnet``: block 1 is reshape, temporal conv, batch norm (linear, no
  activation before the depthwise stage), depthwise conv, batch norm,
  activation, avg pool(4), dropout; block 2 is one separable conv, batch
  norm, activation, avg pool(8), dropout; block 3 as above. Two dropouts.

When ``activation`` is left unset it resolves to mish for cn-eegnet and elu
for eegnet.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError, ShapeError
from .nn import layers as L
from .optim import apply_max_norm

ARCHS = ("cn-eegnet", "eegnet")

# named hyperparameter presets (tuned values shipped with the package);
# the preset names are part of the CLI surface
PRESETS = {
    "table2-default": dict(f1=8, f2=16, d=2, dropout_rate=0.25,
                           kernel_length=64, norm_rate=0.25, optimizer="adam"),
    "table2-opt": dict(f1=32, f2=16, d=8, dropout_rate=0.25,
                       kernel_length=128, norm_rate=0.25, optimizer="adam"),
    "table3-opt": dict(f1=16, f2=16, d=2, dropout_rate=0.15,
                       kernel_length=64, norm_rate=0.17, optimizer="adam"),
}

_POOL1 = 4
_POOL2 = 8
_SEP_KERNEL = 16


@dataclass(frozen=True)
class ModelConfig:
    arch: str = "cn-eegnet"
    f1: int = 16
    f2: int = 16
    d: int = 2
    kernel_length: int = 64
    dropout_rate: float = 0.15
    norm_rate: float = 0.17
    activation: str = None
    n_classes: int = 2
    channels: int = 16
    samples: int = 128

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ConfigError(f"unknown arch {self.arch!r}; expected one of {ARCHS}")
        if self.activation is None:
            default = "mish" if self.arch == "cn-eegnet" else "elu"
            object.__setattr__(self, "activation", default)
        for name in ("f1", "f2", "d", "kernel_length"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if not self.norm_rate > 0:
            raise ConfigError(f"norm_rate must be > 0, got {self.norm_rate}")
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.channels < 1 or self.samples < 1:
            raise ConfigError("channels and samples must be >= 1")
        if self.samples % (_POOL1 * _POOL2):
            raise ConfigError(
                f"samples must be divisible by {_POOL1 * _POOL2} for the pooling "
                f"chain, got {self.samples}"
            )
        if self.kernel_length > self.samples:
            raise ConfigError(
                f"kernel_length {self.kernel_length} exceeds samples {self.samples}"
            )
        if self.activation not in ("elu", "relu", "swish", "mish"):
            raise ConfigError(f"unknown activation {self.activation!r}")

    def to_dict(self):
        return asdict(self)


def preset_config(name, arch="cn-eegnet", channels=16, samples=128, n_classes=2,
                  activation=None):
    """Resolve a named preset into (ModelConfig, optimizer kind)."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    values = dict(PRESETS[name])
    opt = values.pop("optimizer")
    cfg = ModelConfig(arch=arch, channels=channels, samples=samples,
                      n_classes=n_classes, activation=activation, **values)
    return cfg, opt


def shape_trace(config):
    """Symbolic (layer name, output dims) trace of the layer chain."""
    c, t = config.channels, config.samples
    f1, f2, d, n = config.f1, config.f2, config.d, config.n_classes
    t4, t32 = t // _POOL1, t // (_POOL1 * _POOL2)
    trace = [
        ("reshape", (1, c, t)),
        ("temporal_conv", (f1, c, t)),
        ("batch_norm", (f1, c, t)),
    ]
    if config.arch == "cn-eegnet":
        trace += [
            ("activation", (f1, c, t)),
            ("depthwise_conv", (d * f1, 1, t)),
            ("batch_norm", (d * f1, 1, t)),
            ("activation", (d * f1, 1, t)),
            ("avg_pool", (d * f1, 1, t4)),
            ("separable_conv", (f2, 1, t4)),
            ("spatial_dropout", (f2, 1, t4)),
            ("separable_conv", (f2, 1, t4)),
            ("batch_norm", (f2, 1, t4)),
            ("activation", (f2, 1, t4)),
            ("avg_pool", (f2, 1, t32)),
        ]
    else:
        trace += [
            ("depthwise_conv", (d * f1, 1, t)),
            ("batch_norm", (d * f1, 1, t)),
            ("activation", (d * f1, 1, t)),
            ("avg_pool", (d * f1, 1, t4)),
            ("dropout", (d * f1, 1, t4)),
            ("separable_conv", (f2, 1, t4)),
            ("batch_norm", (f2, 1, t4)),
            ("activation", (f2, 1, t4)),
            ("avg_pool", (f2, 1, t32)),
            ("dropout", (f2, 1, t32)),
        ]
    trace += [
        ("flatten", (f2 * t32,)),
        ("dense_softmax", (n,)),
    ]
    return trace


def build_model(config, seed, dtype=np.float32):
    """Deterministically initialize a Model from a config and seed."""
    return Model(config, seed, dtype=dtype)


class Model:
    """Ordered layer chain with fused softmax/cross-entropy head.

    Weight initialization draws from a single seeded generator in layer
    order, so identical (config, seed) pairs produce bitwise-identical
    weights. Stochastic layers (dropout) hold their own generators, reseeded
    via reseed_dropout().
    """

    def __init__(self, config, seed, dtype=np.float32):
        self.config = config
        self.seed = seed
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        c, t = config.channels, config.samples
        f1, f2, d = config.f1, config.f2, config.d
        act = config.activation
        self._dropout_layers = []

        def drop(cls):
            layer = cls(config.dropout_rate, np.random.default_rng(0))
            self._dropout_layers.append(layer)
            return layer

        seq = [
            L.InputReshape(),
            L.TemporalConv(f1, 1, config.kernel_length, rng, dtype=dtype),
            L.BatchNorm(f1, dtype=dtype),
        ]
        if config.arch == "cn-eegnet":
            seq += [
                L.Activation(act),
                L.DepthwiseConv(f1, d, c, rng, dtype=dtype),
                L.BatchNorm(f1 * d, dtype=dtype),
                L.Activation(act),
                L.AvgPool(_POOL1),
                L.SeparableConv(f1 * d, f2, _SEP_KERNEL, rng, dtype=dtype),
                drop(L.SpatialDropout),
                L.SeparableConv(f2, f2, _SEP_KERNEL, rng, dtype=dtype),
                L.BatchNorm(f2, dtype=dtype),
                L.Activation(act),
                L.AvgPool(_POOL2),
            ]
        else:
            seq += [
                L.DepthwiseConv(f1, d, c, rng, dtype=dtype),
                L.BatchNorm(f1 * d, dtype=dtype),
                L.Activation(act),
                L.AvgPool(_POOL1),
                drop(L.Dropout),
                L.SeparableConv(f1 * d, f2, _SEP_KERNEL, rng, dtype=dtype),
                L.BatchNorm(f2, dtype=dtype),
                L.Activation(act),
                L.AvgPool(_POOL2),
                drop(L.Dropout),
            ]
        flat = f2 * (t // (_POOL1 * _POOL2))
        seq += [
            L.Flatten(),
            L.DenseSoftmax(flat, config.n_classes, config.norm_rate, rng, dtype=dtype),
        ]
        self.layers = seq
        self.reseed_dropout(seed)

    def reseed_dropout(self, seed):
        """Give each stochastic layer an independent stream derived from seed."""
        for i, layer in enumerate(self._dropout_layers):
            layer.rng = np.random.default_rng(np.random.SeedSequence([int(seed), i]))

    def _check_input(self, x):
        c, t = self.config.channels, self.config.samples
        shape = x.shape
        if x.ndim == 4 and shape[1] == 1:
            shape = (shape[0],) + shape[2:]
        if len(shape) != 3 or shape[1] != c or shape[2] != t:
            raise ShapeError(
                f"model input must be (N, {c}, {t}) or (N, 1, {c}, {t}), got {x.shape}"
            )

    def forward(self, x, train=False):
        self._check_input(x)
        out = np.ascontiguousarray(x, dtype=self.dtype)
        for i, layer in enumerate(self.layers):
            try:
                out = layer.forward(out, train=train)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer.name}): {exc}") from exc
        return out

    def backward(self, labels):
        """Propagate the fused cross-entropy adjoint; fills every param.grad."""
        grad = labels
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def observed_shapes(self, x):
        """Per-layer output dims (batch axis dropped) from a live forward
        pass, aligned with shape_trace(config)."""
        self._check_input(x)
        out = np.ascontiguousarray(x, dtype=self.dtype)
        shapes = []
        for layer in self.layers:
            out = layer.forward(out, train=False)
            shapes.append(tuple(out.shape[1:]))
        return shapes

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def param_count(self):
        return int(sum(p.size for p in self.params()))

    def arrays(self):
        """All persistent arrays (trainable params then per-layer state),
        in layer order; defines the checkpoint payload order."""
        out = []
        for layer in self.layers:
            out.extend(p.value for p in layer.params())
            out.extend(arr for _, arr in layer.state())
        return out

    def get_weights(self):
        return [a.copy() for a in self.arrays()]

    def set_weights(self, weights):
        arrays = self.arrays()
        if len(weights) != len(arrays):
            raise ShapeError(
                f"expected {len(arrays)} weight arrays, got {len(weights)}"
            )
        for dst, src in zip(arrays, weights):
            if dst.shape != np.shape(src):
                raise ShapeError(
                    f"weight shape mismatch: expected {dst.shape}, got {np.shape(src)}"
                )
            dst[...] = src

    def apply_constraints(self):
        for layer in self.layers:
            for param, bound, axis in layer.constraints():
                param.value = apply_max_norm(param.value, bound, axis=axis)

    def predict_proba(self, x):
        return self.forward(x, train=False)

    def predict(self, x):
        return np.argmax(self.predict_proba(x), axis=1)
