"""Elementwise activations (ELU, ReLU, Swish, Mish) and their exact derivatives.

All functions are total and overflow-safe for inputs up to at least 1e4 in
magnitude; softplus is evaluated as max(x, 0) + log1p(exp(-|x|)) and the
sigmoid through tanh, so no branch ever exponentiates a large positive value.

Besides the plain (forward, derivative) pairs, each kind has a cached variant
used by the activation layer: the forward returns an auxiliary array from
which the derivative is recomputed cheaply during the backward pass.
"""

import numpy as np

from ..errors import ConfigError

KINDS = ("elu", "relu", "swish", "mish")


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softplus(x):
    return np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))


def relu(x):
    return np.maximum(x, 0)


def relu_grad(x):
    return (x > 0).astype(x.dtype)


def elu(x):
    # minimum() keeps expm1 off the positive branch where it would overflow
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0)))


def elu_grad(x):
    return np.where(x > 0, x.dtype.type(1), np.exp(np.minimum(x, 0)))


def swish(x):
    return x * sigmoid(x)


def swish_grad(x):
    s = sigmoid(x)
    return s * (1 + x * (1 - s))


def mish(x):
    return x * np.tanh(softplus(x))


def mish_grad(x):
    t = np.tanh(softplus(x))
    return t + x * (1 - t * t) * sigmoid(x)


ACTIVATIONS = {
    "elu": (elu, elu_grad),
    "relu": (relu, relu_grad),
    "swish": (swish, swish_grad),
    "mish": (mish, mish_grad),
}


def get(kind):
    """Return (forward, derivative) for an activation name."""
    try:
        return ACTIVATIONS[kind]
    except KeyError:
        raise ConfigError(
            f"unknown activation {kind!r}; expected one of {KINDS}") from None


# cached variants: forward returns (y, aux); grad recomputes the derivative
# from (x, aux) without re-evaluating the expensive transcendentals

def _relu_fwd(x):
    return np.maximum(x, 0), None


def _relu_bwd(x, aux):
    return (x > 0).astype(x.dtype)


def _elu_fwd(x):
    y = np.where(x > 0, x, np.expm1(np.minimum(x, 0)))
    return y, y


def _elu_bwd(x, y):
    return np.where(x > 0, x.dtype.type(1), y + 1)


def _swish_fwd(x):
    s = sigmoid(x)
    return x * s, s


def _swish_bwd(x, s):
    return s * (1 + x * (1 - s))


def _mish_fwd(x):
    t = np.tanh(softplus(x))
    return x * t, t


def _mish_bwd(x, t):
    return t + x * (1 - t * t) * sigmoid(x)


CACHED = {
    "elu": (_elu_fwd, _elu_bwd),
    "relu": (_relu_fwd, _relu_bwd),
    "swish": (_swish_fwd, _swish_bwd),
    "mish": (_mish_fwd, _mish_bwd),
}
