"""Forward and backward kernels for the compact ERP classifier layer vocabulary.

Tensors are plain numpy ndarrays, row-major, float32 by default; every layer
also runs in float64 for gradient checking. Each layer caches what its adjoint
needs during a train-mode forward pass; calling backward() without a prior
forward raises UsageError.

Convolutions are temporal only and use same padding with the anchor at
offset = K // 2, so out[t] = sum_k x[t + k - offset] * w[k] with x treated as
zero outside [0, T). They are evaluated by FFT over a power-of-two length
L >= T + K - 1 (linear correlation, no wrap-around into real samples); the
test suite checks them against brute-force loop convolutions.
"""

import numpy as np

from ..errors import ConfigError, DataError, ShapeError, UsageError
from . import activations


class Param:
    """A trainable array plus the gradient buffer the optimizer consumes."""

    __slots__ = ("value", "grad", "name")

    def __init__(self, value, name):
        self.value = value
        self.grad = np.zeros_like(value)
        self.name = name

    @property
    def size(self):
        return self.value.size

    def __repr__(self):
        return f"Param({self.name}, shape={self.value.shape})"


class Layer:
    """Base layer: forward caches, backward consumes the cache exactly once
    per forward in train mode."""

    name = "layer"

    def forward(self, x, train=False):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def params(self):
        """Trainable parameters, in a fixed documented order."""
        return []

    def state(self):
        """Non-trainable persistent arrays (running statistics)."""
        return []

    def constraints(self):
        """(param, bound, axis) max-norm specs; axis is the reduced axis."""
        return []

    def _need_cache(self):
        if getattr(self, "_cache", None) is None:
            raise UsageError(f"{self.name}: backward called without a cached forward pass")
        return self._cache


def _pow2_at_least(n):
    m = 1
    while m < n:
        m <<= 1
    return m


# batch-axis chunk for the FFT transforms; bounds the complex128 transient
_FFT_CHUNK = 64


def _corr_same_slices(t, k):
    """(fft length, forward output slice start, input-grad slice start)."""
    off = k // 2
    length = _pow2_at_least(t + k - 1)
    return length, k - 1 - off, off


class InputReshape(Layer):
    """(N, C, T) -> (N, 1, C, T); a 4-d input with a unit map axis passes through."""

    name = "reshape"

    def forward(self, x, train=False):
        if x.ndim == 3:
            self._cache = x.shape
            return x[:, None, :, :]
        if x.ndim == 4 and x.shape[1] == 1:
            self._cache = x.shape
            return x
        raise ShapeError(f"{self.name}: expected (N, C, T) or (N, 1, C, T), got {x.shape}")

    def backward(self, grad):
        shape = self._need_cache()
        return grad.reshape(shape)


class TemporalConv(Layer):
    """Per-channel temporal filter bank, same padding, bias-free.

    kernel shape (F_out, F_in, 1, K); out[n,f,c,t] = sum_{i,k}
    x[n,i,c,t+k-K//2] * kernel[f,i,0,k].
    """

    name = "temporal_conv"

    def __init__(self, f_out, f_in, kernel_length, rng, dtype=np.float32):
        if kernel_length < 1:
            raise ConfigError(f"{self.name}: kernel length must be >= 1, got {kernel_length}")
        limit = np.sqrt(6.0 / (f_in * kernel_length + f_out * kernel_length))
        k = rng.uniform(-limit, limit, size=(f_out, f_in, 1, kernel_length))
        self.kernel = Param(k.astype(dtype), f"{self.name}.kernel")
        self._cache = None

    def params(self):
        return [self.kernel]

    def forward(self, x, train=False):
        f_out, f_in, _, k = self.kernel.value.shape
        if x.ndim != 4:
            raise ShapeError(f"{self.name}: expected 4-d input, got {x.shape}")
        if x.shape[1] != f_in:
            raise ShapeError(
                f"{self.name}: input axis 1 has {x.shape[1]} maps, kernel expects {f_in}"
            )
        n, _, c, t = x.shape
        length, lo, _ = _corr_same_slices(t, k)
        wf = np.fft.rfft(self.kernel.value[:, :, 0, ::-1], n=length, axis=-1)
        out = np.empty((n, f_out, c, t), dtype=x.dtype)
        spectra = [] if train else None
        for s in range(0, n, _FFT_CHUNK):
            xf = np.fft.rfft(x[s : s + _FFT_CHUNK], n=length, axis=3)
            if train:
                spectra.append(xf)
            if f_in == 1:
                yf = xf[:, 0][:, None, :, :] * wf[:, 0][None, :, None, :]
            else:
                yf = np.einsum("nicl,fil->nfcl", xf, wf, optimize=True)
            out[s : s + _FFT_CHUNK] = np.fft.irfft(yf, n=length, axis=3)[..., lo : lo + t]
        self._cache = (x.shape, x.dtype, spectra) if train else None
        return out

    def backward(self, grad):
        shape, dtype, spectra = self._need_cache()
        f_out, f_in, _, k = self.kernel.value.shape
        n, _, c, t = shape
        length, _, glo = _corr_same_slices(t, k)
        off = k // 2
        wf = np.fft.rfft(self.kernel.value[:, :, 0, :], n=length, axis=-1)
        dx = np.empty(shape, dtype=dtype)
        ef = np.zeros((f_out, f_in, length // 2 + 1), dtype=np.complex128)
        for xf, s in zip(spectra, range(0, n, _FFT_CHUNK)):
            gf = np.fft.rfft(grad[s : s + _FFT_CHUNK], n=length, axis=3)
            dxf = np.einsum("nfcl,fil->nicl", gf, wf, optimize=True)
            dx[s : s + _FFT_CHUNK] = np.fft.irfft(dxf, n=length, axis=3)[..., glo : glo + t]
            ef += np.einsum("nfcl,nicl->fil", np.conj(gf), xf, optimize=True)
        lags = np.fft.irfft(ef, n=length, axis=-1)
        idx = (np.arange(k) - off) % length
        self.kernel.grad = lags[:, :, idx][:, :, None, :].astype(dtype)
        return dx


class DepthwiseConv(Layer):
    """Per-map spatial filter across all C channels with depth multiplier D.

    kernel shape (F1*D, C); output map m reads input map m // D only and the
    channel axis collapses to 1. Kernel rows carry a max-norm bound of 1.
    """

    name = "depthwise_conv"

    MAX_NORM = 1.0

    def __init__(self, f_in, depth_mult, channels, rng, dtype=np.float32):
        limit = np.sqrt(6.0 / (2.0 * channels))
        k = rng.uniform(-limit, limit, size=(f_in * depth_mult, channels))
        self.kernel = Param(k.astype(dtype), f"{self.name}.kernel")
        self.f_in = f_in
        self.depth_mult = depth_mult
        self._cache = None

    def params(self):
        return [self.kernel]

    def constraints(self):
        return [(self.kernel, self.MAX_NORM, 1)]

    def forward(self, x, train=False):
        channels = self.kernel.value.shape[1]
        if x.ndim != 4:
            raise ShapeError(f"{self.name}: expected 4-d input, got {x.shape}")
        if x.shape[1] != self.f_in:
            raise ShapeError(
                f"{self.name}: input axis 1 has {x.shape[1]} maps, expected {self.f_in}"
            )
        if x.shape[2] != channels:
            raise ShapeError(
                f"{self.name}: input axis 2 has {x.shape[2]} channels, kernel expects {channels}"
            )
        n, _, _, t = x.shape
        kview = self.kernel.value.reshape(self.f_in, self.depth_mult, channels)
        out = np.einsum("nfct,fdc->nfdt", x, kview)
        self._cache = x if train else None
        return out.reshape(n, self.f_in * self.depth_mult, 1, t)

    def backward(self, grad):
        x = self._need_cache()
        n, _, channels, t = x.shape
        g4 = grad.reshape(n, self.f_in, self.depth_mult, t)
        kview = self.kernel.value.reshape(self.f_in, self.depth_mult, channels)
        dx = np.einsum("nfdt,fdc->nfct", g4, kview)
        dk = np.einsum("nfdt,nfct->fdc", g4, x)
        self.kernel.grad = dk.reshape(self.f_in * self.depth_mult, channels)
        return dx


class SeparableConv(Layer):
    """Depthwise temporal filter (multiplier 1, same padding) followed by a
    1x1 pointwise map mixer.

    depth_kernel (F_in, 1, K_s); point_kernel (F_out, F_in); both bias-free.
    """

    name = "separable_conv"

    def __init__(self, f_in, f_out, kernel_length, rng, dtype=np.float32):
        dlimit = np.sqrt(6.0 / (2.0 * kernel_length))
        dk = rng.uniform(-dlimit, dlimit, size=(f_in, 1, kernel_length))
        plimit = np.sqrt(6.0 / (f_in + f_out))
        pk = rng.uniform(-plimit, plimit, size=(f_out, f_in))
        self.depth_kernel = Param(dk.astype(dtype), f"{self.name}.depth_kernel")
        self.point_kernel = Param(pk.astype(dtype), f"{self.name}.point_kernel")
        self._cache = None

    def params(self):
        return [self.depth_kernel, self.point_kernel]

    def forward(self, x, train=False):
        f_in, _, ks = self.depth_kernel.value.shape
        if x.ndim != 4 or x.shape[2] != 1:
            raise ShapeError(f"{self.name}: expected (N, F, 1, T) input, got {x.shape}")
        if x.shape[1] != f_in:
            raise ShapeError(
                f"{self.name}: input axis 1 has {x.shape[1]} maps, kernel expects {f_in}"
            )
        n, _, _, t = x.shape
        length, lo, _ = _corr_same_slices(t, ks)
        x2 = x[:, :, 0, :]
        df = np.fft.rfft(self.depth_kernel.value[:, 0, ::-1], n=length, axis=-1)
        mf = np.fft.rfft(x2, n=length, axis=-1) * df[None, :, :]
        mid = np.fft.irfft(mf, n=length, axis=-1)[..., lo : lo + t].astype(x.dtype)
        out = np.einsum("nit,fi->nft", mid, self.point_kernel.value)
        self._cache = (x2, mid) if train else None
        return out[:, :, None, :].astype(x.dtype)

    def backward(self, grad):
        x2, mid = self._need_cache()
        f_in, _, ks = self.depth_kernel.value.shape
        n, _, t = x2.shape
        length, _, glo = _corr_same_slices(t, ks)
        off = ks // 2
        g2 = grad[:, :, 0, :]
        self.point_kernel.grad = np.einsum("nft,nit->fi", g2, mid)
        dmid = np.einsum("nft,fi->nit", g2, self.point_kernel.value)
        gmf = np.fft.rfft(dmid, n=length, axis=-1)
        uf = np.fft.rfft(self.depth_kernel.value[:, 0, :], n=length, axis=-1)
        dx2 = np.fft.irfft(gmf * uf[None, :, :], n=length, axis=-1)[..., glo : glo + t]
        ef = np.einsum("nil,nil->il", np.conj(gmf), np.fft.rfft(x2, n=length, axis=-1))
        lags = np.fft.irfft(ef, n=length, axis=-1)
        idx = (np.arange(ks) - off) % length
        self.depth_kernel.grad = lags[:, idx][:, None, :].astype(x2.dtype)
        return dx2[:, :, None, :].astype(x2.dtype)


class BatchNorm(Layer):
    """Per-map batch normalization over (N, spatial, time).

    Train mode normalizes with biased batch statistics and updates running
    stats with momentum (new = momentum * old + (1 - momentum) * batch);
    infer mode uses the running stats.
    """

    name = "batch_norm"

    def __init__(self, n_maps, eps=1e-3, momentum=0.99, dtype=np.float32):
        self.gamma = Param(np.ones(n_maps, dtype=dtype), f"{self.name}.gamma")
        self.beta = Param(np.zeros(n_maps, dtype=dtype), f"{self.name}.beta")
        self.running_mean = np.zeros(n_maps, dtype=dtype)
        self.running_var = np.ones(n_maps, dtype=dtype)
        self.eps = eps
        self.momentum = momentum
        self._cache = None

    def params(self):
        return [self.gamma, self.beta]

    def state(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]

    def _check(self, x):
        if x.ndim != 4 or x.shape[1] != self.gamma.size:
            raise ShapeError(
                f"{self.name}: expected (N, {self.gamma.size}, H, T) input, got {x.shape}"
            )

    def forward(self, x, train=False):
        self._check(x)
        br = (None, slice(None), None, None)
        if not train:
            inv = 1.0 / np.sqrt(self.running_var + self.eps)
            scale = self.gamma.value * inv
            shift = self.beta.value - self.running_mean * scale
            return x * scale[br] + shift[br]
        mu = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu[br]) * inv[br]
        m = self.momentum
        self.running_mean[:] = m * self.running_mean + (1.0 - m) * mu
        self.running_var[:] = m * self.running_var + (1.0 - m) * var
        self._cache = (xhat, inv)
        return self.gamma.value[br] * xhat + self.beta.value[br]

    def backward(self, grad):
        xhat, inv = self._need_cache()
        br = (None, slice(None), None, None)
        m = grad.shape[0] * grad.shape[2] * grad.shape[3]
        dgamma = np.einsum("nfht,nfht->f", grad, xhat)
        dbeta = grad.sum(axis=(0, 2, 3))
        self.gamma.grad = dgamma.astype(grad.dtype)
        self.beta.grad = dbeta.astype(grad.dtype)
        centered = grad - dbeta[br] / m - xhat * (dgamma[br] / m)
        return (self.gamma.value * inv)[br] * centered


class Activation(Layer):
    """Elementwise activation with its exact derivative."""

    name = "activation"

    def __init__(self, kind):
        if kind not in activations.ACTIVATIONS:
            raise ConfigError(f"unknown activation {kind!r}; expected one of {activations.KINDS}")
        self.kind = kind
        self.fn, self.dfn = activations.get(kind)
        self._fwd_cached, self._bwd_cached = activations.CACHED[kind]
        self._cache = None

    def forward(self, x, train=False):
        if not train:
            return self.fn(x)
        y, aux = self._fwd_cached(x)
        self._cache = (x, aux)
        return y

    def backward(self, grad):
        x, aux = self._need_cache()
        return grad * self._bwd_cached(x, aux)


class AvgPool(Layer):
    """Non-overlapping arithmetic mean along time; width must divide T."""

    name = "avg_pool"

    def __init__(self, width):
        if width < 1:
            raise ConfigError(f"{self.name}: width must be >= 1, got {width}")
        self.width = width
        self._cache = None

    def forward(self, x, train=False):
        if x.ndim != 4:
            raise ShapeError(f"{self.name}: expected 4-d input, got {x.shape}")
        n, f, h, t = x.shape
        if t % self.width:
            raise ConfigError(
                f"{self.name}: width {self.width} does not divide time extent {t}"
            )
        self._cache = x.shape
        return x.reshape(n, f, h, t // self.width, self.width).mean(axis=4)

    def backward(self, grad):
        shape = self._need_cache()
        return np.repeat(grad / self.width, self.width, axis=3).reshape(shape)


class Dropout(Layer):
    """Inverted elementwise dropout; identity in infer mode."""

    name = "dropout"

    _mask_shape = staticmethod(lambda x: x.shape)

    def __init__(self, rate, rng):
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"{self.name}: rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng
        self._cache = None

    def forward(self, x, train=False):
        if not train or self.rate == 0.0:
            self._cache = (None, x.shape) if train else None
            return x
        keep = 1.0 - self.rate
        mask = self.rng.random(self._mask_shape(x)) >= self.rate
        scale = np.asarray(1.0 / keep, dtype=x.dtype)
        self._cache = (mask, scale)
        return x * mask * scale

    def backward(self, grad):
        mask, scale = self._need_cache()
        if mask is None:
            return grad
        return grad * mask * scale


class SpatialDropout(Dropout):
    """Dropout that zeroes whole feature maps (entire (1, T) slices)."""

    name = "spatial_dropout"

    _mask_shape = staticmethod(lambda x: (x.shape[0], x.shape[1], 1, 1))


class Flatten(Layer):
    name = "flatten"

    def forward(self, x, train=False):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        shape = self._need_cache()
        return grad.reshape(shape)


def softmax(logits):
    """Row-stable softmax: rows sum to 1, entries strictly inside (0, 1)."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def one_hot(labels, n_classes, dtype=np.float64):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ShapeError(f"labels must be 1-d, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DataError(f"labels must lie in [0, {n_classes}), got range "
                        f"[{labels.min()}, {labels.max()}]")
    out = np.zeros((labels.size, n_classes), dtype=dtype)
    out[np.arange(labels.size), labels] = 1
    return out


def cross_entropy(probs, labels):
    """Mean negative log-likelihood with probabilities clamped at 1e-12."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= probs.shape[1]):
        raise DataError(f"labels must lie in [0, {probs.shape[1]})")
    p = np.clip(probs[np.arange(labels.size), labels], 1e-12, None)
    return float(-np.log(p).mean())


class DenseSoftmax(Layer):
    """Fully connected layer (with bias) into a stable softmax.

    The adjoint is fused with mean cross-entropy: backward takes integer
    labels and propagates (probs - onehot) / N through the affine map.
    Weight columns carry a max-norm bound (the norm-rate knob).
    """

    name = "dense_softmax"

    def __init__(self, in_features, n_classes, norm_rate, rng, dtype=np.float32):
        limit = np.sqrt(6.0 / (in_features + n_classes))
        w = rng.uniform(-limit, limit, size=(in_features, n_classes))
        self.weight = Param(w.astype(dtype), f"{self.name}.weight")
        self.bias = Param(np.zeros(n_classes, dtype=dtype), f"{self.name}.bias")
        self.norm_rate = norm_rate
        self._cache = None

    def params(self):
        return [self.weight, self.bias]

    def constraints(self):
        return [(self.weight, self.norm_rate, 0)]

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.weight.value.shape[0]:
            raise ShapeError(
                f"{self.name}: expected (N, {self.weight.value.shape[0]}) input, got {x.shape}"
            )
        probs = softmax(x @ self.weight.value + self.bias.value)
        self._cache = (x, probs)
        return probs

    def backward(self, labels):
        x, probs = self._need_cache()
        n = x.shape[0]
        dlogits = (probs - one_hot(labels, probs.shape[1], dtype=probs.dtype)) / n
        self.weight.grad = x.T @ dlogits
        self.bias.grad = dlogits.sum(axis=0)
        return dlogits @ self.weight.value.T
