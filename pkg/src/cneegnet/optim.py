"""First-order optimizers swept during tuning, plus max-norm projection.

All adaptive optimizers share one hyperparameter tuple (lr, beta1, beta2,
epsilon); SGD uses lr only, and Adadelta reads beta2 as its decay rho with lr
as a final scale on the classic unit-step rule.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UsageError

KINDS = ("sgd", "adagrad", "adadelta", "adam", "adamax", "nadam", "adabelief")


@dataclass
class OptimizerHyper:
    kind: str = "adam"
    lr: float = 0.0009
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown optimizer kind {self.kind!r}; expected one of {KINDS}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError(
                f"beta1/beta2 must lie in [0, 1), got {self.beta1}, {self.beta2}"
            )
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")


def apply_max_norm(kernel, c, axis=0):
    """Rescale any slice whose L2 norm along `axis` exceeds c back inside c.

    Norms accumulate in float64 and violating slices are scaled to a target a
    few ulps of the kernel dtype inside c: rescaling to exactly c can round one
    epsilon above the bound in float32 storage. Slices already within the bound
    are untouched, so the projection is idempotent.
    """
    norms = np.sqrt(np.square(kernel, dtype=np.float64).sum(axis=axis, keepdims=True))
    target = c * (1.0 - 4.0 * float(np.finfo(kernel.dtype).eps))
    scale = np.where(norms > c, target / np.where(norms > 0, norms, 1.0), 1.0)
    return (kernel * scale).astype(kernel.dtype, copy=False)


class Optimizer:
    """Stateful stepper over a fixed list of Param objects.

    Moment buffers are allocated lazily per parameter on the first step; the
    shared step counter t increments once per step() call before any update.
    """

    def __init__(self, hyper):
        if not isinstance(hyper, OptimizerHyper):
            hyper = OptimizerHyper(**hyper) if isinstance(hyper, dict) else OptimizerHyper(hyper)
        self.hyper = hyper
        self.t = 0
        self._slots = {}

    def _slot(self, param, names):
        entry = self._slots.get(id(param))
        if entry is None:
            entry = {n: np.zeros_like(param.value) for n in names}
            self._slots[id(param)] = entry
        return entry

    def step(self, params):
        self.t += 1
        h = self.hyper
        for p in params:
            g = p.grad
            if g.shape != p.value.shape:
                raise UsageError(
                    f"gradient shape {g.shape} does not match parameter "
                    f"{p.name} shape {p.value.shape}"
                )
            getattr(self, f"_step_{h.kind}")(p, g, h)

    def _step_sgd(self, p, g, h):
        p.value -= h.lr * g

    def _step_adagrad(self, p, g, h):
        s = self._slot(p, ("acc",))
        s["acc"] += g * g
        p.value -= h.lr * g / (np.sqrt(s["acc"]) + h.epsilon)

    def _step_adadelta(self, p, g, h):
        s = self._slot(p, ("acc_g", "acc_d"))
        rho = h.beta2
        s["acc_g"][...] = rho * s["acc_g"] + (1 - rho) * g * g
        delta = -np.sqrt(s["acc_d"] + h.epsilon) / np.sqrt(s["acc_g"] + h.epsilon) * g
        s["acc_d"][...] = rho * s["acc_d"] + (1 - rho) * delta * delta
        p.value += h.lr * delta

    def _step_adam(self, p, g, h):
        s = self._slot(p, ("m", "v"))
        s["m"][...] = h.beta1 * s["m"] + (1 - h.beta1) * g
        s["v"][...] = h.beta2 * s["v"] + (1 - h.beta2) * g * g
        mhat = s["m"] / (1 - h.beta1**self.t)
        vhat = s["v"] / (1 - h.beta2**self.t)
        p.value -= h.lr * mhat / (np.sqrt(vhat) + h.epsilon)

    def _step_adamax(self, p, g, h):
        s = self._slot(p, ("m", "u"))
        s["m"][...] = h.beta1 * s["m"] + (1 - h.beta1) * g
        s["u"][...] = np.maximum(h.beta2 * s["u"], np.abs(g))
        p.value -= (h.lr / (1 - h.beta1**self.t)) * s["m"] / (s["u"] + h.epsilon)

    def _step_nadam(self, p, g, h):
        # Nesterov lookahead with a constant momentum schedule: the update
        # blends the bias-corrected next-step momentum with the raw gradient.
        s = self._slot(p, ("m", "v"))
        s["m"][...] = h.beta1 * s["m"] + (1 - h.beta1) * g
        s["v"][...] = h.beta2 * s["v"] + (1 - h.beta2) * g * g
        mhat = s["m"] / (1 - h.beta1 ** (self.t + 1))
        ghat = g / (1 - h.beta1**self.t)
        vhat = s["v"] / (1 - h.beta2**self.t)
        p.value -= h.lr * (h.beta1 * mhat + (1 - h.beta1) * ghat) / (np.sqrt(vhat) + h.epsilon)

    def _step_adabelief(self, p, g, h):
        # second moment tracks the belief residual (g - m)^2, with epsilon
        # added into the accumulator itself as well as the denominator
        s = self._slot(p, ("m", "s"))
        s["m"][...] = h.beta1 * s["m"] + (1 - h.beta1) * g
        diff = g - s["m"]
        s["s"][...] = h.beta2 * s["s"] + (1 - h.beta2) * diff * diff + h.epsilon
        mhat = s["m"] / (1 - h.beta1**self.t)
        shat = s["s"] / (1 - h.beta2**self.t)
        p.value -= h.lr * mhat / (np.sqrt(shat) + h.epsilon)
