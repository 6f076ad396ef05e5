"""Finite-difference verification of every hand-written backward pass.

All checks run in 64-bit with central differences; the deterministic layer
kinds are covered across 20 seeds at small shapes, and the assembled model is
checked end to end under cross-entropy with dropout disabled.
"""

import time

import numpy as np
import pytest

from cneegnet.errors import DataError
from cneegnet.models import ModelConfig
from cneegnet.nn.gradcheck import (DEFAULT_TOL, check_dense_softmax, check_model,
                                   check_probe, run_layer_suite)
from cneegnet.nn import layers as L

EXPECTED_KINDS = {
    "temporal_conv", "depthwise_conv", "separable_conv", "batch_norm",
    "activation_elu", "activation_relu", "activation_swish", "activation_mish",
    "avg_pool", "dense_softmax_cross_entropy",
}


def test_layer_suite_all_kinds_within_tolerance():
    started = time.perf_counter()
    results = run_layer_suite(seeds=range(20))
    elapsed = time.perf_counter() - started
    assert {r.name for r in results} == EXPECTED_KINDS
    for r in results:
        assert r.max_rel_err <= DEFAULT_TOL, f"{r.name}: {r.max_rel_err:.3e}"
        assert r.n_checked > 0
    assert elapsed < 60.0


def test_dense_softmax_alone():
    for seed in range(5):
        res = check_dense_softmax(np.random.default_rng(seed))
        assert res.max_rel_err <= DEFAULT_TOL


def test_model_level_both_archs():
    for arch in ("cn-eegnet", "eegnet"):
        cfg = ModelConfig(arch=arch, f1=2, f2=4, d=2, kernel_length=8,
                          dropout_rate=0.0, norm_rate=0.25, channels=4,
                          samples=32)
        for r in check_model(cfg, seed=1):
            assert r.max_rel_err <= DEFAULT_TOL, f"{arch} {r.name}: {r.max_rel_err:.3e}"


def test_model_check_requires_dropout_off():
    cfg = ModelConfig(arch="cn-eegnet", f1=2, f2=4, d=2, kernel_length=8,
                      dropout_rate=0.5, norm_rate=0.25, channels=4, samples=32)
    with pytest.raises(DataError):
        check_model(cfg)


def test_probe_catches_a_wrong_gradient():
    # sanity of the harness itself: corrupt a backward pass and the check fails
    class Broken(L.AvgPool):
        def backward(self, grad):
            return super().backward(grad) * 1.5

    rng = np.random.default_rng(0)
    layer = Broken(2)
    x = rng.normal(size=(2, 2, 2, 8))
    res = check_probe("broken", layer, x, rng)
    assert res.max_rel_err > DEFAULT_TOL
