import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cneegnet.errors import DataError, ShapeError
from cneegnet.estimator import (
    CNEEGNetClassifier,
    EEGNetClassifier,
    check_epoch_array,
    check_labels,
)
from cneegnet.synth import SynthConfig, generate

FAST = dict(f1=4, f2=4, d=2, kernel_length=16, dropout_rate=0.1,
            norm_rate=0.25, max_epochs=15, batch_size=32, early_stop=False,
            lr=0.005, random_state=0)


@pytest.fixture(scope="module")
def easy_xy():
    ds = generate(SynthConfig(n_epochs=140, channels=8, samples=64, seed=9,
                              oddball_rate=0.5, background_noise_uv=0.5,
                              p300_latency_s=0.25, p300_width_s=0.05))
    return ds.epochs, ds.labels


# ------------------------------------------------------------ validation helpers

def test_check_epoch_array():
    out = check_epoch_array(np.zeros((2, 3, 4), dtype=np.float64))
    assert out.dtype == np.float32 and out.flags["C_CONTIGUOUS"]
    with pytest.raises(ShapeError):
        check_epoch_array(np.zeros((3, 4)))
    with pytest.raises(DataError):
        check_epoch_array(np.zeros((0, 3, 4)))
    with pytest.raises(DataError):
        check_epoch_array(np.full((1, 2, 3), np.nan))
    with pytest.raises(DataError):
        check_epoch_array(np.array([[["a"]]]))


def test_check_labels():
    classes, enc = check_labels(np.array([5, 2, 5, 2]), 4)
    np.testing.assert_array_equal(classes, [2, 5])
    np.testing.assert_array_equal(enc, [1, 0, 1, 0])
    with pytest.raises(ShapeError):
        check_labels([0, 1], 3)
    with pytest.raises(DataError):
        check_labels([1, 1, 1], 3)
    with pytest.raises(DataError):
        check_labels([0, 1, 2], 3)


# ------------------------------------------------------------ sklearn conventions

def test_get_set_params_and_clone():
    est = CNEEGNetClassifier(**FAST)
    params = est.get_params()
    assert params["f1"] == 4 and params["lr"] == 0.005
    est2 = clone(est)
    assert est2.get_params() == params
    est3 = est.set_params(f1=8)
    assert est3 is est and est.f1 == 8


def test_defaults_differ_by_arch():
    cn, eeg = CNEEGNetClassifier(), EEGNetClassifier()
    assert (cn.f1, cn.dropout_rate, cn.norm_rate) == (16, 0.15, 0.17)
    assert (eeg.f1, eeg.dropout_rate, eeg.norm_rate) == (8, 0.25, 0.25)
    assert cn._arch == "cn-eegnet" and eeg._arch == "eegnet"


def test_unfitted_raises():
    est = CNEEGNetClassifier(**FAST)
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((1, 8, 64), np.float32))
    with pytest.raises(NotFittedError):
        est.predict_proba(np.zeros((1, 8, 64), np.float32))


# ------------------------------------------------------------ fit/predict

def test_fit_predict_easy_data(easy_xy):
    X, y = easy_xy
    est = CNEEGNetClassifier(**FAST).fit(X, y)
    assert est.score(X, y) >= 0.95
    np.testing.assert_array_equal(est.classes_, [0, 1])
    proba = est.predict_proba(X[:5])
    assert proba.shape == (5, 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-5)
    preds = est.predict(X[:5])
    assert set(np.unique(preds)) <= {0, 1}
    assert est.n_epochs_fit_ == X.shape[0]
    assert est.report_.stopped_at_epoch == 15


def test_eegnet_variant_fits(easy_xy):
    X, y = easy_xy
    est = EEGNetClassifier(**FAST).fit(X, y)
    assert est.score(X, y) >= 0.9


def test_original_label_values_preserved(easy_xy):
    X, y = easy_xy
    y2 = np.where(y == 1, 7, -3)
    est = CNEEGNetClassifier(**FAST).fit(X, y2)
    np.testing.assert_array_equal(est.classes_, [-3, 7])
    assert set(np.unique(est.predict(X[:10]))) <= {-3, 7}


def test_fit_is_deterministic(easy_xy):
    X, y = easy_xy
    p1 = CNEEGNetClassifier(**FAST).fit(X, y).predict_proba(X[:8])
    p2 = CNEEGNetClassifier(**FAST).fit(X, y).predict_proba(X[:8])
    np.testing.assert_array_equal(p1, p2)


def test_random_state_changes_fit(easy_xy):
    X, y = easy_xy
    cfg = {**FAST, "max_epochs": 3}
    p1 = CNEEGNetClassifier(**cfg).fit(X, y).predict_proba(X[:8])
    p2 = CNEEGNetClassifier(**{**cfg, "random_state": 1}).fit(X, y).predict_proba(X[:8])
    assert not np.array_equal(p1, p2)


def test_predict_shape_mismatch(easy_xy):
    X, y = easy_xy
    est = CNEEGNetClassifier(**FAST).fit(X, y)
    with pytest.raises(ShapeError):
        est.predict(np.zeros((2, 8, 32), np.float32))


def test_bad_validation_fraction(easy_xy):
    X, y = easy_xy
    with pytest.raises(DataError):
        CNEEGNetClassifier(**{**FAST, "validation_fraction": 0.0}).fit(X, y)
