import numpy as np
import pytest

from cneegnet.errors import ConfigError, UsageError
from cneegnet.nn.layers import Param
from cneegnet.optim import KINDS, Optimizer, OptimizerHyper, apply_max_norm

LR, B1, B2, EPS = 0.0009, 0.9, 0.999, 1e-7


def one_step(kind, grad, value=None):
    value = np.zeros_like(grad) if value is None else value
    p = Param(value.copy(), "p")
    p.grad = grad.copy()
    Optimizer(OptimizerHyper(kind)).step([p])
    return p.value


def test_adam_first_step_closed_form():
    g = np.array([1.0, -2.0, 0.5])
    # m=b1h*g terms written out by hand for t=1
    m_hat = (1 - B1) * g / (1 - B1)
    v_hat = (1 - B2) * g * g / (1 - B2)
    want = -LR * m_hat / (np.sqrt(v_hat) + EPS)
    np.testing.assert_allclose(one_step("adam", g), want, atol=1e-12, rtol=0)


def test_nadam_first_step_closed_form():
    g = np.array([1.0, -0.25, 3.0])
    m = (1 - B1) * g
    v = (1 - B2) * g * g
    m_hat = m / (1 - B1 ** 2)      # lookahead bias term uses t+1
    g_hat = g / (1 - B1)
    v_hat = v / (1 - B2)
    want = -LR * (B1 * m_hat + (1 - B1) * g_hat) / (np.sqrt(v_hat) + EPS)
    np.testing.assert_allclose(one_step("nadam", g), want, atol=1e-12, rtol=0)
    # the scalar value for g=1, spelled out: 0.0009 * 1.4736842... / (1 + 1e-7)
    scalar = one_step("nadam", np.array([1.0]))[0]
    by_hand = -0.0009 * (0.9 * (0.1 / 0.19) + 0.1 * 10.0) / (1.0 + 1e-7)
    np.testing.assert_allclose(scalar, by_hand, atol=1e-15, rtol=0)


def test_adabelief_first_step_closed_form():
    g = np.array([1.0, -1.5])
    m = (1 - B1) * g
    s = (1 - B2) * (g - m) ** 2 + EPS   # epsilon added inside the accumulator
    m_hat = m / (1 - B1)
    s_hat = s / (1 - B2)
    want = -LR * m_hat / (np.sqrt(s_hat) + EPS)
    np.testing.assert_allclose(one_step("adabelief", g), want, atol=1e-12, rtol=0)
    # for g=1: s = 0.001*0.81 + 1e-7 = 8.101e-4, s_hat = 0.8101
    scalar = one_step("adabelief", np.array([1.0]))[0]
    np.testing.assert_allclose(scalar, -0.0009 / (np.sqrt(0.8101) + 1e-7),
                               atol=1e-15, rtol=0)


def test_sgd_step():
    g = np.array([2.0, -4.0])
    np.testing.assert_allclose(one_step("sgd", g), -LR * g, atol=1e-15)


def test_adagrad_step():
    g = np.array([3.0, -0.5])
    want = -LR * g / (np.sqrt(g * g) + EPS)
    np.testing.assert_allclose(one_step("adagrad", g), want, atol=1e-15)


def test_adadelta_first_step():
    g = np.array([1.0, 10.0])
    e_g = (1 - B2) * g * g
    delta = -np.sqrt(0.0 + EPS) / np.sqrt(e_g + EPS) * g
    np.testing.assert_allclose(one_step("adadelta", g), LR * delta, atol=1e-15)


def test_adamax_first_step():
    g = np.array([1.0, -2.0])
    m = (1 - B1) * g
    u = np.abs(g)
    want = -LR / (1 - B1) * m / (u + EPS)
    np.testing.assert_allclose(one_step("adamax", g), want, atol=1e-15)


@pytest.mark.parametrize("kind", ["adam", "nadam", "adabelief", "adamax"])
def test_second_step_matches_simulation(kind):
    # simulate two steps independently with plain scalar arithmetic
    g1, g2 = 1.0, -0.5
    p = Param(np.array([0.0]), "p")
    opt = Optimizer(OptimizerHyper(kind))
    p.grad = np.array([g1]); opt.step([p])
    p.grad = np.array([g2]); opt.step([p])

    theta, m, v, u, s = 0.0, 0.0, 0.0, 0.0, 0.0
    for t, g in [(1, g1), (2, g2)]:
        m = B1 * m + (1 - B1) * g
        if kind == "adam":
            v = B2 * v + (1 - B2) * g * g
            theta -= LR * (m / (1 - B1 ** t)) / (np.sqrt(v / (1 - B2 ** t)) + EPS)
        elif kind == "nadam":
            v = B2 * v + (1 - B2) * g * g
            m_hat = m / (1 - B1 ** (t + 1))
            g_hat = g / (1 - B1 ** t)
            theta -= LR * (B1 * m_hat + (1 - B1) * g_hat) / (
                np.sqrt(v / (1 - B2 ** t)) + EPS)
        elif kind == "adamax":
            u = max(B2 * u, abs(g))
            theta -= LR / (1 - B1 ** t) * m / (u + EPS)
        else:  # adabelief
            s = B2 * s + (1 - B2) * (g - m) ** 2 + EPS
            theta -= LR * (m / (1 - B1 ** t)) / (
                np.sqrt(s / (1 - B2 ** t)) + EPS)
    np.testing.assert_allclose(p.value[0], theta, atol=1e-12, rtol=0)


@pytest.mark.parametrize("kind,lr,steps", [
    ("sgd", 0.1, 100),
    ("adagrad", 0.5, 200),
    ("adadelta", 2.0, 500),
    ("adam", 0.05, 200),
    ("adamax", 0.05, 200),
    ("nadam", 0.05, 200),
    ("adabelief", 0.05, 200),
])
def test_quadratic_descent(kind, lr, steps):
    # minimize theta^2 from theta=1; every family must reach near zero with a
    # conventional rate for its scale behavior
    p = Param(np.array([1.0]), "theta")
    opt = Optimizer(OptimizerHyper(kind, lr=lr))
    for _ in range(steps):
        p.grad = 2.0 * p.value
        opt.step([p])
    assert abs(p.value[0]) < 0.05, f"{kind} ended at {p.value[0]}"


def test_step_counter_shared_across_params():
    a = Param(np.zeros(2), "a")
    b = Param(np.zeros(3), "b")
    opt = Optimizer(OptimizerHyper("adam"))
    a.grad = np.ones(2); b.grad = np.ones(3)
    opt.step([a, b])
    assert opt.t == 1
    opt.step([a, b])
    assert opt.t == 2
    # both params got the same-sized t=1 and t=2 updates
    np.testing.assert_allclose(a.value[0], b.value[0], atol=1e-15)


def test_zero_grad_is_noop_for_sgd():
    p = Param(np.full(2, 0.7), "p")  # freshly built params carry zero grads
    Optimizer(OptimizerHyper("sgd")).step([p])
    np.testing.assert_array_equal(p.value, np.full(2, 0.7))


def test_grad_shape_mismatch_rejected():
    p = Param(np.zeros(2), "p")
    p.grad = np.zeros(3)
    with pytest.raises(UsageError):
        Optimizer(OptimizerHyper("sgd")).step([p])


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        OptimizerHyper("rmsprop")


def test_hyper_validation():
    with pytest.raises(ConfigError):
        OptimizerHyper("adam", lr=0.0)
    with pytest.raises(ConfigError):
        OptimizerHyper("adam", beta1=1.0)
    with pytest.raises(ConfigError):
        OptimizerHyper("adam", epsilon=0.0)


def test_default_tuple():
    h = OptimizerHyper("adam")
    assert (h.lr, h.beta1, h.beta2, h.epsilon) == (0.0009, 0.9, 0.999, 1e-7)
    assert set(KINDS) == {"sgd", "adagrad", "adadelta", "adam", "adamax",
                          "nadam", "adabelief"}


# ------------------------------------------------------------ max norm

def test_max_norm_rescales_to_bound():
    w = np.array([[3.0], [4.0]])  # single column, norm 5
    out = apply_max_norm(w, 1.0, axis=0)
    np.testing.assert_allclose(out.ravel(), [0.6, 0.8], atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(out, axis=0), 1.0, atol=1e-12)


def test_max_norm_leaves_small_slices():
    w = np.array([[0.1, 3.0], [0.2, 4.0]])
    out = apply_max_norm(w, 1.0, axis=0)
    np.testing.assert_array_equal(out[:, 0], w[:, 0])  # norm 0.22 untouched
    np.testing.assert_allclose(np.linalg.norm(out[:, 1]), 1.0, atol=1e-12)


def test_max_norm_idempotent():
    rng = np.random.default_rng(0)
    w = rng.normal(scale=3.0, size=(6, 4))
    once = apply_max_norm(w, 0.5, axis=0)
    twice = apply_max_norm(once, 0.5, axis=0)
    np.testing.assert_allclose(once, twice, atol=1e-12)


def test_max_norm_row_axis():
    w = np.array([[3.0, 4.0], [0.1, 0.1]])
    out = apply_max_norm(w, 1.0, axis=1)
    np.testing.assert_allclose(out[0], [0.6, 0.8], atol=1e-12)
    np.testing.assert_array_equal(out[1], w[1])


def test_max_norm_zero_slice_untouched():
    w = np.zeros((3, 2))
    np.testing.assert_array_equal(apply_max_norm(w, 1.0, axis=0), w)
