import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momentum_flow.neural import (
    AdamState,
    VelocityModel,
    adam_update,
    batch_loss,
    finite_diff_check,
    init_model,
    model_eval,
    model_grad,
    time_features,
    zero_model,
)


def _random_batch(d, n, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, d)), rng.random(n), rng.standard_normal((n, d))


def _perturbed(d, width, seed):
    model = init_model(d, width, seed)
    rng = np.random.default_rng(seed + 1000)
    for k in ("b1", "b2", "b3"):
        model.params[k] = 0.1 * rng.standard_normal(model.params[k].shape)
    return model


def test_init_is_deterministic():
    a, b = init_model(2, 128, 42), init_model(2, 128, 42)
    for k in a.params:
        np.testing.assert_array_equal(a.params[k], b.params[k])


def test_init_shapes():
    m = init_model(2, 1, 0)
    assert m.params["W3"].shape == (1, 2)
    assert m.params["W1"].shape == (2 + 16 + 1, 1)
    assert all(np.all(m.params[k] == 0) for k in ("b1", "b2", "b3"))


def test_init_output_scale():
    m = init_model(2, 128, 0)
    rng = np.random.default_rng(1)
    x = rng.standard_normal((2000, 2))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    out = m(x, rng.random(2000))
    assert np.sqrt(np.mean(np.sum(out**2, axis=1))) < 1.0


def test_zero_model_outputs_zero():
    out = model_eval(zero_model(2), np.ones((3, 2)), 0.3)
    np.testing.assert_array_equal(out, 0.0)


def test_eval_pure_and_shapes():
    m = init_model(3, 16, 5)
    x = np.array([0.1, 0.2, 0.3])
    a, b = m(x, 0.4), m(x, 0.4)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (3,)
    with pytest.raises(ValueError):
        m(np.ones(2), 0.1)


def test_time_features_alias_without_linear_column():
    f0, f1 = time_features(0.0, 16), time_features(1.0, 16)
    np.testing.assert_allclose(f0[:, :-1], f1[:, :-1], atol=1e-14)
    assert f0[0, -1] == 0.0 and f1[0, -1] == 1.0


def test_linear_time_column_separates_path_ends():
    m = init_model(2, 32, 0)
    x = np.array([0.5, -0.5])
    assert np.abs(m(x, 0.0) - m(x, 1.0)).max() > 1e-6


def test_grad_zero_at_minimum():
    m = zero_model(2)
    x = np.random.default_rng(0).standard_normal((5, 2))
    loss, grads = model_grad(m, x, 0.5, np.zeros((5, 2)))
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads.values())


def test_grad_rejects_empty_batch():
    with pytest.raises(ValueError):
        model_grad(init_model(2, 4, 0), np.empty((0, 2)), np.empty(0), np.empty((0, 2)))


def test_duplicating_batch_is_invariant():
    m = _perturbed(2, 16, 3)
    x, tau, y = _random_batch(2, 10, 4)
    l1, g1 = model_grad(m, x, tau, y)
    l2, g2 = model_grad(m, np.tile(x, (2, 1)), np.tile(tau, 2), np.tile(y, (2, 1)))
    assert l1 == pytest.approx(l2, rel=1e-14)
    for k in g1:
        np.testing.assert_allclose(g1[k], g2[k], rtol=1e-12, atol=1e-15)


def test_loss_matches_batch_loss():
    m = _perturbed(2, 16, 3)
    x, tau, y = _random_batch(2, 10, 4)
    assert model_grad(m, x, tau, y)[0] == batch_loss(m, x, tau, y)


@pytest.mark.parametrize("d,width,n", [(1, 4, 8), (2, 16, 32), (2, 128, 32), (3, 7, 5)])
def test_gradients_match_finite_differences(d, width, n):
    m = _perturbed(d, width, d * 100 + width)
    x, tau, y = _random_batch(d, n, width)
    assert finite_diff_check(m, x, tau, y, h=1e-5) <= 1e-5


def test_finite_diff_zero_model_is_exact():
    m = zero_model(2)
    assert finite_diff_check(m, np.ones((4, 2)), 0.2, np.zeros((4, 2))) == 0.0


def test_finite_diff_large_step_is_worse():
    m = _perturbed(2, 32, 1)
    x, tau, y = _random_batch(2, 32, 2)
    assert finite_diff_check(m, x, tau, y, h=1e-1) > finite_diff_check(m, x, tau, y, h=1e-5)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(1, 4), width=st.integers(1, 24), n=st.integers(1, 20))
def test_loss_non_negative_and_gradient_exact(seed, d, width, n):
    m = _perturbed(d, width, seed)
    x, tau, y = _random_batch(d, n, seed)
    loss, _ = model_grad(m, x, tau, y)
    assert loss >= 0.0
    assert finite_diff_check(m, x, tau, y, n_probe=10, seed=seed) <= 1e-5


def test_adam_zero_gradient_is_fixed_point():
    m = init_model(2, 8, 0)
    st_ = AdamState.for_model(m)
    zeros = {k: np.zeros_like(v) for k, v in m.params.items()}
    st2, m2 = adam_update(st_, m, zeros)
    for k in m.params:
        np.testing.assert_array_equal(m.params[k], m2.params[k])
    assert st2.step == 1


def test_adam_first_step_is_sign_of_gradient():
    m = init_model(2, 8, 0)
    st_ = AdamState.for_model(m, lr=1e-3)
    rng = np.random.default_rng(0)
    grads = {k: rng.standard_normal(v.shape) for k, v in m.params.items()}
    _, m2 = adam_update(st_, m, grads)
    for k in m.params:
        delta = m2.params[k] - m.params[k]
        assert np.all(np.abs(delta) <= 1e-3 * (1 + 1e-6))
        np.testing.assert_allclose(delta, -1e-3 * np.sign(grads[k]), rtol=1e-5)


def test_adam_descends_quadratic():
    # f(w) = w^2 on the b3 slot, other parameters frozen at zero gradient
    m = zero_model(1, hidden_width=1)
    m.params["b3"][:] = 1.0
    st_ = AdamState.for_model(m, lr=0.1)
    losses = []
    for _ in range(2):
        w = m.params["b3"][0]
        losses.append(w * w)
        grads = {k: np.zeros_like(v) for k, v in m.params.items()}
        grads["b3"] = np.array([2 * w])
        st_, m = adam_update(st_, m, grads)
    w = m.params["b3"][0]
    assert w * w < losses[1] < losses[0]


def test_adam_does_not_mutate_inputs():
    m = init_model(2, 8, 0)
    before = {k: v.copy() for k, v in m.params.items()}
    grads = {k: np.ones_like(v) for k, v in m.params.items()}
    adam_update(AdamState.for_model(m), m, grads)
    for k in m.params:
        np.testing.assert_array_equal(before[k], m.params[k])


def test_adam_shape_mismatch():
    m = init_model(2, 8, 0)
    grads = {k: np.ones_like(v) for k, v in m.params.items()}
    grads["W2"] = np.ones((3, 3))
    with pytest.raises(ValueError):
        adam_update(AdamState.for_model(m), m, grads)


def test_model_json_roundtrip():
    m = init_model(2, 16, 9)
    doc = m.to_dict()
    assert doc["version"] == 1
    m2 = VelocityModel.from_dict(doc)
    x = np.random.default_rng(0).standard_normal((4, 2))
    np.testing.assert_array_equal(m(x, 0.3), m2(x, 0.3))
    doc["version"] = 99
    with pytest.raises(ValueError):
        VelocityModel.from_dict(doc)
