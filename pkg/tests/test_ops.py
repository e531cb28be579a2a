import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abusedetect.errors import ContractViolation, NumericError
from abusedetect.models.ops import (
    ConvLayerSpec,
    HeadParams,
    LstmParams,
    LstmState,
    conv1d_backward,
    conv1d_ngram,
    conv1d_same,
    dense_softmax,
    lstm_sequence,
    lstm_step,
    lstm_step_backward,
    max_pool,
    relu,
    softmax,
)

from oracles import brute_conv, brute_max_pool, scalar_lstm_step


def _layer(rng, m, d, l):
    return ConvLayerSpec(rng.normal(size=(m, d, l)), rng.normal(size=m))


def test_conv_all_ones():
    layer = ConvLayerSpec(np.ones((1, 2, 3)), np.zeros(1))
    out = conv1d_ngram(np.ones((3, 2)), layer)
    assert out.shape == (1, 1)
    assert out[0, 0] == 6.0


def test_conv_output_positions():
    rng = np.random.default_rng(0)
    assert conv1d_ngram(rng.normal(size=(5, 4)), _layer(rng, 2, 4, 3)).shape == (3, 2)


def test_conv_matches_brute_force_random_4_token():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(4, 3))
    layer = _layer(rng, 2, 3, 2)
    expected = brute_conv(x.tolist(), layer.weight.tolist(), layer.bias.tolist())
    np.testing.assert_allclose(conv1d_ngram(x, layer), expected, rtol=1e-12)


def test_conv_short_input_is_padded_to_kernel():
    layer = ConvLayerSpec(np.ones((1, 2, 3)), np.zeros(1))
    out = conv1d_ngram(np.ones((1, 2)), layer)
    assert out.shape == (1, 1) and out[0, 0] == 2.0


def test_conv_dimension_mismatch():
    rng = np.random.default_rng(2)
    with pytest.raises(ContractViolation):
        conv1d_ngram(rng.normal(size=(5, 4)), _layer(rng, 2, 3, 3))


def test_conv_same_preserves_length():
    rng = np.random.default_rng(3)
    for l in (1, 2, 3, 4, 5):
        assert conv1d_same(rng.normal(size=(7, 2)), _layer(rng, 3, 2, l)).shape == (7, 3)


def test_max_pool_examples():
    np.testing.assert_array_equal(max_pool(np.array([[1.0, 5.0], [3.0, 2.0]])), [3.0, 5.0])
    np.testing.assert_array_equal(max_pool(np.array([[4.0, -1.0]])), [4.0, -1.0])
    with pytest.raises(ContractViolation):
        max_pool(np.zeros((0, 3)))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_max_pool_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    rows = rng.normal(size=(int(rng.integers(1, 9)), int(rng.integers(1, 5))))
    np.testing.assert_array_equal(max_pool(rows), max_pool(rows[rng.permutation(len(rows))]))


@settings(max_examples=600, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_conv_pool_oracle_property(seed):
    rng = np.random.default_rng(seed)
    d, m = int(rng.integers(1, 5)), int(rng.integers(1, 5))
    n = int(rng.integers(1, 9))
    l = int(rng.integers(1, n + 1))
    x = rng.normal(size=(n, d))
    layer = _layer(rng, m, d, l)
    expected = brute_conv(x.tolist(), layer.weight.tolist(), layer.bias.tolist())
    got = conv1d_ngram(x, layer)
    np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(max_pool(got), brute_max_pool(expected), rtol=1e-10, atol=1e-12)


def test_relu_examples():
    np.testing.assert_array_equal(relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])
    np.testing.assert_array_equal(relu(np.array([-3.0, -0.5])), [0.0, 0.0])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
def test_relu_idempotent(v):
    v = np.array(v)
    np.testing.assert_array_equal(relu(relu(v)), relu(v))


def _params_to_dicts(p):
    W = {g: getattr(p, f"W_{g}").tolist() for g in "fico"}
    b = {g: getattr(p, f"b_{g}").tolist() for g in "fico"}
    return W, b


def test_lstm_zero_weights():
    p = LstmParams.zeros(3, 2)
    v = np.array([0.8, -1.2])
    s = lstm_step(p, LstmState(c=v, h=np.zeros(2)), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(s.c, 0.5 * v)
    np.testing.assert_allclose(s.h, 0.5 * np.tanh(0.5 * v))


def test_lstm_saturated_forget_gate_preserves_cell():
    z = LstmParams.zeros(2, 2)
    p = LstmParams(z.W_f, z.W_i, z.W_c, z.W_o, np.full(2, 20.0), z.b_i, z.b_c, z.b_o)
    v = np.array([0.3, -0.7])
    s = lstm_step(p, LstmState(c=v, h=np.zeros(2)), np.array([5.0, -5.0]))
    np.testing.assert_allclose(s.c, v, atol=1e-8)


def test_lstm_step_matches_scalar_oracle():
    rng = np.random.default_rng(42)
    p = LstmParams.random(3, 2, rng)
    prev = LstmState(c=rng.normal(size=2), h=np.tanh(rng.normal(size=2)))
    x = rng.normal(size=3)
    W, b = _params_to_dicts(p)
    c, h, _ = scalar_lstm_step(W, b, prev.h.tolist(), prev.c.tolist(), x.tolist())
    s = lstm_step(p, prev, x)
    np.testing.assert_allclose(s.c, c, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(s.h, h, rtol=1e-9, atol=1e-12)


def test_lstm_sequence_fold():
    rng = np.random.default_rng(7)
    p = LstmParams.random(3, 2, rng)
    xs = rng.normal(size=(3, 3))
    final, hs = lstm_sequence(p, xs)
    W, b = _params_to_dicts(p)
    h, c = [0.0, 0.0], [0.0, 0.0]
    for t in range(3):
        c, h, _ = scalar_lstm_step(W, b, h, c, xs[t].tolist())
        np.testing.assert_allclose(hs[t], h, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(final.c, c, rtol=1e-9, atol=1e-12)
    one, _ = lstm_sequence(p, xs[:1])
    step = lstm_step(p, LstmState.zeros(2), xs[0])
    np.testing.assert_array_equal(one.h, step.h)


def test_lstm_zero_weights_state_independent_of_input():
    p = LstmParams.zeros(4, 3)
    _, hs = lstm_sequence(p, np.random.default_rng(0).normal(size=(5, 4)) * 100)
    _, hs2 = lstm_sequence(p, np.zeros((5, 4)))
    np.testing.assert_array_equal(hs, hs2)


def test_lstm_empty_sequence_rejected():
    with pytest.raises(ContractViolation):
        lstm_sequence(LstmParams.zeros(2, 2), [])


def test_lstm_non_finite_input_raises_with_step():
    p = LstmParams.zeros(1, 1)
    z = LstmParams.zeros(1, 1)
    p = LstmParams(np.ones((1, 2)), z.W_i, z.W_c, z.W_o, z.b_f, z.b_i, z.b_c, z.b_o)
    with pytest.raises(NumericError, match="step 1"):
        lstm_sequence(p, [np.array([0.0]), np.array([np.nan])])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lstm_gate_and_output_bounds(seed):
    rng = np.random.default_rng(seed)
    p = LstmParams.random(3, 4, rng, scale=0.5)
    state = LstmState.zeros(4)
    for _ in range(4):
        cache = {}
        state = lstm_step(p, state, rng.normal(size=3), cache=cache)
        for g in ("f", "i", "o"):
            assert np.all((cache[g] > 0) & (cache[g] < 1))
        assert np.all(np.abs(state.h) < 1)
    # large pre-activations saturate to the closed interval in float64
    big = LstmParams.random(3, 4, rng, scale=5.0)
    cache = {}
    s = lstm_step(big, LstmState.zeros(4), rng.normal(size=3) * 50, cache=cache)
    for g in ("f", "i", "o"):
        assert np.all((cache[g] >= 0) & (cache[g] <= 1))
    assert np.all(np.abs(s.h) <= 1)


def test_softmax_examples():
    np.testing.assert_allclose(softmax(np.zeros(2)), [0.5, 0.5])
    p = softmax(np.array([1000.0, 0.0]))
    assert np.all(np.isfinite(p)) and p[0] == pytest.approx(1.0) and p[1] < 1e-300 + 1e-12


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=6), st.floats(-1e3, 1e3))
def test_softmax_shift_invariance(z, c):
    z = np.array(z)
    np.testing.assert_allclose(softmax(z + c), softmax(z), atol=1e-9)
    assert np.argmax(softmax(z + c)) == np.argmax(softmax(z)) or np.isclose(
        np.sort(z)[-1], np.sort(z)[-2])


def test_dense_softmax_is_distribution():
    rng = np.random.default_rng(0)
    head = HeadParams(rng.normal(size=(5, 4)), rng.normal(size=5), rng.normal(size=(2, 5)), rng.normal(size=2))
    p = dense_softmax(rng.normal(size=4), head)
    assert p.shape == (2,) and np.all(p >= 0) and abs(p.sum() - 1) < 1e-12


# ---- gradient checks -------------------------------------------------------

def _rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def _central(f, arr, idx, eps=1e-6):
    old = arr[idx]
    arr[idx] = old + eps
    up = f()
    arr[idx] = old - eps
    down = f()
    arr[idx] = old
    return (up - down) / (2 * eps)


def conv_gradient_errors(n_points, seed=0):
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(n_points):
        n, d, m, l = 6, 3, 4, 3
        x = rng.normal(size=(n, d))
        W = rng.normal(size=(m, d, l))
        b = rng.normal(size=m)
        G = rng.normal(size=(n - l + 1, m))

        def loss():
            return float(np.sum(G * conv1d_ngram(x, ConvLayerSpec(W, b))))

        dx, dW, db = conv1d_backward(x, ConvLayerSpec(W, b), G)
        which = rng.integers(3)
        arr, grad = [(x, dx), (W, dW), (b, db)][which]
        idx = tuple(int(rng.integers(s)) for s in arr.shape)
        errs.append(_rel_err(grad[idx], _central(loss, arr, idx)))
    return errs


def lstm_gradient_errors(n_points, seed=0):
    rng = np.random.default_rng(seed)
    errs = []
    names = ["W_f", "W_i", "W_c", "W_o", "b_f", "b_i", "b_c", "b_o"]
    for _ in range(n_points):
        p = LstmParams.random(3, 2, rng)
        arrays = {k: getattr(p, k).copy() for k in names}
        h0, c0, x = rng.normal(size=2), rng.normal(size=2), rng.normal(size=3)
        gh, gc = rng.normal(size=2), rng.normal(size=2)

        def loss():
            s = lstm_step(LstmParams(**arrays), LstmState(c=c0, h=h0), x)
            return float(gh @ s.h + gc @ s.c)

        cache = {}
        lstm_step(LstmParams(**arrays), LstmState(c=c0, h=h0), x, cache=cache)
        grads = lstm_step_backward(LstmParams(**arrays), cache, gh, gc)
        targets = [(arrays[k], grads[k]) for k in names] + [(h0, grads["h_prev"]), (c0, grads["c_prev"]),
                                                            (x, grads["x"])]
        arr, grad = targets[int(rng.integers(len(targets)))]
        idx = tuple(int(rng.integers(s)) for s in arr.shape)
        errs.append(_rel_err(grad[idx], _central(loss, arr, idx)))
    return errs


def test_conv_gradient_check():
    assert max(conv_gradient_errors(120)) <= 1e-4


def test_lstm_gradient_check():
    assert max(lstm_gradient_errors(120)) <= 1e-4
