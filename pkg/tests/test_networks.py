import numpy as np
import pytest
import torch

from abusedetect.errors import ContractViolation
from abusedetect.features import EmbeddingSequence
from abusedetect.models.networks import CnnBody, HybridBody, lstm_params_from_torch
from abusedetect.models.ops import (
    ConvLayerSpec,
    LstmState,
    conv1d_ngram,
    hybrid_forward,
    lstm_step,
    max_pool,
    relu,
)


def _body(d=6, seed=0):
    torch.manual_seed(seed)
    return HybridBody(d, (8, 5, 4), 3, 7, 6, 2).double().eval()


def test_full_width_conv_stack_preserves_length():
    torch.manual_seed(0)
    body = HybridBody(768, (512, 256, 128), 3, 500, 128, 2).eval()
    x = torch.randn(1, 10, 768)
    with torch.no_grad():
        h = body.conv_features(x, torch.ones(1, 10, dtype=torch.bool))
    assert h.shape == (1, 10, 128)
    assert body.lstm.hidden_size == 500


def test_numpy_forward_matches_torch_on_padded_batch():
    body = _body()
    params = body.to_numpy_params()
    rng = np.random.default_rng(1)
    lengths = [5, 2, 1]
    x = np.zeros((3, 5, 6))
    mask = np.zeros((3, 5), dtype=bool)
    for i, n in enumerate(lengths):
        x[i, :n] = rng.normal(size=(n, 6))
        x[i, n:] = 99.0  # garbage in pad positions must not leak
        mask[i, :n] = True
    with torch.no_grad():
        p_torch = torch.softmax(body(torch.from_numpy(x), torch.from_numpy(mask)), dim=1).numpy()
    for i, n in enumerate(lengths):
        p_np = hybrid_forward(params, EmbeddingSequence(x[i], mask[i]))
        np.testing.assert_allclose(p_np, p_torch[i], rtol=1e-9, atol=1e-12)
        assert p_np.shape == (2,) and abs(p_np.sum() - 1) < 1e-12


def test_hybrid_forward_deterministic_and_shape_errors():
    params = _body().to_numpy_params()
    seq = EmbeddingSequence(np.random.default_rng(0).normal(size=(4, 6)))
    np.testing.assert_array_equal(hybrid_forward(params, seq), hybrid_forward(params, seq))
    with pytest.raises(ContractViolation, match="conv layer 0"):
        hybrid_forward(params, EmbeddingSequence(np.zeros((4, 5))))


def test_torch_lstm_conversion_matches_step():
    torch.manual_seed(3)
    lstm = torch.nn.LSTM(3, 2, batch_first=True).double()
    p = lstm_params_from_torch(lstm)
    x = np.random.default_rng(0).normal(size=(1, 1, 3))
    with torch.no_grad():
        _, (h, c) = lstm(torch.from_numpy(x))
    s = lstm_step(p, LstmState.zeros(2), x[0, 0])
    np.testing.assert_allclose(s.h, h[0, 0].numpy(), rtol=1e-12)
    np.testing.assert_allclose(s.c, c[0, 0].numpy(), rtol=1e-12)


def test_cnn_body_matches_valid_conv_and_pool():
    torch.manual_seed(0)
    body = CnnBody(4, 3, 2, 2).double().eval()
    layer = ConvLayerSpec(body.conv.weight.detach().numpy(), body.conv.bias.detach().numpy())
    rng = np.random.default_rng(0)
    x = np.zeros((2, 5, 4))
    x[0] = rng.normal(size=(5, 4))
    x[1, :3] = rng.normal(size=(3, 4))
    mask = np.array([[True] * 5, [True] * 3 + [False] * 2])
    with torch.no_grad():
        logits = body(torch.from_numpy(x), torch.from_numpy(mask)).numpy()
    W, b = body.out.weight.detach().numpy(), body.out.bias.detach().numpy()
    for i, n in enumerate([5, 3]):
        pooled = relu(max_pool(conv1d_ngram(x[i, :n], layer)))
        np.testing.assert_allclose(logits[i], W @ pooled + b, rtol=1e-10)
