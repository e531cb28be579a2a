"""PyTorch modules for the neural model kinds.

Every network is split into an input layer that turns a batch dict into
``(B, n, d)`` vectors, and a body mapping ``(vectors, mask)`` to class
logits. Batches are right-padded; ``mask`` is ``True`` on real tokens.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence

from .ops import ConvLayerSpec, HeadParams, HybridParams, LstmParams


class VectorInput(nn.Module):
    def forward(self, batch):
        return batch["vectors"]


class TfidfInput(nn.Module):
    """Learned projection of the tf-idf weighted one-hot token sequence.

    Equivalent to a linear layer on one-hot vectors scaled by each token's
    tf-idf weight, computed as an embedding lookup times the weight.
    """

    def __init__(self, vocab_size: int, dim: int):
        super().__init__()
        self.emb = nn.Embedding(vocab_size + 1, dim, padding_idx=0)

    def forward(self, batch):
        return self.emb(batch["ids"]) * batch["weights"].unsqueeze(-1)


class EncoderInput(nn.Module):
    """Runs a (fine-tunable) encoder module on token ids."""

    def __init__(self, encoder_module: nn.Module):
        super().__init__()
        self.encoder = encoder_module

    def forward(self, batch):
        return self.encoder(batch["ids"], batch["mask"])


def _final_hidden(lstm: nn.LSTM, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    lengths = mask.sum(dim=1).clamp(min=1).cpu()
    packed = pack_padded_sequence(x, lengths, batch_first=True, enforce_sorted=False)
    _, (h_n, _) = lstm(packed)
    return h_n[-1]


class HybridBody(nn.Module):
    """Conv stack (same padding, ReLU each) -> LSTM final state -> ReLU dense -> logits."""

    def __init__(self, d, conv_stack, kernel_size, lstm_hidden, dense_hidden, n_classes):
        super().__init__()
        channels = [d, *conv_stack]
        self.convs = nn.ModuleList(
            nn.Conv1d(c_in, c_out, kernel_size, padding="same") for c_in, c_out in zip(channels, channels[1:])
        )
        self.lstm = nn.LSTM(conv_stack[-1], lstm_hidden, batch_first=True)
        self.dense = nn.Linear(lstm_hidden, dense_hidden)
        self.out = nn.Linear(dense_hidden, n_classes)

    def conv_features(self, x, mask):
        m = mask.unsqueeze(1).to(x.dtype)
        h = x.transpose(1, 2)
        for conv in self.convs:
            # zero pad positions so they act like the edge padding
            h = torch.relu(conv(h * m))
        return (h * m).transpose(1, 2)

    def forward(self, x, mask):
        h = _final_hidden(self.lstm, self.conv_features(x, mask), mask)
        return self.out(torch.relu(self.dense(h)))

    def to_numpy_params(self) -> HybridParams:
        def arr(t):
            return t.detach().double().numpy().copy()

        convs = tuple(ConvLayerSpec(arr(c.weight), arr(c.bias)) for c in self.convs)
        return HybridParams(convs, lstm_params_from_torch(self.lstm),
                            HeadParams(arr(self.dense.weight), arr(self.dense.bias),
                                       arr(self.out.weight), arr(self.out.bias)))


def lstm_params_from_torch(lstm: nn.LSTM) -> LstmParams:
    """Convert layer-0 weights of ``nn.LSTM`` (gate order i, f, g, o) to :class:`LstmParams`."""
    H = lstm.hidden_size
    w_ih = lstm.weight_ih_l0.detach().double().numpy()
    w_hh = lstm.weight_hh_l0.detach().double().numpy()
    b = (lstm.bias_ih_l0 + lstm.bias_hh_l0).detach().double().numpy()
    gate = {name: slice(k * H, (k + 1) * H) for k, name in enumerate("ifco")}

    def W(g):
        return np.concatenate([w_hh[gate[g]], w_ih[gate[g]]], axis=1)

    return LstmParams(W("f"), W("i"), W("c"), W("o"), b[gate["f"]], b[gate["i"]], b[gate["c"]], b[gate["o"]])


class CnnBody(nn.Module):
    """One valid convolution, max-pool over valid positions, ReLU, linear layer."""

    def __init__(self, d, filters, kernel_size, n_classes):
        super().__init__()
        self.kernel_size = kernel_size
        self.conv = nn.Conv1d(d, filters, kernel_size)
        self.out = nn.Linear(filters, n_classes)

    def forward(self, x, mask):
        k = self.kernel_size
        x = x * mask.unsqueeze(-1).to(x.dtype)
        if x.shape[1] < k:
            x = nn.functional.pad(x, (0, 0, 0, k - x.shape[1]))
        F = self.conv(x.transpose(1, 2))  # (B, m, n-k+1)
        lengths = mask.sum(dim=1)
        n_valid = (lengths - k + 1).clamp(min=1)
        pos = torch.arange(F.shape[2], device=x.device)
        valid = pos.unsqueeze(0) < n_valid.unsqueeze(1)
        F = F.masked_fill(~valid.unsqueeze(1), float("-inf"))
        return self.out(torch.relu(F.max(dim=2).values))


class LstmBody(nn.Module):
    def __init__(self, d, hidden, n_classes):
        super().__init__()
        self.lstm = nn.LSTM(d, hidden, batch_first=True)
        self.out = nn.Linear(hidden, n_classes)

    def forward(self, x, mask):
        return self.out(_final_hidden(self.lstm, x, mask))


class PooledLinearBody(nn.Module):
    """Masked mean of the token vectors followed by a linear softmax head."""

    def __init__(self, d, n_classes):
        super().__init__()
        self.out = nn.Linear(d, n_classes)

    def forward(self, x, mask):
        m = mask.unsqueeze(-1).to(x.dtype)
        pooled = (x * m).sum(dim=1) / m.sum(dim=1).clamp(min=1.0)
        return self.out(pooled)


class SequenceClassifier(nn.Module):
    def __init__(self, input_layer: nn.Module, body: nn.Module):
        super().__init__()
        self.input_layer = input_layer
        self.body = body

    def forward(self, batch):
        return self.body(self.input_layer(batch), batch["mask"])
