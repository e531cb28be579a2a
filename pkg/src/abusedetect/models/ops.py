"""NumPy reference implementations of the hybrid network's building blocks.

These are the exact forward computations (and hand-derived backward passes
for convolution and one LSTM step) that the PyTorch modules in
:mod:`abusedetect.models.networks` must agree with. They run on one
unbatched sequence in float64 and are meant for verification, not training.

Conventions: a sequence is an ``(n, d)`` array (one row per token); a
convolution weight is ``(m, d, l)`` like ``torch.nn.Conv1d``; LSTM weight
matrices act on the concatenation ``[h_prev, x_t]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractViolation, NumericError


@dataclass(frozen=True)
class ConvLayerSpec:
    weight: np.ndarray  # (m, d, l)
    bias: np.ndarray  # (m,)

    def __post_init__(self):
        if self.weight.ndim != 3 or min(self.weight.shape) < 1:
            raise ContractViolation(f"conv weight must be (m>=1, d, l>=1), got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ContractViolation("conv bias must have one entry per filter")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise ContractViolation("non-finite conv parameter")

    @property
    def m(self) -> int:
        return self.weight.shape[0]

    @property
    def d(self) -> int:
        return self.weight.shape[1]

    @property
    def l(self) -> int:
        return self.weight.shape[2]


def _windows(x: np.ndarray, l: int) -> np.ndarray:
    """Stack the n-l+1 windows ``c_i = [x_i .. x_{i+l-1}]`` into ``(n-l+1, l, d)``."""
    return np.lib.stride_tricks.sliding_window_view(x, l, axis=0).transpose(0, 2, 1)


def conv1d_ngram(x: np.ndarray, layer: ConvLayerSpec) -> np.ndarray:
    """Valid 1-D convolution over token n-grams.

    Row ``i`` column ``j`` is ``<c_i, f_j> + b_j`` with ``c_i`` the ``l``
    consecutive token vectors starting at ``i``. Inputs shorter than ``l``
    are zero-padded at the end to length ``l``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != layer.d:
        raise ContractViolation(f"input dimension {x.shape[-1]} does not match filter dimension {layer.d}")
    if x.shape[0] < layer.l:
        x = np.vstack([x, np.zeros((layer.l - x.shape[0], x.shape[1]))])
    win = _windows(x, layer.l)  # (p, l, d)
    return np.einsum("pkc,mck->pm", win, layer.weight) + layer.bias


def same_padding(l: int) -> tuple[int, int]:
    # matches torch.nn.Conv1d(padding="same"): extra pad goes on the right
    total = l - 1
    return total // 2, total - total // 2


def conv1d_same(x: np.ndarray, layer: ConvLayerSpec) -> np.ndarray:
    """Length-preserving convolution: zero-pad both ends, then :func:`conv1d_ngram`."""
    left, right = same_padding(layer.l)
    x = np.asarray(x, dtype=float)
    padded = np.vstack([np.zeros((left, x.shape[1])), x, np.zeros((right, x.shape[1]))])
    return conv1d_ngram(padded, layer)


def conv1d_backward(x: np.ndarray, layer: ConvLayerSpec, grad_out: np.ndarray):
    """Gradients of ``sum(grad_out * conv1d_ngram(x, layer))``.

    Returns ``(d_x, d_weight, d_bias)``; ``x`` must already have ``n >= l``.
    """
    x = np.asarray(x, dtype=float)
    win = _windows(x, layer.l)
    d_weight = np.einsum("pm,pkc->mck", grad_out, win)
    d_bias = grad_out.sum(axis=0)
    d_win = np.einsum("pm,mck->pkc", grad_out, layer.weight)
    d_x = np.zeros_like(x)
    for k in range(layer.l):
        d_x[k : k + win.shape[0]] += d_win[:, k, :]
    return d_x, d_weight, d_bias


def max_pool(rows: np.ndarray) -> np.ndarray:
    """Per-filter maximum over n-gram positions."""
    rows = np.asarray(rows)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise ContractViolation("max_pool needs at least one row")
    return rows.max(axis=0)


def relu(v: np.ndarray) -> np.ndarray:
    return np.maximum(v, 0.0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True)
class LstmParams:
    W_f: np.ndarray
    W_i: np.ndarray
    W_c: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        h = self.hidden_size
        shape = self.W_f.shape
        if len(shape) != 2 or shape[1] <= h:
            raise ContractViolation(f"gate weights must be (hidden, hidden + input), got {shape}")
        for name in ("W_i", "W_c", "W_o"):
            if getattr(self, name).shape != shape:
                raise ContractViolation(f"{name} shape differs from W_f")
        for name in ("b_f", "b_i", "b_c", "b_o"):
            if getattr(self, name).shape != (h,):
                raise ContractViolation(f"{name} must have length {h}")
        if not all(np.all(np.isfinite(getattr(self, n))) for n in self.__dataclass_fields__):
            raise ContractViolation("non-finite LSTM parameter")

    @property
    def hidden_size(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_f.shape[1] - self.W_f.shape[0]

    @classmethod
    def random(cls, input_size: int, hidden_size: int, rng: np.random.Generator, scale: float = 0.5):
        def w():
            return rng.normal(0, scale, (hidden_size, hidden_size + input_size))

        def b():
            return rng.normal(0, scale, hidden_size)

        return cls(w(), w(), w(), w(), b(), b(), b(), b())

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int):
        w = np.zeros((hidden_size, hidden_size + input_size))
        b = np.zeros(hidden_size)
        return cls(w, w, w, w, b, b, b, b)


@dataclass(frozen=True)
class LstmState:
    c: np.ndarray
    h: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int) -> "LstmState":
        return cls(np.zeros(hidden_size), np.zeros(hidden_size))


def lstm_step(params: LstmParams, prev: LstmState, x_t: np.ndarray, step: int = 0, cache: dict | None = None):
    """One LSTM step: forget, input and output gates with a tanh candidate cell."""
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape != (params.input_size,):
        raise ContractViolation(f"input of length {x_t.shape} does not match LSTM input size {params.input_size}")
    hx = np.concatenate([prev.h, x_t])
    f = sigmoid(params.W_f @ hx + params.b_f)
    i = sigmoid(params.W_i @ hx + params.b_i)
    c_tilde = np.tanh(params.W_c @ hx + params.b_c)
    c = f * prev.c + i * c_tilde
    o = sigmoid(params.W_o @ hx + params.b_o)
    h = o * np.tanh(c)
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(h))):
        raise NumericError(f"non-finite LSTM state at step {step}")
    if cache is not None:
        cache.update(hx=hx, f=f, i=i, c_tilde=c_tilde, o=o, c_prev=prev.c, c=c)
    return LstmState(c=c, h=h)


def lstm_step_backward(params: LstmParams, cache: dict, d_h: np.ndarray, d_c: np.ndarray):
    """Back-propagate ``d_h``/``d_c`` (gradients w.r.t. the new state) through one step.

    Returns a dict of parameter gradients plus ``h_prev``, ``c_prev`` and ``x``.
    """
    f, i, c_tilde, o, c_prev, c, hx = (cache[k] for k in ("f", "i", "c_tilde", "o", "c_prev", "c", "hx"))
    tanh_c = np.tanh(c)
    d_o = d_h * tanh_c
    d_c = d_c + d_h * o * (1 - tanh_c**2)
    d_f = d_c * c_prev
    d_i = d_c * c_tilde
    d_ct = d_c * i
    # pre-activation gradients
    a_f = d_f * f * (1 - f)
    a_i = d_i * i * (1 - i)
    a_c = d_ct * (1 - c_tilde**2)
    a_o = d_o * o * (1 - o)
    d_hx = params.W_f.T @ a_f + params.W_i.T @ a_i + params.W_c.T @ a_c + params.W_o.T @ a_o
    hs = params.hidden_size
    return {
        "W_f": np.outer(a_f, hx),
        "W_i": np.outer(a_i, hx),
        "W_c": np.outer(a_c, hx),
        "W_o": np.outer(a_o, hx),
        "b_f": a_f,
        "b_i": a_i,
        "b_c": a_c,
        "b_o": a_o,
        "h_prev": d_hx[:hs],
        "x": d_hx[hs:],
        "c_prev": d_c * f,
    }


def lstm_sequence(params: LstmParams, inputs) -> tuple[LstmState, list[np.ndarray]]:
    """Run :func:`lstm_step` from the zero state over ``inputs``; return final state and every ``h_t``."""
    inputs = list(inputs)
    if not inputs:
        raise ContractViolation("lstm_sequence needs at least one input")
    state = LstmState.zeros(params.hidden_size)
    hs = []
    for t, x_t in enumerate(inputs):
        state = lstm_step(params, state, x_t, step=t)
        hs.append(state.h)
    return state, hs


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class HeadParams:
    dense_w: np.ndarray  # (dense_hidden, in)
    dense_b: np.ndarray
    out_w: np.ndarray  # (n_classes, dense_hidden)
    out_b: np.ndarray


def dense_softmax(hidden: np.ndarray, head: HeadParams) -> np.ndarray:
    """ReLU dense layer, affine map to class logits, then softmax."""
    z = relu(head.dense_w @ hidden + head.dense_b)
    return softmax(head.out_w @ z + head.out_b)


@dataclass(frozen=True)
class HybridParams:
    convs: tuple[ConvLayerSpec, ...]
    lstm: LstmParams
    head: HeadParams


def hybrid_forward(params: HybridParams, seq) -> np.ndarray:
    """Class probabilities for one unpadded embedding sequence.

    Same-padded convolutions with ReLU after each layer, the LSTM over the
    resulting sequence, its final hidden state through the dense head.
    """
    x = np.asarray(getattr(seq, "vectors", seq), dtype=float)
    mask = getattr(seq, "mask", None)
    if mask is not None:
        x = x[np.asarray(mask, dtype=bool)]
    for idx, layer in enumerate(params.convs):
        if x.shape[1] != layer.d:
            raise ContractViolation(f"conv layer {idx}: expected d={layer.d}, got {x.shape[1]}")
        x = relu(conv1d_same(x, layer))
    if x.shape[1] != params.lstm.input_size:
        raise ContractViolation(f"lstm: expected input size {params.lstm.input_size}, got {x.shape[1]}")
    state, _ = lstm_sequence(params.lstm, x)
    return dense_softmax(state.h, params.head)
