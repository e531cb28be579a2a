# ## Hybrid network from primitives
#
# The NumPy reference operations next to the torch network that trains:
# an n-gram convolution, max pooling, one LSTM step, and the full forward
# pass compared between the two implementations.

import numpy as np
import torch

from abusedetect.features import EmbeddingSequence
from abusedetect.models.networks import HybridBody
from abusedetect.models.ops import (
    ConvLayerSpec,
    LstmParams,
    LstmState,
    conv1d_ngram,
    hybrid_forward,
    lstm_step,
    max_pool,
    relu,
)

rng = np.random.default_rng(0)

# ### Valid convolution and pooling

x = rng.normal(size=(5, 4))           # 5 tokens, 4-dim embeddings
layer = ConvLayerSpec(rng.normal(size=(3, 4, 2)), np.zeros(3))  # 3 bigram filters
F = conv1d_ngram(x, layer)
print(F.shape)                         # 5 - 2 + 1 positions
print(relu(max_pool(F)))

# ### One LSTM step

p = LstmParams.random(input_size=4, hidden_size=2, rng=rng)
cache = {}
s = lstm_step(p, LstmState.zeros(2), x[0], cache=cache)
print({g: np.round(cache[g], 3) for g in "fio"})
print(s.h, s.c)

# ### Torch network vs NumPy forward

torch.manual_seed(0)
body = HybridBody(4, (8, 6, 4), 3, 5, 6, 2).double().eval()
params = body.to_numpy_params()

batch = np.zeros((2, 5, 4))
mask = np.zeros((2, 5), bool)
batch[0], mask[0] = x, True
batch[1, :2], mask[1, :2] = x[:2], True

with torch.no_grad():
    p_torch = torch.softmax(body(torch.from_numpy(batch), torch.from_numpy(mask)), 1).numpy()
p_numpy = np.stack([hybrid_forward(params, EmbeddingSequence(batch[i], mask[i])) for i in range(2)])
print(p_torch)
print(np.abs(p_torch - p_numpy).max())
