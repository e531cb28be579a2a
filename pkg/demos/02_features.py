# ## Text features
#
# Normalisation and tokenisation, TF-IDF, Word2Vec means and the random
# embedding table that stands in for the transformer encoder at desk scale.

import numpy as np

from abusedetect.features import (
    StaticEmbeddings,
    analyze,
    embed_static,
    encode_contextual,
    fit_tfidf,
    make_encoder,
    normalize_text,
)

# ### Normalising and tokenising

raw = "Visit  HTTP://example.org/x?y=1 now!!  Don't wait"
print(normalize_text(raw))
print(analyze(raw).tokens)

# ### TF-IDF

docs = [analyze(t) for t in ["the cat sat", "the dog sat down", "a cat and a dog"]]
tfidf = fit_tfidf(docs)
print(tfidf.vocab)
print(np.round(tfidf.idf, 4))

X = tfidf.transform(docs)
print(X.toarray().round(3))
print("row norms", np.linalg.norm(X.toarray(), axis=1))

# unknown words are dropped
print(tfidf.transform_one(analyze("zebra cat")).to_dense().round(3))

# ### Word2Vec means

w2v = StaticEmbeddings.fit(docs * 20, d=16, seed=0, epochs=5)
vec, all_oov = embed_static(w2v, analyze("cat dog"))
print(vec.shape, all_oov)
print(embed_static(w2v, analyze("zebra"))[1])

# ### Per-token encoder output

enc = make_encoder("random:32", seed=0)
seq = encode_contextual(enc, "the cat sat on the cat")
print(seq.n, seq.d)
# without context, repeated tokens map to identical rows
print(np.array_equal(seq.vectors[1], seq.vectors[5]))
