import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abusedetect.errors import ArtifactVersionError, ContractViolation, NotFittedError
from abusedetect.features import (
    CONTEXTUAL_DIM,
    EmbeddingSequence,
    EncoderConfig,
    FeatureKind,
    RandomEmbeddingEncoder,
    StaticEmbeddings,
    TfidfModel,
    analyze,
    embed_static,
    encode_contextual,
    fit_tfidf,
    load_encoder,
    make_encoder,
    normalize_text,
    save_encoder,
    tokenize,
    transform_tfidf,
)

from oracles import brute_tfidf


def test_normalize_examples():
    assert normalize_text("Hello   WORLD") == "hello world"
    assert normalize_text("visit http://x.y now") == "visit <url> now"
    assert normalize_text("hello world") == "hello world"
    assert normalize_text("see www.example.com/a?b=1!") == "see <url>"
    assert normalize_text("tab\there​zero") == "tab here zero"


@given(st.text())
def test_normalize_idempotent(s):
    once = normalize_text(s)
    assert normalize_text(once) == once


def test_tokenize_examples():
    t = tokenize("a b c")
    assert t.tokens == ("a", "b", "c") and t.n == 3
    assert tokenize("don't stop").tokens == ("don", "'t", "stop")
    assert tokenize("").n == 0
    assert analyze("Go to https://x.org NOW!").tokens == ("go", "to", "<url>", "now", "!")


def test_tfidf_disjoint_docs_orthogonal():
    m = fit_tfidf([["a", "b"], ["c", "d"]])
    u = transform_tfidf(m, ["a", "b"]).to_dense()
    v = transform_tfidf(m, ["c", "d"]).to_dense()
    assert u @ v == 0.0 and np.linalg.norm(u) == pytest.approx(1.0)


def test_tfidf_three_document_oracle():
    docs = [["a", "b"], ["a", "c"], ["a", "b", "b"]]
    raw = TfidfModel(norm=None).fit(docs)
    # token in every document gets the smoothed minimum idf of exactly 1
    assert raw.idf[raw.vocab.index("a")] == pytest.approx(1.0, abs=1e-15)
    idf_b = np.log(4 / 3) + 1
    np.testing.assert_allclose(raw.transform_one(docs[2]).to_dense(), [1.0, 2 * idf_b, 0.0], rtol=1e-12)

    vocab, expected = brute_tfidf(docs)
    m = fit_tfidf(docs)
    assert m.vocab == vocab
    for doc, exp in zip(docs, expected):
        dense = m.transform_one(doc).to_dense()
        np.testing.assert_allclose(dense, [exp.get(t, 0.0) for t in vocab], rtol=1e-12)


@given(st.lists(st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=6), min_size=1, max_size=10))
def test_tfidf_matches_brute_force(docs):
    vocab, expected = brute_tfidf(docs)
    m = fit_tfidf(docs)
    X = m.transform(docs).toarray()
    want = np.array([[e.get(t, 0.0) for t in vocab] for e in expected])
    np.testing.assert_allclose(X, want, rtol=1e-12, atol=1e-15)


def test_tfidf_oov_contributes_nothing():
    m = fit_tfidf([["a", "b"], ["b", "c"]])
    np.testing.assert_array_equal(transform_tfidf(m, ["a", "zzz"]).to_dense(), transform_tfidf(m, ["a"]).to_dense())
    assert transform_tfidf(m, ["zzz"]).indices.size == 0


def test_tfidf_vocab_cap_keeps_most_frequent():
    m = TfidfModel(max_features=2).fit([["a", "b"], ["a", "c"], ["a", "b"]])
    assert m.vocab == ["a", "b"]


def test_tfidf_unfitted():
    with pytest.raises(NotFittedError):
        TfidfModel().transform_one(["a"])


def test_tfidf_round_trip(tmp_path):
    m = fit_tfidf([["x", "y"], ["y", "z", "z"]])
    m.save(tmp_path)
    back = TfidfModel.load(tmp_path)
    assert back.vocab == m.vocab
    np.testing.assert_array_equal(back.idf, m.idf)


def test_artifact_newer_format_rejected(tmp_path):
    import json

    fit_tfidf([["x"]]).save(tmp_path)
    header = json.loads((tmp_path / "idf.json").read_text())
    header["format_version"] = 99
    (tmp_path / "idf.json").write_text(json.dumps(header))
    with pytest.raises(ArtifactVersionError):
        TfidfModel.load(tmp_path)


def _static():
    vecs = np.array([[1.0, 0.0, 2.0], [3.0, 4.0, 0.0]], dtype=np.float32)
    return StaticEmbeddings(["u", "v"], vecs)


def test_embed_static_examples():
    m = _static()
    v, oov = embed_static(m, ["u"])
    np.testing.assert_array_equal(v, m.vectors[0])
    assert not oov
    v, _ = embed_static(m, ["u", "v"])
    np.testing.assert_allclose(v, (m.vectors[0] + m.vectors[1]) / 2)
    v, oov = embed_static(m, ["q", "r"])
    assert oov and not v.any() and v.shape == (3,)


def test_word2vec_fit_deterministic(tmp_path):
    docs = [analyze(t) for t in ["good day to you", "bad day to me", "good word", "bad word"] * 5]
    a = StaticEmbeddings.fit(docs, d=8, seed=3, epochs=3)
    b = StaticEmbeddings.fit(docs, d=8, seed=3, epochs=3)
    assert a.vocab == b.vocab and a.d == 8
    np.testing.assert_array_equal(a.vectors, b.vectors)
    a.save(tmp_path)
    c = StaticEmbeddings.load(tmp_path)
    np.testing.assert_array_equal(c.vectors, a.vectors)


def test_embedding_sequence_contract():
    with pytest.raises(ContractViolation):
        EmbeddingSequence(np.zeros((0, 4)))
    with pytest.raises(ContractViolation):
        EmbeddingSequence(np.array([[np.nan]]))


def test_encoder_config_width():
    EncoderConfig(FeatureKind.CONTEXTUAL, CONTEXTUAL_DIM)
    EncoderConfig(FeatureKind.CONTEXTUAL, 32, artifact="random:32")
    with pytest.raises(ContractViolation):
        EncoderConfig(FeatureKind.CONTEXTUAL, 32)


def test_random_encoder(tmp_path):
    enc = make_encoder("random:16", seed=2)
    seq = encode_contextual(enc, "hello world hello")
    assert (seq.n, seq.d) == (3, 16)
    np.testing.assert_array_equal(seq.vectors[0], seq.vectors[2])
    vecs, mask = enc.encode_batch(["a b c", "a"], max_len=8)
    assert vecs.shape == (2, 3, 16) and mask.tolist() == [[True] * 3, [True, False, False]]
    save_encoder(enc, tmp_path)
    back = load_encoder(tmp_path)
    np.testing.assert_array_equal(encode_contextual(back, "hello").vectors, encode_contextual(enc, "hello").vectors)
    assert isinstance(back, RandomEmbeddingEncoder)


def test_contextual_encoder_width_and_determinism(tiny_bert):
    a = encode_contextual(tiny_bert, "hello world, this is good")
    assert a.d == 768
    b = encode_contextual(tiny_bert, "hello world, this is good")
    np.testing.assert_array_equal(a.vectors, b.vectors)


def test_contextual_encoder_truncation(tiny_bert):
    text = " ".join(["word"] * 598)
    assert encode_contextual(tiny_bert, text, max_len=512).n == 512
    with pytest.raises(ContractViolation):
        encode_contextual(tiny_bert, text, max_len=600)


def test_missing_pretrained_encoder_is_reported(tmp_path, monkeypatch):
    from abusedetect.errors import EncoderUnavailableError

    monkeypatch.setenv("HF_HUB_OFFLINE", "1")
    with pytest.raises(EncoderUnavailableError, match="hint"):
        make_encoder(str(tmp_path / "no-such-model"))


@pytest.mark.fulldata
@pytest.mark.skipif(not __import__("os").environ.get("ABUSEDETECT_CACHE"),
                    reason="set ABUSEDETECT_CACHE to a cache holding bert-base-uncased")
def test_pretrained_bert_width():
    enc = make_encoder("bert-base-uncased")
    seq = encode_contextual(enc, "a perfectly ordinary sentence")
    assert seq.d == CONTEXTUAL_DIM and enc.lock()["revision"]
