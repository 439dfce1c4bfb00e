import math
import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from querycost.errors import DimensionMismatch, EmptyVocabulary, MissingIdf
from querycost.featurize import (
    NUM, STR, SparseVector, Vocabulary, build_vocabulary, featurize_queries, fit_idf, to_csr, tokenize,
    vectorize_count, vectorize_tfidf,
)


def test_tokenize_example():
    sql = "SELECT a.id FROM db.events WHERE ts > '2020-01-01' AND x = 10"
    assert tokenize(sql) == ["select", "a.id", "from", "db.events", "where", "ts", STR, "and", "x", NUM]


def test_tokenize_quotes_and_numbers():
    assert tokenize("select 'it''s' , 1.5e3, .5 from \"My Table\" `t.x`") == [
        "select", STR, NUM, NUM, "from", "my", "table", "t.x"]
    assert tokenize("") == []


def _oracle_vocab(corpus, min_df):
    df = {}
    for doc in corpus:
        for t in set(doc):
            df[t] = df.get(t, 0) + 1
    return sorted(t for t, c in df.items() if c >= min_df), df


def _oracle_tfidf(tokens, corpus, min_df=2):
    vocab, df = _oracle_vocab(corpus, min_df)
    n = len(corpus)
    weights = {}
    for i, t in enumerate(vocab):
        tf = 0
        for u in tokens:
            if u == t:
                tf += 1
        if tf:
            weights[i] = tf * (math.log((1 + n) / (1 + df[t])) + 1)
    norm = math.sqrt(sum(w * w for w in weights.values()))
    return {i: w / norm for i, w in weights.items()} if norm else {}


def test_vocabulary_min_df_and_order():
    corpus = [["b", "a", "a"], ["a", "c"], ["b", "d"], ["z"]]
    v = build_vocabulary(corpus, min_df=2)
    assert v.tokens == ["a", "b"] and v.doc_freq == [2, 2] and v.n_docs == 4
    with pytest.raises(EmptyVocabulary):
        build_vocabulary([])
    with pytest.raises(EmptyVocabulary):
        build_vocabulary([["a"], ["b"]], min_df=2)


def test_vocabulary_max_features_keeps_most_frequent():
    corpus = [["a", "b", "c"], ["a", "b"], ["a", "c"], ["a", "b"]]
    v = build_vocabulary(corpus, min_df=1, max_features=2)
    assert v.tokens == ["a", "b"]


def test_tfidf_requires_idf():
    v = build_vocabulary([["a"], ["a"]], min_df=1)
    with pytest.raises(MissingIdf):
        vectorize_tfidf(["a"], v)


def test_count_vector():
    v = build_vocabulary([["a", "b"], ["a", "b"]], min_df=1)
    x = vectorize_count(["b", "b", "a", "zz"], v)
    assert x.entries == [(0, 1.0), (1, 2.0)]
    assert len(vectorize_count(["zz"], v)) == 0


def test_tfidf_matches_naive_loop_on_100_random_corpora():
    rng = random.Random(1234)
    alphabet = [f"w{i}" for i in range(40)] + [NUM, STR, "db.t"]
    worst = 0.0
    for _ in range(100):
        n_docs = rng.randint(2, 100)
        corpus = [[rng.choice(alphabet) for _ in range(rng.randint(0, 25))] for _ in range(n_docs)]
        try:
            vocab = fit_idf(build_vocabulary(corpus, min_df=2))
        except EmptyVocabulary:
            continue
        for doc in corpus[:10] + [[rng.choice(alphabet) for _ in range(10)]]:
            got = dict(vectorize_tfidf(doc, vocab).entries)
            want = _oracle_tfidf(doc, corpus)
            assert set(got) == set(want)
            for i in want:
                worst = max(worst, abs(got[i] - want[i]))
    assert worst <= 1e-9


docs_st = st.lists(st.lists(st.sampled_from(["a", "b", "c", "d", "e", NUM]), max_size=8), min_size=2, max_size=20)


@given(docs_st, st.lists(st.sampled_from(["a", "b", "c", "d", "e", "f"]), max_size=10))
def test_tfidf_unit_norm_or_empty(corpus, doc):
    try:
        vocab = fit_idf(build_vocabulary(corpus, min_df=1))
    except EmptyVocabulary:
        return
    x = vectorize_tfidf(doc, vocab)
    if len(x):
        assert abs(np.linalg.norm(x.values) - 1) < 1e-12
        assert np.all(x.values > 0)
    assert all(0 <= i < vocab.dimension for i in x.indices)
    assert list(x.indices) == sorted(set(x.indices.tolist()))
    assert all(vocab.tokens[i] in doc for i in x.indices)


@given(docs_st)
def test_vocabulary_is_sorted_and_df_bounded(corpus):
    try:
        vocab = build_vocabulary(corpus, min_df=2)
    except EmptyVocabulary:
        return
    assert vocab.tokens == sorted(set(vocab.tokens))
    assert all(2 <= d <= len(corpus) for d in vocab.doc_freq)


def test_to_csr_and_dimension_checks():
    a = SparseVector.from_entries(4, [(2, 1.0), (0, 3.0)])
    b = SparseVector.from_entries(4, [])
    X = to_csr([a, b])
    assert X.shape == (2, 4) and X.toarray().tolist() == [[3, 0, 1, 0], [0, 0, 0, 0]]
    with pytest.raises(DimensionMismatch):
        to_csr([a, SparseVector.from_entries(5, [])])
    with pytest.raises(ValueError):
        SparseVector.from_entries(3, [(3, 1.0)])


def test_featurize_queries_matches_per_query_vectors():
    qs = ["select a from t", "select b from t where x = 1", "drop table q"]
    vocab = fit_idf(build_vocabulary([tokenize(q) for q in qs], min_df=1))
    X = featurize_queries(qs, vocab, "tfidf")
    for i, q in enumerate(qs):
        assert np.allclose(X[i].toarray()[0], vectorize_tfidf(tokenize(q), vocab).to_dense())


def test_vocabulary_round_trip():
    v = fit_idf(build_vocabulary([["a", "b"], ["a"]], min_df=1))
    assert Vocabulary.from_dict(v.to_dict()) == v


def test_counter_consistency():
    doc = ["a", "b", "a", "c", "a"]
    v = build_vocabulary([doc, doc], min_df=1)
    assert dict(vectorize_count(doc, v).entries) == {v.token_to_index[t]: c for t, c in Counter(doc).items()}
