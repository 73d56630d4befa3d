"""Text preprocessing, daily news vectors, and co-mention counting."""

import datetime as dt

import numpy as np
from hypothesis import given, settings, strategies as st

from alphagraph.news import (NewsArticle, build_cooccurrence, build_vocabulary,
                             clean_tokens, daily_stock_news_vectors,
                             news_vector, whitespace_tokenizer)
from alphagraph.word2vec import WordEmbeddingSet

CAL = [dt.date(2020, 1, 6) + dt.timedelta(days=k) for k in (0, 1, 2, 3, 4, 7, 8)]


def emb_of(mapping):
    vocab = {tok: i for i, tok in enumerate(sorted(mapping))}
    vectors = np.array([mapping[tok] for tok in sorted(mapping)], dtype=float)
    return WordEmbeddingSet(vocab, vectors)


def art(i, date, symbols, tokens):
    return NewsArticle(f"A{i}", date, symbols, tokens)


# ---------------------------------------------------------------------------
# preprocessing and vocabulary
# ---------------------------------------------------------------------------

def test_punctuation_and_url_only_text_is_empty():
    assert clean_tokens("!!! ??? ... http://example.com/x?a=1") == []
    assert clean_tokens("www.site.io/path , . ;") == []
    assert clean_tokens("see www.site.io/path , . ;") == ["see"]


def test_whitespace_tokenizer_keeps_repeats():
    assert clean_tokens("a b a", stopwords=frozenset()) == ["a", "b", "a"]
    assert whitespace_tokenizer("a b a") == ["a", "b", "a"]


def test_stopwords_removed_and_lowercased():
    assert clean_tokens("The Market IS Up") == ["market", "up"]


def test_min_count_cutoff_excludes_rare_tokens():
    corpus = [["rare"] * 9 + ["common"] * 12]
    vocab = build_vocabulary(corpus, min_count=10)
    assert "common" in vocab and "rare" not in vocab
    vocab9 = build_vocabulary(corpus, min_count=9)
    assert "rare" in vocab9


def test_vocabulary_deterministic_ordering():
    corpus = [["b", "a", "b", "c", "a", "a"]]
    vocab = build_vocabulary(corpus, min_count=1)
    assert vocab == {"a": 0, "b": 1, "c": 2}


# ---------------------------------------------------------------------------
# news vectors
# ---------------------------------------------------------------------------

def test_news_vector_single_token_is_that_vector():
    emb = emb_of({"x": [1.0, 2.0], "y": [3.0, 4.0]})
    vec, n = news_vector(["x"], emb)
    assert n == 1 and np.array_equal(vec, [1.0, 2.0])


def test_news_vector_two_tokens_midpoint():
    emb = emb_of({"x": [1.0, 2.0], "y": [3.0, 4.0]})
    vec, _ = news_vector(["x", "y"], emb)
    assert np.allclose(vec, [2.0, 3.0])


def test_news_vector_all_out_of_vocabulary_is_zero():
    emb = emb_of({"x": [1.0, 2.0]})
    vec, n = news_vector(["zz", "ww"], emb)
    assert n == 0 and np.array_equal(vec, [0.0, 0.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=1, max_size=12))
def test_mean_vector_norm_bounded_by_max_token_norm(tokens):
    rng = np.random.default_rng(0)
    emb = emb_of({tok: rng.normal(size=3) for tok in "abcd"})
    vec, _ = news_vector(tokens, emb)
    max_norm = max(np.linalg.norm(emb.vectors[i]) for i in range(4))
    assert np.linalg.norm(vec) <= max_norm + 1e-12


# ---------------------------------------------------------------------------
# daily panel
# ---------------------------------------------------------------------------

def test_single_article_previous_day_becomes_next_day_vector():
    emb = emb_of({"x": [2.0, 4.0]})
    articles = [art(0, CAL[0], ["AAA"], ["x"])]
    panel = daily_stock_news_vectors(articles, emb, ["AAA"], CAL)
    assert np.array_equal(panel.vectors[1, 0], [2.0, 4.0])
    assert panel.article_count[1, 0] == 1
    assert panel.article_count[0, 0] == 0


def test_same_day_article_excluded_from_that_day():
    emb = emb_of({"x": [1.0]})
    articles = [art(0, CAL[2], ["AAA"], ["x"])]
    panel = daily_stock_news_vectors(articles, emb, ["AAA"], CAL)
    assert panel.article_count[2, 0] == 0
    assert panel.article_count[3, 0] == 1


def test_weekend_articles_map_to_monday():
    emb = emb_of({"x": [1.0]})
    saturday = CAL[4] + dt.timedelta(days=1)
    articles = [art(0, saturday, ["AAA"], ["x"])]
    panel = daily_stock_news_vectors(articles, emb, ["AAA"], CAL)
    monday_idx = CAL.index(dt.date(2020, 1, 13))
    assert panel.article_count[monday_idx, 0] == 1


def test_three_articles_average_matches_bruteforce():
    rng = np.random.default_rng(1)
    vocab = {f"w{i}": rng.normal(size=4) for i in range(6)}
    emb = emb_of(vocab)
    token_sets = [["w0", "w1"], ["w2"], ["w3", "w4", "w5"]]
    articles = [art(i, CAL[1], ["AAA"], toks) for i, toks in enumerate(token_sets)]
    panel = daily_stock_news_vectors(articles, emb, ["AAA"], CAL)
    expected = np.mean([news_vector(toks, emb)[0] for toks in token_sets], axis=0)
    assert np.allclose(panel.vectors[2, 0], expected, atol=1e-12)


def test_unknown_symbol_counted_and_ignored():
    emb = emb_of({"x": [1.0]})
    articles = [art(0, CAL[0], ["AAA", "MISSING"], ["x"])]
    panel = daily_stock_news_vectors(articles, emb, ["AAA"], CAL)
    assert panel.n_unknown_symbols == 1
    assert panel.article_count[1, 0] == 1


def test_temporal_hygiene_deleting_future_articles():
    rng = np.random.default_rng(2)
    emb = emb_of({f"w{i}": rng.normal(size=3) for i in range(4)})
    articles = [art(i, CAL[i % 5], ["AAA"], [f"w{i % 4}"]) for i in range(10)]
    cutoff = CAL[3]
    full = daily_stock_news_vectors(articles, emb, ["AAA"], CAL)
    trimmed = daily_stock_news_vectors([a for a in articles if a.date < cutoff],
                                       emb, ["AAA"], CAL)
    cut_idx = CAL.index(cutoff)
    assert np.array_equal(full.vectors[:cut_idx + 1], trimmed.vectors[:cut_idx + 1])
    assert np.array_equal(full.article_count[:cut_idx + 1],
                          trimmed.article_count[:cut_idx + 1])


# ---------------------------------------------------------------------------
# co-occurrence
# ---------------------------------------------------------------------------

def test_cooccurrence_triple_article():
    x = build_cooccurrence([art(0, CAL[0], ["A", "B", "C"], [])], ["A", "B", "C"])
    assert x.value(0, 1) == 1 and x.value(0, 2) == 1 and x.value(1, 2) == 1
    assert x.value(0, 0) == 0


def test_cooccurrence_single_symbol_no_increment():
    x = build_cooccurrence([art(0, CAL[0], ["A"], [])], ["A", "B"])
    assert not x.counts


def test_cooccurrence_matches_bruteforce_pair_loop():
    rng = np.random.default_rng(3)
    universe = [f"S{i}" for i in range(6)]
    articles = []
    for i in range(40):
        k = int(rng.integers(1, 5))
        syms = list(rng.choice(universe, size=k, replace=False))
        articles.append(art(i, CAL[0], syms, []))
    x = build_cooccurrence(articles, universe)
    dense = x.to_dense()

    index = {s: i for i, s in enumerate(universe)}
    expected = np.zeros((6, 6))
    for a in articles:
        ids = sorted({index[s] for s in a.symbols})
        for p in range(len(ids)):
            for q in range(p + 1, len(ids)):
                expected[ids[p], ids[q]] += 1
                expected[ids[q], ids[p]] += 1
    assert np.array_equal(dense, expected)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.sampled_from(["A", "B", "C", "D"]), min_size=0, max_size=4),
                min_size=0, max_size=15))
def test_cooccurrence_symmetry_property(symbol_lists):
    articles = [art(i, CAL[0], syms, []) for i, syms in enumerate(symbol_lists)]
    x = build_cooccurrence(articles, ["A", "B", "C", "D"])
    dense = x.to_dense()
    assert np.array_equal(dense, dense.T)
    assert np.all(np.diag(dense) == 0)


def test_coo_export_round_trip():
    x = build_cooccurrence([art(0, CAL[0], ["A", "B"], []),
                            art(1, CAL[0], ["A", "B", "C"], [])], ["A", "B", "C"])
    rows, cols, vals = x.to_coo()
    assert len(rows) == 2 * len(x.counts)
    dense = np.zeros((3, 3))
    dense[rows, cols] = vals
    assert np.array_equal(dense, x.to_dense())
