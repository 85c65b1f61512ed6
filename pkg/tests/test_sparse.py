import math
import random

import pytest
from hypothesis import given, strategies as st

import oracles
from climafact.corpus import Document, PassageStore, segment_document
from climafact.sparse import (BM25_B, BM25_K1, IndexError_, InvertedIndex,
                              build_index, tokenize)
from conftest import VOCAB, store_from_texts, synthetic_passages


class TestTokenize:
    def test_splits_on_non_alphanumeric(self):
        assert tokenize("Earth's 30-year Ice Age") == ["earth", "s", "30", "year", "ice", "age"]

    def test_empty(self):
        assert tokenize("") == []

    def test_underscore_splits(self):
        assert tokenize("ice_age") == ["ice", "age"]

    @given(st.text(max_size=100))
    def test_idempotent_on_joined_output(self, text):
        tokens = tokenize(text)
        assert tokenize(" ".join(tokens)) == tokens

    @given(st.text(max_size=100))
    def test_terms_are_clean(self, text):
        for term in tokenize(text):
            assert term and term == term.lower()
            assert not any(ch.isspace() for ch in term)


@pytest.fixture(scope="module")
def tiny_index():
    store = store_from_texts(["a b a", "b c"])
    return build_index(store)


class TestBuildIndex:
    def test_postings_and_avgdl(self, tiny_index):
        assert tiny_index.postings == {
            "a": [(0, 2)], "b": [(0, 1), (1, 1)], "c": [(1, 1)],
        }
        assert tiny_index.avgdl == 2.5
        assert tiny_index.N == 2

    def test_df(self, tiny_index):
        assert tiny_index.df("b") == 2
        assert tiny_index.df("zzz") == 0

    def test_empty_store_rejected(self):
        with pytest.raises(IndexError_, match="empty"):
            build_index(PassageStore([]))

    def test_posting_tf_sums_match_brute_force_recount(self):
        texts = synthetic_passages(60, seed=21)
        index = build_index(store_from_texts(texts))
        for term in VOCAB:
            posted = sum(tf for _, tf in index.postings.get(term, []))
            recounted = sum(tokenize(t).count(term) for t in texts)
            assert posted == recounted

    def test_postings_sorted_by_passage_id(self):
        index = build_index(store_from_texts(synthetic_passages(80, seed=2)))
        for plist in index.postings.values():
            pids = [pid for pid, _ in plist]
            assert pids == sorted(pids)


class TestScore:
    def test_absent_term_scores_zero(self, tiny_index):
        assert tiny_index.score(["zzz"], 0) == 0.0

    def test_three_passage_fixture_matches_formula_oracle(self):
        texts = ["ocean acid rise", "acid acid rain ocean", "carbon cycle model trend"]
        index = build_index(store_from_texts(texts))
        query = ["ocean", "acid"]
        expected = dict(oracles.bm25_full_scan([tokenize(t) for t in texts], query, k=3))
        for pid in range(3):
            assert index.score(query, pid) == pytest.approx(expected.get(pid, 0.0), abs=1e-9)

    def test_duplicate_query_terms_double_score(self, tiny_index):
        single = tiny_index.score(["b"], 1)
        assert tiny_index.score(["b", "b"], 1) == pytest.approx(2 * single, abs=1e-12)

    def test_unknown_passage(self, tiny_index):
        with pytest.raises(IndexError_):
            tiny_index.score(["a"], 99)

    def test_idf_positive_for_all_df(self):
        index = build_index(store_from_texts(["a", "a", "a"]))
        assert index.idf("a") > 0  # df == N
        assert index.idf("zzz") > 0  # df == 0

    def test_score_strictly_increasing_in_tf(self):
        # same doc length, increasing tf of the query term
        texts = ["q x x x", "q q x x", "q q q x", "q q q q"]
        index = build_index(store_from_texts(texts))
        scores = [index.score(["q"], pid) for pid in range(4)]
        assert all(a < b for a, b in zip(scores, scores[1:]))


class TestSearch:
    def test_k_larger_than_matches_returns_all_matches(self, tiny_index):
        hits = tiny_index.search("c", k=10)
        assert [h.passage_id for h in hits] == [1]
        assert [h.rank for h in hits] == [1]

    def test_empty_query_returns_empty(self, tiny_index):
        assert tiny_index.search("!!!", k=5) == []

    def test_tie_broken_by_lower_passage_id(self):
        index = build_index(store_from_texts(["x y", "x y"]))
        hits = index.search("x", k=2)
        assert [h.passage_id for h in hits] == [0, 1]
        assert hits[0].score == hits[1].score

    def test_ranks_contiguous_and_scores_non_increasing(self, store_1k, corpus_1k_texts):
        index = build_index(store_1k)
        hits = index.search("ocean acid carbon", k=25)
        assert [h.rank for h in hits] == list(range(1, len(hits) + 1))
        assert all(a.score >= b.score for a, b in zip(hits, hits[1:]))

    def test_matches_full_scan_oracle_on_random_queries(self, store_1k, corpus_1k_texts):
        index = build_index(store_1k)
        token_lists = [tokenize(p.text) for p in store_1k]
        rng = random.Random(13)
        for _ in range(25):
            query_terms = [rng.choice(VOCAB) for _ in range(rng.randint(1, 4))]
            expected = oracles.bm25_full_scan(token_lists, query_terms, k=10)
            hits = index.search_terms(query_terms, k=10)
            assert [h.passage_id for h in hits] == [pid for pid, _ in expected]
            for hit, (_, score) in zip(hits, expected):
                assert hit.score == pytest.approx(score, abs=1e-9)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        index = build_index(store_from_texts(synthetic_passages(40, seed=9)))
        path = tmp_path / "index.cfix"
        index.save(path)
        loaded = InvertedIndex.load(path)
        assert loaded == index
        assert loaded.avgdl == index.avgdl

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad"
        path.write_bytes(b"XXXXXXXX")
        with pytest.raises(IndexError_, match="magic"):
            InvertedIndex.load(path)

    def test_search_results_survive_round_trip(self, tmp_path):
        index = build_index(store_from_texts(synthetic_passages(40, seed=9)))
        path = tmp_path / "index.cfix"
        index.save(path)
        loaded = InvertedIndex.load(path)
        assert loaded.search("ocean carbon", k=5) == index.search("ocean carbon", k=5)
