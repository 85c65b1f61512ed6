import random

import numpy as np
import pytest

import oracles
from climafact.datasets import VeracityLabel
from climafact.fid import UNPARSEABLE
from climafact.metrics import (AnnotationSet, EvalReport, MetricError,
                               ScoredPair, TokenEmbeddings, accuracy,
                               bert_score_rescaled, greedy_match_f1,
                               krippendorff_alpha, load_annotations,
                               majority_vote, manual_eval_stats, recall_at_k,
                               rescale, rouge_l, rouge_n)
from climafact.sparse import RetrievalHit, tokenize
from conftest import VOCAB

WORKED = ScoredPair(candidate="the cat sat on mat",
                    references=("the cat is on the mat",))


def random_sentence(rng, min_len=3, max_len=15):
    return " ".join(rng.choice(VOCAB) for _ in range(rng.randint(min_len, max_len)))


class TestRouge1:
    def test_identity(self):
        assert rouge_n(ScoredPair("a b c", ("a b c",)))[2] == 1.0

    def test_worked_pair(self):
        p, r, f1 = rouge_n(WORKED, n=1)
        assert p == pytest.approx(4 / 5)
        assert r == pytest.approx(4 / 6)
        assert f1 == pytest.approx(0.7273, abs=1e-4)

    def test_disjoint_vocabulary(self):
        assert rouge_n(ScoredPair("a b", ("x y",)))[2] == 0.0

    def test_empty_candidate(self):
        assert rouge_n(ScoredPair("", ("ref",))) == (0.0, 0.0, 0.0)

    def test_max_over_references(self):
        pair = ScoredPair("a b c", ("x y z", "a b c", "a q q"))
        assert rouge_n(pair)[2] == 1.0

    def test_reference_order_invariant(self):
        refs = ("x y", "a b c d", "a b q")
        rng = random.Random(0)
        scores = set()
        for _ in range(5):
            shuffled = list(refs)
            rng.shuffle(shuffled)
            scores.add(rouge_n(ScoredPair("a b c", tuple(shuffled)))[2])
        assert len(scores) == 1

    def test_matches_definition_oracle_on_random_pairs(self):
        rng = random.Random(1)
        for _ in range(100):
            cand, ref = random_sentence(rng), random_sentence(rng)
            expected = oracles.clipped_unigram_prf(tokenize(cand), tokenize(ref))
            got = rouge_n(ScoredPair(cand, (ref,)))
            assert got == pytest.approx(expected, abs=1e-12)

    def test_one_iff_multiset_equality(self):
        rng = random.Random(2)
        for _ in range(50):
            tokens = [rng.choice(VOCAB) for _ in range(6)]
            shuffled = list(tokens)
            rng.shuffle(shuffled)
            assert rouge_n(ScoredPair(" ".join(shuffled), (" ".join(tokens),)))[2] == 1.0


class TestRougeL:
    def test_identity(self):
        assert rouge_l(ScoredPair("a b c", ("a b c",)))[2] == 1.0

    def test_worked_pair(self):
        # LCS = [the, cat, on, mat], length 4
        assert rouge_l(WORKED)[2] == pytest.approx(0.7273, abs=1e-4)

    def test_reversed_distinct_tokens(self):
        p, r, f1 = rouge_l(ScoredPair("d c b a", ("a b c d",)))
        assert p == pytest.approx(1 / 4)
        assert r == pytest.approx(1 / 4)

    def test_empty_candidate(self):
        assert rouge_l(ScoredPair("", ("ref",))) == (0.0, 0.0, 0.0)

    def test_matches_dp_table_oracle(self):
        rng = random.Random(3)
        for _ in range(100):
            cand, ref = random_sentence(rng), random_sentence(rng)
            cand_toks, ref_toks = tokenize(cand), tokenize(ref)
            lcs = oracles.lcs_table(cand_toks, ref_toks)
            p, r, f1 = rouge_l(ScoredPair(cand, (ref,)))
            assert p == pytest.approx(lcs / len(cand_toks))
            assert r == pytest.approx(lcs / len(ref_toks))

    def test_lcs_recall_bounded_by_unigram_recall(self):
        rng = random.Random(4)
        for _ in range(100):
            cand, ref = random_sentence(rng), random_sentence(rng)
            r_l = rouge_l(ScoredPair(cand, (ref,)))[1]
            r_1 = rouge_n(ScoredPair(cand, (ref,)))[1]
            assert r_l <= r_1 + 1e-12

    def test_scores_in_unit_interval(self):
        rng = random.Random(5)
        for _ in range(50):
            pair = ScoredPair(random_sentence(rng), (random_sentence(rng),))
            for value in (*rouge_n(pair), *rouge_l(pair)):
                assert 0.0 <= value <= 1.0


def unit(*components):
    v = np.asarray(components, dtype=np.float64)
    return v / np.linalg.norm(v)


class TestEmbeddingScore:
    def test_identical_embeddings_fixed_point(self):
        emb = TokenEmbeddings.from_rows(["a", "b"], [unit(1, 0, 0), unit(0, 1, 0)])
        assert greedy_match_f1(emb, emb) == pytest.approx(1.0)
        for b in (0.0, 0.5, 0.85):
            assert bert_score_rescaled(emb, [emb], b) == pytest.approx(1.0)

    def test_orthogonal_rescaling_arithmetic(self):
        cand = TokenEmbeddings.from_rows(["a"], [unit(1, 0)])
        ref = TokenEmbeddings.from_rows(["b"], [unit(0, 1)])
        assert greedy_match_f1(cand, ref) == pytest.approx(0.0)
        assert bert_score_rescaled(cand, [ref], 0.85) == pytest.approx(-5.667, abs=1e-3)

    def test_three_token_fixture_matches_greedy_oracle(self):
        cand = TokenEmbeddings.from_rows(
            ["x", "y", "z"], [unit(1, 0, 0), unit(0.6, 0.8, 0), unit(0, 0, 1)])
        ref = TokenEmbeddings.from_rows(
            ["u", "v", "w"], [unit(0.8, 0.6, 0), unit(0, 1, 0), unit(0, 0.6, 0.8)])
        expected = oracles.greedy_match_f(cand.vectors, ref.vectors)
        assert greedy_match_f1(cand, ref) == pytest.approx(expected, abs=1e-6)

    def test_random_fixtures_match_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            cand = TokenEmbeddings.from_rows(
                [f"c{i}" for i in range(4)], rng.standard_normal((4, 8)))
            ref = TokenEmbeddings.from_rows(
                [f"r{i}" for i in range(6)], rng.standard_normal((6, 8)))
            assert greedy_match_f1(cand, ref) == pytest.approx(
                oracles.greedy_match_f(cand.vectors, ref.vectors), abs=1e-9)

    def test_empty_tokens_error(self):
        with pytest.raises(MetricError):
            TokenEmbeddings.from_rows([], np.empty((0, 4))).tokens  # noqa: B018
            greedy_match_f1(TokenEmbeddings([], np.empty((0, 4))),
                            TokenEmbeddings(["a"], np.ones((1, 4))))

    def test_rescaling_preserves_ranking(self):
        rng = np.random.default_rng(7)
        fs = rng.uniform(-0.2, 1.0, size=20)
        rescaled = [rescale(f, 0.85) for f in fs]
        assert np.argsort(fs).tolist() == np.argsort(rescaled).tolist()

    def test_dim_mismatch(self):
        with pytest.raises(MetricError):
            greedy_match_f1(TokenEmbeddings.from_rows(["a"], [[1.0, 0.0]]),
                            TokenEmbeddings.from_rows(["b"], [[1.0, 0.0, 0.0]]))


class TestAccuracy:
    def test_all_correct(self):
        labels = [VeracityLabel.SUPPORTS, VeracityLabel.REFUTES]
        assert accuracy(labels, labels) == 1.0

    def test_unparseable_never_matches(self):
        assert accuracy([UNPARSEABLE], [VeracityLabel.SUPPORTS]) == 0.0

    def test_empty_is_error(self):
        with pytest.raises(MetricError):
            accuracy([], [])

    def test_length_mismatch(self):
        with pytest.raises(MetricError):
            accuracy([VeracityLabel.SUPPORTS], [])


def ratings_from_rows(rows):
    """rows: list of per-annotator value lists (None = missing)."""
    ratings = {}
    for annotator, values in enumerate(rows):
        for item, value in enumerate(values):
            if value is not None:
                ratings[(item, annotator)] = value
    return ratings


class TestKrippendorff:
    def test_perfect_agreement(self):
        ann = AnnotationSet(ratings_from_rows([["a", "b", "a"], ["a", "b", "a"]]),
                            scale="nominal")
        assert krippendorff_alpha(ann) == pytest.approx(1.0)

    def test_worked_nominal_fixture(self):
        # items rated (a,a), (a,b), (b,b), (b,b): D_o = 0.25, D_e = 30/56
        ann = AnnotationSet(ratings_from_rows([["a", "a", "b", "b"],
                                               ["a", "b", "b", "b"]]),
                            scale="nominal")
        assert krippendorff_alpha(ann) == pytest.approx(0.5333, abs=1e-4)

    def test_no_corated_items_is_error(self):
        ann = AnnotationSet({(0, 0): "a", (1, 1): "b"}, scale="nominal")
        with pytest.raises(MetricError, match="undefined"):
            krippendorff_alpha(ann)

    def test_matches_pairwise_oracle_on_random_nominal_data(self):
        rng = random.Random(8)
        for _ in range(50):
            rows = [[rng.choice(["a", "b", "c", None]) for _ in range(8)]
                    for _ in range(3)]
            ann = AnnotationSet(ratings_from_rows(rows), scale="nominal")
            units = ann.by_item()
            if not any(len(v) >= 2 for v in units.values()):
                continue
            expected = oracles.alpha_pairwise_nominal(units)
            assert krippendorff_alpha(ann) == pytest.approx(expected, abs=1e-12)

    def test_random_ratings_average_near_zero(self):
        rng = random.Random(9)
        alphas = []
        for _ in range(1000):
            rows = [[rng.choice(["a", "b"]) for _ in range(20)] for _ in range(2)]
            alphas.append(krippendorff_alpha(AnnotationSet(ratings_from_rows(rows),
                                                           scale="nominal")))
        assert abs(sum(alphas) / len(alphas)) < 0.1

    def test_ordinal_equals_nominal_on_two_values(self):
        rng = random.Random(10)
        for _ in range(20):
            rows = [[rng.choice([1.0, 2.0]) for _ in range(10)] for _ in range(3)]
            nominal = krippendorff_alpha(AnnotationSet(ratings_from_rows(rows), "nominal"))
            ordinal = krippendorff_alpha(AnnotationSet(ratings_from_rows(rows), "ordinal"))
            assert ordinal == pytest.approx(nominal, abs=1e-12)

    def test_ordinal_perfect_agreement(self):
        ann = AnnotationSet(ratings_from_rows([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]),
                            scale="ordinal")
        assert krippendorff_alpha(ann) == pytest.approx(1.0)

    def test_ordinal_penalizes_distance(self):
        near = AnnotationSet(ratings_from_rows([[1.0, 2.0, 3.0], [2.0, 2.0, 3.0]]),
                             scale="ordinal")
        far = AnnotationSet(ratings_from_rows([[1.0, 2.0, 3.0], [3.0, 2.0, 3.0]]),
                            scale="ordinal")
        assert krippendorff_alpha(far) < krippendorff_alpha(near)


class TestManualEval:
    def test_unanimous_rank_one(self):
        ranks = AnnotationSet(ratings_from_rows([[1.0] * 4, [1.0] * 4, [1.0] * 4]),
                              scale="ordinal")
        mar, _ = manual_eval_stats({"rank": ranks})
        assert mar == 1.0

    def test_majority_rank(self):
        assert majority_vote([1.0, 2.0, 2.0]) == 2.0
        ranks = AnnotationSet(ratings_from_rows([[1.0], [2.0], [2.0]]), scale="ordinal")
        mar, _ = manual_eval_stats({"rank": ranks})
        assert mar == 2.0

    def test_tie_skipped_with_warning(self, caplog):
        ranks = AnnotationSet(ratings_from_rows([[1.0, 1.0], [2.0, 1.0]]), scale="ordinal")
        with caplog.at_level("WARNING"):
            mar, _ = manual_eval_stats({"rank": ranks})
        assert mar == 1.0  # only the agreeing item counts
        assert "tie" in caplog.text

    def test_v_agree_against_true_labels(self):
        judgments = AnnotationSet(
            ratings_from_rows([["yes", "no", "yes"],
                               ["yes", "no", "no"],
                               ["yes", "yes", "no"]]),
            scale="nominal")
        _, v_agree = manual_eval_stats({"judgment": judgments},
                                       true_labels={0: "yes", 1: "yes", 2: "no"})
        # majorities: yes, no, no vs true yes, yes, no -> 2/3
        assert v_agree == pytest.approx(2 / 3)

    def test_missing_tasks_give_none(self):
        assert manual_eval_stats({}) == (None, None)


class TestRecall:
    @staticmethod
    def hits(ids):
        return [RetrievalHit(pid, 1.0 / (i + 1), i + 1) for i, pid in enumerate(ids)]

    def test_gold_at_rank_one(self):
        hits = [self.hits([3, 1, 2])]
        for k in (1, 2, 3, 10):
            assert recall_at_k(hits, [{3}], k) == 1.0

    def test_gold_absent(self):
        assert recall_at_k([self.hits([1, 2])], [{9}], 5) == 0.0

    def test_matches_membership_oracle(self):
        rng = random.Random(11)
        queries, golds = [], []
        for _ in range(50):
            ids = rng.sample(range(100), 10)
            queries.append(self.hits(ids))
            golds.append({rng.randrange(100) for _ in range(3)})
        for k in (1, 3, 5, 10):
            expected = sum(
                bool(set(h.passage_id for h in q[:k]) & g)
                for q, g in zip(queries, golds)
            ) / len(queries)
            assert recall_at_k(queries, golds, k) == pytest.approx(expected)


class TestAnnotationCsv:
    def test_load_and_scale_inference(self, tmp_path):
        path = tmp_path / "ann.csv"
        path.write_text(
            "item_id,annotator_id,task,value\n"
            "i1,a1,judgment,yes\n"
            "i1,a2,judgment,no\n"
            "i1,a1,rank,1\n"
            "i1,a2,rank,2\n"
        )
        sets = load_annotations(path)
        assert sets["judgment"].scale == "nominal"
        assert sets["rank"].scale == "ordinal"
        assert sets["rank"].ratings[("i1", "a2")] == 2.0

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(MetricError, match="columns"):
            load_annotations(path)


class TestReport:
    def test_to_dict_skips_unpopulated(self):
        report = EvalReport(rouge1_f=0.5, n={"evaluated": 3})
        assert report.to_dict() == {"rouge1_f": 0.5, "n": {"evaluated": 3}}
