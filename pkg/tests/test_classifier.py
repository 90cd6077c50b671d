"""KNN label prediction: voting arithmetic, calibration, edge behavior."""

from fractions import Fraction

import numpy as np
import pytest

from patsim import (
    CorpusStore,
    NeighborList,
    normalize,
    predict,
    predict_batch_loo,
    predict_from_neighbors,
    predict_topn,
    score,
)

from conftest import cluster_store, random_store


def neighborhood(entries, labels):
    return (
        NeighborList(entries=tuple(entries), metric="cosine"),
        tuple(frozenset(s) for s in labels),
    )


class TestVoting:
    def test_unanimous_single_label(self):
        neighbors, labels = neighborhood(
            [(f"p{i}", 0.9) for i in range(8)], [{"G06F"}] * 8
        )
        result = predict_from_neighbors(neighbors, labels)
        assert result.label_scores["G06F"].vote_fraction == 1.0
        assert result.predicted == {"G06F"}
        assert result.ranking == ("G06F",)

    def test_hand_computed_three_neighbor_example(self):
        # weights (0.9, 0.8, 0.7), total 2.4
        # A01B carried by the first two: 1.7/2.4; G06F by the last two: 1.5/2.4
        neighbors, labels = neighborhood(
            [("a", 0.9), ("b", 0.8), ("c", 0.7)],
            [{"A01B"}, {"A01B", "G06F"}, {"G06F"}],
        )
        result = predict_from_neighbors(neighbors, labels, threshold=0.5)
        exact_a = Fraction(9, 10) + Fraction(8, 10)
        exact_g = Fraction(8, 10) + Fraction(7, 10)
        exact_total = Fraction(24, 10)
        assert result.label_scores["A01B"].vote_fraction == pytest.approx(
            float(exact_a / exact_total), abs=1e-15
        )
        assert result.label_scores["G06F"].vote_fraction == pytest.approx(
            float(exact_g / exact_total), abs=1e-15
        )
        assert round(result.label_scores["A01B"].vote_fraction, 5) == 0.70833
        assert result.label_scores["G06F"].vote_fraction == pytest.approx(0.62500, abs=1e-15)
        assert result.predicted == {"A01B", "G06F"}
        assert result.ranking == ("A01B", "G06F")

    def test_uniform_tie_breaks_lexicographic(self):
        neighbors, labels = neighborhood(
            [("x", 0.9), ("y", 0.4)], [{"H04L"}, {"A01B"}]
        )
        result = predict_from_neighbors(neighbors, labels, weighting="uniform")
        assert result.label_scores["A01B"].vote_fraction == 0.5
        assert result.label_scores["H04L"].vote_fraction == 0.5
        assert result.predicted == {"A01B", "H04L"}
        assert result.ranking == ("A01B", "H04L")

    def test_similarities_clamped_before_weighting(self):
        # a negative-similarity neighbor must contribute zero, not negative, mass
        neighbors, labels = neighborhood(
            [("x", 0.8), ("y", -0.5)], [{"G06F"}, {"A01B"}]
        )
        result = predict_from_neighbors(neighbors, labels)
        assert result.label_scores["A01B"].vote_fraction == 0.0
        assert result.label_scores["G06F"].vote_fraction == 1.0

    def test_all_zero_weights_fall_back_to_uniform(self):
        neighbors, labels = neighborhood(
            [("x", -0.2), ("y", -0.9)], [{"G06F"}, {"G06F", "A01B"}]
        )
        with pytest.warns(UserWarning, match="uniform"):
            result = predict_from_neighbors(neighbors, labels)
        assert result.label_scores["G06F"].vote_fraction == 1.0
        assert result.label_scores["A01B"].vote_fraction == 0.5

    def test_nonempty_fallback_emits_top_ranked(self):
        neighbors, labels = neighborhood(
            [("x", 0.9), ("y", 0.8), ("z", 0.7)],
            [{"G06F"}, {"A01B"}, {"H04L"}],
        )
        result = predict_from_neighbors(neighbors, labels, threshold=0.9)
        assert len(result.predicted) == 1
        assert result.predicted == {result.ranking[0]}

    def test_vote_conservation_exact_on_random_inputs(self):
        # sum over labels of raw vote mass equals sum over neighbors of
        # weight * label count; verified in exact rational arithmetic over
        # the same clamped float weights, with the reported fractions
        # matching the exact values at double precision
        rng = np.random.default_rng(77)
        codes = ["A01B", "B60K", "C07D", "G06F", "H04L"]
        for trial in range(50):
            k = int(rng.integers(1, 12))
            sims = rng.uniform(-0.2, 1.0, size=k)
            labels = [
                frozenset(rng.choice(codes, size=rng.integers(1, 4), replace=False))
                for _ in range(k)
            ]
            neighbors = NeighborList(
                entries=tuple((f"n{i}", float(s)) for i, s in enumerate(sims)),
                metric="cosine",
            )
            weights = [Fraction(min(max(float(s), 0.0), 1.0)) for s in sims]
            if sum(weights) == 0:
                continue
            result = predict_from_neighbors(neighbors, labels)
            total = sum(weights)
            per_label_mass = {}
            for w, ls in zip(weights, labels):
                for c in ls:
                    per_label_mass[c] = per_label_mass.get(c, Fraction(0)) + w
            # conservation holds exactly in rational arithmetic
            assert sum(per_label_mass.values()) == sum(
                w * len(ls) for w, ls in zip(weights, labels)
            )
            # implementation's fractions agree with the exact values
            for c, mass in per_label_mass.items():
                assert result.label_scores[c].vote_fraction == pytest.approx(
                    float(mass / total), abs=1e-12
                )

    def test_calibrated_ranking_equals_vote_ranking(self):
        rng = np.random.default_rng(78)
        codes = ["A01B", "B60K", "C07D", "G06F", "H04L", "Y02E"]
        for _ in range(30):
            k = int(rng.integers(2, 10))
            neighbors = NeighborList(
                entries=tuple(
                    (f"n{i}", float(s)) for i, s in enumerate(rng.uniform(0, 1, size=k))
                ),
                metric="cosine",
            )
            labels = [
                frozenset(rng.choice(codes, size=rng.integers(1, 4), replace=False))
                for _ in range(k)
            ]
            result = predict_from_neighbors(neighbors, labels)
            by_vote = sorted(
                result.label_scores,
                key=lambda c: (-result.label_scores[c].vote_fraction, c),
            )
            by_calibrated = sorted(
                result.label_scores,
                key=lambda c: (-result.label_scores[c].calibrated, c),
            )
            assert by_vote == by_calibrated == list(result.ranking)

    def test_predicted_shrinks_as_threshold_rises(self):
        neighbors, labels = neighborhood(
            [("a", 0.9), ("b", 0.7), ("c", 0.5), ("d", 0.3)],
            [{"G06F", "A01B"}, {"G06F"}, {"A01B", "H04L"}, {"H04L"}],
        )
        previous = None
        for tau in (0.1, 0.3, 0.5, 0.7, 0.9):
            predicted = predict_from_neighbors(neighbors, labels, threshold=tau).predicted
            if previous is not None and len(predicted) > 1:
                assert predicted <= previous
            if previous is not None and len(previous) >= 1 and len(predicted) == 1:
                pass  # non-empty fallback may keep one label that fell below tau
            previous = predicted

    def test_calibrated_maps_threshold_to_half(self):
        neighbors, labels = neighborhood([("a", 1.0), ("b", 1.0)], [{"G06F"}, {"A01B"}])
        result = predict_from_neighbors(neighbors, labels, threshold=0.5, gamma=8.0)
        assert result.label_scores["G06F"].calibrated == pytest.approx(0.5, abs=1e-12)
        assert 0.0 < result.label_scores["G06F"].calibrated < 1.0


class TestPredictEndToEnd:
    def test_scale_invariant_prediction(self, small_store):
        q = np.random.default_rng(80).normal(size=small_store.dim)
        a = predict(small_store, q, k=8)
        b = predict(small_store, 25.0 * q, k=8)
        assert a.predicted == b.predicted
        assert a.ranking == b.ranking

    def test_k_exceeding_corpus_warns_and_uses_all(self, small_store):
        q = np.random.default_rng(81).normal(size=small_store.dim)
        with pytest.warns(UserWarning, match="exceeds"):
            result = predict(small_store, q, k=1000)
        assert result.k == len(small_store)

    def test_ann_backend_matches_exact_at_full_search_k(self, small_store):
        from patsim import AnnIndex

        index = AnnIndex.build(small_store, n_trees=4, leaf_size=8, seed=3)
        q = np.random.default_rng(82).normal(size=small_store.dim)
        exact = predict(small_store, q, k=8)
        approx = predict(index, q, k=8, search_k=len(small_store))
        assert exact.predicted == approx.predicted
        assert exact.ranking == approx.ranking

    def test_json_shape(self, small_store):
        q = small_store.matrix64[0]
        result = predict(small_store, q, k=4, query_id=small_store.ids[0], exclude_id=small_store.ids[0])
        payload = result.to_dict()
        assert set(payload) == {"query_id", "k", "predicted", "ranking", "neighbors"}
        assert all(
            set(entry) == {"label", "vote_fraction", "calibrated"}
            for entry in payload["ranking"]
        )
        assert all(
            set(hit) == {"patent_id", "score", "labels"} for hit in payload["neighbors"]
        )
        assert payload["query_id"] not in [hit["patent_id"] for hit in payload["neighbors"]]


class TestPredictTopN:
    def test_unanimous_gives_short_list(self):
        store = cluster_store(n_clusters=1, per_cluster=20, dim=8, seed=83)
        result = predict_topn(store, store.matrix64[0], k=8, n=5)
        assert result == [next(iter(store.label_sets[0]))]

    def test_three_neighbor_example_top1(self):
        neighbors, labels = neighborhood(
            [("a", 0.9), ("b", 0.8), ("c", 0.7)],
            [{"A01B"}, {"A01B", "G06F"}, {"G06F"}],
        )
        result = predict_from_neighbors(neighbors, labels)
        assert result.top_n(1) == ["A01B"]

    def test_prefix_consistency(self, small_store):
        q = np.random.default_rng(84).normal(size=small_store.dim)
        result = predict(small_store, q, k=10)
        n5 = result.top_n(5)
        assert result.top_n(1) == n5[:1]
        assert result.top_n(3) == n5[:3]


class TestBatchLeaveOneOut:
    def test_two_record_corpus(self):
        store = normalize(
            CorpusStore(
                ["a", "b"],
                [["G06F"], ["A01B"]],
                np.array([[1.0, 0.1], [0.9, 0.2]], dtype=np.float32),
            )
        )
        results = predict_batch_loo(store, k=1)
        assert results[0].neighbors.ids() == ["b"]
        assert results[1].neighbors.ids() == ["a"]
        assert results[0].predicted == {"A01B"}
        assert results[1].predicted == {"G06F"}

    def test_duplicated_vector_pair_predicted_perfectly(self):
        vec = np.random.default_rng(85).normal(size=6)
        store = normalize(
            CorpusStore(
                ["a", "b"],
                [["G06F", "G06T"], ["G06F", "G06T"]],
                np.vstack([vec, vec]).astype(np.float32),
            )
        )
        results = predict_batch_loo(store, k=1)
        for result in results:
            assert result.predicted == {"G06F", "G06T"}

    def test_single_record_rejected(self):
        store = CorpusStore(["a"], [["G06F"]], np.ones((1, 2), dtype=np.float32))
        with pytest.raises(ValueError, match="at least 2"):
            predict_batch_loo(store)

    def test_matches_loop_of_single_predictions(self):
        store = random_store(60, 8, seed=86)
        batch = predict_batch_loo(store, k=5)
        for i in (0, 17, 59):
            single = predict(
                store, store.matrix64[i], k=5, exclude_id=store.ids[i],
                query_id=store.ids[i],
            )
            assert batch[i].neighbors.ids() == single.neighbors.ids()
            assert batch[i].predicted == single.predicted

    def test_cluster_corpus_high_f1(self):
        store = cluster_store(n_clusters=5, per_cluster=60, dim=16, spread=0.15, seed=87)
        results = predict_batch_loo(store, k=8)
        report = score(
            [set(s) for s in store.label_sets], [r.predicted for r in results]
        )
        assert report.micro_f1 >= 0.95
