import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from invmds.embed import select_sign, tinv_embed
from invmds.exceptions import ConfigurationError, InvalidInputError
from invmds.geometry import CvrpInstance, PointCloud, generate_cvrp_instance, generate_tsp_instance, random_transform
from invmds.neuralnet import TrainConfig
from invmds.tasks import (
    PROTOCOLS,
    EdgeScorer,
    Protocol,
    Tour,
    bench_scaling,
    compare_sign_modes,
    greedy_cvrp,
    greedy_tour,
    loglog_slope,
    make_classification_dataset,
    routing_invariance_suite,
    run_classification_protocol,
    score_model_pipeline,
    tour_length,
    write_report_csv,
    write_report_json,
)

SETTINGS = ("none", "translation", "rotation", "reflection", "scaling", "composed")


def loop_length(X, order):
    total = 0.0
    for a, b in zip(order, order[1:] + order[:1]):
        total += np.sqrt(np.sum((X[a] - X[b]) ** 2))
    return total


class TestProtocols:
    def test_named(self):
        assert set(PROTOCOLS) == {"z/z", "SO3/SO3", "z/SO3"}
        assert PROTOCOLS["z/SO3"] == Protocol("z_rotation", "so3_rotation")
        assert PROTOCOLS["z/SO3"].name == "z/SO3"

    def test_unknown(self):
        with pytest.raises(ConfigurationError):
            Protocol("x_rotation", "none")
        with pytest.raises(ConfigurationError):
            run_classification_protocol(make_classification_dataset(4, 0), "SO3/z")

    def test_dataset_balanced(self):
        ds = make_classification_dataset(40, 8, n_points=16, seed=3)
        labels = [c.cloud_label for c in ds.train]
        assert np.bincount(labels).tolist() == [10] * 4 and len(ds.test) == 8

    def test_rotation_augmentation_comes_from_protocol(self):
        ds = make_classification_dataset(8, 4, n_points=16)
        with pytest.raises(ConfigurationError):
            run_classification_protocol(ds, "z/z", "tinv", TrainConfig(augmentation="z_rotations"))


@pytest.fixture(scope="module")
def small_dataset():
    return make_classification_dataset(80, 40, n_points=32, seed=5)


@pytest.fixture(scope="module")
def tinv_runs(small_dataset):
    cfg = TrainConfig(epochs=8, rng_seed=2)
    return {p: run_classification_protocol(small_dataset, p, "tinv", cfg) for p in PROTOCOLS}


class TestClassification:
    def test_tinv_identical_across_protocols(self, tinv_runs):
        preds = [r.predictions for r in tinv_runs.values()]
        assert all(np.array_equal(preds[0], p) for p in preds[1:])
        assert len({r.accuracy for r in tinv_runs.values()}) == 1

    def test_raw_above_chance(self, small_dataset):
        r = run_classification_protocol(small_dataset, "z/z", "raw_coords", TrainConfig(epochs=8))
        assert np.isfinite(r.accuracy) and r.accuracy >= 0.25

    def test_raw_degrades_under_so3(self, small_dataset):
        cfg = TrainConfig(epochs=15)
        zz = run_classification_protocol(small_dataset, "z/z", "raw_coords", cfg).accuracy
        zs = run_classification_protocol(small_dataset, "z/SO3", "raw_coords", cfg).accuracy
        assert zs < zz

    def test_deterministic(self, small_dataset, tinv_runs):
        again = run_classification_protocol(small_dataset, "z/z", "tinv", TrainConfig(epochs=8, rng_seed=2))
        assert np.array_equal(again.predictions, tinv_runs["z/z"].predictions)

    def test_sign_modes(self, small_dataset):
        res = compare_sign_modes(small_dataset, "z/SO3", TrainConfig(epochs=4))
        assert res["canonical"]["invariant"] and res["enumeration"]["invariant"]
        assert res["enumeration"]["train_size"] == 8 * res["canonical"]["train_size"]


class TestTour:
    def test_square(self):
        sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        assert tour_length(sq, Tour(order=[0, 1, 2, 3])) == 4.0

    @given(st.integers(0, 10**6), st.floats(0.01, 100))
    def test_homogeneous(self, seed, c):
        X = generate_tsp_instance(15, seed).coords
        t = greedy_tour(X)
        assert abs(tour_length(c * X, t) - c * tour_length(X, t)) <= 1e-12 * c * tour_length(X, t)

    def test_loop_oracle(self, rng):
        X = rng.uniform(size=(30, 2))
        order = rng.permutation(30).tolist()
        assert abs(tour_length(X, Tour(order=order)) - loop_length(X, order)) < 1e-12

    def test_invalid_permutation(self):
        with pytest.raises(InvalidInputError):
            tour_length(np.zeros((3, 2)), Tour(order=[0, 1, 1]))

    def test_same_up_to_rotation_and_reversal(self):
        a = Tour(order=[0, 1, 2, 3, 4])
        assert a.same_as(Tour(order=[2, 3, 4, 0, 1]))
        assert a.same_as(Tour(order=[0, 4, 3, 2, 1]))
        assert not a.same_as(Tour(order=[0, 2, 1, 3, 4]))

    def test_cvrp_route_set(self):
        a = Tour(routes=[[0, 1], [2]])
        assert a.same_as(Tour(routes=[[2], [1, 0]]))
        assert not a.same_as(Tour(routes=[[0], [1, 2]]))

    def test_cvrp_length(self):
        inst = CvrpInstance(np.array([[1.0, 0.0], [0.0, 1.0]]), [0.0, 0.0], [0.5, 0.5])
        assert abs(tour_length(inst, Tour(routes=[[0], [1]])) - 4.0) < 1e-15
        assert abs(tour_length(inst, Tour(routes=[[0, 1]])) - (2 + np.sqrt(2))) < 1e-15


class TestGreedy:
    def test_collinear(self):
        assert greedy_tour(np.array([[0.0], [1.0], [2.0]])).order == (0, 1, 2)

    def test_ties_to_lower_index(self):
        assert greedy_tour(np.array([[0.0], [-1.0], [1.0]])).order == (0, 1, 2)

    def test_precomputed(self, rng):
        X = rng.uniform(size=(12, 2))
        D = np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))
        assert greedy_tour(D, precomputed=True).order == greedy_tour(X).order

    def test_too_small(self):
        with pytest.raises(InvalidInputError):
            greedy_tour(np.zeros((1, 2)))

    @given(st.integers(0, 10**6), st.sampled_from(SETTINGS))
    def test_tinv_features_invariant(self, seed, setting):
        inst = generate_tsp_instance(20, seed)
        T = random_transform(seed + 1, setting)
        a = greedy_tour(select_sign(tinv_embed(inst)).H)
        b = greedy_tour(select_sign(tinv_embed(T.apply(inst))).H)
        assert a.same_as(b)

    def test_raw_reflection_counterexample_with_scorer(self):
        # raw coordinates are not safe features once a learned score is involved
        scorer = EdgeScorer(2, rng_seed=0)
        T = random_transform(0, "reflection")
        found = any(
            not score_model_pipeline(inst, scorer, "raw_coords").same_as(
                score_model_pipeline(T.apply(inst), scorer, "raw_coords"))
            for inst in (generate_tsp_instance(20, s) for s in range(20))
        )
        assert found

    def test_cvrp_singletons(self):
        inst = CvrpInstance(np.random.default_rng(0).uniform(size=(5, 2)), [0.5, 0.5], [1.0] * 5)
        t = greedy_cvrp(inst)
        assert len(t.routes) == 5 and all(len(r) == 1 for r in t.routes)

    def test_cvrp_single_route_matches_tsp(self):
        inst = CvrpInstance(np.random.default_rng(1).uniform(size=(9, 2)), [0.5, 0.5], [0.01] * 9)
        t = greedy_cvrp(inst)
        assert len(t.routes) == 1
        tsp = greedy_tour(inst.all_coords(), start=0)
        assert [i + 1 for i in t.routes[0]] == list(tsp.order[1:])

    def test_cvrp_infeasible(self):
        with pytest.raises(InvalidInputError):
            greedy_cvrp(CvrpInstance(np.zeros((2, 2)) + [[0.1, 0.1], [0.2, 0.2]], [0, 0], [0.5, 1.5]))

    @pytest.mark.parametrize("n", [20, 50])
    def test_cvrp_valid_and_invariant(self, n):
        for seed in range(10):
            inst = generate_cvrp_instance(n, seed)
            H = select_sign(tinv_embed(inst.all_coords())).H
            t = greedy_cvrp(inst, H)
            t.validate(n, inst.demands, inst.capacity)
            for s, setting in enumerate(SETTINGS):
                moved = inst.with_all_coords(random_transform([seed, s], setting).apply(inst.all_coords()))
                H2 = select_sign(tinv_embed(moved.all_coords())).H
                assert greedy_cvrp(moved, H2).same_as(t)


class TestScoredPipeline:
    @pytest.mark.parametrize("gen", [generate_tsp_instance, generate_cvrp_instance])
    def test_tinv_identical(self, gen):
        scorer = EdgeScorer(2, rng_seed=1)
        for seed in range(10):
            inst = gen(20, seed)
            base = score_model_pipeline(inst, scorer, "tinv")
            for s, setting in enumerate(SETTINGS):
                T = random_transform([seed, s], setting)
                moved = (inst.with_all_coords(T.apply(inst.all_coords())) if isinstance(inst, CvrpInstance)
                         else T.apply(inst))
                assert score_model_pipeline(moved, scorer, "tinv").same_as(base)

    def test_raw_translation_changes_tour(self):
        scorer = EdgeScorer(2, rng_seed=1)
        inst = generate_tsp_instance(20, 0)
        moved = random_transform(0, "translation").apply(inst)
        assert not score_model_pipeline(inst, scorer, "raw_coords").same_as(
            score_model_pipeline(moved, scorer, "raw_coords"))

    @pytest.mark.parametrize("mode", ["tinv", "raw_coords"])
    def test_identity(self, mode):
        scorer = EdgeScorer(2)
        inst = generate_tsp_instance(20, 3)
        assert score_model_pipeline(inst, scorer, mode).same_as(
            score_model_pipeline(PointCloud(inst.coords.copy()), scorer, mode))

    def test_scorer_matches_explicit_mlp(self, rng):
        s = EdgeScorer(2, rng_seed=4)
        H = rng.normal(size=(5, 2))
        S = s.pairwise(H)
        for i in range(5):
            for j in range(5):
                x = np.concatenate([H[i], H[j], H[j] - H[i]])
                assert abs(S[i, j] - np.tanh(x @ s.W1 + s.b1) @ s.w2) < 1e-12

    def test_suite(self):
        tinv = routing_invariance_suite("tsp", 20, 20, "tinv", seed=1)
        assert tinv.all_identical and max(tinv.max_deviation.values()) < 1e-9
        raw = routing_invariance_suite("cvrp", 20, 20, "raw_coords", seed=1)
        assert raw.identity_rate["none"] == 1.0 and raw.identity_rate["translation"] < 0.5
        assert all(v >= 0 for v in raw.max_deviation.values())
        assert len(tinv.rows()) == 4 * 5 + 1


class TestBench:
    def test_slope_of_power_law(self):
        assert abs(loglog_slope([1, 2, 4, 8], [3, 12, 48, 192]) - 2) < 1e-12

    def test_small_bench(self, tmp_path):
        res = bench_scaling([64, 128], repeats=2)
        assert len(res.rows()) == 2 and all(t > 0 for t in res.mean_seconds)
        res.to_gnuplot(tmp_path / "b.csv")
        assert (tmp_path / "b.csv").read_text().startswith("# n,mean_seconds,std_seconds\n")

    @pytest.mark.parametrize("sizes", [[128, 64], [32, 64]])
    def test_bad_sizes(self, sizes):
        with pytest.raises((ConfigurationError, InvalidInputError)):
            bench_scaling(sizes, repeats=1)


def test_reports(tmp_path):
    write_report_csv([("tsp20", "none", "tinv", "mean_length", 1 / 3)], tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines == ["task,setting,embed_mode,metric,value", "tsp20,none,tinv,mean_length,0.33333333333333331"]
    write_report_json({"a": 1}, tmp_path / "r.json")
    assert (tmp_path / "r.json").read_text() == '{\n  "a": 1\n}\n'
