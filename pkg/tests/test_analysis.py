"""Density-partition analysis: bucket bookkeeping, ratio arithmetic, and
the four-variant comparison runner."""
import numpy as np
import pytest

from cql.cli.config import RunConfig
from cql.harness import (bucket_label, bucket_members, category_counts,
                         collect_predictions, compare_models,
                         dataset_from_run, density_map,
                         density_partition_report, improvement_ratio, train)
from cql.harness.analysis import BUCKETS
from cql.harness.evaluation import Prediction
from cql.harness.synthetic import DatasetSpec, generate_dataset

from test_evaluation import box, make_scene


def tiny_run(**kw):
    run = RunConfig()
    run.k, run.d = 3, 8
    run.dataset.scenes = 10
    run.optimizer.steps = 5
    for key, value in kw.items():
        run.set(key, value)
    return run.resolve()


class TestBuckets:
    def test_bucket_label_boundaries(self):
        assert [bucket_label(n) for n in (1, 2, 3, 4, 5)] == \
            ["1", "2", "3", "4", "5"]
        assert bucket_label(6) == ">5"
        assert bucket_label(17) == ">5"

    def test_category_counts_hand_case(self):
        b = box(0, 0, 1, 1)
        scene = make_scene([(b, b, 0), (b, b, 0), (b, b, 2)], k=3)
        counts = category_counts([scene])
        assert counts.tolist() == [[2, 0, 1]]

    def test_members_match_counts(self):
        b = box(0, 0, 1, 1)
        scenes = [make_scene([(b, b, 0), (b, b, 0)], k=2),
                  make_scene([(b, b, 1)], k=2)]
        members = bucket_members(scenes)
        assert members == {"2": {0: [0]}, "1": {1: [1]}}

    def test_partition_invariant_on_random_datasets(self):
        # every populated (scene, category) pair lands in exactly one bucket,
        # and it is the bucket of its instance count
        rng = np.random.default_rng(123)
        for trial in range(50):
            spec = DatasetSpec(
                k=int(rng.integers(1, 6)), d=4, h=2, w=2,
                scenes=int(rng.integers(1, 12)),
                min_instances=1,
                max_instances=int(rng.integers(1, 9)),
                density_profile=str(rng.choice(["sparse", "uniform", "dense"])))
            scenes = generate_dataset(spec, seed=trial)
            counts = category_counts(scenes)
            members = bucket_members(scenes)
            seen = {}
            for bucket, by_cat in members.items():
                assert bucket in BUCKETS
                for cat, scene_ids in by_cat.items():
                    for i in scene_ids:
                        key = (i, cat)
                        assert key not in seen, f"{key} in two buckets"
                        seen[key] = bucket
            expected = {(i, cat): bucket_label(int(counts[i, cat]))
                        for i in range(len(scenes))
                        for cat in range(spec.k) if counts[i, cat] > 0}
            assert seen == expected

    def test_empty_buckets_absent_not_zero(self):
        spec = DatasetSpec(k=3, d=4, h=2, w=2, scenes=8, max_instances=2)
        scenes = generate_dataset(spec, seed=0)
        assert int(category_counts(scenes).max()) <= 2
        members = bucket_members(scenes)
        assert set(members) <= {"1", "2"}
        preds = [
            Prediction(i, int(rec.labels.argmax()), 0.9,
                       rec.human_box, rec.object_box)
            for i, scene in enumerate(scenes)
            for rec in scene.instances
        ]
        buckets = density_map(preds, scenes)
        assert set(buckets) == set(members)  # no zero-filled phantom buckets


class TestRatios:
    def test_paper_style_arithmetic(self):
        ratio = improvement_ratio(33.69, 35.36)
        assert ratio == pytest.approx(0.04956960522410216, abs=1e-15)
        assert round(ratio, 5) == 0.04957

    def test_equal_values_give_exact_zero(self):
        assert improvement_ratio(0.7, 0.7) == 0.0
        assert improvement_ratio(0.0, 0.0) == 0.0

    def test_zero_baseline_is_absent(self):
        assert improvement_ratio(0.0, 0.5) is None

    def test_regression_is_negative(self):
        assert improvement_ratio(0.5, 0.4) == pytest.approx(-0.2)


class TestPartitionReport:
    def test_identical_models_zero_ratios(self):
        run = tiny_run()
        data = dataset_from_run(run)
        model, _ = train(run, data)
        report = density_partition_report(model, model, data)
        assert report.density_ratios
        for bucket, ratio in report.density_ratios.items():
            assert ratio == 0.0, bucket
        assert report.density_map == report.density_baseline

    def test_report_carries_model_b_full_metrics(self):
        run = tiny_run()
        data = dataset_from_run(run)
        model, _ = train(run, data)
        report = density_partition_report(model, model, data)
        solo = density_map(collect_predictions(model, data), data)
        assert report.density_map == solo


class TestCompareModels:
    def test_four_variants_and_baseline_reproducibility(self):
        run = tiny_run(**{"dataset.scenes": 8})
        data = dataset_from_run(run)
        first = compare_models(run, data)
        second = compare_models(run, data)
        assert sorted(first.reports) == ["a", "b", "c", "d"]
        for letter in "abcd":
            assert first.reports[letter].mean_ap is not None
            assert first.curves[letter], letter
        for name, p in first.models["a"].params.items():
            assert p.data.tobytes() == \
                second.models["a"].params[name].data.tobytes()
        for letter in "abcd":
            assert first.reports[letter].mean_ap == \
                second.reports[letter].mean_ap
