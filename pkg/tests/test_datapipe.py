import json

import numpy as np
import pytest

from sensorcond.autodiff import RngStream
from sensorcond.data import (CombinationPlan, Dataset, SynthConfig, TaskSpec,
                             TimeSeriesInstance, assign_combinations,
                             bundle_digest, compute_stats, dataset_digest,
                             fnv1a64, generate_combinations, load_dataset,
                             make_batches, mask_count, mean_impute, normalize,
                             prepare_instance, remask, sample_test_combination,
                             save_dataset, split, synth_generate, window)
from sensorcond.data.synth import noise_sensor_index
from sensorcond.errors import (ConfigError, CoverageError, GenerationError,
                               IngestionError)
from sensorcond.sensors import ActiveSet, SensorCatalog


def make_dataset(values_list, actives, targets, names=None, task=None,
                 normalization="zscore"):
    names = names or [f"s{i}" for i in range(values_list[0].shape[1])]
    catalog = SensorCatalog(names)
    task = task or TaskSpec("classification", max(int(t) for t in targets) + 1)
    instances = [
        TimeSeriesInstance(id=f"i{k}", values=v, active=a, target=t)
        for k, (v, a, t) in enumerate(zip(values_list, actives, targets))
    ]
    return Dataset(catalog=catalog, task=task, instances=instances,
                   normalization=normalization)


class TestComputeStats:
    def test_constant_sensor_clamps_std(self):
        full = ActiveSet.full(2)
        ds = make_dataset([np.array([[5.0, 1.0], [5.0, 3.0]])], [full], [0],
                          task=TaskSpec("classification", 2))
        stats = compute_stats(ds)
        assert stats.mean[0] == 5.0
        assert stats.std[0] == 1.0  # degenerate spread falls back to unit scale

    def test_population_convention(self):
        full = ActiveSet.full(1)
        ds = make_dataset([np.array([[1.0]]), np.array([[3.0]])], [full, full],
                          [0, 1])
        stats = compute_stats(ds)
        assert stats.mean[0] == 2.0
        assert stats.std[0] == 1.0  # population std of {1, 3}

    def test_against_flat_loop_oracle(self, np_rng):
        full = ActiveSet.full(3)
        half = ActiveSet.from_indices(3, [0, 2])
        values = [np_rng.normal(size=(7, 3)), np_rng.normal(size=(4, 3))]
        ds = make_dataset(values, [full, half], [0, 1])
        stats = compute_stats(ds)
        # brute force: iterate every cell of every instance
        for j in range(3):
            cells = []
            for inst in ds.instances:
                if inst.active.mask[j]:
                    cells.extend(inst.values[:, j].tolist())
            assert abs(stats.mean[j] - np.mean(cells)) < 1e-12
            assert abs(stats.std[j] - np.std(cells)) < 1e-12

    def test_uncovered_sensor_is_named(self):
        ds = make_dataset([np.zeros((3, 3))], [ActiveSet.from_indices(3, [0, 2])],
                          [0], names=["alpha", "beta", "gamma"],
                          task=TaskSpec("classification", 2))
        with pytest.raises(CoverageError, match="beta"):
            compute_stats(ds)


class TestImputation:
    def test_all_active_is_pure_normalization(self, np_rng):
        full = ActiveSet.full(3)
        ds = make_dataset([np_rng.normal(size=(6, 3))], [full], [0],
                          task=TaskSpec("classification", 2))
        stats = compute_stats(ds)
        inst = ds.instances[0]
        prepared = prepare_instance(inst, full, stats, "zscore")
        assert np.array_equal(prepared, normalize(inst.values, stats, "zscore"))

    def test_zscore_fill_is_exactly_zero(self, np_rng):
        full = ActiveSet.full(3)
        ds = make_dataset([np_rng.normal(size=(6, 3))], [full], [0],
                          task=TaskSpec("classification", 2))
        stats = compute_stats(ds)
        masked = ActiveSet.from_indices(3, [0, 2])
        prepared = prepare_instance(ds.instances[0], masked, stats, "zscore")
        assert np.all(prepared[:, 1] == 0.0)

    def test_minmax_fill_is_normalized_mean(self):
        # one sensor with train min 2, max 10, mean 6 -> fill value 0.5
        full = ActiveSet.full(2)
        vals = np.array([[2.0, 1.0], [10.0, 1.0], [6.0, 1.0]])
        ds = make_dataset([vals], [full], [0], task=TaskSpec("classification", 2),
                          normalization="minmax")
        stats = compute_stats(ds)
        masked = ActiveSet.from_indices(2, [1])
        prepared = prepare_instance(ds.instances[0], masked, stats, "minmax")
        fill = (6.0 - 2.0) / (10.0 - 2.0)  # brute-force normalized mean
        assert np.allclose(prepared[:, 0], fill)
        assert fill == 0.5

    def test_fill_is_idempotent(self, np_rng):
        full = ActiveSet.full(4)
        ds = make_dataset([np_rng.normal(size=(5, 4))], [full], [0],
                          task=TaskSpec("classification", 2))
        stats = compute_stats(ds)
        masked = ActiveSet.from_indices(4, [1, 3])
        once = mean_impute(normalize(ds.instances[0].values, stats, "zscore"),
                           masked, stats, "zscore")
        twice = mean_impute(once, masked, stats, "zscore")
        assert np.array_equal(once, twice)


class TestCombinations:
    def test_mask_count_rounding(self):
        assert mask_count(0.25, 8) == 2
        assert mask_count(0.1, 45) == 4   # round-half-to-even of 4.5
        assert mask_count(0.5, 9) == 4    # round-half-to-even of 4.5
        assert mask_count(0.25, 10) == 2  # round-half-to-even of 2.5

    def test_base_masks_exactly_round_f_d(self, rng):
        # d=8, f=0.25: 2 masked, 6 available per base set
        catalog = SensorCatalog([f"s{i}" for i in range(8)])
        plan = generate_combinations(catalog, 0.25, n_base=8, n_total=16, rng=rng)
        for comb in plan.base:
            assert comb.count == 6

    def test_sixty_four_distinct_and_derived_subsets(self, rng):
        catalog = SensorCatalog([f"s{i}" for i in range(12)])
        plan = generate_combinations(catalog, 0.25, rng=rng)
        assert len(plan.base) == 16 and len(plan.derived) == 48
        keys = plan.mask_keys()
        assert len(keys) == 64
        # exhaustive pairwise subset check: each derived under some base
        for derived in plan.derived:
            assert any(
                np.all(base.mask[derived.mask]) and derived.count < base.count
                for base in plan.base
            )

    def test_deterministic_given_seed(self):
        catalog = SensorCatalog([f"s{i}" for i in range(12)])
        p1 = generate_combinations(catalog, 0.25, rng=RngStream(4).split("p"))
        p2 = generate_combinations(catalog, 0.25, rng=RngStream(4).split("p"))
        assert [c.key() for c in p1.combinations] == [c.key() for c in p2.combinations]

    def test_impossible_demands_raise(self, rng):
        catalog = SensorCatalog(["a", "b", "c"])
        with pytest.raises(ConfigError):
            generate_combinations(catalog, 0.05, rng=rng)  # masks nothing
        with pytest.raises(GenerationError):
            # derived sets need at least one extra mask: 0.25*4/2 rounds to 0
            generate_combinations(SensorCatalog(list("abcd")), 0.25, rng=rng)

    def test_assignment_round_robin_balance(self, rng):
        catalog = SensorCatalog([f"s{i}" for i in range(12)])
        plan = generate_combinations(catalog, 0.25, rng=rng.split("plan"))
        assignment = assign_combinations(640, plan, rng.split("assign"))
        counts = np.bincount(assignment, minlength=64)
        assert counts.min() == counts.max() == 10


class TestSampleTestCombination:
    def test_d45_fte01_masks_four(self, rng):
        catalog = SensorCatalog([f"s{i}" for i in range(45)])
        plan = generate_combinations(catalog, 0.25, rng=rng.split("plan"))
        comb = sample_test_combination(catalog, 0.1, plan, rng.split("test"))
        assert comb.size - comb.count == 4

    def test_unseen_with_respect_to_plan(self, rng):
        catalog = SensorCatalog([f"s{i}" for i in range(12)])
        plan = generate_combinations(catalog, 0.25, rng=rng.split("plan"))
        for k in range(20):
            comb = sample_test_combination(catalog, 0.25, plan, rng.split(("t", k)))
            assert comb.key() not in plan.mask_keys()

    def test_seed_determinism(self):
        catalog = SensorCatalog([f"s{i}" for i in range(12)])
        plan = generate_combinations(catalog, 0.25, rng=RngStream(1).split("p"))
        a = sample_test_combination(catalog, 0.4, plan, RngStream(2).split("s"))
        b = sample_test_combination(catalog, 0.4, plan, RngStream(2).split("s"))
        assert a == b

    def test_exhaustion_raises(self):
        # every 1-masked combination of a tiny catalog is already in the plan
        catalog = SensorCatalog(list("abcd"))
        combos = [ActiveSet.from_indices(4, [i for i in range(4) if i != k])
                  for k in range(4)]
        plan = CombinationPlan(base=combos, derived=[], masked_fraction=0.25)
        with pytest.raises(GenerationError):
            sample_test_combination(catalog, 0.25, plan, RngStream(0))


def engine(total_life=140, observed=None, d=3):
    observed = observed or total_life
    t = np.arange(observed, dtype=float)
    values = np.tile(t[:, None], (1, d))
    return TimeSeriesInstance(id="e0", values=values, active=ActiveSet.full(d),
                              target=float(total_life - observed),
                              total_life=total_life)


class TestWindowing:
    def test_count_112(self):
        assert len(window(engine(observed=112), length=100, shift=5)) == 3

    def test_boundary_single_window(self):
        wins = window(engine(total_life=140, observed=100), length=100, shift=5)
        assert len(wins) == 1
        assert wins[0].target == 40.0  # 140 - 100

    def test_targets_decrease_by_shift(self):
        wins = window(engine(total_life=150, observed=130), length=100, shift=5)
        targets = [w.target for w in wins]
        assert targets == [150 - 100 - 5 * k for k in range(len(wins))]

    def test_short_series_skipped_with_warning(self, caplog):
        with caplog.at_level("WARNING"):
            assert window(engine(observed=50), length=100) == []
        assert "skipping" in caplog.text

    def test_total_window_conservation(self):
        engines = [engine(total_life=200, observed=t) for t in (100, 117, 99, 155)]
        total = sum(len(window(e, 100, 5)) for e in engines)
        expected = sum((t - 100) // 5 + 1 for t in (100, 117, 155))
        assert total == expected


class TestSplit:
    def test_sizes_40_10_10_40(self, np_rng):
        full = ActiveSet.full(2)
        ds = make_dataset([np_rng.normal(size=(3, 2)) for _ in range(100)],
                          [full] * 100, [i % 5 for i in range(100)])
        parts = split(ds, rng=RngStream(0).split("s"))
        assert [len(p) for p in parts] == [40, 10, 10, 40]

    def test_partition_property(self, np_rng):
        full = ActiveSet.full(2)
        ds = make_dataset([np_rng.normal(size=(3, 2)) for _ in range(57)],
                          [full] * 57, [i % 3 for i in range(57)])
        parts = split(ds, rng=RngStream(1).split("s"))
        ids = [inst.id for p in parts for inst in p.instances]
        assert len(ids) == 57 and len(set(ids)) == 57

    def test_stratification_within_two_instances(self, np_rng):
        full = ActiveSet.full(2)
        labels = [i % 5 for i in range(200)]
        ds = make_dataset([np_rng.normal(size=(3, 2)) for _ in range(200)],
                          [full] * 200, labels)
        train = split(ds, rng=RngStream(2).split("s"))[0]
        got = np.bincount([int(i.target) for i in train.instances], minlength=5)
        assert np.all(np.abs(got - 16) <= 2)  # 40% of 40 per class

    def test_tiny_class_falls_back_unstratified(self, np_rng, caplog):
        full = ActiveSet.full(2)
        labels = [0] * 30 + [1]
        ds = make_dataset([np_rng.normal(size=(3, 2)) for _ in range(31)],
                          [full] * 31, labels)
        with caplog.at_level("WARNING"):
            parts = split(ds, rng=RngStream(3).split("s"))
        assert sum(len(p) for p in parts) == 31
        assert "unstratified" in caplog.text


class TestBatches:
    def _dataset(self, np_rng, n=130, d=6):
        full = ActiveSet.full(d)
        return make_dataset([np_rng.normal(size=(4, d)) for _ in range(n)],
                            [full] * n, [i % 2 for i in range(n)])

    def test_batch_sizes_64_64_2(self, np_rng):
        ds = self._dataset(np_rng)
        stats = compute_stats(ds)
        single = CombinationPlan(base=[ActiveSet.full(6)], derived=[],
                                 masked_fraction=0.0)
        assignment = np.zeros(130, dtype=np.intp)
        sizes = sorted(b.size for b in make_batches(
            ds, assignment, single, stats, 64, RngStream(0).split("b")))
        assert sizes == [2, 64, 64]

    def test_single_active_set_per_batch(self, np_rng, rng):
        ds = self._dataset(np_rng, n=80)
        stats = compute_stats(ds)
        plan = generate_combinations(ds.catalog, 0.25, n_base=4, n_total=8,
                                     rng=rng.split("plan"))
        assignment = assign_combinations(80, plan, rng.split("assign"))
        for batch in make_batches(ds, assignment, plan, stats, 16, rng.split("bt")):
            comb = plan.combinations[0]
            # all rows imputed under one mask: inactive columns are constant
            assert isinstance(batch.active, ActiveSet)
            inactive = ~batch.active.mask
            if inactive.any():
                cols = batch.inputs[:, :, inactive]
                assert np.allclose(cols, cols[0, 0, :], atol=1e-12)

    def test_epoch_multiset_identical_order_differs(self, np_rng, rng):
        ds = self._dataset(np_rng, n=96)
        stats = compute_stats(ds)
        plan = generate_combinations(ds.catalog, 0.25, n_base=4, n_total=8,
                                     rng=rng.split("plan"))
        assignment = assign_combinations(96, plan, rng.split("assign"))

        def epoch(tag):
            order = []
            for batch in make_batches(ds, assignment, plan, stats, 16,
                                      RngStream(9).split(tag)):
                order.extend(batch.targets.tolist())
            return order

        e1, e2 = epoch("epoch1"), epoch("epoch2")
        assert sorted(e1) == sorted(e2)
        assert e1 != e2


class TestSynth:
    def test_same_seed_same_digest(self):
        a = synth_generate(SynthConfig(instances=60, length=8, seed=5))
        b = synth_generate(SynthConfig(instances=60, length=8, seed=5))
        assert dataset_digest(a) == dataset_digest(b)
        c = synth_generate(SynthConfig(instances=60, length=8, seed=6))
        assert dataset_digest(a) != dataset_digest(c)

    def test_linear_probe_separability(self):
        """Least squares to one-hot targets over per-sensor summary features
        (moments plus short-lag autocovariances, where the class dynamics
        live) must solve the default task from the full sensor set."""
        cfg = SynthConfig()  # the acceptance default: d=12, K=4, N=800, T=32
        ds = synth_generate(cfg)

        def summary(inst):
            v = inst.values
            return np.concatenate([
                v.mean(axis=0), v.std(axis=0),
                np.mean(v[1:] * v[:-1], axis=0),
                np.mean(v[2:] * v[:-2], axis=0),
            ])

        feats = np.stack([summary(inst) for inst in ds.instances])
        labels = np.array([int(inst.target) for inst in ds.instances])
        onehot = np.eye(cfg.num_classes)[labels]
        n = len(labels)
        train_idx, test_idx = np.arange(n)[: n // 2], np.arange(n)[n // 2:]
        x = np.hstack([feats, np.ones((n, 1))])
        w, *_ = np.linalg.lstsq(x[train_idx], onehot[train_idx], rcond=None)
        preds = np.argmax(x[test_idx] @ w, axis=1)
        err = np.mean(preds != labels[test_idx]) * 100
        assert err < 10.0

    def test_noise_sensor_carries_no_signal(self):
        cfg = SynthConfig(instances=80, length=16, seed=2)
        ds = synth_generate(cfg)
        j = noise_sensor_index(cfg)
        per_class = {}
        for inst in ds.instances:
            per_class.setdefault(int(inst.target), []).append(inst.values[:, j].mean())
        means = [np.mean(v) for v in per_class.values()]
        assert np.ptp(means) < 0.1  # class means indistinguishable

    def test_regression_targets_nonincreasing_along_engine(self):
        ds = synth_generate(SynthConfig(task="regression", instances=40,
                                        length=60, seed=1))
        inst = max(ds.instances, key=lambda i: i.length)
        wins = window(inst, length=20, shift=4)
        targets = [w.target for w in wins]
        assert all(a > b for a, b in zip(targets, targets[1:]))
        assert all(t >= 0 for t in targets)


class TestManifest:
    def test_round_trip_preserves_digest(self, tmp_path, np_rng):
        full = ActiveSet.full(3)
        part = ActiveSet.from_indices(3, [0, 2])
        ds = make_dataset([np_rng.normal(size=(4, 3)), np_rng.normal(size=(6, 3))],
                          [full, part], [0, 1])
        save_dataset({"train": ds, "test": ds}, tmp_path / "data")
        loaded = load_dataset(tmp_path / "data")
        assert set(loaded) == {"train", "test"}
        assert dataset_digest(loaded["train"]) == dataset_digest(ds)
        assert bundle_digest(loaded) == bundle_digest({"train": ds, "test": ds})

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(IngestionError, match="manifest"):
            load_dataset(tmp_path / "nope")

    def test_malformed_record_names_location(self, tmp_path, np_rng):
        full = ActiveSet.full(2)
        ds = make_dataset([np_rng.normal(size=(3, 2))], [full], [0],
                          task=TaskSpec("classification", 2))
        save_dataset({"all": ds}, tmp_path / "data")
        target = tmp_path / "data" / "all.jsonl"
        target.write_text('{"id": "x", "active": ["s0"], "target": 0}\n')
        with pytest.raises(IngestionError, match=r"all\.jsonl:1"):
            load_dataset(tmp_path / "data")

    def test_inconsistent_width_rejected(self, tmp_path, np_rng):
        full = ActiveSet.full(2)
        ds = make_dataset([np_rng.normal(size=(3, 2))], [full], [0],
                          task=TaskSpec("classification", 2))
        save_dataset({"all": ds}, tmp_path / "data")
        target = tmp_path / "data" / "all.jsonl"
        rec = {"id": "x", "active": ["s0"], "target": 0,
               "values": [[1.0, 2.0, 3.0]]}
        target.write_text(json.dumps(rec) + "\n")
        with pytest.raises(IngestionError, match="columns"):
            load_dataset(tmp_path / "data")

    def test_remask_intersects_with_instance_availability(self, np_rng):
        part = ActiveSet.from_indices(3, [0, 1])
        ds = make_dataset([np_rng.normal(size=(3, 3))], [part], [0],
                          task=TaskSpec("classification", 2))
        remasked = remask(ds, ActiveSet.from_indices(3, [1, 2]))
        assert remasked.instances[0].active == ActiveSet.from_indices(3, [1])


class TestDigest:
    def test_fnv1a64_reference_vectors(self):
        # standard FNV-1a 64-bit test values
        assert fnv1a64(b"") == 0xCBF29CE484222325
        assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
        assert fnv1a64(b"foobar") == 0x85944171F73967E8

    def test_digest_sensitive_to_values(self, np_rng):
        full = ActiveSet.full(2)
        base = np_rng.normal(size=(3, 2))
        ds1 = make_dataset([base.copy()], [full], [0], task=TaskSpec("classification", 2))
        bumped = base.copy()
        bumped[0, 0] += 1e-9
        ds2 = make_dataset([bumped], [full], [0], task=TaskSpec("classification", 2))
        assert dataset_digest(ds1) != dataset_digest(ds2)
