import numpy as np
import pytest

from sensorcond.autodiff import RngStream, Tape, Tensor
from sensorcond.data import (compute_stats, generate_combinations, make_batches,
                             one_hot, remask)
from sensorcond.errors import ContractError, DimensionError
from sensorcond.models import ModelConfig, build_model
from sensorcond.sensors import ActiveSet
from sensorcond.training import (AdamState, Checkpoint, DualOptimizer,
                                 TrainConfig, adam_step, batch_loss,
                                 checkpoint_digest, cross_entropy, fine_tune,
                                 model_from_checkpoint, sgd_step,
                                 squared_error, train)
from sensorcond.training.loop import training_assignments


class TestCrossEntropy:
    def test_perfect_prediction_is_zero(self):
        y = Tensor(one_hot(np.array([1, 0]), 3))
        assert cross_entropy(y, y).item() == 0.0

    def test_uniform_is_log_k(self):
        probs = Tensor(np.full((2, 4), 0.25))
        y = Tensor(one_hot(np.array([0, 3]), 4))
        assert abs(cross_entropy(probs, y).item() - np.log(4.0)) < 1e-12

    def test_against_scalar_loop_oracle(self, np_rng):
        logits = np_rng.normal(size=(6, 5))
        e = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs = e / e.sum(axis=1, keepdims=True)
        labels = np_rng.integers(0, 5, size=6)
        got = cross_entropy(Tensor(probs), Tensor(one_hot(labels, 5))).item()
        total = 0.0
        for i in range(6):
            total += -np.log(max(probs[i, labels[i]], 1e-12))
        assert abs(got - total / 6) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            cross_entropy(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 4))))


class TestSquaredError:
    def test_zero_on_equality(self, np_rng):
        y = Tensor(np_rng.uniform(size=8))
        assert squared_error(y, y).item() == 0.0

    def test_arithmetic(self):
        got = squared_error(Tensor([0.8, 0.9]), Tensor([0.5, 0.5])).item()
        assert abs(got - 0.125) < 1e-15

    def test_against_loop_oracle(self, np_rng):
        a, b = np_rng.uniform(size=12), np_rng.uniform(size=12)
        got = squared_error(Tensor(a), Tensor(b)).item()
        total = sum((x - y) ** 2 for x, y in zip(a, b))
        assert abs(got - total / 12) < 1e-15


class TestSgd:
    def test_zero_gradient_rows_bit_identical(self, np_rng):
        param = np_rng.normal(size=(5, 3))
        before = param.copy()
        grad = np.zeros_like(param)
        grad[2] = np_rng.normal(size=3)
        sgd_step(param, grad, lr=5e-4)
        for row in (0, 1, 3, 4):
            assert np.array_equal(param[row], before[row])
        assert not np.array_equal(param[2], before[2])

    def test_arithmetic(self):
        param = np.array([1.0])
        sgd_step(param, np.array([2.0]), lr=5e-4)
        assert param[0] == 0.999


class TestAdam:
    def test_first_step_is_signed_lr(self, np_rng):
        g = np_rng.normal(size=(4,)) * 10
        p = np.zeros(4)
        adam_step({"p": p}, {"p": g}, AdamState(), lr=1e-4)
        assert np.allclose(p, -1e-4 * np.sign(g), rtol=1e-3)

    def test_zero_gradient_keeps_params_constant(self):
        p = np.array([1.0, -2.0])
        state = AdamState()
        for _ in range(50):
            adam_step({"p": p}, {"p": np.zeros(2)}, state, lr=0.1)
        assert np.array_equal(p, [1.0, -2.0])

    def test_quadratic_bowl_against_reference_updates(self):
        """Minimise x^2/2; compare against an independently coded update."""
        lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
        p = np.array([1.0])
        state = AdamState()

        x_ref, m_ref, v_ref = 1.0, 0.0, 0.0
        for t in range(1, 101):
            g = x_ref  # gradient of the bowl at the reference point
            m_ref = b1 * m_ref + (1 - b1) * g
            v_ref = b2 * v_ref + (1 - b2) * g * g
            x_ref -= lr * (m_ref / (1 - b1 ** t)) / (np.sqrt(v_ref / (1 - b2 ** t)) + eps)
            adam_step({"p": p}, {"p": p.copy()}, state, lr=lr)
            assert abs(p[0] - x_ref) < 1e-12
        assert abs(p[0]) < 0.1


@pytest.fixture(scope="module")
def trained(small_splits, small_stats):
    plan = generate_combinations(small_splits["train"].catalog, 0.25,
                                 n_base=8, n_total=16,
                                 rng=RngStream(0).split(("plan", 0.25)))
    model_cfg = ModelConfig(variant="gru-cm", task="classification", num_classes=3,
                            hidden=12, layers=1)
    cfg = TrainConfig(seed=0, max_epochs=40, patience=40, batch_size=16,
                      net_lr=1e-3, embed_lr=5e-3)
    ckpt, history = train(small_splits["train"], small_splits["val"], plan,
                          model_cfg, cfg, small_stats)
    return plan, model_cfg, cfg, ckpt, history


class TestTrainLoop:
    def test_loss_decreases_on_smoke_run(self, trained):
        _, _, _, _, history = trained
        assert history[-1]["train_loss"] < 0.5 * history[0]["train_loss"]

    def test_validation_minimum_is_checkpointed_epoch(self, trained):
        _, _, _, ckpt, history = trained
        vals = [h["val_loss"] for h in history]
        assert ckpt.best_epoch == int(np.argmin(vals))
        assert ckpt.best_val_loss == min(vals)

    def test_gru_variant_allocates_no_conditioning_parameters(self, small_splits,
                                                              small_stats):
        plan = generate_combinations(small_splits["train"].catalog, 0.25,
                                     n_base=8, n_total=16,
                                     rng=RngStream(0).split("p"))
        cfg = TrainConfig(seed=0, max_epochs=1, batch_size=16)
        for variant, expect_cond in (("gru", False), ("gru-cm", True)):
            model_cfg = ModelConfig(variant=variant, task="classification",
                                    num_classes=3, hidden=8, layers=1)
            ckpt, _ = train(small_splits["train"], small_splits["val"], plan,
                            model_cfg, cfg, small_stats)
            has_cond = any(k.startswith(("embeddings.", "condnet."))
                           for k in ckpt.params)
            assert has_cond == expect_cond

    def test_divergence_aborts_with_last_good_checkpoint(self, small_splits,
                                                         small_stats):
        # a non-finite input cell blows up the gradients mid-epoch; the loop
        # must bail out and hand back finite parameters
        poisoned = small_splits["train"].replace_instances(
            [inst for inst in small_splits["train"].instances])
        bad = poisoned.instances[0]
        values = bad.values.copy()
        values[2, :] = np.inf
        poisoned.instances[0] = type(bad)(
            id=bad.id, values=values, active=bad.active, target=bad.target)
        plan = generate_combinations(poisoned.catalog, 0.25, n_base=8,
                                     n_total=16, rng=RngStream(0).split("p"))
        cfg = TrainConfig(seed=0, max_epochs=6, batch_size=16)
        model_cfg = ModelConfig(variant="gru", task="classification",
                                num_classes=3, hidden=8, layers=1)
        ckpt, _ = train(poisoned, small_splits["val"], plan, model_cfg, cfg,
                        small_stats)
        assert ckpt.meta["aborted"]
        assert all(np.all(np.isfinite(v)) for v in ckpt.params.values())

    def test_reproducible_history_and_digest(self, small_splits, small_stats):
        plan = generate_combinations(small_splits["train"].catalog, 0.25,
                                     n_base=8, n_total=16,
                                     rng=RngStream(0).split("p"))
        model_cfg = ModelConfig(variant="gru-se", task="classification",
                                num_classes=3, hidden=8, layers=1)
        cfg = TrainConfig(seed=3, max_epochs=4, batch_size=16)

        def run():
            ckpt, history = train(small_splits["train"], small_splits["val"],
                                  plan, model_cfg, cfg, small_stats)
            return checkpoint_digest(ckpt), history

        d1, h1 = run()
        d2, h2 = run()
        assert d1 == d2
        assert h1 == h2


class TestOptimizerSeparation:
    def test_embedding_rows_of_excluded_sensor_never_move(self, small_splits,
                                                          small_stats):
        """Ten steps on batches whose active set excludes one sensor leave
        that sensor's embedding row bit-identical."""
        train_ds = small_splits["train"]
        d = train_ds.catalog.size
        excluded = 3
        active = ActiveSet.from_indices(d, [i for i in range(d) if i != excluded])
        model_cfg = ModelConfig(variant="gru-cm", task="classification",
                                num_classes=3, hidden=8, layers=1)
        model = build_model(model_cfg, train_ds.catalog, RngStream(0).split("init"))
        frozen_row = model.embeddings.vectors.data[excluded].copy()

        masked = remask(train_ds, active)
        opt = DualOptimizer(embed_lr=5e-3, net_lr=1e-3)
        params = model.parameters()
        steps = 0
        rng = RngStream(1)
        while steps < 10:
            for batch in make_batches(masked, None, None, small_stats, 16,
                                      rng.split(("b", steps))):
                with Tape() as tape:
                    loss = batch_loss(model, batch, training=True,
                                      rng=rng.split(("d", steps)))
                    tape.backward(loss, params.values())
                opt.step(params)
                opt.zero_grads(params)
                steps += 1
                if steps >= 10:
                    break
        assert np.array_equal(model.embeddings.vectors.data[excluded], frozen_row)
        assert not np.array_equal(
            model.embeddings.vectors.data[(excluded + 1) % d],
            frozen_row)

    def test_adam_never_touches_embeddings(self, small_splits, small_stats):
        model_cfg = ModelConfig(variant="gru-cm", task="classification",
                                num_classes=3, hidden=8, layers=1)
        model = build_model(model_cfg, small_splits["train"].catalog,
                            RngStream(0).split("init"))
        opt = DualOptimizer()
        params = model.parameters()
        for key, tensor in params.items():
            tensor.grad = np.ones_like(tensor.data)
        opt.step(params)
        assert all(not k.startswith("embeddings.") for k in opt.adam.m)
        assert any(k.startswith("gru.") for k in opt.adam.m)


class TestFirstOrderDescent:
    def test_tiny_combined_step_never_increases_loss(self, small_splits,
                                                     small_stats):
        train_ds = small_splits["train"]
        plan = generate_combinations(train_ds.catalog, 0.25, n_base=8,
                                     n_total=16, rng=RngStream(0).split("p"))
        assignment, _ = training_assignments(len(train_ds.instances), 1, plan, 0)
        model_cfg = ModelConfig(variant="gru-cm", task="classification",
                                num_classes=3, hidden=8, layers=1)
        model = build_model(model_cfg, train_ds.catalog, RngStream(0).split("init"))
        batch = next(iter(make_batches(train_ds, assignment, plan, small_stats,
                                       16, RngStream(5).split("b"))))
        params = model.parameters()
        with Tape() as tape:
            loss0 = batch_loss(model, batch, training=False, rng=None)
            tape.backward(loss0, params.values())
        opt = DualOptimizer(embed_lr=1e-7, net_lr=1e-7)
        opt.step(params)
        loss1 = batch_loss(model, batch, training=False, rng=None)
        assert loss1.item() <= loss0.item() + 1e-9


class TestFineTune:
    def test_zero_epochs_returns_identical_checkpoint(self, trained, small_splits,
                                                      small_stats):
        plan, model_cfg, cfg, ckpt, _ = trained
        d = small_splits["finetune"].catalog.size
        masked = remask(small_splits["finetune"], ActiveSet.from_indices(d, [0, 1, 2]))
        frozen = TrainConfig(seed=0, finetune_epochs=0)
        tuned, history = fine_tune(ckpt, masked, frozen, small_stats)
        assert history == []
        assert checkpoint_digest(tuned) == checkpoint_digest(ckpt)

    def test_mixed_active_sets_rejected(self, trained, small_splits, small_stats):
        plan, model_cfg, cfg, ckpt, _ = trained
        ds = small_splits["finetune"]
        d = ds.catalog.size
        mixed = ds.replace_instances([
            remask(ds, ActiveSet.from_indices(d, [0, 1])).instances[0],
            remask(ds, ActiveSet.from_indices(d, [0, 2])).instances[1],
        ])
        with pytest.raises(ContractError):
            fine_tune(ckpt, mixed, TrainConfig(seed=0), small_stats)

    def test_empty_split_rejected(self, trained, small_splits, small_stats):
        plan, model_cfg, cfg, ckpt, _ = trained
        empty = small_splits["finetune"].replace_instances([])
        with pytest.raises(ContractError):
            fine_tune(ckpt, empty, TrainConfig(seed=0), small_stats)

    def test_inactive_embedding_rows_unchanged_by_fine_tuning(self, trained,
                                                              small_splits,
                                                              small_stats):
        plan, model_cfg, cfg, ckpt, _ = trained
        d = small_splits["finetune"].catalog.size
        keep = [0, 1, 2, 4]
        inactive = [i for i in range(d) if i not in keep]
        masked = remask(small_splits["finetune"], ActiveSet.from_indices(d, keep))
        tuned, history = fine_tune(ckpt, masked, cfg, small_stats)
        assert len(history) > 0
        before = ckpt.params["embeddings.vectors"]
        after = tuned.params["embeddings.vectors"]
        assert np.array_equal(after[inactive], before[inactive])
        assert not np.array_equal(after[keep], before[keep])
