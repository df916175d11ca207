import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from tel import (
    IGNORE,
    SIGMA_HIGH,
    ArgumentError,
    DenseTensor,
    LabelMap,
    LossConfig,
    TrainConfig,
    ValidationError,
    build_low_stage,
    checkerboard_fixture,
    descriptors,
    evaluate,
    forward,
    init_model,
    load_checkpoint,
    mst_tree,
    run_training,
    sample_point_annotation,
    save_checkpoint,
    total_loss,
    train_step,
    transmittances,
    two_region_fixture,
    weighted_grid,
    write_metrics_csv,
)


def small_problem(size=4):
    image, full = two_region_fixture(size=size, seed=0)
    sparse = sample_point_annotation(full, 1, seed=0)
    return image, full, sparse


def get_vec(model):
    return np.concatenate([p.ravel() for p in model.params()])


def set_vec(model, vec):
    offset = 0
    for p in model.params():
        p[...] = vec[offset:offset + p.size].reshape(p.shape)
        offset += p.size


class TestModel:
    def test_parameter_count(self):
        assert init_model(3).param_count == 275
        assert init_model(2).param_count == 80 + 16 + 32 + 2 + 128

    def test_init_is_seeded_and_bounded(self):
        a = get_vec(init_model(3, seed=11))
        b = get_vec(init_model(3, seed=11))
        c = get_vec(init_model(3, seed=12))
        assert_array_equal(a, b)
        assert np.any(a != c)
        assert np.all(np.abs(a) <= 0.1)

    def test_bad_dims_rejected(self):
        with pytest.raises(ArgumentError):
            init_model(1)
        with pytest.raises(ArgumentError):
            init_model(2, hidden=0)

    def test_zero_parameters_give_uniform_probabilities(self):
        image, _, _ = small_problem()
        model = init_model(3, seed=0)
        set_vec(model, np.zeros(model.param_count))
        probs, feats = forward(model, image)
        assert_allclose(probs, 1.0 / 3.0)
        assert_allclose(feats, 0.0)

    def test_probabilities_form_a_distribution(self):
        image, _, _ = small_problem(8)
        probs, _ = forward(init_model(2, seed=1), image)
        assert probs.shape == (2, 64)
        assert np.all(probs > 0.0)
        assert_allclose(probs.sum(axis=0), 1.0, rtol=1e-12)


class TestDescriptors:
    def test_layout_and_coordinates(self):
        data = np.zeros((3, 2, 4))
        data[0] = 0.5
        d = descriptors(DenseTensor(3, 2, 4, data))
        assert d.shape == (5, 8)
        assert_allclose(d[0], 0.5)
        # Pixel (row 1, col 2): x/width then y/height.
        assert_allclose(d[3, 1 * 4 + 2], 2.0 / 4.0)
        assert_allclose(d[4, 1 * 4 + 2], 1.0 / 2.0)

    def test_gray_images_repeat_their_channel(self):
        d = descriptors(np.full((1, 3, 3), 0.25))
        assert_allclose(d[:3], 0.25)

    def test_two_channel_image_rejected(self):
        with pytest.raises(ValidationError):
            descriptors(np.zeros((2, 3, 3)))


class TestEvaluate:
    def test_constant_prediction_on_balanced_map(self):
        _, full, _ = small_problem(8)
        probs = np.zeros((2, 64))
        probs[0] = 1.0
        ev = evaluate(probs, full)
        assert ev.valid
        assert_allclose(ev.pixel_acc, 0.5)
        assert_allclose(ev.miou, 0.25)

    def test_perfect_prediction(self):
        _, full, _ = small_problem(8)
        probs = np.zeros((2, 64))
        gt = full.labels.ravel()
        probs[gt, np.arange(64)] = 1.0
        ev = evaluate(probs, full)
        assert ev.pixel_acc == 1.0
        assert ev.miou == 1.0

    def test_empty_ground_truth_flagged(self):
        empty = LabelMap(2, 2, 2, np.full((2, 2), IGNORE, dtype=np.uint8))
        ev = evaluate(np.full((2, 4), 0.5), empty)
        assert not ev.valid


class TestTrainStep:
    def test_parameter_gradients_match_finite_differences(self):
        """Descent direction extracted from one unit-rate update.

        The high-stage tree topology is held fixed by the analytic
        gradient; the seed keeps finite differences away from tree
        reorderings and from the l1 kink.
        """
        image, full, sparse = small_problem(4)
        config = TrainConfig(steps=1, learning_rate=1.0,
                             loss=LossConfig(sigma_low=0.2))
        base = get_vec(init_model(sparse.num_classes, seed=0))

        def loss_at(vec):
            m = init_model(sparse.num_classes, seed=0)
            set_vec(m, vec)
            value, _, _ = train_step(m, image, sparse, config)
            return value

        model = init_model(sparse.num_classes, seed=0)
        probs, feats = forward(model, image)
        low_tree, low_trans = build_low_stage(image, config.loss)
        high_tree = mst_tree(weighted_grid(feats.reshape(-1, 4, 4)))
        result = total_loss(probs.reshape(-1, 4, 4), sparse, low_tree,
                            low_trans, high_tree,
                            transmittances(high_tree, SIGMA_HIGH),
                            config.loss)
        margin = np.abs(probs.reshape(-1, 4, 4)
                        - result.pseudo[0][1]).min()
        assert margin > 1e-3

        stepped = init_model(sparse.num_classes, seed=0)
        train_step(stepped, image, sparse, config)
        grad = base - get_vec(stepped)

        h = 1e-5
        rng = np.random.default_rng(2)
        for idx in rng.choice(base.size, size=60, replace=False):
            bump = base.copy()
            bump[idx] += h
            up = loss_at(bump)
            bump[idx] -= 2 * h
            dn = loss_at(bump)
            fd = (up - dn) / (2 * h)
            gap = abs(fd - grad[idx]) / max(abs(fd), abs(grad[idx]), 1e-3)
            assert gap < 1e-3, (idx, fd, grad[idx])

    def test_mismatched_labels_rejected(self):
        image, _, _ = small_problem(4)
        bad = LabelMap(3, 3, 2, np.zeros((3, 3), dtype=np.uint8))
        with pytest.raises(ValidationError, match="pixels"):
            train_step(init_model(2), image, bad, TrainConfig())

    def test_metrics_without_ground_truth_skip_accuracies(self):
        image, _, sparse = small_problem(4)
        _, _, metrics = train_step(init_model(2), image, sparse, TrainConfig())
        assert metrics.pixel_acc is None
        assert metrics.pseudo_acc is None
        assert np.isfinite(metrics.total)


class TestRunTraining:
    def test_deterministic(self):
        image, full, sparse = small_problem(8)
        config = TrainConfig(steps=5, learning_rate=0.5)
        model_a, hist_a = run_training(image, sparse, config, full)
        model_b, hist_b = run_training(image, sparse, config, full)
        assert_array_equal(get_vec(model_a), get_vec(model_b))
        assert [m.total for m in hist_a] == [m.total for m in hist_b]

    def test_losses_stay_finite_at_moderate_rate(self):
        image, full, sparse = small_problem(16)
        config = TrainConfig(steps=120, learning_rate=0.5, eval_interval=30)
        _, history = run_training(image, sparse, config, full)
        for m in history:
            assert np.isfinite(m.seg) and np.isfinite(m.tree)
            assert np.isfinite(m.total)

    def test_eval_interval_selects_steps(self):
        image, _, sparse = small_problem(8)
        config = TrainConfig(steps=7, learning_rate=0.1, eval_interval=3)
        _, history = run_training(image, sparse, config)
        assert [m.step for m in history] == [3, 6, 7]

    def test_momentum_changes_the_trajectory(self):
        image, _, sparse = small_problem(8)
        plain, _ = run_training(image, sparse,
                                TrainConfig(steps=4, learning_rate=0.5))
        heavy, _ = run_training(
            image, sparse,
            TrainConfig(steps=4, learning_rate=0.5, momentum=0.8))
        assert np.any(get_vec(plain) != get_vec(heavy))
        assert np.isfinite(get_vec(heavy)).all()

    def test_initial_pseudo_labels_collapse_to_majority(self):
        """At init the feature tree is nearly unweighted, so the cascade
        output is close to a global average on each color region."""
        image, full, sparse = small_problem(32)
        config = TrainConfig(steps=1, learning_rate=2.0)
        _, history = run_training(image, sparse, config, full)
        first = history[0]
        assert first.pseudo_acc == pytest.approx(0.5, abs=0.02)
        assert first.pred_acc < 0.1

    def test_config_validation(self):
        with pytest.raises(ArgumentError):
            TrainConfig(steps=0)
        with pytest.raises(ArgumentError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ArgumentError):
            TrainConfig(momentum=1.0)
        with pytest.raises(ArgumentError):
            TrainConfig(eval_interval=0)


class TestMetricsCsv:
    def test_header_and_rows(self, tmp_path):
        image, full, sparse = small_problem(8)
        config = TrainConfig(steps=3, learning_rate=0.5)
        _, history = run_training(image, sparse, config, full)
        path = tmp_path / "metrics.csv"
        write_metrics_csv(history, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "step,L_seg,L_tree,pixel_acc,mIoU,pseudo_label_acc"
        assert len(lines) == 4
        first = lines[1].split(",")
        assert first[0] == "1"
        assert len(first) == 6
        float(first[1]), float(first[2])

    def test_missing_accuracies_leave_empty_cells(self, tmp_path):
        image, _, sparse = small_problem(8)
        _, history = run_training(image, sparse,
                                  TrainConfig(steps=2, learning_rate=0.5))
        path = tmp_path / "metrics.csv"
        write_metrics_csv(history, path)
        row = path.read_text().strip().split("\n")[1]
        assert row.endswith(",,,")


class TestCheckpoint:
    def test_round_trip_preserves_predictions(self, tmp_path):
        image, full, sparse = small_problem(8)
        model, _ = run_training(image, sparse,
                                TrainConfig(steps=4, learning_rate=0.5))
        path = tmp_path / "model.telt"
        save_checkpoint(model, path)
        back = load_checkpoint(path)
        assert back.param_count == model.param_count
        assert_allclose(get_vec(back), get_vec(model), rtol=1e-6, atol=1e-7)
        p_orig, _ = forward(model, image)
        p_back, _ = forward(back, image)
        assert_allclose(p_back, p_orig, rtol=1e-5, atol=1e-7)

    def test_truncated_checkpoint_rejected(self, tmp_path):
        from tel import save_tensor

        path = tmp_path / "bad.telt"
        payload = np.concatenate([[2.0, 16.0, 8.0], np.zeros(10)])
        save_tensor(DenseTensor.from_array(payload.reshape(1, 1, -1)), path)
        with pytest.raises(ValidationError):
            load_checkpoint(path)


class TestFixtures:
    def test_two_region_layout(self):
        image, full = two_region_fixture(size=16, noise=0.0)
        assert image.data.shape == (3, 16, 16)
        assert_allclose(image.data[0, :, :8], 0.9)
        assert_allclose(image.data[2, :, 8:], 0.9)
        assert_array_equal(np.unique(full.labels), [0, 1])
        assert_array_equal(full.labels[:, :8], 0)
        assert_array_equal(full.labels[:, 8:], 1)

    def test_noise_is_seeded_and_clipped(self):
        a, _ = two_region_fixture(size=8, seed=3)
        b, _ = two_region_fixture(size=8, seed=3)
        assert_array_equal(a.data, b.data)
        assert a.data.min() >= 0.0
        assert a.data.max() <= 1.0

    def test_checkerboard_layout(self):
        image, full = checkerboard_fixture(size=8, tiles=2, noise=0.0)
        assert_array_equal(full.labels[:4, :4], 0)
        assert_array_equal(full.labels[:4, 4:], 1)
        assert_array_equal(full.labels[4:, :4], 1)
        with pytest.raises(ArgumentError):
            checkerboard_fixture(size=10, tiles=3)
