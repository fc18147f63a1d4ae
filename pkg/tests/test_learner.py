import numpy as np
import pytest

from fedbd.corpus import Dataset, LabeledInstance
from fedbd.errors import EmptyDataset, ShapeMismatch
from fedbd.features import FeatureVector, FeaturizerConfig, featurize_texts
from fedbd.learner import (
    ModelParams,
    TrainConfig,
    dataset_loss,
    evaluate_acc,
    evaluate_asr,
    forward,
    init_params,
    loss_and_grad,
    params_digest,
    params_equal,
    params_from_bytes,
    params_to_bytes,
    train,
    train_on_matrix,
)
from fedbd.tasks import task_spec
from fedbd import generate_synthetic

FEAT = FeaturizerConfig(dim=256)


def one_hot_fv(dim, index, value=1.0):
    return FeatureVector(
        dim=dim, indices=np.array([index], dtype=np.int64), values=np.array([value])
    )


def toy_separable(n=40):
    # two one-hot-ish vocabularies, trivially linearly separable
    insts = []
    for i in range(n):
        if i % 2 == 0:
            insts.append(LabeledInstance("aardvark anchor", 0))
        else:
            insts.append(LabeledInstance("zebra zephyr", 1))
    return Dataset(insts, num_classes=2)


class TestInitParams:
    def test_seeded_determinism(self):
        a = init_params("linear", 256, 2, seed=5)
        b = init_params("linear", 256, 2, seed=5)
        assert params_equal(a, b)
        assert not params_equal(a, init_params("linear", 256, 2, seed=6))

    def test_biases_zero_and_shapes(self):
        p = init_params("linear", 4096, 2, seed=0)
        assert p.layers[0].shape == (2, 4096)
        assert np.all(p.layers[1] == 0.0)
        m = init_params("mlp", 256, 3, hidden=16, seed=0)
        assert [l.shape for l in m.layers] == [(16, 256), (16,), (3, 16), (3,)]
        assert np.all(m.layers[1] == 0.0) and np.all(m.layers[3] == 0.0)

    def test_weight_range_scaled_by_fan_in(self):
        p = init_params("linear", 1024, 4, seed=1)
        bound = 1.0 / np.sqrt(1024)
        assert np.abs(p.layers[0]).max() <= bound

    def test_mlp_needs_hidden(self):
        with pytest.raises(ValueError):
            init_params("mlp", 256, 2, hidden=0)


class TestForward:
    def test_zero_params_give_uniform(self):
        p = ModelParams("linear", [np.zeros((4, 8)), np.zeros(4)])
        probs = forward(p, one_hot_fv(8, 3))
        assert np.allclose(probs, 0.25)

    def test_probabilities_sum_to_one(self):
        p = init_params("mlp", 256, 5, hidden=8, seed=3)
        rng = np.random.default_rng(0)
        for _ in range(20):
            idx = np.sort(rng.choice(256, size=6, replace=False))
            vals = rng.random(6)
            vals /= np.linalg.norm(vals)
            probs = forward(p, FeatureVector(256, idx.astype(np.int64), vals))
            assert abs(probs.sum() - 1.0) < 1e-9
            assert np.all(probs >= 0)

    def test_hand_computed_softmax(self):
        p = ModelParams("linear", [np.eye(2), np.zeros(2)])
        probs = forward(p, one_hot_fv(2, 0))
        assert abs(probs[0] - 0.7311) < 1e-4
        assert abs(probs[1] - 0.2689) < 1e-4

    def test_shape_mismatch(self):
        p = init_params("linear", 256, 2, seed=0)
        with pytest.raises(ShapeMismatch):
            forward(p, one_hot_fv(512, 1))


class TestTrain:
    def test_zero_learning_rate_is_identity(self):
        data = toy_separable()
        p = init_params("linear", FEAT.dim, 2, seed=2)
        out = train(p, data, FEAT, TrainConfig(learning_rate=0.0, epochs=3, seed=0))
        assert params_equal(out, p)

    def test_input_params_unmodified(self):
        data = toy_separable()
        p = init_params("linear", FEAT.dim, 2, seed=2)
        snapshot = p.copy()
        train(p, data, FEAT, TrainConfig(learning_rate=0.5, epochs=2, seed=0))
        assert params_equal(p, snapshot)

    def test_separable_set_reaches_full_train_accuracy(self):
        data = toy_separable()
        p = init_params("linear", FEAT.dim, 2, seed=2)
        out = train(p, data, FEAT, TrainConfig(learning_rate=0.5, epochs=50, seed=1))
        assert evaluate_acc(out, data, FEAT) == 1.0

    def test_loss_decreases_after_first_epoch(self):
        data = generate_synthetic(task_spec("sentiment", 200, seed=5))
        X = featurize_texts(data.texts(), FEAT)
        y = np.array(data.labels())
        p = init_params("linear", FEAT.dim, 2, seed=0)
        before = dataset_loss(p, X, y)
        after = dataset_loss(
            train_on_matrix(p, X, y, TrainConfig(learning_rate=0.5, epochs=1, seed=0)), X, y
        )
        assert after < before

    def test_bit_reproducible(self):
        data = generate_synthetic(task_spec("sentiment", 100, seed=9))
        p = init_params("mlp", FEAT.dim, 2, hidden=12, seed=4)
        cfg = TrainConfig(learning_rate=0.3, epochs=3, seed=11)
        a = train(p, data, FEAT, cfg)
        b = train(p, data, FEAT, cfg)
        assert params_to_bytes(a) == params_to_bytes(b)

    def test_empty_dataset_rejected(self):
        p = init_params("linear", FEAT.dim, 2, seed=0)
        with pytest.raises(EmptyDataset):
            train(p, Dataset([], num_classes=2), FEAT, TrainConfig(learning_rate=0.1, epochs=1))

    def test_memorization_never_raises_final_loss(self):
        data = generate_synthetic(task_spec("sentiment", 120, seed=21))
        X = featurize_texts(data.texts(), FEAT)
        y = np.array(data.labels())
        p = init_params("linear", FEAT.dim, 2, seed=3)
        initial = dataset_loss(p, X, y)
        out = train_on_matrix(p, X, y, TrainConfig(learning_rate=0.5, epochs=200, seed=3))
        assert dataset_loss(out, X, y) <= initial


class TestGradientCheck:
    @pytest.mark.parametrize("arch,hidden", [("linear", 0), ("mlp", 6)])
    def test_matches_central_differences(self, arch, hidden):
        rng = np.random.default_rng(42)
        dim, classes, n = 12, 3, 5
        for _ in range(4):
            p = init_params(arch, dim, classes, hidden=hidden, seed=int(rng.integers(1 << 30)))
            X = rng.normal(size=(n, dim))
            y = rng.integers(0, classes, size=n)
            _, grads = loss_and_grad(p, X, y)
            h = 1e-5
            for li, layer in enumerate(p.layers):
                fd = np.zeros_like(layer)
                it = np.nditer(layer, flags=["multi_index"])
                while not it.finished:
                    ix = it.multi_index
                    orig = layer[ix]
                    layer[ix] = orig + h
                    lp, _ = loss_and_grad(p, X, y)
                    layer[ix] = orig - h
                    lm, _ = loss_and_grad(p, X, y)
                    layer[ix] = orig
                    fd[ix] = (lp - lm) / (2 * h)
                    it.iternext()
                num = np.linalg.norm(grads[li] - fd)
                den = np.linalg.norm(grads[li]) + np.linalg.norm(fd)
                assert num / max(den, 1e-12) < 1e-4


class TestEvaluate:
    def test_constant_model_on_balanced_set(self):
        # strong class-0 bias makes every prediction class 0
        p = ModelParams("linear", [np.zeros((2, FEAT.dim)), np.array([10.0, 0.0])])
        data = toy_separable(50)
        assert evaluate_acc(p, data, FEAT) == 0.5

    def test_perfect_model(self):
        data = toy_separable(30)
        p = init_params("linear", FEAT.dim, 2, seed=2)
        fit = train(p, data, FEAT, TrainConfig(learning_rate=0.5, epochs=50, seed=1))
        assert evaluate_acc(fit, data, FEAT) == 1.0

    def test_zero_params_tie_break_to_class_zero(self):
        p = ModelParams("linear", [np.zeros((3, FEAT.dim)), np.zeros(3)])
        insts = [LabeledInstance("alpha beta", i % 3) for i in range(9)]
        data = Dataset(insts, num_classes=3)
        assert evaluate_acc(p, data, FEAT) == pytest.approx(3 / 9)
        assert evaluate_asr(p, data, 0, FEAT) == 1.0

    def test_asr_constant_models(self):
        data = toy_separable(20)
        always_target = ModelParams("linear", [np.zeros((2, FEAT.dim)), np.array([5.0, 0.0])])
        never_target = ModelParams("linear", [np.zeros((2, FEAT.dim)), np.array([0.0, 5.0])])
        assert evaluate_asr(always_target, data, 0, FEAT) == 1.0
        assert evaluate_asr(never_target, data, 0, FEAT) == 0.0

    def test_empty_rejected(self):
        p = init_params("linear", FEAT.dim, 2, seed=0)
        with pytest.raises(EmptyDataset):
            evaluate_acc(p, Dataset([], num_classes=2), FEAT)
        with pytest.raises(EmptyDataset):
            evaluate_asr(p, Dataset([], num_classes=2), 0, FEAT)


class TestSerialization:
    @pytest.mark.parametrize("arch,hidden", [("linear", 0), ("mlp", 9)])
    def test_lossless_round_trip(self, arch, hidden):
        p = init_params(arch, 512, 4, hidden=hidden, seed=8)
        out = params_from_bytes(params_to_bytes(p))
        assert out.arch == p.arch
        assert params_equal(out, p)

    def test_digest_stable_and_sensitive(self):
        p = init_params("linear", 256, 2, seed=1)
        assert params_digest(p) == params_digest(p.copy())
        assert len(params_digest(p)) == 16
        q = p.copy()
        q.layers[1][0] = 1.0
        assert params_digest(q) != params_digest(p)

    def test_bad_magic_rejected(self):
        blob = params_to_bytes(init_params("linear", 256, 2, seed=1))
        with pytest.raises(ValueError):
            params_from_bytes(b"XXXX" + blob[4:])

    def test_truncated_blob_rejected(self):
        blob = params_to_bytes(init_params("linear", 256, 2, seed=1))
        with pytest.raises(ValueError):
            params_from_bytes(blob + b"\x00" * 8)
