import numpy as np
import pytest

from stressnas.engine import (
    Add,
    AvgPool,
    BatchNorm,
    Concat,
    Conv2D,
    Dense,
    GlobalAvgPool,
    Network,
    ReLU,
    Softmax,
    TrainConfig,
    Zeroize,
    cosine_lr,
    cross_entropy,
    sgd_step,
    softmax,
)
from stressnas.engine.optim import init_velocity
from stressnas.errors import ConfigError, NumericalError

from helpers import gradcheck


def single_layer_net(layer, in_shapes):
    if isinstance(in_shapes, tuple) and not isinstance(in_shapes[0], tuple):
        in_shapes = (in_shapes,)
    net = Network({f"x{i}": s for i, s in enumerate(in_shapes)})
    net.add("node", layer, [f"x{i}" for i in range(len(in_shapes))])
    net.set_output("node")
    net.init_params(0)
    return net


class TestInit:
    def test_same_seed_same_params(self):
        a = single_layer_net(Dense(10, 4), (10,))
        b = single_layer_net(Dense(10, 4), (10,))
        a.init_params(7)
        b.init_params(7)
        assert np.array_equal(a.params["node"]["W"], b.params["node"]["W"])

    def test_he_variance(self):
        samples = []
        for seed in range(12):
            net = single_layer_net(Dense(100, 10), (100,))
            net.init_params(seed)
            samples.append(net.params["node"]["W"].var())
        mean_var = np.mean(samples)
        assert abs(mean_var - 2 / 100) < 0.2 * 2 / 100

    def test_bias_zero(self):
        net = single_layer_net(Conv2D(2, 3, 3), (2, 5, 5))
        assert np.array_equal(net.params["node"]["b"], np.zeros(3))

    def test_batchnorm_init(self):
        net = single_layer_net(BatchNorm(4), (4, 3, 3))
        assert np.array_equal(net.params["node"]["gamma"], np.ones(4))
        assert np.array_equal(net.params["node"]["beta"], np.zeros(4))
        assert np.array_equal(net.state["node"]["var"], np.ones(4))


class TestForward:
    def test_identity_dense(self):
        net = single_layer_net(Dense(3, 3), (3,))
        net.params["node"]["W"] = np.eye(3)
        x = np.array([[1.0, -2.0, 0.5]])
        assert np.array_equal(net.forward({"x0": x}).output, x)

    def test_relu(self):
        net = single_layer_net(ReLU(), (2,))
        out = net.forward({"x0": np.array([[-1.0, 2.0]])}).output
        assert np.array_equal(out, [[0.0, 2.0]])

    def test_softmax_rows_sum_to_one(self):
        net = single_layer_net(Softmax(), (5,))
        x = np.random.default_rng(0).normal(size=(4, 5)) * 10
        out = net.forward({"x0": x}).output
        assert np.max(np.abs(out.sum(axis=1) - 1.0)) < 1e-12

    def test_matches_independent_recompute(self):
        # independent per-node evaluation of the same small graph
        rng = np.random.default_rng(1)
        net = Network({"x": (3,)})
        net.add("fc1", Dense(3, 4), "x")
        net.add("r", ReLU(), "fc1")
        net.add("fc2", Dense(4, 2), "r")
        net.set_output("fc2")
        net.init_params(3)
        x = rng.normal(size=(5, 3))
        got = net.forward({"x": x}).output
        p = net.params
        h = x @ p["fc1"]["W"] + p["fc1"]["b"]
        h = np.where(h > 0, h, 0.0)
        want = h @ p["fc2"]["W"] + p["fc2"]["b"]
        assert np.max(np.abs(got - want)) < 1e-12

    def test_shape_mismatch_names_node(self):
        net = Network({"x": (3,)})
        with pytest.raises(ConfigError, match="bad"):
            net.add("bad", Dense(4, 2), "x")

    def test_nan_input_rejected(self):
        net = single_layer_net(Dense(2, 2), (2,))
        with pytest.raises(NumericalError, match="node"):
            net.forward({"x0": np.array([[np.nan, 1.0]])})

    def test_zeroize_emits_zeros(self):
        net = single_layer_net(Zeroize(), (2, 3, 3))
        x = np.random.default_rng(2).normal(size=(2, 2, 3, 3))
        assert np.array_equal(net.forward({"x0": x}).output, np.zeros_like(x))


class TestBatchNormModes:
    def test_training_uses_batch_stats(self):
        net = single_layer_net(BatchNorm(2), (2, 2, 2))
        rng = np.random.default_rng(3)
        x = rng.normal(size=(8, 2, 2, 2)) * 3 + 1
        y = net.forward({"x0": x}, training=True).output
        assert np.max(np.abs(y.mean(axis=(0, 2, 3)))) < 1e-12
        assert np.max(np.abs(y.var(axis=(0, 2, 3)) - 1.0)) < 1e-3

    def test_eval_uses_running_stats(self):
        net = single_layer_net(BatchNorm(2), (2, 2, 2))
        rng = np.random.default_rng(4)
        x = rng.normal(size=(8, 2, 2, 2))
        # before any training-mode pass, running stats are (0, 1)
        y = net.forward({"x0": x}, training=False).output
        assert np.max(np.abs(y - x / np.sqrt(1 + 1e-5))) < 1e-12
        net.forward({"x0": x}, training=True)
        after = net.state["node"]["mean"].copy()
        assert np.max(np.abs(after - 0.1 * x.mean(axis=(0, 2, 3)))) < 1e-12


LAYER_CASES = [
    ("dense", Dense(4, 3), ((4,),)),
    ("conv_same", Conv2D(2, 3, 3, stride=1, padding="same"), ((2, 5, 4),)),
    ("conv_valid", Conv2D(2, 3, 3, stride=1, padding="valid"), ((2, 5, 4),)),
    ("conv_stride2", Conv2D(2, 3, 3, stride=2, padding="same"), ((2, 5, 4),)),
    ("conv_1x1", Conv2D(3, 2, 1), ((3, 4, 3),)),
    ("batchnorm", BatchNorm(3), ((3, 4, 3),)),
    ("batchnorm_vec", BatchNorm(5), ((5,),)),
    ("relu", ReLU(), ((3, 4, 3),)),
    ("avgpool_same", AvgPool(3, stride=1, padding="same"), ((2, 5, 4),)),
    ("avgpool_stride2", AvgPool(2, stride=2, padding="same"), ((2, 5, 4),)),
    ("gap", GlobalAvgPool(), ((3, 4, 3),)),
    ("softmax", Softmax(), ((4,),)),
    ("add", Add(), ((2, 3, 3), (2, 3, 3))),
    ("concat", Concat(), ((3,), (4,))),
    ("zeroize", Zeroize(), ((2, 3, 3),)),
]


class TestGradients:
    @pytest.mark.parametrize("name,layer,shapes", LAYER_CASES, ids=[c[0] for c in LAYER_CASES])
    def test_every_layer_type(self, name, layer, shapes):
        net = single_layer_net(layer, shapes)
        rng = np.random.default_rng(17)
        inputs = {}
        for i, s in enumerate(shapes):
            x = rng.normal(size=(3, *s))
            # keep ReLU away from its kink so differences stay two-sided
            if name == "relu":
                x = x + 0.2 * np.sign(x)
            inputs[f"x{i}"] = x
        assert gradcheck(net, inputs) < 1e-4

    def test_dense_matches_closed_form(self):
        # quadratic loss 0.5*||Wx+b||^2 on zero target: dW = x^T y, db = y
        net = single_layer_net(Dense(3, 2), (3,))
        rng = np.random.default_rng(5)
        x = rng.normal(size=(4, 3))
        ctx = net.forward({"x0": x})
        y = ctx.output
        pg, ig = net.backward(ctx, y)
        W = net.params["node"]["W"]
        assert np.max(np.abs(pg["node"]["W"] - x.T @ y)) < 1e-12
        assert np.max(np.abs(pg["node"]["b"] - y.sum(axis=0))) < 1e-12
        assert np.max(np.abs(ig["x0"] - y @ W.T)) < 1e-12

    def test_zeroize_blocks_gradient(self):
        net = single_layer_net(Zeroize(), (2, 3, 3))
        x = np.ones((2, 2, 3, 3))
        ctx = net.forward({"x0": x})
        _, ig = net.backward(ctx, np.ones_like(ctx.output))
        assert np.array_equal(ig["x0"], np.zeros_like(x))

    def test_backward_without_forward_errors(self):
        net = single_layer_net(Dense(2, 2), (2,))
        with pytest.raises(ConfigError):
            net.backward(None, np.ones((1, 2)))

    def test_multi_consumer_accumulation(self):
        # y = x + x doubles the gradient
        net = Network({"x": (3,)})
        net.add("a", Add(), ["x", "x"])
        net.set_output("a")
        net.init_params(0)
        x = np.ones((2, 3))
        ctx = net.forward({"x": x})
        _, ig = net.backward(ctx, np.ones((2, 3)))
        assert np.array_equal(ig["x"], 2 * np.ones((2, 3)))


class TestCrossEntropy:
    def test_uniform_logits(self):
        loss, _ = cross_entropy(np.zeros((4, 3)), np.array([0, 1, 2, 0]))
        assert abs(loss - np.log(3)) < 1e-12

    def test_confident_correct(self):
        logits = np.array([[100.0, 0.0, 0.0]])
        loss, _ = cross_entropy(logits, np.array([0]))
        assert loss < 1e-12

    def test_matches_brute_force(self):
        rng = np.random.default_rng(6)
        logits = rng.normal(size=(8, 5)) * 4
        labels = rng.integers(0, 5, size=8)
        loss, grad = cross_entropy(logits, labels)
        probs = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
        want = -np.mean(np.log(probs[np.arange(8), labels]))
        assert abs(loss - want) < 1e-10
        onehot = np.zeros_like(logits)
        onehot[np.arange(8), labels] = 1
        assert np.max(np.abs(grad - (probs - onehot) / 8)) < 1e-10

    def test_gradient_by_finite_differences(self):
        rng = np.random.default_rng(7)
        logits = rng.normal(size=(3, 4))
        labels = np.array([1, 3, 0])
        _, grad = cross_entropy(logits, labels)
        h = 1e-6
        for idx in np.ndindex(*logits.shape):
            orig = logits[idx]
            logits[idx] = orig + h
            fp, _ = cross_entropy(logits, labels)
            logits[idx] = orig - h
            fm, _ = cross_entropy(logits, labels)
            logits[idx] = orig
            assert abs((fp - fm) / (2 * h) - grad[idx]) < 1e-8

    def test_label_out_of_range(self):
        with pytest.raises(ConfigError):
            cross_entropy(np.zeros((2, 3)), np.array([0, 3]))


class TestSGD:
    def _params(self, value):
        return {"n": {"w": np.array([value])}}

    def test_zero_grad_zero_wd_is_noop(self):
        cfg = TrainConfig(seed=0, lr=0.1, weight_decay=0.0, epochs=10)
        params = self._params(2.0)
        vel = init_velocity(params)
        sgd_step(params, self._params(0.0), vel, cfg, epoch=0)
        assert params["n"]["w"][0] == 2.0

    def test_quadratic_descent_is_monotone(self):
        # minimize 0.5 * w^2; lr small enough that heavy-ball momentum has
        # real contraction roots, so the loss must fall every step
        cfg = TrainConfig(seed=0, lr=0.002, momentum=0.9, weight_decay=0.0,
                          epochs=1000)
        params = self._params(3.0)
        vel = init_velocity(params)
        start = prev = 0.5 * params["n"]["w"][0] ** 2
        for step in range(100):
            g = {"n": {"w": params["n"]["w"].copy()}}
            sgd_step(params, g, vel, cfg, epoch=0)
            cur = 0.5 * params["n"]["w"][0] ** 2
            assert cur <= prev + 1e-15
            prev = cur
        assert prev < start / 10

    def test_cosine_schedule_endpoints(self):
        assert cosine_lr(0.01, 0, 50) == 0.01
        assert abs(cosine_lr(0.01, 50, 50)) < 1e-18
        assert abs(cosine_lr(0.01, 25, 50) - 0.005) < 1e-12

    def test_weight_decay_pulls_to_zero(self):
        cfg = TrainConfig(seed=0, lr=0.1, momentum=0.0, weight_decay=0.5, epochs=10)
        params = self._params(1.0)
        vel = init_velocity(params)
        sgd_step(params, self._params(0.0), vel, cfg, epoch=0)
        assert abs(params["n"]["w"][0] - 0.95) < 1e-12


class TestShapeAlgebra:
    def test_same_padding_preserves_dims(self):
        net = single_layer_net(Conv2D(2, 4, 3, stride=1, padding="same"), (2, 9, 7))
        assert net.out_shape == (4, 9, 7)

    def test_gap_collapses_spatial(self):
        net = single_layer_net(GlobalAvgPool(), (5, 6, 7))
        assert net.out_shape == (5,)
        y = net.forward({"x0": np.ones((2, 5, 6, 7))}).output
        assert y.shape == (2, 5)

    def test_stride2_halves_rounded_up(self):
        net = single_layer_net(Conv2D(1, 1, 3, stride=2, padding="same"), (1, 27, 16))
        assert net.out_shape == (1, 14, 8)


class TestTraining:
    def test_separable_toy_converges(self):
        rng = np.random.default_rng(8)
        n = 128
        labels = rng.integers(0, 2, size=n)
        x = rng.normal(size=(n, 2)) * 0.3 + np.where(labels[:, None] == 1, 2.0, -2.0)
        net = Network({"x": (2,)})
        net.add("fc1", Dense(2, 8), "x")
        net.add("r", ReLU(), "fc1")
        net.add("fc2", Dense(8, 2), "r")
        net.set_output("fc2")
        net.init_params(1)
        cfg = TrainConfig(seed=0, lr=0.1, epochs=10**9, batch_size=n,
                          weight_decay=0.0)
        vel = init_velocity(net.params)
        loss = None
        for step in range(500):
            ctx = net.forward({"x": x}, training=True)
            loss, gl = cross_entropy(ctx.output, labels)
            if loss < 0.01:
                break
            pg, _ = net.backward(ctx, gl)
            sgd_step(net.params, pg, vel, cfg, epoch=0)
        assert loss < 0.01

    def test_fixed_seed_training_is_bit_identical(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(32, 3))
        labels = rng.integers(0, 2, size=32)

        def run():
            net = Network({"x": (3,)})
            net.add("fc", Dense(3, 2), "x")
            net.set_output("fc")
            net.init_params(5)
            cfg = TrainConfig(seed=3, lr=0.05, epochs=10, batch_size=8)
            vel = init_velocity(net.params)
            for epoch in range(cfg.epochs):
                order = np.random.default_rng(
                    np.random.SeedSequence([cfg.seed, epoch])
                ).permutation(32)
                for s in range(0, 32, 8):
                    sel = order[s : s + 8]
                    ctx = net.forward({"x": x[sel]}, training=True)
                    _, gl = cross_entropy(ctx.output, labels[sel])
                    pg, _ = net.backward(ctx, gl)
                    sgd_step(net.params, pg, vel, cfg, epoch)
            return net.params["fc"]["W"].copy()

        assert np.array_equal(run(), run())


class TestNetworkValidation:
    def test_dangling_node_rejected(self):
        net = Network({"x": (3,)})
        net.add("a", Dense(3, 2), "x")
        net.add("orphan", Dense(3, 2), "x")
        with pytest.raises(ConfigError, match="orphan"):
            net.set_output("a")

    def test_unused_input_rejected(self):
        net = Network({"x": (3,), "y": (3,)})
        net.add("a", Dense(3, 2), "x")
        with pytest.raises(ConfigError, match="y"):
            net.set_output("a")

    def test_duplicate_node_name(self):
        net = Network({"x": (3,)})
        net.add("a", Dense(3, 3), "x")
        with pytest.raises(ConfigError):
            net.add("a", Dense(3, 3), "x")

    def test_checkpoint_roundtrip(self, tmp_path):
        from stressnas import io

        net = single_layer_net(Conv2D(2, 3, 3), (2, 4, 4))
        net.init_params(11)
        flat = net.get_flat()
        io.save_tensors(str(tmp_path / "ckpt"), flat)
        loaded = io.load_tensors(str(tmp_path / "ckpt"))
        for k, v in flat.items():
            assert np.array_equal(loaded[k], v), k
