import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motif import surrogate
from motif.surrogate import MlpSpec, Normalizer, TrainConfig
from support import finite_difference_check, random_model


class TestSpec:
    def test_param_count(self):
        assert MlpSpec(6, (16,), 24).n_params == 7 * 16 + 17 * 24

    def test_bad_activation(self):
        with pytest.raises(surrogate.SurrogateError):
            MlpSpec(6, (4,), 24, "sigmoid")

    def test_width_for_budget(self):
        w = surrogate.width_for_budget(240_000, 6, 2400, 3)
        assert MlpSpec(6, (w,) * 3, 2400).n_params <= 240_000 < MlpSpec(6, (w + 1,) * 3, 2400).n_params


class TestForward:
    def test_identity_network(self):
        spec = MlpSpec(5, (), 5)
        model = surrogate.MlpModel(spec, [np.eye(5)], [np.zeros(5)], Normalizer.identity(5, 5))
        x = np.arange(5.0)
        np.testing.assert_array_equal(model.forward(x), x)

    def test_relu_piecewise_linear(self):
        rng = np.random.default_rng(0)
        spec = MlpSpec(4, (8, 8), 3)
        weights = [np.abs(rng.normal(size=(a, b))) for a, b in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:])]
        biases = [np.zeros(b) for b in spec.layer_sizes[1:]]
        model = surrogate.MlpModel(spec, weights, biases, Normalizer.identity(4, 3))
        x = rng.uniform(0.5, 1.0, size=4)
        step = np.array([1e-3, 0, 0, 0])
        d1 = model(x + step) - model(x)
        d2 = model(x + 2 * step) - model(x)
        np.testing.assert_allclose(d2, 2 * d1, rtol=1e-9)

    def test_deterministic_init(self):
        spec = MlpSpec(6, (16, 16), 24)
        a, b = surrogate.init_model(spec, 3), surrogate.init_model(spec, 3)
        x = np.ones(6)
        assert np.array_equal(a(x), b(x))

    def test_dimension_mismatch(self):
        model = surrogate.init_model(MlpSpec(6, (4,), 24), 0)
        with pytest.raises(surrogate.SurrogateError):
            model(np.ones(5))

    def test_init_is_float32_exact(self):
        model = surrogate.init_model(MlpSpec(6, (16,), 24), 0)
        for p in model.params():
            assert np.array_equal(p, p.astype(np.float32))


class TestLoss:
    def test_zero(self):
        y = np.random.default_rng(0).normal(size=(3, 24))
        assert surrogate.loss_freq(y, y, 2) == 0.0

    def test_uniform_error(self):
        y = np.zeros((2, 120))
        assert surrogate.loss_freq(y + 0.02, y, 10) == pytest.approx(0.02)

    def test_single_channel(self):
        y = np.zeros(120)
        p = y.copy()
        p[30:40] = 0.03  # channel 4 of 12, all 10 frequencies
        assert surrogate.loss_freq(p, y, 10) == pytest.approx(0.0025)

    def test_length_mismatch(self):
        with pytest.raises(surrogate.SurrogateError):
            surrogate.loss_freq(np.zeros(24), np.zeros(36), 2)

    @settings(max_examples=50)
    @given(st.integers(0, 2**31))
    def test_nonnegative_zero_iff_equal(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.normal(size=(2, 36))
        p = y + rng.normal(size=(2, 36)) * rng.integers(0, 2)
        loss = surrogate.loss_freq(p, y, 3)
        assert loss >= 0
        assert (loss == 0) == np.array_equal(p, y)

    def test_gradient_scale_invariance(self):
        rng = np.random.default_rng(1)
        y = rng.normal(size=(4, 36))
        p = y + rng.normal(size=(4, 36))
        _, g1 = surrogate.loss_freq_grad(p, y, 3)
        _, g2 = surrogate.loss_freq_grad(y + 2 * (p - y), y, 3)
        np.testing.assert_allclose(g1, g2, rtol=1e-12)


class TestGradients:
    @pytest.mark.parametrize(
        "spec",
        [
            MlpSpec(6, (16,), 24, "relu"),
            MlpSpec(6, (16,), 24, "tanh"),
            MlpSpec(3, (7, 5), 12, "relu"),
            MlpSpec(4, (9, 6, 5), 36, "tanh"),
            MlpSpec(6, (), 24, "relu"),
            MlpSpec(2, (11, 3), 24, "tanh"),
        ],
    )
    def test_against_finite_differences(self, spec):
        rng = np.random.default_rng(spec.input_dim + len(spec.hidden))
        model, x, y = random_model(rng, spec)
        assert finite_difference_check(model, x[:8], y[:8]) < 1e-4

    def test_zero_at_minimum(self):
        rng = np.random.default_rng(2)
        model, x, _ = random_model(rng, MlpSpec(6, (16,), 24))
        _, g = surrogate.gradients(model, x, model(x))
        assert all(np.all(a == 0) for a in g.flat())

    def test_empty_batch(self):
        model = surrogate.init_model(MlpSpec(6, (4,), 24), 0)
        with pytest.raises(surrogate.SurrogateError):
            surrogate.gradients(model, np.zeros((0, 6)), np.zeros((0, 24)))


class TestFit:
    @pytest.fixture
    def toy(self, small_mn_dataset):
        ds = small_mn_dataset
        return (ds.features[:200], ds.labels[:200]), (ds.features[200:250], ds.labels[200:250])

    def _model(self, train, hidden=(128, 128), seed=0):
        x, y = train
        return surrogate.init_model(MlpSpec(6, hidden, 2400), seed, Normalizer.fit(x, y, 200))

    def test_reference_run_reduces_loss(self, toy):
        train, val = toy
        model = self._model(train)
        initial = surrogate.loss_freq(model(train[0]), train[1], 200)
        res = surrogate.fit(model, train, val, TrainConfig(epochs=60, seed=1))
        final = surrogate.loss_freq(res.model(train[0]), train[1], 200)
        assert final < 0.3 * initial

    def test_history_best_so_far(self, toy):
        train, val = toy
        res = surrogate.fit(self._model(train, (32,)), train, val, TrainConfig(epochs=15, seed=1))
        best = res.best_so_far()
        assert all(b <= a for a, b in zip(best, best[1:]))
        assert surrogate.loss_freq(res.model(val[0]), val[1], 200) == pytest.approx(res.best_val, rel=1e-5)

    def test_zero_epochs_is_noop(self, toy):
        train, val = toy
        model = self._model(train, (16,))
        res = surrogate.fit(model, train, val, TrainConfig(epochs=0))
        for a, b in zip(model.params(), res.model.params()):
            assert np.array_equal(a, b)

    def test_bit_reproducible(self, toy, tmp_path):
        train, val = toy
        paths = []
        for name in ("a", "b"):
            res = surrogate.fit(self._model(train, (32,)), train, val, TrainConfig(epochs=5, seed=4))
            paths.append(surrogate.save_checkpoint(res.model, tmp_path / f"{name}.motifmodel"))
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_normalizer_leakage_guard(self, toy):
        train, val = toy
        merged_x = np.vstack([train[0], val[0]])
        merged_y = np.vstack([train[1], val[1]])
        leaky = surrogate.init_model(MlpSpec(6, (8,), 2400), 0, Normalizer.fit(merged_x, merged_y, 200))
        assert leaky.normalizer.source != Normalizer.fit(*train, 200).source
        with pytest.raises(surrogate.LeakageError):
            surrogate.fit(leaky, train, val, TrainConfig(epochs=1))

    def test_divergence_reports_epoch(self, toy):
        train, val = toy
        model = self._model(train, (8,))
        bad = (train[0], train[1].copy())
        bad[1][3, 7] = np.nan
        with pytest.raises(surrogate.DivergenceError, match="epoch 1"):
            surrogate.fit(model, bad, val, TrainConfig(epochs=3), check_provenance=False)


class TestTransferInit:
    def test_value_copy(self):
        rng = np.random.default_rng(3)
        src, x, _ = random_model(rng, MlpSpec(6, (16,), 24), seed=1)
        dst, _, y2 = random_model(rng, MlpSpec(6, (16,), 24), seed=2)
        out = surrogate.init_from(dst, src, y_train=y2, x_train=x)
        np.testing.assert_array_equal(out.hidden_forward(x), src.hidden_forward(x))
        out.weights[0][0, 0] += 1
        assert out.weights[0][0, 0] != src.weights[0][0, 0]
        np.testing.assert_allclose(out.normalizer.y_mean, surrogate.channel_stats(y2, 2)[0])

    def test_spec_mismatch(self):
        a = surrogate.init_model(MlpSpec(6, (16,), 24), 0)
        b = surrogate.init_model(MlpSpec(6, (8,), 24), 0)
        with pytest.raises(surrogate.SurrogateError, match="different architectures"):
            surrogate.init_from(a, b)

    def test_zero_epoch_validation_finite(self):
        rng = np.random.default_rng(4)
        src, x, y = random_model(rng, MlpSpec(6, (16,), 24))
        res = surrogate.fit(src, (x, y), (x[:5], y[:5]), TrainConfig(epochs=3))
        dst = surrogate.init_from(res.model, res.model, y_train=y, x_train=x)
        assert np.isfinite(surrogate.loss_freq(dst(x[:5]), y[:5], 2))


class TestCheckpoint:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        model, x, _ = random_model(rng, MlpSpec(6, (16, 8), 24, "tanh"))
        path = surrogate.save_checkpoint(model, tmp_path / "m.motifmodel", {"band_index": 3})
        back = surrogate.load_checkpoint(path)
        assert np.array_equal(back(x), model(x))
        assert back.meta["band_index"] == 3 and back.spec == model.spec

    def test_header(self, tmp_path):
        model = surrogate.init_model(MlpSpec(6, (4,), 24), 0)
        raw = surrogate.save_checkpoint(model, tmp_path / "m.motifmodel").read_bytes()
        assert raw.startswith(b"MOTIFMODEL 1\n")

    def test_corrupt_blob(self, tmp_path):
        path = surrogate.save_checkpoint(surrogate.init_model(MlpSpec(6, (4,), 24), 0), tmp_path / "m.motifmodel")
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(surrogate.SurrogateError, match="blob"):
            surrogate.load_checkpoint(path)

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            surrogate.load_checkpoint(tmp_path / "nope.motifmodel")
