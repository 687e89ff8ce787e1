import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nde.de_engine import bp_noise_bound
from nde.degree_dist import CodeParams, DegreeDistribution, stability_lhs
from nde.training import (InvalidConfigError, NdeModel, OptState, TrainConfig, TrainingSample,
                          adam_step, backward, forward, generate_dataset, loss, rmsprop_step,
                          sgd_step, train, weighted_total)
from nde.training.dataset import below_capacity_cap
from nde.training.trainer import TrainingDivergedError, evaluate_delta

CODE = CodeParams(1024, 2048)
R = DegreeDistribution.regular
SMALL = dict(d_train=400, d_test=200)


def regular_model(lam=3, rho=6, depth=10):
    return NdeModel.from_pair(R(lam), R(rho), 15, 12, depth)


class TestDataset:
    def test_phase_zero_cap(self):
        ds = generate_dataset(CODE, 7.147, 2000, curriculum_phase=0.0, seed=1)
        _, eps_max = bp_noise_bound(0.5, 7.147)
        below = ds.eps[ds.label == 0]
        assert below.max() <= 0.5 * eps_max
        assert below_capacity_cap(CODE, 7.147, 0.0) == pytest.approx(0.5 * eps_max)

    def test_labels(self):
        ds = generate_dataset(CODE, 7.147, 3000, seed=2)
        _, eps_max = bp_noise_bound(0.5, 7.147)
        zero = ds.label == 0
        assert np.all(ds.eps[zero] <= eps_max)
        assert np.all(ds.label[~zero] > 1 - CODE.rate)
        np.testing.assert_array_equal(ds.label[~zero], ds.eps[~zero])
        np.testing.assert_array_equal(ds.x0, ds.eps)
        assert (~zero).mean() == pytest.approx(0.2, abs=1e-3)

    def test_constant_label(self):
        ds = generate_dataset(CODE, 7.147, 100, seed=2, above_label=0.55)
        assert set(np.unique(ds.label)) == {0.0, 0.55}

    def test_deterministic(self):
        a = generate_dataset(CODE, 7.147, 500, 0.3, seed=9)
        b = generate_dataset(CODE, 7.147, 500, 0.3, seed=9)
        np.testing.assert_array_equal(a.eps, b.eps)
        np.testing.assert_array_equal(a.label, b.label)

    def test_samples(self):
        ds = generate_dataset(CODE, 7.147, 5, seed=0)
        assert len(list(ds)) == 5 and isinstance(ds[0], TrainingSample)

    def test_invalid(self):
        with pytest.raises(InvalidConfigError):
            generate_dataset(CODE, -3.0, 10)
        with pytest.raises(ValueError):
            generate_dataset(CODE, 7.0, 0)


class TestForward:
    def test_zero_lambda(self):
        m = NdeModel(np.zeros(15), np.ones(12) / 11, np.ones(15, bool), np.ones(12, bool))
        assert forward(m, TrainingSample(0.8, 0.8, 0.0))[0] == 0.0

    def test_regular_below_threshold(self):
        pred, trace = forward(regular_model(), TrainingSample(0.3, 0.3, 0.0))
        assert pred == 0.0 and trace.x.shape == (11,)

    def test_regular_above_threshold(self):
        assert forward(regular_model(), TrainingSample(0.6, 0.6, 0.6))[0] > 0.3


class TestLoss:
    def test_zero_on_perfect_valid_model(self):
        cfg = TrainConfig(target_avg_lambda=3.0, target_avg_rho=6.0)
        total, comps = loss(regular_model(), [TrainingSample(0.2, 0.2, 0.0)], cfg)
        assert comps["mse"] == comps["omega_lambda"] == comps["omega_rho"] == 0.0
        assert comps["omega_avg_lambda"] == pytest.approx(0.0, abs=1e-12)
        assert total == pytest.approx(0.0, abs=1e-10)

    def test_violation_penalty(self):
        m = NdeModel(np.array([0.0, 0.5, 1.5]), np.array([0, 0, 0, 0, 0, 1.0]),
                     np.ones(3, bool), np.ones(6, bool))
        _, comps = loss(m, [TrainingSample(0.1, 0.1, 0.0)], TrainConfig())
        assert comps["omega_lambda"] == pytest.approx(1.5)

    def test_regular_code_is_stable(self):
        batch = [TrainingSample(e, e, 0.0) for e in (0.1, 0.45)]
        assert loss(regular_model(), batch, TrainConfig())[1]["stab"] == 0.0

    def test_masked_gradient_is_zero(self):
        m = regular_model()
        m.mask_lambda[5] = False
        g = backward(m, [TrainingSample(0.7, 0.7, 0.7), TrainingSample(0.5, 0.5, 0.0)],
                     TrainConfig())
        assert g.d_lambda[5] == 0.0 and g.d_lambda[0] == 0.0 and g.d_rho[0] == 0.0
        assert g.flat().shape == (27,)

    @given(st.integers(0, 10_000), st.sampled_from(["edge", "node", "shifted"]))
    def test_decomposition(self, seed, mode):
        rng = np.random.default_rng(seed)
        m = NdeModel(rng.uniform(-0.2, 1.2, 15), rng.uniform(-0.2, 1.2, 12),
                     np.ones(15, bool), np.ones(12, bool))
        batch = [TrainingSample(e, e, float(rng.choice([0.0, e])))
                 for e in rng.uniform(0, 1, 4)]
        cfg = TrainConfig(avg_degree_mode=mode)
        total, comps = loss(m, batch, cfg)
        assert abs(total - weighted_total(comps, cfg)) <= 1e-12 * max(1.0, abs(total))


class TestOptimizers:
    W = np.array([0.2, -0.4, 1.3])

    @pytest.mark.parametrize("step", [sgd_step, rmsprop_step, adam_step])
    def test_zero_gradient(self, step):
        _, w = step(OptState.zeros(3), self.W, np.zeros(3), 0.1)
        np.testing.assert_array_equal(w, self.W)

    def test_sgd(self):
        _, w = sgd_step(OptState.zeros(3), self.W, np.ones(3), 0.1)
        np.testing.assert_allclose(w, self.W - 0.1)

    @pytest.mark.parametrize("step", [rmsprop_step, adam_step])
    def test_bounded_steps(self, step):
        state, w, lr = OptState.zeros(3), self.W.copy(), 1e-3
        g = np.array([3.0, -0.01, 250.0])
        for i in range(200):
            state, w_new = step(state, w, g, lr)
            if i > 50:
                assert np.all(np.abs(w_new - w) <= 2 * lr)
            w = w_new

    def test_inputs_untouched(self):
        state = OptState.zeros(3)
        w = self.W.copy()
        rmsprop_step(state, w, np.ones(3), 0.1)
        np.testing.assert_array_equal(w, self.W)
        assert state.step == 0 and not state.s1.any()


class TestTrain:
    def test_smoke(self):
        res = train(TrainConfig(epochs=1, **SMALL), CODE)
        model, history = res
        assert len(history) == 1 and isinstance(model, NdeModel)

    def test_masking_preserved(self):
        res = train(TrainConfig(epochs=3, mask_fraction=0.4, seed=5, **SMALL), CODE)
        m = res.model
        assert np.all(m.lambda_weights[~m.mask_lambda] == 0.0)
        assert np.all(m.rho_weights[~m.mask_rho] == 0.0)
        assert (~m.mask_lambda[1:]).sum() == round(0.4 * 14)

    def test_deterministic(self):
        cfg = TrainConfig(epochs=4, seed=11, **SMALL)
        a, b = train(cfg, CODE), train(cfg, CODE)
        assert [r.row() for r in a.history] == [r.row() for r in b.history]
        np.testing.assert_array_equal(a.model.flat_weights(), b.model.flat_weights())

    def test_divergence_detected(self):
        cfg = TrainConfig(epochs=3, optimizer="sgd", learning_rate=1e6, **SMALL)
        with pytest.raises(TrainingDivergedError):
            train(cfg, CODE)

    @pytest.mark.parametrize("bad", [dict(learning_rate=0), dict(o_low=1.0), dict(c_mse=-1),
                                     dict(optimizer="lbfgs"), dict(mask_fraction=1.0)])
    def test_invalid_config(self, bad):
        with pytest.raises(InvalidConfigError):
            train(TrainConfig(**bad), CODE)

    def test_config_round_trip(self):
        cfg = TrainConfig(seed=3, optimizer="adam")
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg
        with pytest.raises(InvalidConfigError):
            TrainConfig.from_dict({"nope": 1})

    @pytest.mark.parametrize("seed", [0, 1])
    def test_returned_model_is_stable(self, seed):
        res = train(TrainConfig(epochs=60, seed=seed, d_train=2000, d_test=500), CODE)
        lam, rho = res.model.projected_pair()
        delta, eps_bp, _ = evaluate_delta(res.model)
        assert delta == pytest.approx(res.best_delta)
        assert stability_lhs(lam, rho) <= 1.0 / eps_bp + 1e-3
