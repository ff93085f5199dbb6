import numpy as np
import pytest
from sklearn.base import clone

from rlingua.envs import make_env
from rlingua.estimator import RLinguaTD3

FAST = dict(task="reach", total_steps=300, seed=0, eval_every=150,
            eval_episodes=2, warmup_steps=80, batch_size=16,
            hidden_sizes=(8, 8))


class TestSklearnConventions:
    def test_get_set_params_round_trip(self):
        est = RLinguaTD3(**FAST)
        params = est.get_params()
        assert params["task"] == "reach"
        assert params["total_steps"] == 300
        est.set_params(total_steps=500)
        assert est.total_steps == 500

    def test_clone_preserves_params(self):
        est = RLinguaTD3(**FAST)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_unfitted_predict_raises(self):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            RLinguaTD3(**FAST).predict(np.zeros((1, 9)))


@pytest.fixture(scope="module")
def fitted():
    return RLinguaTD3(**FAST).fit()


class TestFitPredict:
    def test_fit_sets_state(self, fitted):
        assert hasattr(fitted, "agent_")
        assert fitted.n_features_in_ == 9  # 6 obs + 3 goal
        assert len(fitted.metrics_) == 2

    def test_predict_shapes_and_bounds(self, fitted):
        X = np.random.default_rng(0).normal(size=(5, 9))
        actions = fitted.predict(X)
        assert actions.shape == (5, 3)
        assert np.all(actions > -1.0) and np.all(actions < 1.0)

    def test_predict_validates_width(self, fitted):
        with pytest.raises(ValueError, match="features"):
            fitted.predict(np.zeros((2, 7)))

    def test_act_runs_in_env(self, fitted):
        env = make_env("reach")
        obs = env.reset(0)
        action = fitted.act(obs)
        assert action.shape == (3,)
        env.step(action)

    def test_score_returns_success_fraction(self, fitted):
        score = fitted.score()
        assert 0.0 <= score <= 1.0

    def test_fit_is_seed_deterministic(self):
        a = RLinguaTD3(**FAST).fit()
        b = RLinguaTD3(**FAST).fit()
        assert a.metrics_ == b.metrics_
        X = np.random.default_rng(1).normal(size=(3, 9))
        np.testing.assert_array_equal(a.predict(X), b.predict(X))

    def test_controller_arm_cannot_fit(self):
        with pytest.raises(ValueError, match="controller"):
            RLinguaTD3(task="reach", arm="controller").fit()

    def test_invalid_task_rejected_at_fit_time(self):
        from rlingua.config import ConfigError
        with pytest.raises(ConfigError):
            RLinguaTD3(task="juggle").fit()
