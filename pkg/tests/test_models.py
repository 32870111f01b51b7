import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drivetwin.errors import ConfigError, ShapeError
from drivetwin.models import fit_model, hyperparameter_names, predict
from drivetwin.models.elastic_net import elastic_net_objective, fit_elastic_net, soft_threshold
from drivetwin.models.mlp import MlpModel, fit_mlp, init_mlp
from drivetwin.models.tcn import TcnModel, fit_tcn, init_tcn, layer_plan

from gradcheck import max_relative_error, random_mlp_instance, random_tcn_instance


def ridge_oracle(X, y, lam):
    """Closed-form ridge on centered data, matching the (1/2n) loss scaling."""
    n = len(y)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    w = np.linalg.solve(Xc.T @ Xc + n * lam * np.eye(X.shape[1]), Xc.T @ yc)
    return w, y.mean() - X.mean(axis=0) @ w


# --- elastic net ---------------------------------------------------------


def test_soft_threshold():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    assert soft_threshold(0.5, 1.0) == 0.0


def test_recovers_noiseless_linear_weights():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(200, 5))
    w = np.array([1.0, -2.0, 0.5, 3.0, 0.0])
    y = X @ w + 4.0
    model, _ = fit_elastic_net(X, y, lam=0.0, tol=1e-12)
    np.testing.assert_allclose(model.weights, w, atol=1e-6)
    assert model.bias == pytest.approx(4.0, abs=1e-6)


def test_huge_penalty_shrinks_to_mean():
    rng = np.random.default_rng(1)
    X = rng.uniform(size=(50, 4))
    y = rng.normal(size=50) + 7
    model, _ = fit_elastic_net(X, y, lam=1e9)
    assert np.all(model.weights == 0.0)
    assert model.bias == pytest.approx(y.mean())


@pytest.mark.parametrize("seed", range(10))
def test_pure_ridge_matches_closed_form(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(50, 6))
    y = X @ rng.normal(size=6) + rng.normal(scale=0.1, size=50)
    lam = 10 ** rng.uniform(-4, 0)
    model, _ = fit_elastic_net(X, y, lam=lam, rho=0.0, tol=1e-12)
    w, b = ridge_oracle(X, y, lam)
    np.testing.assert_allclose(model.weights, w, atol=1e-5)
    assert model.bias == pytest.approx(b, abs=1e-5)


@given(st.integers(0, 10_000), st.floats(1e-5, 1.0), st.floats(0.0, 1.0))
def test_objective_non_increasing(seed, lam, rho):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(40, 5))
    y = X @ rng.normal(size=5) + rng.normal(size=40)
    _, report = fit_elastic_net(X, y, lam=lam, rho=rho, tol=1e-10)
    h = np.array(report.history)
    assert np.all(np.diff(h) <= 1e-12 * np.maximum(1.0, np.abs(h[:-1])))


def test_history_matches_objective_formula():
    rng = np.random.default_rng(4)
    X = rng.uniform(size=(30, 3))
    y = rng.normal(size=30)
    model, report = fit_elastic_net(X, y, lam=0.05, rho=0.7, tol=1e-12)
    direct = elastic_net_objective(X, y, model.weights, model.bias, 0.05, 0.7)
    assert report.history[-1] == pytest.approx(direct, rel=1e-9)


def test_lasso_zeroes_irrelevant_column():
    rng = np.random.default_rng(2)
    X = rng.uniform(size=(300, 3))
    y = 5 * X[:, 0] + rng.normal(scale=0.01, size=300)
    model, _ = fit_elastic_net(X, y, lam=0.01, rho=1.0)
    assert model.weights[1] == 0.0 and model.weights[2] == 0.0


def test_elastic_net_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_elastic_net(np.array([[np.nan]]), np.array([1.0]))
    with pytest.raises(ValueError):
        fit_elastic_net(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        fit_elastic_net(np.zeros((3, 2)), np.zeros(3), rho=2.0)


def test_elastic_net_seed_independent():
    rng = np.random.default_rng(3)
    X, y = rng.uniform(size=(60, 4)), rng.normal(size=60)
    a, _ = fit_elastic_net(X, y, seed=0)
    b, _ = fit_elastic_net(X, y, seed=99)
    np.testing.assert_array_equal(a.weights, b.weights)


# --- mlp -------------------------------------------------------------------


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_mlp_gradients(activation):
    for seed in range(20):
        assert max_relative_error(*random_mlp_instance(seed, activation)) < 1e-4


def test_mlp_12_8_1_gradient():
    rng = np.random.default_rng(0)
    model = init_mlp((12, 8, 1), "relu", seed=1)
    assert max_relative_error(model, (rng.normal(size=(16, 12)), rng.normal(size=16))) < 1e-4


def test_zero_weights_predict_output_bias():
    model = init_mlp((4, 3, 1), "relu", seed=0, output_bias=2.5)
    for W, b in zip(model.weights, model.biases):
        W[:] = 0.0
    for b in model.biases[:-1]:
        b[:] = 0.0
    X = np.random.default_rng(0).normal(size=(10, 4))
    np.testing.assert_array_equal(model.predict(X), 2.5)


def test_linear_mlp_matches_least_squares():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(400, 3))
    y = X @ np.array([2.0, -1.0, 0.5]) + 1.0
    model, _ = fit_mlp(X, y, layers=(3, 1), activation="identity", lr=0.05, batch=16, epochs=200, seed=0)
    A = np.column_stack([X, np.ones(len(X))])
    lsq = A @ np.linalg.lstsq(A, y, rcond=None)[0]
    assert np.sqrt(np.mean((model.predict(X) - lsq) ** 2)) < 1e-3


@pytest.mark.parametrize("seed", range(20))
def test_mlp_epoch_loss_decreases_on_linear_target(seed):
    # default learning rate, still far above the minibatch noise floor
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(256, 4))
    y = X @ rng.normal(size=4)
    _, report = fit_mlp(X, y, hidden=(8,), activation="tanh", lr=1e-3, batch=32, epochs=50, seed=seed)
    assert np.all(np.diff(report.history) < 0)


def test_mlp_parameter_count():
    model = init_mlp((12, 64, 64, 1))
    assert model.parameter_count == sum(W.size + b.size for W, b in zip(model.weights, model.biases)) == 5057


def test_mlp_layer_errors():
    with pytest.raises(ConfigError):
        init_mlp((4, 3, 2))
    with pytest.raises(ConfigError):
        MlpModel((4, 1), [np.zeros((3, 1))], [np.zeros(1)])
    with pytest.raises(ConfigError):
        fit_mlp(np.zeros((5, 3)), np.zeros(5), layers=(4, 1), epochs=1)


def test_mlp_seed_determinism():
    rng = np.random.default_rng(2)
    X, y = rng.uniform(size=(100, 3)), rng.normal(size=100)
    a, _ = fit_mlp(X, y, hidden=(5,), epochs=3, seed=7)
    b, _ = fit_mlp(X, y, hidden=(5,), epochs=3, seed=7)
    c, _ = fit_mlp(X, y, hidden=(5,), epochs=3, seed=8)
    for p, q in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(p, q)
    assert not np.array_equal(a.weights[0], c.weights[0])


# --- tcn -------------------------------------------------------------------


@pytest.mark.parametrize("activation", ["tanh", "relu"])
def test_tcn_gradients(activation):
    for seed in range(20):
        assert max_relative_error(*random_tcn_instance(seed, activation)) < 1e-4


def test_receptive_field_arithmetic_and_probe():
    model = init_tcn(2, layer_plan(3, (1, 2, 4), 1, 4), "tanh", seed=0)
    for b in model.biases:
        b[:] = 0.1
    assert model.receptive_field == 15
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 2))
    base = model.predict(X)
    t = 40
    far = X.copy()
    far[t - 15] += 1.0
    near = X.copy()
    near[t - 14] += 1.0
    assert model.predict(far)[t] == base[t]
    assert model.predict(near)[t] != base[t]


@given(st.integers(0, 10_000))
def test_tcn_causality(seed):
    rng = np.random.default_rng(seed)
    plan = layer_plan(int(rng.integers(1, 5)), tuple(int(d) for d in rng.integers(1, 5, size=int(rng.integers(1, 4)))), int(rng.integers(1, 3)), 3)
    model = init_tcn(2, plan, "relu", seed=seed)
    X = rng.normal(size=(30, 2))
    t = int(rng.integers(0, 29))
    Y = X.copy()
    Y[t + 1 :] += rng.normal(size=Y[t + 1 :].shape)
    np.testing.assert_array_equal(model.predict(X)[: t + 1], model.predict(Y)[: t + 1])


def test_passthrough_kernel_is_linear_in_current_input():
    w = np.array([2.0, -1.0])
    model = TcnModel(
        kernels=[w.reshape(1, 2, 1)], biases=[np.zeros(1)], dilations=(1,),
        head_w=np.ones(1), head_b=np.array([0.5]), activation="identity",
    )
    X = np.random.default_rng(0).normal(size=(20, 2))
    np.testing.assert_allclose(model.predict(X), X @ w + 0.5)


def test_window_training_matches_full_sequence_loss():
    # pre-padded windows must see exactly what a full forward pass sees
    from drivetwin.models.tcn import _windows

    rng = np.random.default_rng(0)
    model = init_tcn(2, layer_plan(3, (1, 2), 1, 3), "tanh", seed=1)
    X = rng.normal(size=(25, 2))
    full = model.predict(X)
    ctx = model.receptive_field - 1
    for wx, _ in _windows([(X, np.zeros(25))], ctx, 7):
        out = model._forward(wx[None])[1][0][ctx:]
        assert any(np.allclose(out, full[s : s + 7]) for s in range(0, 19))


def test_tcn_default_parameter_count():
    model = init_tcn(12, layer_plan())
    expected = sum(K.size + b.size for K, b in zip(model.kernels, model.biases)) + model.head_w.size + 1
    assert model.parameter_count == expected == 4529
    assert model.receptive_field == 29


def test_short_sequence_warns():
    rng = np.random.default_rng(0)
    with pytest.warns(UserWarning, match="receptive field"):
        fit_tcn(rng.normal(size=(5, 2)), rng.normal(size=5), epochs=1)


def test_tcn_learns_lagged_target():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(400, 1))
    y = np.concatenate([[0.0, 0.0], x[:-2, 0]])
    model, report = fit_tcn(x, y, kernel=2, dilations=(1, 2), stacks=1, channels=4, activation="identity",
                            lr=0.01, batch=4, epochs=40, window=50, seed=0)
    assert report.history[-1] < 0.1 * report.history[0]


def test_tcn_seed_determinism():
    rng = np.random.default_rng(5)
    X, y = rng.normal(size=(80, 2)), rng.normal(size=80)
    a, _ = fit_tcn(X, y, channels=3, epochs=2, seed=4)
    b, _ = fit_tcn(X, y, channels=3, epochs=2, seed=4)
    for p, q in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(p, q)


# --- shared contract ---------------------------------------------------------


@pytest.mark.parametrize("kind", ["elastic_net", "mlp", "tcn"])
def test_width_mismatch_names_sizes(kind):
    rng = np.random.default_rng(0)
    params = {} if kind == "elastic_net" else {"epochs": 1}
    model, report = fit_model(kind, [(rng.uniform(size=(40, 3)), rng.normal(size=40))], params)
    assert report.parameter_count == model.parameter_count
    assert len(predict(model, rng.uniform(size=(7, 3)))) == 7
    with pytest.raises(ShapeError, match="expects 3 columns, got 4"):
        predict(model, rng.uniform(size=(7, 4)))


def test_unknown_hyperparameter_rejected():
    with pytest.raises(ConfigError):
        fit_model("mlp", [(np.zeros((3, 2)), np.zeros(3))], {"learning_rate": 0.1})
    with pytest.raises(ConfigError):
        fit_model("svm", [(np.zeros((3, 2)), np.zeros(3))])
    assert {"lam", "rho"} <= hyperparameter_names("elastic_net")
