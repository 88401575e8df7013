import math

import numpy as np
import pytest

from oggn.errors import ConfigError, ParseError, ShapeError, ValidationError
from oggn.oracle import (
    Dataset,
    OracleModel,
    evaluate_oracle,
    load_dataset_csv,
    load_oracle,
    oracle_value,
    oracle_value_and_grad,
    save_dataset_csv,
    save_oracle,
    synth_dataset,
    train_oracle,
)
from oggn.poly import DEMO_SYSTEM, POLY4, PolyFunction, PolySystem, poly_eval, term


def test_synth_dataset_shape_and_bounds():
    data = synth_dataset(POLY4, 10000, 0.0, 500.0, seed=1)
    assert data.features.shape == (10000, 4) and data.targets.shape == (10000, 1)
    assert data.features.min() >= 0 and data.features.max() < 500
    upper = poly_eval(POLY4, [500.0] * 4)
    assert 0 <= data.targets.min() and data.targets.max() <= upper


def test_synth_dataset_targets_recheck(rng):
    data = synth_dataset(POLY4, 2000, 0.0, 500.0, seed=3)
    for i in rng.choice(len(data), size=100, replace=False):
        assert data.targets[i, 0] == poly_eval(POLY4, data.features[i])


def test_synth_dataset_empty_and_deterministic():
    assert len(synth_dataset(POLY4, 0, 0.0, 1.0, seed=0)) == 0
    a = synth_dataset(POLY4, 50, 0.0, 500.0, seed=9)
    b = synth_dataset(POLY4, 50, 0.0, 500.0, seed=9)
    c = synth_dataset(POLY4, 50, 0.0, 500.0, seed=10)
    assert np.array_equal(a.features, b.features) and np.array_equal(a.targets, b.targets)
    assert not np.array_equal(a.features, c.features)


@pytest.mark.parametrize("low, high", [(5.0, 5.0), (10.0, 1.0), (-1.0, 5.0)])
def test_synth_dataset_bad_range(low, high):
    with pytest.raises(ConfigError):
        synth_dataset(POLY4, 10, low, high, seed=0)


def test_synth_dataset_from_system_uses_residual_norm():
    data = synth_dataset(DEMO_SYSTEM, 20, 0.0, 2.0, seed=0)
    expected = oracle_value(OracleModel.residual_norm(DEMO_SYSTEM), data.features)
    np.testing.assert_array_equal(data.targets, expected)


def test_csv_round_trip_is_exact(tmp_path):
    data = synth_dataset(POLY4, 100, 0.0, 500.0, seed=4)
    path = tmp_path / "d.csv"
    save_dataset_csv(data, path)
    assert path.read_text().splitlines()[0] == "x1,x2,x3,x4,y"
    back = load_dataset_csv(path)
    assert back.features.tobytes() == data.features.tobytes()
    assert back.targets.tobytes() == data.targets.tobytes()


def test_csv_header_only(tmp_path):
    path = tmp_path / "d.csv"
    save_dataset_csv(synth_dataset(POLY4, 0, 0.0, 1.0, seed=0), path)
    assert path.read_text() == "x1,x2,x3,x4,y\n"
    assert len(load_dataset_csv(path)) == 0


@pytest.mark.parametrize(
    "text, where",
    [
        ("x1,y\n1,2\n3,abc\n", ":3:"),
        ("x1,y\n1,2,3\n", ":2:"),
        ("a,b\n1,2\n", ":1:"),
        ("", ":1:"),
    ],
)
def test_csv_malformed_names_the_line(tmp_path, text, where):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(ParseError, match=where):
        load_dataset_csv(path)


def test_dataset_row_mismatch():
    with pytest.raises(ShapeError):
        Dataset(np.zeros((3, 2)), np.zeros(4))


def test_oracle_quality(poly4_oracle):
    assert poly4_oracle.metadata["validation"]["mean_rel_error"] < 0.05


def test_train_constant_target():
    rng = np.random.default_rng(0)
    data = Dataset(rng.uniform(0, 10, size=(200, 2)), np.full(200, 7.5))
    model = train_oracle(data, hidden=(8,), epochs=50, seed=0)
    pred = oracle_value(model, rng.uniform(0, 10, size=(20, 2)))
    np.testing.assert_allclose(pred, 7.5, atol=1e-3)


def test_train_single_row():
    data = Dataset(np.array([[3.0, 4.0]]), np.array([12.0]))
    model = train_oracle(data, hidden=(8,), epochs=300, seed=0)
    assert oracle_value(model, [[3.0, 4.0]])[0, 0] == pytest.approx(12.0, abs=1e-3)


def test_train_empty_dataset():
    with pytest.raises(ConfigError):
        train_oracle(Dataset(np.zeros((0, 2)), np.zeros(0)))


def test_train_is_deterministic(tmp_path):
    data = synth_dataset(POLY4, 300, 0.0, 500.0, seed=0)
    a = train_oracle(data, hidden=(8,), epochs=5, seed=3)
    b = train_oracle(data, hidden=(8,), epochs=5, seed=3)
    save_oracle(a, tmp_path / "a.json")
    save_oracle(b, tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_neural_gradient_matches_finite_differences(small_oracle, rng):
    x = rng.uniform(50, 450, size=(6, 4))
    _, grad = oracle_value_and_grad(small_oracle, x)
    h = 1e-4
    for j in range(4):
        up, down = x.copy(), x.copy()
        up[:, j] += h
        down[:, j] -= h
        num = (oracle_value(small_oracle, up) - oracle_value(small_oracle, down))[:, 0] / (2 * h)
        np.testing.assert_allclose(grad[:, j], num, rtol=1e-4, atol=1e-9)


def test_normalization_round_trip(small_oracle, rng):
    x = rng.uniform(-1000, 1000, size=(50, 4))
    np.testing.assert_allclose(small_oracle.denormalize(small_oracle.normalize(x)), x, rtol=0, atol=1e-12 * 1000)


def test_analytic_oracle_matches_poly():
    o = OracleModel.analytic(POLY4)
    x = np.array([[1.0, 2.0, 3.0, 4.0]])
    v, g = oracle_value_and_grad(o, x)
    assert v[0, 0] == poly_eval(POLY4, x[0])


def test_residual_oracle_at_reported_solution():
    o = OracleModel.residual_norm(DEMO_SYSTEM)
    v, _ = oracle_value_and_grad(o, [[1.2279, 1.0952, 0.2624]])
    assert v[0, 0] == pytest.approx(0.0589, abs=5e-4)
    assert math.hypot(0.03179, 0.04953) == pytest.approx(0.0589, abs=5e-5)


def test_residual_oracle_zero_at_exact_root():
    sys_ = PolySystem(2, (
        PolyFunction(2, (term(1.0, (0, 1)), term(-3.0))),
        PolyFunction(2, (term(1.0, (1, 2)), term(-4.0))),
    ))
    v, g = oracle_value_and_grad(OracleModel.residual_norm(sys_), [[3.0, 2.0]])
    assert v[0, 0] == 0.0
    assert np.all(np.isfinite(g))


def test_residual_gradient_matches_finite_differences(rng):
    o = OracleModel.residual_norm(DEMO_SYSTEM)
    x = rng.uniform(0.5, 1.5, size=(5, 3))
    _, g = oracle_value_and_grad(o, x)
    h = 1e-6
    for j in range(3):
        up, down = x.copy(), x.copy()
        up[:, j] += h
        down[:, j] -= h
        num = (oracle_value(o, up) - oracle_value(o, down))[:, 0] / (2 * h)
        np.testing.assert_allclose(g[:, j], num, rtol=1e-6)


def test_residual_nonnegative(rng):
    o = OracleModel.residual_norm(DEMO_SYSTEM)
    assert np.all(oracle_value(o, rng.uniform(0, 3, size=(100, 3))) >= 0)


def test_oracle_input_shape_check(small_oracle):
    with pytest.raises(ShapeError):
        oracle_value(small_oracle, np.zeros((2, 3)))


@pytest.mark.parametrize("kind", ["neural", "analytic", "residual_norm"])
def test_oracle_file_round_trip(tmp_path, small_oracle, kind, rng):
    o = {"neural": small_oracle, "analytic": OracleModel.analytic(POLY4), "residual_norm": OracleModel.residual_norm(DEMO_SYSTEM)}[kind]
    save_oracle(o, tmp_path / "o.json")
    back = load_oracle(tmp_path / "o.json")
    x = rng.uniform(0.5, 2, size=(4, o.input_dim))
    assert back.kind == o.kind
    assert oracle_value(back, x).tobytes() == oracle_value(o, x).tobytes()


def test_oracle_file_validation(tmp_path):
    (tmp_path / "o.json").write_text('{"kind": "neural", "input_dim": 4}')
    with pytest.raises(ValidationError, match="network"):
        load_oracle(tmp_path / "o.json")


def test_evaluate_oracle_perfect_on_analytic():
    data = synth_dataset(POLY4, 30, 0.0, 10.0, seed=0)
    m = evaluate_oracle(OracleModel.analytic(POLY4), data)
    assert m["mse"] == 0 and m["mean_rel_error"] == 0
