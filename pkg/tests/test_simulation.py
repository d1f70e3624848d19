import math

import numpy as np
import pytest

from seqcv.errors import ArgumentDomainError, ConfigError, DataError
from seqcv.rng import stream
from seqcv.simulation import (
    AR1,
    IIDGaussian,
    IIDResample,
    LinearProcess,
    MovingAverage,
    ScenarioParams,
    error_model_from_dict,
    generate_errors,
    mean_path,
    mean_vector,
    read_residuals,
    simulate_batch,
    simulate_scenario,
)

N = 100_000


def test_params_invariant():
    with pytest.raises(ConfigError):
        ScenarioParams(q1=200, q2=100)
    with pytest.raises(ConfigError):
        ScenarioParams(q1=0)
    with pytest.raises(ConfigError):
        ScenarioParams(q2=400, horizon=386)


def test_mean_path_values():
    p = ScenarioParams()
    assert mean_path(p, 1) == 200.0
    assert mean_path(p, 95) == 200.0
    assert mean_path(p, 96) == 200.0
    assert mean_path(p, 193) == pytest.approx(190.3, abs=1e-12)
    assert mean_path(p, 386) == pytest.approx(190.3, abs=1e-12)
    assert mean_path(p.with_jump(-4.3), 193) == pytest.approx(186.0, abs=1e-12)
    with pytest.raises(ArgumentDomainError):
        mean_path(p, 0)
    with pytest.raises(ArgumentDomainError):
        mean_path(p, 387)


def test_mean_vector_matches_pointwise():
    p = ScenarioParams(mu0=10, delta1=0.3, jump=2.0, q1=5, q2=12, horizon=20)
    np.testing.assert_array_equal(mean_vector(p), [mean_path(p, t) for t in range(1, 21)])


def test_pv_module_design():
    p = ScenarioParams.pv_module()
    assert (p.q1, p.q2, p.horizon, p.mu0, p.delta1) == (96, 193, 386, 200.0, -0.1)


def test_streams_are_distinct_and_reproducible():
    a = stream(5, 0, "errors").standard_normal(4)
    assert np.array_equal(a, stream(5, 0, "errors").standard_normal(4))
    assert not np.array_equal(a, stream(5, 1, "errors").standard_normal(4))
    assert not np.array_equal(a, stream(5, 0, "innovations").standard_normal(4))
    assert not np.array_equal(a, stream(6, 0, "errors").standard_normal(4))


def test_ar1_phi0_is_iid_gaussian():
    a = generate_errors(AR1(0.0, 1.7), 1000, seed=3, replication=2)
    b = generate_errors(IIDGaussian(1.7), 1000, seed=3, replication=2)
    np.testing.assert_allclose(a, b, rtol=1e-15)
    e = generate_errors(AR1(0.0, 1.0), N, seed=1)
    assert abs(np.corrcoef(e[:-1], e[1:])[0, 1]) <= 0.01


def test_ar1_stationary_variance():
    m = AR1(0.5, 1.0)
    assert m.stationary_variance == pytest.approx(4.0 / 3.0)
    e = generate_errors(m, N, seed=2)
    assert np.var(e) == pytest.approx(4.0 / 3.0, rel=0.02)


def test_ar1_stationary_start():
    # the first value already has the stationary variance
    m = AR1(0.9, 1.0)
    first = np.array([generate_errors(m, 2, seed=0, replication=r)[0] for r in range(4000)])
    assert np.var(first) == pytest.approx(m.stationary_variance, rel=0.08)


def test_ar1_autocovariances():
    m = AR1(0.4, 1.3)
    e = generate_errors(m, N, seed=7)
    blocks = e.reshape(50, -1)
    for k in range(6):
        per_block = np.array([np.mean(b[: len(b) - k] * b[k:]) for b in blocks])
        est = per_block.mean()
        se = per_block.std(ddof=1) / math.sqrt(len(per_block))
        assert abs(est - m.autocovariance(k)) <= 3 * se


def test_ma_variance():
    m = MovingAverage((1.0, 0.5, -0.25), sigma=2.0)
    e = generate_errors(m, N, seed=3)
    assert np.var(e) == pytest.approx(4.0 * (1 + 0.25 + 0.0625), rel=0.03)
    with pytest.raises(ConfigError):
        MovingAverage(())


def test_linear_process_geometric():
    m = LinearProcess.geometric(0.5, truncation=30)
    assert m.tail_bound == pytest.approx(2 * 0.5 ** 30, rel=1e-9)
    assert m.ned_error == pytest.approx(2 * m.tail_bound)
    assert m.coefficients.shape == (61,)
    e = generate_errors(m, N, seed=4)
    # long-run standard deviation is sum(theta) = 3
    se = 3.0 / math.sqrt(N)
    assert abs(e.mean()) <= 3 * se
    assert np.var(e) == pytest.approx(np.sum(m.coefficients ** 2), rel=0.03)


def test_linear_process_two_sided_filter():
    # a single nonzero lead coefficient shifts the innovation stream
    lead = LinearProcess(lambda i: 1.0 if i == -2 else 0.0, truncation=2, tail_horizon=10)
    lag = LinearProcess(lambda i: 1.0 if i == 2 else 0.0, truncation=2, tail_horizon=10)
    a = generate_errors(lead, 50, seed=9)
    b = generate_errors(lag, 50, seed=9)
    np.testing.assert_array_equal(a[:46], b[4:])


def test_nonsummable_rejected():
    with pytest.raises(ConfigError):
        LinearProcess(lambda i: 1.0 / (abs(i) + 1), truncation=30)
    with pytest.raises(ConfigError):
        LinearProcess.geometric(0.99, truncation=5)


def test_ar1_requires_stationarity():
    with pytest.raises(ConfigError):
        AR1(1.0)


def test_resample(tmp_path):
    f = tmp_path / "res.csv"
    f.write_text("residual\n1.0\n2.0\n\n6.0\n")
    vals = read_residuals(f)
    assert vals == (1.0, 2.0, 6.0)
    m = IIDResample(vals, str(f))
    e = generate_errors(m, 500, seed=1)
    assert set(np.round(e, 12)) <= {-2.0, -1.0, 3.0}
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0\nfoo\n")
    with pytest.raises(DataError, match=":2:"):
        read_residuals(bad)
    with pytest.raises(DataError):
        read_residuals(tmp_path / "missing.csv")


def test_error_model_from_dict(tmp_path):
    assert isinstance(error_model_from_dict({"kind": "iid_gaussian", "sigma": 2.15}), IIDGaussian)
    assert error_model_from_dict({"kind": "ar1", "phi": 0.4}).phi == 0.4
    assert isinstance(error_model_from_dict({"kind": "ma", "coefficients": [1, 0.5]}), MovingAverage)
    lp = error_model_from_dict({"kind": "linear_process", "rho": 0.5, "truncation": 10})
    assert lp.truncation == 10
    ex = error_model_from_dict({"kind": "linear_process", "coefficients": [0.5, 1, 0.5], "truncation": 1})
    np.testing.assert_array_equal(ex.coefficients, [0.5, 1.0, 0.5])
    (tmp_path / "r.csv").write_text("0.5\n-0.5\n")
    assert isinstance(error_model_from_dict({"kind": "iid_resample", "file": "r.csv"}, tmp_path), IIDResample)
    with pytest.raises(ConfigError):
        error_model_from_dict({"kind": "garch"})
    with pytest.raises(ConfigError):
        error_model_from_dict({"kind": "ar1"})


def test_zero_noise_equals_mean():
    p = ScenarioParams()
    s = simulate_scenario(p, IIDGaussian(0.0), seed=1)
    assert np.array_equal(s.values, mean_vector(p))
    assert s.horizon == 386


@pytest.mark.parametrize("model", [IIDGaussian(2.15), AR1(0.4, 1.0), LinearProcess.geometric(0.3, 8)])
def test_determinism(model):
    p = ScenarioParams()
    a = simulate_scenario(p, model, seed=11, replication=3)
    b = simulate_scenario(p, model, seed=11, replication=3)
    assert np.array_equal(a.values, b.values)
    one = simulate_batch(p, model, seed=11, replications=6, threads=1)
    many = simulate_batch(p, model, seed=11, replications=6, threads=3)
    assert np.array_equal(one, many)
    assert np.array_equal(one[3], a.values)
    tail = simulate_batch(p, model, seed=11, replications=3, first=3)
    assert np.array_equal(tail, one[3:])


def test_post_change_level_shift():
    sigma = 2.15
    p = ScenarioParams.pv_module(jump=2 * sigma)
    y = simulate_batch(p, IIDGaussian(sigma), seed=5, replications=200)
    pre = y[:, : p.q1 - 1].mean(axis=1)
    post = y[:, p.q2 - 1:].mean(axis=1)
    diff = post - pre
    expected = (p.q2 - p.q1) * p.delta1 + p.jump
    se = diff.std(ddof=1) / math.sqrt(len(diff))
    assert abs(diff.mean() - expected) <= 3 * se
