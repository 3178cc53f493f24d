import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from netlearn.curves import MistakeCurve, read_curve_csv
from netlearn.dynamics import run_exact_forward, run_monte_carlo
from netlearn.errors import ConfigError
from netlearn.network import make_topology
from netlearn.rates import auto_window, compare_to_bounds, estimate_rate, estimate_rates, joint_se
from netlearn.signals import make_symmetric_binary
from netlearn.theory import rate_bounds, single_agent_exact_mistakes


def synthetic(rho, c=0.3, T=30, n=1):
    t = np.arange(1, T + 1)
    lp = np.broadcast_to(math.log(c) - rho * t, (2, n, T)).copy()
    return MistakeCurve("analytic", n, T, log_p=lp)


@pytest.mark.parametrize("method", ["ols_log", "endpoint"])
def test_synthetic_exponential(method):
    e = estimate_rate(synthetic(0.37), 0, window=(3, 25), method=method)
    assert_allclose(e.rate, 0.37, rtol=1e-10)
    assert e.se == 0.0 and e.points == 23


def test_exact_single_agent_within_2pct():
    m = make_symmetric_binary(0.9)
    e = estimate_rate(single_agent_exact_mistakes(m, 200), 0, window=(50, 200))
    assert abs(e.rate / rate_bounds(m).r_a - 1) <= 0.02


def test_uninformative_rate_near_zero():
    r = run_monte_carlo(make_symmetric_binary(0.5), make_topology("autarky", 1), 10, 100_000, seed=1,
                        chunk_size=2_000, sample_paths=0)
    e = estimate_rate(r.curve, 0, n_boot=300)
    assert abs(e.rate) <= 2 * e.se + 1e-12


def test_monte_carlo_rate_and_se():
    m = make_symmetric_binary(0.75)
    r = run_monte_carlo(m, make_topology("autarky", 1), 30, 200_000, seed=2, chunk_size=5_000, sample_paths=0)
    e = estimate_rate(r.curve, 0, window=(10, 30), n_boot=400)
    exact = estimate_rate(single_agent_exact_mistakes(m, 30), 0, window=(10, 30))
    assert 0 < e.se < 0.05
    assert abs(e.rate - exact.rate) <= 4 * e.se


def test_auto_window_floor():
    T = 10
    mistakes = np.zeros((2, 1, T), dtype=np.int64)
    mistakes[0, 0] = [500, 300, 200, 120, 80, 60, 40, 80, 90, 10]
    c = MistakeCurve("monte_carlo", 1, T, mistakes=mistakes, trials=np.array([5000, 5000]),
                     chunk_mistakes=mistakes[None], chunk_trials=np.array([[5000, 5000]]))
    assert auto_window(c, 0, floor=50) == (1, 6)
    with pytest.raises(ConfigError):
        auto_window(c, 0, floor=1000)


def test_window_validation():
    with pytest.raises(ConfigError):
        estimate_rate(synthetic(0.2), 0, window=(5, 5))
    with pytest.raises(ConfigError):
        estimate_rate(synthetic(0.2), 0, window=(1, 99))
    with pytest.raises(ConfigError):
        estimate_rate(synthetic(0.2), 0, method="median")


def test_bootstrap_deterministic():
    r = run_monte_carlo(make_symmetric_binary(0.75), make_topology("complete", 2), 10, 40_000, seed=3,
                        chunk_size=1_000, sample_paths=0)
    a = estimate_rates(r.curve, n_boot=200, seed=5)
    b = estimate_rates(r.curve, n_boot=200, seed=5)
    assert [x.se for x in a] == [x.se for x in b]
    assert joint_se(a[0], a[1]) < math.hypot(a[0].se, a[1].se)  # paired replicates are correlated


def test_compare_complete_nonbinding():
    m = make_symmetric_binary(0.9)
    net = make_topology("complete", 3)
    est = estimate_rates(synthetic(1.2, n=3), window=(2, 20))
    v = compare_to_bounds(est, rate_bounds(m), net)
    assert v["strongly_connected"] and not v["bound_binding"]
    assert v["bound_check"] == "pass" and v["all_within_M"] and v["equal_rates"]
    assert_allclose(v["public_benchmark"], 3 * rate_bounds(m).r_a)


def test_compare_flags_excess():
    m = make_symmetric_binary(0.9)
    est = estimate_rates(synthetic(5.0, n=2), window=(2, 20))
    v = compare_to_bounds(est, rate_bounds(m), make_topology("complete", 2))
    assert v["bound_check"] == "fail"


def test_compare_general_network_uses_min():
    m = make_symmetric_binary(0.9)
    net = make_topology("star", 3)
    lp = np.empty((2, 3, 20))
    t = np.arange(1, 21)
    lp[:, 0] = -9.0 * t  # center far above M
    lp[:, 1:] = -0.5 * t
    est = estimate_rates(MistakeCurve("analytic", 3, 20, log_p=lp), window=(2, 20))
    v = compare_to_bounds(est, rate_bounds(m), net)
    assert not v["all_within_M"] and v["min_within_M"] and v["bound_check"] == "pass"
    assert v["sink_components"] == [[1], [2]]


def test_curve_csv_roundtrip(tmp_path):
    r = run_monte_carlo(make_symmetric_binary(0.8), make_topology("star", 3), 6, 12_000, seed=2,
                        chunk_size=3_000, sample_paths=0)
    r.curve.write_csv(tmp_path / "curve.csv")
    r.curve.write_chunks_csv(tmp_path / "chunks.csv")
    back = read_curve_csv(tmp_path / "curve.csv", tmp_path / "chunks.csv")
    np.testing.assert_array_equal(back.mistakes, r.curve.mistakes)
    np.testing.assert_array_equal(back.chunk_mistakes, r.curve.chunk_mistakes)


def test_exact_curve_csv_roundtrip(tmp_path):
    c = single_agent_exact_mistakes(make_symmetric_binary(0.9), 12)
    c.write_csv(tmp_path / "curve.csv")
    back = read_curve_csv(tmp_path / "curve.csv")
    assert_allclose(back.log_p_hat(), c.log_p_hat(), rtol=1e-15)


@pytest.mark.parametrize("neighbors", [[[0, 1, 2], [0, 1], [0, 2]], [[0, 1, 2], [0, 1, 2], [1, 2]],
                                       [[0, 1], [1, 2], [0, 1, 2]], [[0, 2], [0, 1], [1, 2]]])
@pytest.mark.parametrize("p", [0.6, 0.75, 0.9])
def test_rate_spread_shrinks_on_nested_windows(neighbors, p):
    net = make_topology("custom", 3, neighbors=neighbors)
    c = run_exact_forward(make_symmetric_binary(p), net, 6)
    spreads = []
    for t_max in (3, 6):
        r = [e.rate for e in estimate_rates(c, window=(1, t_max))]
        spreads.append(max(r) - min(r))
    assert spreads[1] <= spreads[0] + 1e-12


def test_paired_se_calibrated():
    # exchangeable agents: z-scores of rate differences should have unit spread
    m = make_symmetric_binary(0.9)
    net = make_topology("complete", 3)
    zs = []
    for seed in range(20):
        r = run_monte_carlo(m, net, 5, 200_000, seed=500 + seed, chunk_size=5_000, sample_paths=0)
        e = estimate_rates(r.curve, window=(1, 5), n_boot=300, seed=seed)
        zs.append((e[0].rate - e[1].rate) / joint_se(e[0], e[1]))
    sd = float(np.std(zs, ddof=1))
    assert 0.5 <= sd <= 1.5, zs
    assert abs(np.mean(zs)) <= 3 * sd / math.sqrt(len(zs))
