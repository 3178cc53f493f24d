import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from netlearn.errors import ConfigError
from netlearn.signals import compute_M, llr, make_symmetric_binary, make_table, model_from_dict, sample_signals


def test_llr_p09():
    m = make_symmetric_binary(0.9)
    assert_allclose(llr(m, 0, 1, "g"), math.log(9), rtol=1e-12)
    assert_allclose(llr(m, 0, 1, "b"), -math.log(9), rtol=1e-12)


def test_uninformative_model():
    m = make_symmetric_binary(0.5)
    assert llr(m, 0, 1, "g") == 0.0
    assert llr(m, 3, 7, "b") == 0.0
    assert compute_M(m) == 0.0


@pytest.mark.parametrize("p", [1.0, 0.49, -0.1, 1.5])
def test_rejects_bad_p(p):
    with pytest.raises(ConfigError):
        make_symmetric_binary(p)


@pytest.mark.parametrize("p,expected", [(0.9, 2 * math.log(9)), (0.75, 2 * math.log(3))])
def test_compute_M(p, expected):
    assert_allclose(compute_M(make_symmetric_binary(p)), expected, rtol=1e-12)
    assert abs(compute_M(make_symmetric_binary(0.9)) - 4.3944) < 1e-4


def test_unknown_symbol():
    with pytest.raises(ConfigError):
        llr(make_symmetric_binary(0.9), 0, 1, "x")


def test_table_model_and_override():
    m = make_table(["lo", "mid", "hi"], [0.2, 0.3, 0.5], [0.5, 0.3, 0.2],
                   overrides={(1, 2): (["a", "b"], [0.9, 0.1], [0.1, 0.9])})
    assert not m.stationary
    assert_allclose(llr(m, 0, 1, "hi"), math.log(2.5))
    assert_allclose(llr(m, 0, 1, "mid"), 0.0, atol=1e-15)
    assert_allclose(compute_M(m), 2 * math.log(9))
    assert m.alphabet_size(1, 2) == 2 and m.alphabet_size(1, 3) == 3


def test_table_rejects_non_distribution():
    with pytest.raises(ConfigError):
        make_table(["x", "y"], [0.5, 0.6], [0.5, 0.5])


def test_table_rejects_singular_support():
    with pytest.raises(ConfigError):
        make_table(["x", "y"], [1.0, 0.0], [0.5, 0.5])


def test_model_dict_roundtrip():
    m = make_symmetric_binary(0.8)
    m2 = model_from_dict(m.to_dict())
    assert_allclose(compute_M(m2), compute_M(m))


def test_sampling_deterministic():
    m = make_symmetric_binary(0.9)
    a = sample_signals(m, 1, 3, 20, seed=5)
    b = sample_signals(m, 1, 3, 20, seed=5)
    assert a.shape == (3, 20)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("p,theta", [(0.9, 1), (0.5, 0)])
def test_sampling_frequency(p, theta):
    m = make_symmetric_binary(p)
    x = sample_signals(m, theta, 1, 100_000, seed=1)
    freq_g = float(np.mean(x == 1))
    expected = p if theta == 1 else 1 - p
    se = math.sqrt(expected * (1 - expected) / x.size)
    assert abs(freq_g - expected) <= 3 * se
