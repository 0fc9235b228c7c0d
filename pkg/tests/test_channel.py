import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from nomahet import channel, config

NET = config.defaults()[0]


def test_p_los_examples():
    assert channel.p_los(0.008, 0) == 1
    assert channel.p_los(0.008, 100) == pytest.approx(math.exp(-0.8), rel=1e-15)
    assert channel.p_los(0.0, 1234.5) == 1


@given(st.floats(0, 1), st.floats(0, 1e4))
def test_los_nlos_complement(beta, d):
    assert channel.p_los(beta, d) + channel.p_nlos(beta, d) == 1.0


def test_path_loss_examples():
    assert channel.path_loss(NET.macro, True, 1.0) == 10**-3.08
    assert channel.path_loss(NET.small, False, 10.0) == pytest.approx(10**-3.29 * 10**-3.75, rel=1e-12)
    assert channel.path_loss(NET.small, True, 10.0) > channel.path_loss(NET.small, True, 20.0)


def test_path_loss_vectorized_states():
    out = channel.path_loss(NET.macro, np.array([True, False]), np.array([10.0, 10.0]))
    assert out[0] == pytest.approx(10**-3.08 * 10**-2.42)
    assert out[1] == pytest.approx(10**-0.27 * 10**-4.28)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_path_loss_domain(d):
    with pytest.raises(ValueError):
        channel.path_loss(NET.small, True, d)


def test_fading_moments():
    rng = np.random.default_rng(1)
    h1 = channel.sample_fading(1, rng, 10**6)
    h3 = channel.sample_fading(3, rng, 10**6)
    assert h1.mean() == pytest.approx(1.0, abs=0.01)
    assert h3.var() == pytest.approx(1 / 3, abs=0.01)
    assert np.all(h3 >= 0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fading_matches_exact_tail(n):
    draws = channel.sample_fading(n, np.random.default_rng(n), 10**6)
    ks = stats.kstest(draws, lambda x: 1.0 - channel.gamma_ccdf(n, x)).statistic
    assert ks < 0.01


def test_fading_deterministic():
    a = channel.sample_fading(2, np.random.default_rng(5), 100)
    b = channel.sample_fading(2, np.random.default_rng(5), 100)
    assert np.array_equal(a, b)
    assert isinstance(channel.sample_fading(2, np.random.default_rng(5)), float)


def test_fading_rejects_bad_shape():
    with pytest.raises(ValueError):
        channel.sample_fading(0, np.random.default_rng(0), 3)


def test_gamma_ccdf_examples():
    for n in (1, 2, 5):
        assert channel.gamma_ccdf(n, 0.0) == 1
    assert channel.gamma_ccdf(1, 1.0) == pytest.approx(math.exp(-1))
    assert channel.gamma_ccdf(2, 1.0) == pytest.approx(3 * math.exp(-2))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_gamma_ccdf_agrees_with_scipy(n):
    x = np.linspace(0, 6, 50)
    assert np.allclose(channel.gamma_ccdf(n, x), stats.gamma.sf(x, a=n, scale=1 / n), atol=1e-14)


@given(st.integers(1, 6), st.floats(0, 20), st.floats(0, 5))
def test_gamma_ccdf_non_increasing(n, x, dx):
    assert channel.gamma_ccdf(n, x + dx) <= channel.gamma_ccdf(n, x) + 1e-15


def test_alzer_constants():
    assert channel.alzer_F(3, 0.0) == 0
    assert channel.alzer_F(1, 1.0) == 0.5
    assert channel.alzer_eta(3) == pytest.approx(3 * 6 ** (-1 / 3), rel=1e-15)
    assert channel.alzer_eta(1) == 1


@given(st.integers(1, 5), st.floats(0, 10))
def test_alzer_sandwich(n, x):
    # (1 - e^{-eta x})^n <= P(H < x) <= (1 - e^{-n x})^n, equality at n = 1
    cdf = 1 - channel.gamma_ccdf(n, x)
    lower = (1 - math.exp(-channel.alzer_eta(n) * x)) ** n
    upper = (1 - math.exp(-n * x)) ** n
    assert lower - 1e-12 <= cdf <= upper + 1e-12
