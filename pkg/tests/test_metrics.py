import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nomahet import analytic, config, metrics, simulator
from nomahet.metrics import MosCurve

NET, NOMA = config.defaults()
CONT = MosCurve(0.1, 10.0, "continuous")
PAPER = MosCurve(0.1, 10.0, "paper")


def noma(**kw):
    return dataclasses.replace(NOMA, **kw)


def test_mos_plateaus():
    for curve in (CONT, PAPER):
        assert metrics.mos(0.05, curve) == 1
        assert metrics.mos(20.0, curve) == 5


def test_mos_geometric_midpoint():
    assert metrics.mos(1.0, CONT) == pytest.approx(3.0, abs=1e-12)


def test_legacy_mos_coefficients():
    assert PAPER.a_coef == pytest.approx(3.5 / math.log(100))
    assert PAPER.b_coef == pytest.approx(0.1 * 100 ** (1 / 3.5))
    # unclamped values at the breakpoints are -1 and 2.5
    assert PAPER.a_coef * math.log(0.1 / PAPER.b_coef) == pytest.approx(-1.0)
    assert PAPER.a_coef * math.log(10 / PAPER.b_coef) == pytest.approx(2.5)


def test_continuous_endpoints():
    eps = 1e-13
    assert metrics.mos(0.1 + eps, CONT) == pytest.approx(1.0, abs=1e-12)
    assert metrics.mos(10.0 - eps, CONT) == pytest.approx(5.0, abs=1e-12)


@given(st.floats(0, 50), st.floats(0, 10), st.sampled_from([CONT, PAPER]))
def test_mos_monotone_and_bounded(theta, dtheta, curve):
    lo, hi = metrics.mos(theta, curve), metrics.mos(theta + dtheta, curve)
    assert 1 <= lo <= hi <= 5


def test_mos_rejects_negative_rate():
    with pytest.raises(ValueError):
        metrics.mos(-0.1)


def test_bad_curve():
    with pytest.raises(ValueError):
        MosCurve(1.0, 0.5)


def test_avg_mos_examples():
    nm = noma(rate_pl=0.3, rate_sl=0.5)
    assert metrics.avg_mos(0.0, 0.0, nm) == 0
    assert metrics.avg_mos(1.0, 0.0, nm) == pytest.approx(metrics.mos(0.3, CONT))
    assert metrics.avg_mos(1.0, 1.0, nm) == pytest.approx(metrics.mos(0.8, CONT))
    assert metrics.avg_mos(0.0, 0.0, nm, floor=True) == 1


def test_avg_mos_precondition():
    with pytest.raises(ValueError):
        metrics.avg_mos(0.3, 0.5, NOMA)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0.05, 2), st.floats(0, 2))
def test_avg_mos_ranges(p, q, rp, rs):
    p_pl, p_psl = max(p, q), min(p, q)
    nm = noma(rate_pl=rp, rate_sl=rs)
    assert 0 <= metrics.avg_mos(p_pl, p_psl, nm) <= 5
    assert 1 <= metrics.avg_mos(p_pl, p_psl, nm, floor=True) <= 5 + 1e-12


def outcome(pl_ok, sl_ok, sinr_pl, sinr_sl):
    arr = lambda x: np.atleast_1d(np.asarray(x))
    return simulator.DecodingOutcome(arr(pl_ok), arr(False), arr(False), arr(pl_ok), arr(sl_ok), arr(sinr_pl), arr(sinr_sl))


def test_avg_rate_sim_examples():
    assert metrics.avg_rate_sim(outcome([False] * 3, [False] * 3, [5.0] * 3, [5.0] * 3)).value == 0
    assert metrics.avg_rate_sim(outcome(True, False, 1.0, 3.0)).value == pytest.approx(1.0)
    assert metrics.avg_rate_sim(outcome(True, True, 1.0, 3.0)).value == pytest.approx(3.0)


def test_exceedance_rate_zero_coverage():
    assert metrics.exceedance_rate(lambda t: np.zeros_like(t), 0.0)[0] == 0


def test_exceedance_rate_deterministic_sinr():
    value, _ = metrics.exceedance_rate(lambda t: (np.asarray(t) < 1).astype(float), 0.0, 1.0)
    assert value == pytest.approx(1.0, abs=1e-4)


def test_exceedance_rate_exponential_sinr():
    # Z ~ Exp(1): E[log2(1 + Z)] = e E1(1) / ln 2
    from scipy.special import exp1

    value, _ = metrics.exceedance_rate(lambda t: np.exp(-np.asarray(t)), 0.0)
    assert value == pytest.approx(math.e * exp1(1.0) / math.log(2), rel=1e-3)


def test_exceedance_rate_truncated_below():
    # Z ~ Exp(1) restricted to Z >= 1 contributes log2(1+Z) only there
    from scipy import integrate

    ref = integrate.quad(lambda z: math.log2(1 + z) * math.exp(-z), 1, np.inf)[0]
    value, _ = metrics.exceedance_rate(lambda t: np.exp(-np.asarray(t)), 1.0)
    assert value == pytest.approx(ref, rel=1e-3)


def test_secondary_term_vanishes_at_full_power():
    # alpha_p = 1: only the primary term remains
    nm = noma(alpha_p=1.0, rate_pl=0.3, rate_sl=0.0)
    model = analytic.CoverageModel(NET)
    total, _ = metrics.avg_rate_analytic(model, nm)
    pl_only, _ = metrics.exceedance_rate(lambda t: np.atleast_1d(analytic.coverage_pl(model, nm, t=t).value), nm.t_pl)
    assert total == pytest.approx(pl_only, rel=1e-9)


def test_oma_equals_full_power_noma_without_secondary(small_stats):
    nm = noma(rate_pl=0.4, rate_sl=0.0)
    model = analytic.CoverageModel(NET)
    oma = metrics.oma_baseline(model, nm, "analytic")
    assert oma["coverage"] == pytest.approx(analytic.coverage_pl(model, noma(alpha_p=1.0, rate_pl=0.4)).value)


def test_oma_mos_uses_combined_rate():
    nm = noma(rate_pl=0.1, rate_sl=0.5)
    oma = metrics.oma_baseline(analytic.CoverageModel(NET), nm, "analytic")
    assert oma["avg_mos"] == pytest.approx(metrics.mos(0.6, CONT) * oma["coverage"])


def test_oma_sim_matches_threshold_run(small_stats):
    nm = noma(rate_pl=0.1, rate_sl=0.3)
    oma = metrics.oma_baseline(NET, nm, "sim", n_trials=small_stats.n_trials, seed=11)
    ref = simulator.evaluate(small_stats, noma(alpha_p=1.0, rate_pl=0.4, rate_sl=0.0))
    assert oma["coverage"] == ref.p_pl.value


def test_analytic_rate_matches_simulation():
    nm = noma(alpha_p=0.5, rate_pl=0.1, rate_sl=0.2)
    value, err = metrics.avg_rate_analytic(NET, nm)
    sim = metrics.avg_rate_sim(simulator.estimate(NET, nm, 100_000, seed=0).outcomes)
    assert abs(value - sim.value) <= 2 * (sim.half_width_95 + err)
