import dataclasses
import math

import numpy as np
import pytest

from nomahet import config, simulator
from nomahet.simulator import Realization, classify, decode_arrays, trial_rng

NET, NOMA = config.defaults()
# frozen output of this engine (seed 0, 10^4 trials, alpha_p=0.9, R_pl=0.1)
ANCHOR_P_PL = 0.959


def noma(**kw):
    return dataclasses.replace(NOMA, **kw)


def lone_small_cell(distance=50.0):
    empty = np.zeros(0)
    return Realization(
        macro_r=empty, macro_theta=empty, macro_los=empty.astype(bool), macro_fading=empty,
        small_r=np.array([distance]), small_theta=np.array([0.0]), small_los=np.array([True]),
        small_fading=np.array([1.0]),
    )


def test_macro_count_matches_intensity():
    counts = [simulator.sample_realization(NET, trial_rng(3, k), associate_links=False).macro_r.size
              for k in range(10_000)]
    assert np.mean(counts) == pytest.approx(1e-5 * math.pi * 5000**2, rel=0.01)


def test_positions_inside_window():
    real = simulator.sample_realization(NET, trial_rng(0, 0))
    assert np.all(real.small_r <= NET.window_radius_m) and np.all(real.small_r > 0)
    xy = real.macro_xy
    assert np.allclose(np.hypot(xy[:, 0], xy[:, 1]), real.macro_r)


def test_realization_deterministic():
    a = simulator.sample_realization(NET, trial_rng(9, 4))
    b = simulator.sample_realization(NET, trial_rng(9, 4))
    for f in dataclasses.fields(Realization):
        x, y = getattr(a, f.name), getattr(b, f.name)
        if isinstance(x, np.ndarray):
            assert x.tobytes() == y.tobytes()
        else:
            assert x == y


def test_no_small_cells_means_case2():
    cfg = dataclasses.replace(NET, small=dataclasses.replace(NET.small, density=0.0))
    for k in range(20):
        real = simulator.sample_realization(cfg, trial_rng(1, k))
        assert real.small_r.size == 0
        assert real.case_id == 2 and real.serving[0] == "macro"


def test_classify_examples():
    assert classify(1.0, 2.0, 15) == 3
    assert classify(1.0, 20.0, 15) == 2
    assert classify(2.0, 1.0, 15) == 1
    assert classify(1.0, 2.0, 1.0) == 2


def test_associate_picks_sic_target():
    real = lone_small_cell(100.0)
    pm_target = 2 * float(simulator.long_term_powers(real, NET)[0][0])
    # macro LOS distance delivering exactly twice the small-cell power
    d = (NET.power_ratio_m * NET.macro.c_los / pm_target) ** (1 / NET.macro.alpha_los)
    real = dataclasses.replace(
        real, macro_r=np.array([d, 4000.0]), macro_theta=np.zeros(2), macro_los=np.array([True, False]),
        macro_fading=np.ones(2),
    )
    case_id, serving, target = simulator.associate(real, NET)
    assert (case_id, serving, target) == (3, ("small", 0), 0)


def test_void_realization():
    empty = np.zeros(0)
    real = Realization(empty, empty, empty.astype(bool), empty, empty, empty, empty.astype(bool), empty)
    with pytest.raises(simulator.VoidRealization):
        simulator.associate(real, NET)


def test_interference_free_sinr():
    cfg = dataclasses.replace(NET, noise_dbm=-1000.0)
    real = lone_small_cell()
    real = dataclasses.replace(real, **dict(zip(("case_id", "serving", "sic_target"), simulator.associate(real, cfg))))
    out = simulator.decode(real, cfg, noma(alpha_p=0.8))
    assert float(out.sinr_pl) == pytest.approx(4.0, rel=1e-12)
    assert bool(out.pl_ok) and bool(out.sl_ok)


def test_full_power_never_decodes_secondary(small_stats):
    res = simulator.evaluate(small_stats, noma(alpha_p=1.0))
    assert not res.outcomes.sl_ok.any()


def test_infeasible_split_never_decodes_primary(small_stats):
    res = simulator.evaluate(small_stats, noma(alpha_p=0.5, rate_pl=1.0))
    assert res.p_pl.value == 0


def test_impossible_threshold(small_stats):
    res = simulator.evaluate(small_stats, noma(alpha_p=0.999, rate_pl=60.0))
    assert res.p_pl.value == 0


def test_case_shares_partition(small_stats):
    res = simulator.evaluate(small_stats, NOMA)
    assert sum(s.value for s in res.case_shares) == pytest.approx(1.0, abs=1e-12)
    assert sum(s.value for s in res.p_pl_by_case) == pytest.approx(res.p_pl.value, abs=1e-12)


def test_secondary_implies_primary(small_stats):
    for a in (0.5, 0.7, 0.9):
        out = simulator.evaluate(small_stats, noma(alpha_p=a)).outcomes
        assert not np.any(out.sl_ok & ~out.pl_ok)


def test_coupled_monotonicity(small_stats):
    prev = None
    for r in (0.1, 0.3, 0.6, 1.0):
        ok = simulator.evaluate(small_stats, noma(rate_pl=r)).outcomes.pl_ok
        if prev is not None:
            assert not np.any(ok & ~prev)
        prev = ok
    prev = None
    for a in (0.6, 0.7, 0.8, 0.9):
        ok = simulator.evaluate(small_stats, noma(alpha_p=a, rate_pl=0.5)).outcomes.pl_ok
        if prev is not None:
            assert not np.any(prev & ~ok)
        prev = ok


def test_both_layers_fall_with_split(small_stats):
    vals = [simulator.evaluate(small_stats, noma(alpha_p=a, rate_pl=0.1)).p_psl for a in (0.5, 0.6, 0.7, 0.8, 0.9)]
    for lo, hi in zip(vals[1:], vals):
        assert lo.value <= hi.value + lo.half_width_95 + hi.half_width_95


def test_cancellation_only_helps(small_stats):
    nm = noma(alpha_p=0.8, rate_pl=0.6)
    on = simulator.evaluate(small_stats, nm).outcomes.pl_ok
    off = simulator.evaluate(small_stats, dataclasses.replace(nm, sic_enabled=False)).outcomes.pl_ok
    assert not np.any(off & ~on)
    assert on.sum() > off.sum()


def test_sic_only_in_case3(small_stats):
    out = simulator.evaluate(small_stats, noma(rate_pl=0.8)).outcomes
    assert not np.any(out.sic_success & (out.case_id != 3))


def test_primary_denominator_switch(small_stats):
    nm = noma(alpha_p=0.8, rate_pl=0.8)
    full = simulator.evaluate(small_stats, nm).outcomes.sic_success
    part = simulator.evaluate(small_stats, dataclasses.replace(nm, sic_denominator="primary")).outcomes.sic_success
    assert not np.any(full & ~part)


def test_decode_arrays_hand_case():
    # case 3, direct decoding fails, cancellation succeeds
    out = decode_arrays(np.array([3]), np.array([1.0]), np.array([3.0]), np.array([2.9]), 0.0,
                        noma(alpha_p=0.8), t_pl=0.5, t_sl=0.5)
    assert not out.pl_direct[0] and out.sic_success[0] and out.pl_ok[0]
    assert out.sinr_pl[0] == pytest.approx(0.8 / (0.2 + 0.1))
    assert out.sinr_sl[0] == pytest.approx(0.2 / 0.1)


def test_single_tier_rayleigh_closed_form():
    from scipy import integrate

    macro = dataclasses.replace(NET.macro, beta=0.0, alpha_los=4.0, alpha_nlos=4.0, n_los=1, n_nlos=1)
    cfg = dataclasses.replace(NET, macro=macro, small=dataclasses.replace(NET.small, density=0.0), noise_dbm=-400.0)
    stats = simulator.sample_link_stats(cfg, 4000, seed=2)
    res = simulator.evaluate(stats, noma(alpha_p=1.0, rate_pl=1.0))
    rho = integrate.quad(lambda u: 1 / (1 + u**2), 1.0, np.inf)[0]
    assert abs(res.p_pl.value - 1 / (1 + rho)) <= res.p_pl.half_width_95 * 1.5


def test_worker_count_does_not_change_results():
    one = simulator._compute_stats(NET, 4100, 5, 1)
    two = simulator._compute_stats(NET, 4100, 5, 2)
    for name in ("case_id", "signal", "interference", "dominant"):
        assert getattr(one, name).tobytes() == getattr(two, name).tobytes()


def test_estimate_deterministic():
    simulator.clear_cache()
    a = simulator.estimate(NET, NOMA, 500, seed=4)
    simulator.clear_cache()
    b = simulator.estimate(NET, NOMA, 500, seed=4)
    assert a.p_pl == b.p_pl and a.rate_samples.tobytes() == b.rate_samples.tobytes()


def test_regression_anchor():
    res = simulator.estimate(NET, noma(alpha_p=0.9, rate_pl=0.1), 10_000, seed=0)
    assert res.p_pl.value == pytest.approx(ANCHOR_P_PL, abs=1e-12)


def test_trials_csv(tmp_path, small_stats):
    res = simulator.evaluate(small_stats, NOMA)
    path = tmp_path / "trials.csv"
    simulator.write_trials_csv(path, res)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "trial,case_id,sinr_pl,sinr_sl,pl_ok,sl_ok"
    assert len(lines) == small_stats.n_trials + 1


def test_rejects_bad_trial_count():
    with pytest.raises(ValueError):
        simulator.sample_link_stats(NET, 0)
