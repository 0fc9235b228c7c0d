import dataclasses
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nomahet import config
from nomahet.config import ConfigError


def test_default_powers_and_bias():
    net, _ = config.defaults()
    assert net.macro.tx_power_dbm == 36
    assert net.small.tx_power_dbm == 26
    assert net.bias_b == 15
    assert net.power_ratio_m == pytest.approx(10.0, rel=1e-12)


def test_default_channel_constants():
    net, _ = config.defaults()
    m, s = net.macro, net.small
    assert (m.c_nlos, m.c_los, s.c_nlos, s.c_los) == (10**-0.27, 10**-3.08, 10**-3.29, 10**-4.11)
    assert (m.alpha_nlos, m.alpha_los, s.alpha_nlos, s.alpha_los) == (4.28, 2.42, 3.75, 2.09)
    assert (m.beta, s.beta) == (0.004, 0.008)
    assert (m.density, s.density) == (1e-5, 1e-4)
    assert (m.n_los, m.n_nlos, s.n_los, s.n_nlos) == (3, 2, 3, 2)
    assert net.noise_dbm == -95


def test_defaults_validate():
    net, noma = config.defaults()
    assert config.validate(net, noma) == []
    config.check(net, noma)


def test_alpha_zero_rejected():
    net, noma = config.defaults()
    out = config.validate(net, dataclasses.replace(noma, alpha_p=0.0))
    assert any("alpha_p out of (0,1]" in v for v in out)


def test_small_bias_rejected():
    net, noma = config.defaults()
    out = config.validate(dataclasses.replace(net, bias_b=0.5), noma)
    assert any("bias_b < 1" in v for v in out)


def test_check_collects_every_violation():
    net, noma = config.defaults()
    bad_tier = dataclasses.replace(net.macro, alpha_los=1.5, n_nlos=2.5)
    with pytest.raises(ConfigError) as err:
        config.check(dataclasses.replace(net, macro=bad_tier, bias_b=0.2), dataclasses.replace(noma, alpha_p=1.5))
    paths = {v.split(":")[0] for v in err.value.violations}
    assert {"macro.alpha_los", "macro.n_nlos", "bias_b", "noma.alpha_p"} <= paths


def test_macro_power_must_exceed_small():
    net, _ = config.defaults()
    out = config.validate(dataclasses.replace(net, macro=dataclasses.replace(net.macro, tx_power_dbm=20)))
    assert any(v.startswith("power_ratio_m") for v in out)


def test_rate_to_threshold_examples():
    assert config.rate_to_threshold(0) == 0
    assert config.rate_to_threshold(1) == 1
    assert config.rate_to_threshold(0.1) == pytest.approx(0.0717734625, rel=1e-9)


@given(st.floats(-60, 60))
def test_dbm_round_trip(dbm):
    assert config.mw_to_dbm(config.dbm_to_mw(dbm)) == pytest.approx(dbm, rel=1e-12, abs=1e-12)


@given(st.floats(0, 20), st.floats(1e-6, 5))
def test_rate_to_threshold_increasing(r, dr):
    assert config.rate_to_threshold(r + dr) > config.rate_to_threshold(r)


def test_oma_view():
    _, noma = config.defaults()
    oma = noma.as_oma()
    assert oma.alpha_p == 1 and oma.rate_sl == 0
    assert oma.rate_pl == pytest.approx(noma.rate_pl + noma.rate_sl)


def test_rayleigh_sets_all_shapes():
    net = config.rayleigh(config.defaults()[0])
    assert {net.macro.n_los, net.macro.n_nlos, net.small.n_los, net.small.n_nlos} == {1}


def test_config_file_round_trip(tmp_path):
    net, noma = config.defaults()
    net2 = dataclasses.replace(net, bias_b=4.0, small=dataclasses.replace(net.small, density=2e-4))
    noma2 = dataclasses.replace(noma, alpha_p=0.65, mos_mode="paper", sic_enabled=False)
    path = tmp_path / "run.cfg"
    path.write_text(config.dump_config(net2, noma2), encoding="utf-8")
    assert config.load_config(path) == (net2, noma2)


def test_config_file_comments_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nalpha_p = 0.7   ; inline\nmacro.n_los = 4\n", encoding="utf-8")
    net, noma = config.load_config(path, {"rate_pl": "0.3"})
    assert noma.alpha_p == 0.7 and noma.rate_pl == 0.3
    assert net.macro.n_los == 4 and isinstance(net.macro.n_los, int)


def test_unknown_key():
    with pytest.raises(KeyError):
        config.load_config(overrides={"macro.colour": "1"})


def test_config_keys_cover_dump():
    net, noma = config.defaults()
    dumped = [line.split("=")[0].strip() for line in config.dump_config(net, noma).splitlines()]
    assert dumped == config.config_keys()


def test_noise_normalization():
    net, _ = config.defaults()
    assert net.noise_normalized == pytest.approx(10 ** (-121 / 10), rel=1e-12)
    assert math.isclose(config.mw_to_dbm(net.noise_normalized), -121.0)
