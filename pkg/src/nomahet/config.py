"""Parameter model for the two-tier NOMA multicast network.

All internal computation uses linear milliwatts and meters.  Powers entering
SINR expressions are normalized by the small-cell transmit power, so a small
cell transmits with power 1 and a macro cell with power ``m = P_tm / P_ts``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

MOS_MODES = ("paper", "continuous")
SIC_DENOMINATORS = ("full", "primary")


class ConfigError(ValueError):
    """Raised when a configuration violates one of its invariants."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw)


def rate_to_threshold(rate):
    """Linear SINR threshold ``2**rate - 1`` for a rate in bits/s/Hz."""
    return 2.0 ** rate - 1.0


@dataclass(frozen=True)
class TierParams:
    """Per-tier radio parameters.

    ``c_los``/``c_nlos`` are linear path gains at the 1 m reference distance,
    ``beta`` is the blockage rate in 1/m and ``n_los``/``n_nlos`` are the
    integer Nakagami shapes of LOS and NLOS links.
    """

    tx_power_dbm: float
    density: float
    c_los: float
    c_nlos: float
    alpha_los: float
    alpha_nlos: float
    beta: float
    n_los: int
    n_nlos: int

    def c(self, los: bool) -> float:
        return self.c_los if los else self.c_nlos

    def alpha(self, los: bool) -> float:
        return self.alpha_los if los else self.alpha_nlos

    def shape(self, los: bool) -> int:
        return self.n_los if los else self.n_nlos


@dataclass(frozen=True)
class NetworkConfig:
    macro: TierParams
    small: TierParams
    bias_b: float = 15.0
    noise_dbm: float = -95.0
    window_radius_m: float = 5000.0

    @property
    def power_ratio_m(self) -> float:
        return 10.0 ** ((self.macro.tx_power_dbm - self.small.tx_power_dbm) / 10.0)

    @property
    def noise_normalized(self) -> float:
        """Noise power divided by the small-cell transmit power."""
        return 10.0 ** ((self.noise_dbm - self.small.tx_power_dbm) / 10.0)


@dataclass(frozen=True)
class NomaConfig:
    """Power split, layer rates and QoE calibration.

    ``sic_denominator`` selects what the serving signal contributes while the
    strongest interferer is being decoded: the full superposed power
    (``"full"``) or only the primary-layer part (``"primary"``).
    """

    alpha_p: float = 0.8
    rate_pl: float = 0.1
    rate_sl: float = 0.2
    mos_theta1: float = 0.1
    mos_theta4: float = 10.0
    mos_mode: str = "continuous"
    sic_enabled: bool = True
    sic_denominator: str = "full"

    @property
    def t_pl(self) -> float:
        return rate_to_threshold(self.rate_pl)

    @property
    def t_sl(self) -> float:
        return rate_to_threshold(self.rate_sl)

    def as_oma(self) -> "NomaConfig":
        """Single-layer transmission of the whole signal at the combined rate."""
        return replace(self, alpha_p=1.0, rate_pl=self.rate_pl + self.rate_sl, rate_sl=0.0)


def default_macro() -> TierParams:
    return TierParams(
        tx_power_dbm=36.0,
        density=1e-5,
        c_los=10.0 ** -3.08,
        c_nlos=10.0 ** -0.27,
        alpha_los=2.42,
        alpha_nlos=4.28,
        beta=0.004,
        n_los=3,
        n_nlos=2,
    )


def default_small() -> TierParams:
    return TierParams(
        tx_power_dbm=26.0,
        density=1e-4,
        c_los=10.0 ** -4.11,
        c_nlos=10.0 ** -3.29,
        alpha_los=2.09,
        alpha_nlos=3.75,
        beta=0.008,
        n_los=3,
        n_nlos=2,
    )


def defaults() -> tuple[NetworkConfig, NomaConfig]:
    """Return the reference parameter set of the evaluated scenario."""
    net = NetworkConfig(macro=default_macro(), small=default_small())
    return net, NomaConfig()


def rayleigh(cfg: NetworkConfig) -> NetworkConfig:
    """Copy of ``cfg`` with every Nakagami shape set to 1."""
    return replace(
        cfg,
        macro=replace(cfg.macro, n_los=1, n_nlos=1),
        small=replace(cfg.small, n_los=1, n_nlos=1),
    )


def _tier_violations(name: str, tier: TierParams) -> list[str]:
    out = []
    if not tier.density > 0:
        out.append(f"{name}.density: density must be > 0")
    for key in ("alpha_los", "alpha_nlos"):
        if not getattr(tier, key) > 2:
            out.append(f"{name}.{key}: path-loss exponent must be > 2")
    if not tier.beta >= 0:
        out.append(f"{name}.beta: beta < 0")
    for key in ("c_los", "c_nlos"):
        if not getattr(tier, key) > 0:
            out.append(f"{name}.{key}: reference gain must be > 0")
    for key in ("n_los", "n_nlos"):
        value = getattr(tier, key)
        if isinstance(value, bool) or not float(value).is_integer() or value < 1:
            out.append(f"{name}.{key}: Nakagami shape must be an integer >= 1")
    return out


def validate(cfg: NetworkConfig, noma: NomaConfig | None = None) -> list[str]:
    """Return every invariant violation as ``"field.path: message"``.

    An empty list means the configuration is valid.  Never raises.
    """
    out: list[str] = []
    # A vanishing small-cell tier is allowed as the single-tier degenerate case.
    out += _tier_violations("macro", cfg.macro)
    small = _tier_violations("small", cfg.small)
    if cfg.small.density == 0:
        small = [v for v in small if not v.startswith("small.density")]
    out += small
    if not cfg.bias_b >= 1:
        out.append("bias_b: bias_b < 1")
    if not cfg.window_radius_m > 0:
        out.append("window_radius_m: window radius must be > 0")
    try:
        if not cfg.power_ratio_m > 1:
            out.append("power_ratio_m: macro power must exceed small-cell power (m > 1)")
    except (TypeError, OverflowError):
        out.append("power_ratio_m: transmit powers are not numeric")
    if noma is not None:
        if not 0 < noma.alpha_p <= 1:
            out.append("noma.alpha_p: alpha_p out of (0,1]")
        if not noma.rate_pl > 0:
            out.append("noma.rate_pl: t_pl must be > 0 (rate_pl > 0)")
        if not noma.rate_sl >= 0:
            out.append("noma.rate_sl: rate_sl must be >= 0")
        if not noma.mos_theta1 < noma.mos_theta4:
            out.append("noma.mos_theta1: mos_theta1 must be < mos_theta4")
        if noma.mos_mode not in MOS_MODES:
            out.append(f"noma.mos_mode: unknown mode {noma.mos_mode!r}")
        if noma.sic_denominator not in SIC_DENOMINATORS:
            out.append(f"noma.sic_denominator: unknown value {noma.sic_denominator!r}")
    return out


def check(cfg: NetworkConfig, noma: NomaConfig | None = None) -> None:
    violations = validate(cfg, noma)
    if violations:
        raise ConfigError(violations)


# --- flat key=value configuration files ------------------------------------

_TIER_KEYS = {f.name: f.type for f in fields(TierParams)}
_NET_KEYS = ("bias_b", "noise_dbm", "window_radius_m")
_NOMA_KEYS = {f.name for f in fields(NomaConfig)}


def config_keys() -> list[str]:
    """All keys accepted in a configuration file, in documentation order."""
    keys = [f"{tier}.{k}" for tier in ("macro", "small") for k in _TIER_KEYS]
    return keys + list(_NET_KEYS) + [f.name for f in fields(NomaConfig)]


def _coerce(value: str, like: Any) -> Any:
    if isinstance(like, bool):
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(like, int):
        number = float(value)
        return int(number) if number.is_integer() else number
    if isinstance(like, float):
        return float(value)
    return value.strip()


def apply_overrides(
    cfg: NetworkConfig, noma: NomaConfig, overrides: dict[str, Any]
) -> tuple[NetworkConfig, NomaConfig]:
    """Apply ``{"macro.density": "1e-5", "alpha_p": 0.7, ...}`` style overrides.

    String values are coerced to the type of the field they replace.
    """
    tiers = {"macro": {}, "small": {}}
    net: dict[str, Any] = {}
    nom: dict[str, Any] = {}
    for key, value in overrides.items():
        key = key.strip().replace("-", "_")
        if "." in key:
            tier, name = key.split(".", 1)
            if tier not in tiers or name not in _TIER_KEYS:
                raise KeyError(f"unknown configuration key {key!r}")
            current = getattr(getattr(cfg, tier), name)
            tiers[tier][name] = _coerce(value, current) if isinstance(value, str) else value
        elif key in _NET_KEYS:
            current = getattr(cfg, key)
            net[key] = _coerce(value, current) if isinstance(value, str) else value
        elif key in _NOMA_KEYS:
            current = getattr(noma, key)
            nom[key] = _coerce(value, current) if isinstance(value, str) else value
        else:
            raise KeyError(f"unknown configuration key {key!r}")
    cfg = replace(
        cfg,
        macro=replace(cfg.macro, **tiers["macro"]),
        small=replace(cfg.small, **tiers["small"]),
        **net,
    )
    return cfg, replace(noma, **nom)


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` and ``;`` start comments."""
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), delimiters=("=",)
    )
    parser.optionxform = str
    text = Path(path).read_text(encoding="utf-8")
    parser.read_string("[config]\n" + text)
    return dict(parser["config"])


def load_config(
    path: str | Path | None = None, overrides: dict[str, Any] | None = None
) -> tuple[NetworkConfig, NomaConfig]:
    cfg, noma = defaults()
    values: dict[str, Any] = {}
    if path is not None:
        values.update(read_config_file(path))
    if overrides:
        values.update(overrides)
    return apply_overrides(cfg, noma, values)


def dump_config(cfg: NetworkConfig, noma: NomaConfig) -> str:
    lines = []
    for tier in ("macro", "small"):
        params = getattr(cfg, tier)
        for name in _TIER_KEYS:
            lines.append(f"{tier}.{name} = {getattr(params, name)!r}")
    for name in _NET_KEYS:
        lines.append(f"{name} = {getattr(cfg, name)!r}")
    for f in fields(NomaConfig):
        value = getattr(noma, f.name)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


__all__ = [
    "ConfigError",
    "NetworkConfig",
    "NomaConfig",
    "TierParams",
    "apply_overrides",
    "check",
    "config_keys",
    "dbm_to_mw",
    "defaults",
    "dump_config",
    "load_config",
    "mw_to_dbm",
    "rate_to_threshold",
    "rayleigh",
    "read_config_file",
    "validate",
]
