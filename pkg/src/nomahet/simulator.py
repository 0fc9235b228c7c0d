"""Monte Carlo ground truth for NOMA multicast coverage in a two-tier HetNet.

Each trial draws an independent Poisson deployment of both tiers inside a
disk around the typical user at the origin.  Association compares
long-term (fading-free) received powers with the cell-range-expansion bias;
decoding uses instantaneous powers including Nakagami fading and at most one
cancellation of the strongest macro interferer.

Every trial owns a random stream keyed by ``(seed, trial)`` through
``SeedSequence.spawn_key``, so results do not depend on how trials are
split between workers.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import path_loss, sample_fading
from .config import NetworkConfig, NomaConfig, check

log = logging.getLogger(__name__)

Z95 = 1.959963984540054
BLOCK = 2000


class VoidRealization(RuntimeError):
    """Neither tier has a base station inside the simulation window."""


@dataclass(frozen=True)
class Realization:
    """One sampled network seen from the user at the origin.

    Positions are stored in polar form (distance, angle); ``*_xy`` gives
    Cartesian coordinates.
    """

    macro_r: np.ndarray
    macro_theta: np.ndarray
    macro_los: np.ndarray
    macro_fading: np.ndarray
    small_r: np.ndarray
    small_theta: np.ndarray
    small_los: np.ndarray
    small_fading: np.ndarray
    case_id: int | None = None
    serving: tuple[str, int] | None = None
    sic_target: int | None = None

    @property
    def macro_xy(self):
        return np.column_stack([self.macro_r * np.cos(self.macro_theta), self.macro_r * np.sin(self.macro_theta)])

    @property
    def small_xy(self):
        return np.column_stack([self.small_r * np.cos(self.small_theta), self.small_r * np.sin(self.small_theta)])


@dataclass(frozen=True)
class DecodingOutcome:
    """Decoding events for one trial, or arrays of them for many trials."""

    pl_direct: np.ndarray
    sic_success: np.ndarray
    pl_after_sic: np.ndarray
    pl_ok: np.ndarray
    sl_ok: np.ndarray
    sinr_pl: np.ndarray
    sinr_sl: np.ndarray
    case_id: np.ndarray | None = None


@dataclass(frozen=True)
class CoverageEstimate:
    value: float
    half_width_95: float
    n_trials: int
    provenance: str = "sim"

    @classmethod
    def from_indicator(cls, hits) -> "CoverageEstimate":
        hits = np.asarray(hits, dtype=float)
        n = hits.size
        p = float(hits.mean()) if n else float("nan")
        hw = Z95 * math.sqrt(max(p * (1 - p), 0.0) / n) if n else float("nan")
        return cls(p, hw, n)

    @classmethod
    def from_samples(cls, samples) -> "CoverageEstimate":
        samples = np.asarray(samples, dtype=float)
        n = samples.size
        sd = float(samples.std(ddof=1)) if n > 1 else 0.0
        return cls(float(samples.mean()), Z95 * sd / math.sqrt(n), n)


@dataclass(frozen=True)
class LinkStats:
    """Per-trial quantities that decoding depends on.

    ``signal`` is the instantaneous serving power, ``interference`` the sum
    over every other base station, ``dominant`` the instantaneous power of
    the cancellation target (0 outside case 3).  Void trials are dropped.
    """

    case_id: np.ndarray
    signal: np.ndarray
    interference: np.ndarray
    dominant: np.ndarray
    noise: float
    n_void: int = 0

    @property
    def n_trials(self) -> int:
        return int(self.case_id.size)


@dataclass(frozen=True)
class SimulationResult:
    p_pl: CoverageEstimate
    p_psl: CoverageEstimate
    case_shares: tuple[CoverageEstimate, CoverageEstimate, CoverageEstimate]
    p_pl_by_case: tuple[CoverageEstimate, CoverageEstimate, CoverageEstimate]
    rate_samples: np.ndarray
    outcomes: DecodingOutcome
    n_void: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def avg_rate(self) -> CoverageEstimate:
        return CoverageEstimate.from_samples(self.rate_samples)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(seed, spawn_key=(trial,))))


def _sample_tier(tier, radius, rng):
    count = rng.poisson(tier.density * math.pi * radius * radius)
    # 1 - U lies in (0, 1]; a base station exactly at the user is excluded
    r = radius * np.sqrt(1.0 - rng.random(count))
    theta = 2 * math.pi * rng.random(count)
    los = rng.random(count) < np.exp(-tier.beta * r)
    # one scalar-shape draw per link state is much faster than a shape array
    fading = np.empty(count)
    n_los = int(los.sum())
    fading[los] = sample_fading(tier.n_los, rng, n_los)
    fading[~los] = sample_fading(tier.n_nlos, rng, count - n_los)
    return r, theta, los, fading


def sample_realization(cfg: NetworkConfig, rng: np.random.Generator, associate_links: bool = True) -> Realization:
    """Draw both tiers uniformly in the window and, by default, associate."""
    radius = cfg.window_radius_m
    sr, st, sl, sf = _sample_tier(cfg.small, radius, rng)
    mr, mt, ml, mf = _sample_tier(cfg.macro, radius, rng)
    real = Realization(mr, mt, ml, mf, sr, st, sl, sf)
    if associate_links:
        try:
            case_id, serving, target = associate(real, cfg)
        except VoidRealization:
            return real
        real = replace(real, case_id=case_id, serving=serving, sic_target=target)
    return real


def long_term_powers(real: Realization, cfg: NetworkConfig):
    """Fading-free received powers normalized by the SBS transmit power."""
    small = path_loss(cfg.small, real.small_los, real.small_r) if real.small_r.size else np.zeros(0)
    macro = cfg.power_ratio_m * path_loss(cfg.macro, real.macro_los, real.macro_r) if real.macro_r.size else np.zeros(0)
    return np.atleast_1d(small), np.atleast_1d(macro)


def classify(ps_max, pm_max, bias):
    """Association case from the strongest long-term powers of each tier.

    1: SBS strongest; 2: MBS beats the biased SBS; 3: in between.
    Missing tiers are passed as 0.
    """
    ps_max = np.asarray(ps_max, dtype=float)
    pm_max = np.asarray(pm_max, dtype=float)
    out = np.where(ps_max > pm_max, 1, np.where(pm_max > bias * ps_max, 2, 3))
    out = np.where(ps_max <= 0, 2, out)
    out = np.where(pm_max <= 0, 1, out)
    return out.astype(np.int8)


def associate(real: Realization, cfg: NetworkConfig, powers=None):
    """Return ``(case_id, serving, sic_target)`` for a realization."""
    small, macro = long_term_powers(real, cfg) if powers is None else powers
    if small.size == 0 and macro.size == 0:
        raise VoidRealization("void realization")
    js = int(np.argmax(small)) if small.size else -1
    jm = int(np.argmax(macro)) if macro.size else -1
    ps = small[js] if small.size else 0.0
    pm = macro[jm] if macro.size else 0.0
    case_id = int(classify(ps, pm, cfg.bias_b))
    if case_id == 2:
        return 2, ("macro", jm), None
    return case_id, ("small", js), (jm if case_id == 3 else None)


def link_stats_of(real: Realization, cfg: NetworkConfig, powers=None):
    """``(case_id, signal, interference, dominant)`` of an associated realization."""
    if real.case_id is None:
        raise VoidRealization("realization has no serving base station")
    small, macro = long_term_powers(real, cfg) if powers is None else powers
    inst_s = small * real.small_fading
    inst_m = macro * real.macro_fading
    total = inst_s.sum() + inst_m.sum()
    tier, j = real.serving
    signal = inst_s[j] if tier == "small" else inst_m[j]
    dominant = inst_m[real.sic_target] if real.sic_target is not None else 0.0
    return real.case_id, float(signal), float(total - signal), float(dominant)


def restrict(real: Realization, radius: float) -> Realization:
    """Keep only base stations within ``radius``; a PPP restricted to a
    smaller disk is a PPP on that disk, so this couples two window sizes."""
    keep_m = real.macro_r <= radius
    keep_s = real.small_r <= radius
    return Realization(
        real.macro_r[keep_m], real.macro_theta[keep_m], real.macro_los[keep_m], real.macro_fading[keep_m],
        real.small_r[keep_s], real.small_theta[keep_s], real.small_los[keep_s], real.small_fading[keep_s],
    )


def _stats_row(real, cfg):
    powers = long_term_powers(real, cfg)
    try:
        case, serving, target = associate(real, cfg, powers)
    except VoidRealization:
        return 0, (0.0, 0.0, 0.0)
    real = replace(real, case_id=case, serving=serving, sic_target=target)
    c, s, i, d = link_stats_of(real, cfg, powers)
    return c, (s, i, d)


def _pack(cfg, case_id, stats):
    keep = case_id > 0
    return LinkStats(case_id[keep], stats[keep, 0], stats[keep, 1], stats[keep, 2], cfg.noise_normalized, int((~keep).sum()))


def _run_block(args):
    cfg, seed, start, stop = args
    n = stop - start
    case_id = np.zeros(n, dtype=np.int8)
    stats = np.zeros((n, 3))
    for k, trial in enumerate(range(start, stop)):
        real = sample_realization(cfg, trial_rng(seed, trial), associate_links=False)
        case_id[k], stats[k] = _stats_row(real, cfg)
    return case_id, stats


_CACHE: OrderedDict = OrderedDict()
_CACHE_SIZE = 16


def _compute_stats(cfg: NetworkConfig, n_trials: int, seed: int, n_jobs: int) -> LinkStats:
    blocks = [(cfg, seed, a, min(a + BLOCK, n_trials)) for a in range(0, n_trials, BLOCK)]
    if n_jobs > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(_run_block, blocks))
    else:
        parts = [_run_block(b) for b in blocks]
    case_id = np.concatenate([p[0] for p in parts])
    stats = np.concatenate([p[1] for p in parts])
    out = _pack(cfg, case_id, stats)
    if out.n_void:
        log.warning("%d void realizations excluded", out.n_void)
    for a in (out.case_id, out.signal, out.interference, out.dominant):
        a.setflags(write=False)
    return out


def sample_link_stats(cfg: NetworkConfig, n_trials: int, seed: int = 0, n_jobs: int = 1) -> LinkStats:
    """Simulate ``n_trials`` deployments and keep what decoding needs.

    Results are memoized per ``(cfg, n_trials, seed)``; ``n_jobs`` only
    changes how the work is spread, never the numbers.
    """
    check(cfg)
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    key = (cfg, int(n_trials), int(seed))
    if key in _CACHE:
        _CACHE.move_to_end(key)
        return _CACHE[key]
    out = _compute_stats(cfg, int(n_trials), int(seed), max(1, int(n_jobs)))
    _CACHE[key] = out
    if len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return out


def clear_cache() -> None:
    _CACHE.clear()


def window_pair(cfg: NetworkConfig, n_trials: int, seed: int = 0, factor: float = 2.0):
    """Link statistics for windows ``R`` and ``factor * R`` from the same draws."""
    big = replace(cfg, window_radius_m=factor * cfg.window_radius_m)
    check(big)
    case = np.zeros((2, n_trials), dtype=np.int8)
    stats = np.zeros((2, n_trials, 3))
    for k in range(n_trials):
        real = sample_realization(big, trial_rng(seed, k), associate_links=False)
        for j, r in enumerate((restrict(real, cfg.window_radius_m), real)):
            case[j, k], stats[j, k] = _stats_row(r, cfg)
    return _pack(cfg, case[0], stats[0]), _pack(big, case[1], stats[1])


def decode_arrays(case_id, signal, interference, dominant, noise, noma: NomaConfig, t_pl=None, t_sl=None) -> DecodingOutcome:
    """Vectorized primary/secondary decoding with one optional cancellation."""
    a = noma.alpha_p
    t_pl = noma.t_pl if t_pl is None else t_pl
    t_sl = noma.t_sl if t_sl is None else t_sl
    case_id = np.asarray(case_id)
    s = np.asarray(signal, dtype=float)
    i = np.asarray(interference, dtype=float)
    x1 = np.asarray(dominant, dtype=float)
    residual = np.maximum(i - x1, 0.0)

    sinr_direct = a * s / ((1 - a) * s + i + noise)
    pl_direct = sinr_direct >= t_pl
    attempt = (case_id == 3) & ~pl_direct & noma.sic_enabled
    own = s if noma.sic_denominator == "full" else a * s
    sinr_b = x1 / (residual + own + noise)
    sic_success = attempt & (sinr_b >= t_pl)
    sinr_c = a * s / ((1 - a) * s + residual + noise)
    pl_after_sic = sic_success & (sinr_c >= t_pl)
    pl_ok = pl_direct | pl_after_sic

    sinr_pl = np.where(sic_success, sinr_c, sinr_direct)
    sl_interf = np.where(sic_success, residual, i)
    sinr_sl = (1 - a) * s / (sl_interf + noise)
    sl_ok = pl_ok & (sinr_sl >= t_sl) & (a < 1)
    return DecodingOutcome(pl_direct, sic_success, pl_after_sic, pl_ok, sl_ok, sinr_pl, sinr_sl, case_id)


def decode(real: Realization, cfg: NetworkConfig, noma: NomaConfig, t_pl=None, t_sl=None) -> DecodingOutcome:
    """Decode one associated realization; fields are 0-d arrays."""
    c, s, i, d = link_stats_of(real, cfg)
    out = decode_arrays(np.array(c), s, i, d, cfg.noise_normalized, noma, t_pl, t_sl)
    return DecodingOutcome(*(np.asarray(v).reshape(()) if v is not None else None for v in (
        out.pl_direct, out.sic_success, out.pl_after_sic, out.pl_ok, out.sl_ok, out.sinr_pl, out.sinr_sl, out.case_id)))


def rate_samples(outcome: DecodingOutcome) -> np.ndarray:
    """Per-trial ``log2(1 + SINR)`` of every decoded layer."""
    pl = np.where(outcome.pl_ok, np.log2(1 + outcome.sinr_pl), 0.0)
    sl = np.where(outcome.sl_ok, np.log2(1 + outcome.sinr_sl), 0.0)
    return pl + sl


def evaluate(stats: LinkStats, noma: NomaConfig, t_pl=None, t_sl=None) -> SimulationResult:
    """Coverage estimates for one NOMA setting on pre-sampled trials."""
    out = decode_arrays(stats.case_id, stats.signal, stats.interference, stats.dominant, stats.noise, noma, t_pl, t_sl)
    n = stats.n_trials
    shares = tuple(CoverageEstimate.from_indicator(stats.case_id == k) for k in (1, 2, 3))
    by_case = tuple(CoverageEstimate.from_indicator(out.pl_ok & (stats.case_id == k)) for k in (1, 2, 3))
    rates = rate_samples(out)
    return SimulationResult(
        p_pl=CoverageEstimate.from_indicator(out.pl_ok),
        p_psl=CoverageEstimate.from_indicator(out.sl_ok),
        case_shares=shares,
        p_pl_by_case=by_case,
        rate_samples=rates,
        outcomes=out,
        n_void=stats.n_void,
        extras={"n_trials": n},
    )


def estimate(cfg: NetworkConfig, noma: NomaConfig, n_trials: int, seed: int = 0, n_jobs: int = 1) -> SimulationResult:
    """Monte Carlo coverage, case shares and per-trial rates."""
    check(cfg, noma)
    return evaluate(sample_link_stats(cfg, n_trials, seed, n_jobs), noma)


def write_trials_csv(path, result: SimulationResult) -> None:
    """Raw per-trial dump: trial, case_id, sinr_pl, sinr_sl, pl_ok, sl_ok."""
    out = result.outcomes
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "case_id", "sinr_pl", "sinr_sl", "pl_ok", "sl_ok"])
        for k in range(out.pl_ok.size):
            w.writerow([k, int(out.case_id[k]), repr(float(out.sinr_pl[k])), repr(float(out.sinr_sl[k])), int(out.pl_ok[k]), int(out.sl_ok[k])])
