"""Average rate, MOS-based QoE and the OMA baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import analytic, simulator
from .config import NetworkConfig, NomaConfig, rate_to_threshold
from .quadrature import QuadratureSpec, integrate

# rate integrals only need to beat Monte Carlo noise (~1e-2)
_RATE_SPEC = QuadratureSpec(rel_tol=1e-3, abs_tol=5e-4, scale=3.0)
_MODEL_SPEC = QuadratureSpec(rel_tol=1e-4, abs_tol=1e-5)


@dataclass(frozen=True)
class MosCurve:
    theta1: float = 0.1
    theta4: float = 10.0
    mode: str = "continuous"

    def __post_init__(self):
        if not 0 < self.theta1 < self.theta4:
            raise ValueError("need 0 < theta1 < theta4")
        if self.mode not in ("paper", "continuous"):
            raise ValueError(f"unknown MOS mode {self.mode!r}")

    @classmethod
    def from_noma(cls, noma: NomaConfig) -> "MosCurve":
        return cls(noma.mos_theta1, noma.mos_theta4, noma.mos_mode)

    @property
    def a_coef(self) -> float:
        span = math.log(self.theta4 / self.theta1)
        return (3.5 if self.mode == "paper" else 4.0) / span

    @property
    def b_coef(self) -> float:
        ratio = self.theta4 / self.theta1
        return self.theta1 * ratio ** (1 / 3.5 if self.mode == "paper" else -0.25)


def mos(theta, curve: MosCurve = MosCurve()):
    """Piecewise-logarithmic MOS of a rate ``theta`` in bits/s/Hz.

    The ``paper`` mode coefficients do not reach 1 and 5 at the
    breakpoints, so that mode is clamped to [1, 5]; ``continuous`` meets
    both breakpoints exactly.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ValueError("theta must be >= 0")
    with np.errstate(divide="ignore"):
        mid = curve.a_coef * np.log(theta / curve.b_coef)
    out = np.where(theta <= curve.theta1, 1.0, np.where(theta >= curve.theta4, 5.0, np.clip(mid, 1.0, 5.0)))
    return float(out) if out.ndim == 0 else out


def avg_mos(p_pl, p_psl, noma: NomaConfig, curve: MosCurve | None = None, floor: bool = False):
    """Coverage-weighted MOS of PL-only and PL+SL users.

    Uncovered users get weight 0 by default; ``floor=True`` scores them 1.
    """
    curve = curve or MosCurve.from_noma(noma)
    p_pl = np.asarray(p_pl, dtype=float)
    p_psl = np.asarray(p_psl, dtype=float)
    if np.any(p_psl > p_pl + 1e-12) or np.any(p_pl > 1 + 1e-12) or np.any(p_psl < 0):
        raise ValueError("need 0 <= p_psl <= p_pl <= 1")
    out = mos(noma.rate_pl, curve) * (p_pl - p_psl) + mos(noma.rate_pl + noma.rate_sl, curve) * p_psl
    if floor:
        out = out + (1.0 - p_pl)
    return float(out) if np.ndim(out) == 0 else out


def avg_rate_sim(outcome: simulator.DecodingOutcome) -> simulator.CoverageEstimate:
    """Mean of ``log2(1 + SINR)`` over decoded layers, with a 95% CI."""
    return simulator.CoverageEstimate.from_samples(simulator.rate_samples(outcome))


def exceedance_rate(exceedance: Callable, t0: float, t_max: float = math.inf, spec: QuadratureSpec = _RATE_SPEC):
    """``E[log2(1 + Z) 1{Z >= t0}]`` from the tail ``P(Z > t)`` of Z.

    Integration by parts gives
    ``log2(1 + t0) P(Z > t0) + (1/ln 2) int_{t0}^{t_max} P(Z > t) / (1 + t) dt``,
    where ``t_max`` bounds the support of Z.  Returns ``(value, error)``.
    """
    if t0 >= t_max:
        return 0.0, 0.0
    head = math.log2(1 + t0) * float(np.atleast_1d(exceedance(np.array([t0])))[0])

    def f(t):
        return np.asarray(exceedance(t), dtype=float) / (1 + t)

    if math.isinf(t_max):
        spec = replace(spec, scale=max(spec.scale, t0))
    body, err = integrate(f, t0, t_max, spec)
    return head + body / math.log(2), err / math.log(2)


def avg_rate_analytic(cfg, noma: NomaConfig, spec=None, mode: str = "paper"):
    """Average user rate from the analytic coverage curves.

    The PL term integrates the PL coverage as a function of its threshold
    (the PL SINR never exceeds ``alpha_p / (1 - alpha_p)``); the SL term
    integrates the both-layer coverage over the SL threshold, since the SL
    is only attempted after the PL.  Returns ``(value, error)``.
    """
    model = analytic._model(cfg, spec or _MODEL_SPEC)
    a = noma.alpha_p
    t_max = a / (1 - a) if a < 1 else math.inf

    def pl(t):
        return np.atleast_1d(analytic.coverage_pl(model, noma, t=np.asarray(t)).value)

    value, err = exceedance_rate(pl, noma.t_pl, t_max)
    if a < 1:
        def both(t):
            return np.atleast_1d(analytic.coverage_both_layers(model, noma, t_sl=np.asarray(t), mode=mode).value)

        v2, e2 = exceedance_rate(both, noma.t_sl)
        value += v2
        err += e2
    return value, err


@dataclass(frozen=True)
class RateResult:
    avg_rate_noma: float
    avg_rate_oma: float
    avg_mos_noma: float
    avg_mos_oma: float
    method: str
    rate_noma_hw: float = 0.0
    rate_oma_hw: float = 0.0
    coverage_oma: float = float("nan")


def oma_baseline(cfg: NetworkConfig, noma: NomaConfig, method: str = "analytic", n_trials: int = 10_000, seed: int = 0, spec=None, floor: bool = False, n_jobs: int = 1):
    """Whole-power single-layer transmission at rate ``R_pl + R_sl``.

    Returns a dict with ``coverage``, ``avg_rate`` and ``avg_mos`` (plus
    CI half-widths for ``method="sim"``).
    """
    oma = noma.as_oma()
    curve = MosCurve.from_noma(noma)
    if method == "analytic":
        model = analytic._model(cfg, spec)
        cov = analytic.coverage_pl(model, oma)
        rate, rate_err = avg_rate_analytic(model, oma)
        out = {"coverage": float(cov.value), "coverage_error": float(cov.error), "avg_rate": rate, "avg_rate_error": rate_err}
    elif method == "sim":
        res = simulator.estimate(cfg, oma, n_trials, seed, n_jobs=n_jobs)
        rate = avg_rate_sim(res.outcomes)
        out = {
            "coverage": res.p_pl.value,
            "coverage_hw": res.p_pl.half_width_95,
            "avg_rate": rate.value,
            "avg_rate_hw": rate.half_width_95,
            "rate_samples": res.rate_samples,
            "pl_ok": res.outcomes.pl_ok,
        }
    else:
        raise ValueError(f"unknown method {method!r}")
    out["avg_mos"] = avg_mos(out["coverage"], 0.0, oma, curve, floor=floor)
    return out


def rate_threshold_pair(noma: NomaConfig):
    return rate_to_threshold(noma.rate_pl), rate_to_threshold(noma.rate_sl)
