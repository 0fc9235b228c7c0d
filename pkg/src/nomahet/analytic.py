"""Quadrature evaluation of the closed-form coverage expressions.

The typical user sits at the origin.  Base stations of tier U in link state
j (LOS or NLOS) form independent thinned PPPs with intensity
``lambda_U * p_Uj(t)``, so the strongest-link geometry reduces to void
probabilities and every interference field contributes a Laplace exponent

    G(s, r0) = 2 pi lambda  int_{r0}^inf F(N, s K t^-alpha / N) p(t) t dt,

with ``F(N, x) = 1 - (1 + x)^-N`` and ``K`` the normalized transmit power
times the reference gain.  The serving Nakagami tail is approximated by the
alternating binomial sum with coefficient ``eta_N = N (N!)^(-1/N)``, which is
exact for N = 1.

Association uses long-term received power.  An interferer of class c is
excluded from the disk in which it would beat the serving link:

* same tier as the server:  ``K_c r^-alpha_c < L``
* other tier, serving SBS:  ``K_c r^-alpha_c < kappa L`` with kappa = 1 in
  case 1 and kappa = b for the union of cases 1 and 3
* other tier, serving MBS:  ``b K_c r^-alpha_c < L`` (kappa = 1 / b)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import hyp2f1

from .channel import alzer_eta, alzer_F
from .config import NetworkConfig, NomaConfig
from .quadrature import (
    QuadratureError,
    QuadratureSpec,
    composite_gauss_legendre,
    integrate,
    integrate_batch,
)

log = logging.getLogger(__name__)

PSL_MODES = ("paper", "direct", "verbatim")

# e^-60 is below anything that matters for a probability
_DAMPING_CUTOFF = 60.0
_RADIAL_NODES, _RADIAL_WEIGHTS = composite_gauss_legendre(12, 8)


def effective_threshold(alpha_p, t):
    """Threshold on ``H L / (I + noise)`` equivalent to PL SINR >= t.

    Returns ``inf`` where ``alpha_p - (1 - alpha_p) t <= 0`` (the primary
    layer can never be decoded).
    """
    alpha_p = np.asarray(alpha_p, dtype=float)
    t = np.asarray(t, dtype=float)
    gap = alpha_p - (1.0 - alpha_p) * t
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(gap > 0, t / np.where(gap > 0, gap, 1.0), np.inf)
    return float(out) if out.ndim == 0 else out


def secondary_threshold(alpha_p, t_sl):
    """Threshold on ``H L / (I + noise)`` equivalent to SL SINR >= t_sl."""
    alpha_p = np.asarray(alpha_p, dtype=float)
    t_sl = np.asarray(t_sl, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(alpha_p < 1, t_sl / np.where(alpha_p < 1, 1.0 - alpha_p, 1.0), np.inf)
    return float(out) if out.ndim == 0 else out


def alpha_star(t_pl, t_sl):
    """Power split at which the PL and SL decoding conditions coincide.

    For ``alpha_p <= alpha_star`` PL success implies SL success.
    """
    t_pl = np.asarray(t_pl, dtype=float)
    t_sl = np.asarray(t_sl, dtype=float)
    out = t_pl * (1 + t_sl) / (t_sl + t_pl * (1 + t_sl))
    return float(out) if out.ndim == 0 else out


def both_layer_threshold(alpha_p, t_pl, t_sl):
    """Effective threshold of the joint PL+SL event, selected by ``alpha_star``."""
    tp = np.broadcast_to(effective_threshold(alpha_p, t_pl), np.broadcast(alpha_p, t_pl, t_sl).shape)
    ts = np.broadcast_to(secondary_threshold(alpha_p, t_sl), tp.shape)
    out = np.where(np.asarray(alpha_p) <= alpha_star(t_pl, t_sl), tp, ts)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LinkClass:
    """One interferer/server population: a tier in a given LOS state."""

    tier: str
    los: bool
    density: float
    power: float  # normalized tx power times reference gain
    alpha: float
    shape: int
    beta: float

    @cached_property
    def eta(self) -> float:
        return alzer_eta(self.shape)

    def radius(self, received):
        """Distance at which this class delivers long-term power ``received``."""
        return (self.power / np.asarray(received, dtype=float)) ** (1.0 / self.alpha)

    def received(self, d):
        return self.power * np.asarray(d, dtype=float) ** (-self.alpha)

    def p(self, t):
        los = np.exp(-self.beta * np.asarray(t, dtype=float))
        return los if self.los else 1.0 - los

    def void(self, r):
        """Mean number of points of this class inside the disk of radius r."""
        r = np.asarray(r, dtype=float)
        if self.density == 0:
            return np.zeros_like(r)
        disk = math.pi * self.density * r * r
        if self.beta == 0:
            return disk if self.los else np.zeros_like(r)
        u = self.beta * r
        los = 2 * math.pi * self.density / self.beta**2 * (-np.expm1(-u) - u * np.exp(-u))
        return los if self.los else disk - los

    def laplace(self, s, r0):
        """Interference Laplace exponent for ``exp(-s * I)`` outside radius r0.

        ``s`` and ``r0`` broadcast together.
        """
        s = np.asarray(s, dtype=float)
        r0 = np.asarray(r0, dtype=float)
        if self.density == 0:
            return np.zeros(np.broadcast(s, r0).shape)
        c = s * self.power / self.shape
        if self.beta == 0:
            core = _undamped(self.shape, self.alpha, c, r0)
            if not self.los:
                core = np.zeros_like(core)
        else:
            damped = _damped(self.shape, self.alpha, self.beta, c, r0)
            if self.los:
                core = damped
            else:
                core = _undamped(self.shape, self.alpha, c, r0) - damped
        return 2 * math.pi * self.density * np.maximum(core, 0.0)


def _undamped(n, alpha, c, r0):
    """int_{r0}^inf F(n, c t^-alpha) t dt in closed form."""
    c, r0 = np.broadcast_arrays(np.asarray(c, float), np.asarray(r0, float))
    delta = 2.0 / alpha
    out = np.empty(c.shape)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        z = c * r0 ** (-alpha)
    big = z > 1e8
    small = z < 1e-3
    mid = ~(big | small)
    # far-field limit, exact up to O(z^-n)
    k = gamma_fn(1 - delta) * gamma_fn(n + delta) / gamma_fn(n)
    out[big] = 0.5 * k * c[big] ** delta - 0.5 * r0[big] ** 2
    out[mid] = 0.5 * r0[mid] ** 2 * (hyp2f1(n, -delta, 1 - delta, -z[mid]) - 1.0)
    # power series of 2F1(n, -delta; 1 - delta; -z) - 1
    zs = z[small]
    term = np.ones_like(zs)
    acc = np.zeros_like(zs)
    for j in range(6):
        term = term * (n + j) * (-delta + j) / ((1 - delta + j) * (j + 1)) * (-zs)
        acc += term
    out[small] = 0.5 * r0[small] ** 2 * acc
    return out


def _damped(n, alpha, beta, c, r0):
    """int_{r0}^inf F(n, c t^-alpha) exp(-beta t) t dt on a log-spaced grid."""
    c, r0 = np.broadcast_arrays(np.asarray(c, float), np.asarray(r0, float))
    shape = c.shape
    c = c.reshape(-1, 1)
    r0 = r0.reshape(-1, 1)
    vmax = np.log1p(_DAMPING_CUTOFF / (beta * r0))
    v = vmax * _RADIAL_NODES[None, :]
    t = r0 * np.exp(v)
    with np.errstate(over="ignore"):
        z = c * t ** (-alpha)
    f = alzer_F(n, z) * np.exp(-beta * t) * t * t
    out = (f * _RADIAL_WEIGHTS[None, :]).sum(axis=1) * vmax[:, 0]
    return out.reshape(shape)


def link_classes(cfg: NetworkConfig) -> dict[tuple[str, bool], LinkClass]:
    out = {}
    for tier, params, tx in (
        ("small", cfg.small, 1.0),
        ("macro", cfg.macro, cfg.power_ratio_m),
    ):
        for los in (True, False):
            out[(tier, los)] = LinkClass(
                tier=tier,
                los=los,
                density=params.density,
                power=tx * params.c(los),
                alpha=params.alpha(los),
                shape=int(params.shape(los)),
                beta=params.beta,
            )
    return out


def _binomial_terms(shape):
    n = np.arange(1, shape + 1)
    coef = np.array([(-1) ** (k + 1) * math.comb(shape, k) for k in n], dtype=float)
    return n.astype(float), coef


@dataclass(frozen=True)
class Estimate:
    """Quadrature value with its error estimate; arrays for vector thresholds."""

    value: float | np.ndarray
    error: float | np.ndarray
    parts: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


_DEFAULT_SPEC = QuadratureSpec(rel_tol=1e-5, abs_tol=1e-6)


class CoverageModel:
    """Evaluates coverage terms for one network configuration.

    Thresholds passed to the methods are *effective* thresholds on
    ``H L / (I + noise)``; the public functions below translate PL/SL
    targets into them.
    """

    def __init__(self, cfg: NetworkConfig, spec: QuadratureSpec | None = None):
        self.cfg = cfg
        self.spec = spec or _DEFAULT_SPEC
        self.classes = link_classes(cfg)
        self.noise = cfg.noise_normalized
        self.bias = cfg.bias_b
        self.m = cfg.power_ratio_m
        self.warned: set = set()

    def _scale(self, tier):
        lam = getattr(self.cfg, tier).density
        return 0.5 / math.sqrt(lam) if lam > 0 else 100.0

    def _integrate(self, f, scale):
        spec = QuadratureSpec(
            rel_tol=self.spec.rel_tol,
            abs_tol=self.spec.abs_tol,
            max_depth=self.spec.max_depth,
            transform=self.spec.transform,
            scale=scale,
            max_intervals=self.spec.max_intervals,
        )
        return integrate(f, 0.0, math.inf, spec)

    # -- serving link in a single tier ---------------------------------------

    def single(self, tier: str, kappa: float, teff) -> Estimate:
        """P(serving tier ``tier``, decodable at ``teff``, other tier below kappa L).

        Summed over the serving link state.  ``teff`` may be an array; ``0``
        gives the association probability itself.
        """
        teff = np.atleast_1d(np.asarray(teff, dtype=float))
        value = np.zeros(teff.shape)
        error = np.zeros(teff.shape)
        ok = np.isfinite(teff)
        parts = {}
        if ok.any() and getattr(self.cfg, tier).density > 0:
            for los in (True, False):
                f = self._single_integrand(tier, los, kappa, teff[ok])
                v, e = self._integrate(f, self._scale(tier))
                value[ok] += v
                error[ok] += e
                parts["los" if los else "nlos"] = v
        return Estimate(_squeeze(value), _squeeze(error), parts)

    def _single_integrand(self, tier, los, kappa, teff):
        sv = self.classes[(tier, los)]
        others = [c for key, c in self.classes.items() if key != (tier, los)]
        n, coef = _binomial_terms(sv.shape)
        noise = self.noise

        def f(x):
            x = np.asarray(x, dtype=float)
            lv = sv.received(x)
            radii = [
                c.radius(lv) if c.tier == tier else c.radius(kappa * lv)
                for c in others
            ]
            void = sv.void(x) + sum(c.void(r) for c, r in zip(others, radii))
            density = 2 * math.pi * sv.density * x * sv.p(x) * np.exp(-void)
            # s has shape (nx, nn, nT)
            s = n[None, :, None] * sv.eta * teff[None, None, :] / lv[:, None, None]
            expo = s * noise + sv.laplace(s, x[:, None, None])
            for c, r in zip(others, radii):
                expo = expo + c.laplace(s, r[:, None, None])
            terms = (coef[None, :, None] * np.exp(-expo)).sum(axis=1)
            return density[:, None] * terms

        return f

    # -- case 3 after cancelling the dominant macro --------------------------

    def cancelled(self, teff) -> Estimate:
        """P(case 3, PL decodable at ``teff`` once the strongest MBS is removed)."""
        teff = np.atleast_1d(np.asarray(teff, dtype=float))
        value = np.zeros(teff.shape)
        error = np.zeros(teff.shape)
        ok = np.isfinite(teff)
        parts = {}
        if ok.any() and self.cfg.small.density > 0 and self.cfg.macro.density > 0 and self.bias > 1:
            for los in (True, False):
                f = self._cancelled_integrand(los, teff[ok])
                v, e = self._integrate(f, self._scale("small"))
                value[ok] += v
                error[ok] += e
                parts["los" if los else "nlos"] = v
        return Estimate(_squeeze(value), _squeeze(error), parts)

    def _cancelled_integrand(self, los, teff):
        sv = self.classes[("small", los)]
        sbar = self.classes[("small", not los)]
        n, coef = _binomial_terms(sv.shape)
        noise = self.noise
        bias = self.bias
        inner_spec = QuadratureSpec(
            rel_tol=self.spec.rel_tol * 1e-2, abs_tol=self.spec.abs_tol * 1e-2
        )

        def f(x):
            x = np.asarray(x, dtype=float)
            lv = sv.received(x)
            r_sbar = sbar.radius(lv)
            density_s = (
                2 * math.pi * sv.density * x * sv.p(x)
                * np.exp(-sv.void(x) - sbar.void(r_sbar))
            )
            s = n[None, :, None] * sv.eta * teff[None, None, :] / lv[:, None, None]
            expo_s = (
                s * noise
                + sv.laplace(s, x[:, None, None])
                + sbar.laplace(s, r_sbar[:, None, None])
            )
            acc = np.zeros(s.shape)
            for dom_los in (True, False):
                dom = self.classes[("macro", dom_los)]
                other = self.classes[("macro", not dom_los)]
                r_lo = dom.radius(bias * lv)
                r_hi = dom.radius(lv)

                def g(r, rows, dom=dom, other=other):
                    # r: (rows, npts)
                    pw = dom.received(r)
                    r_other = other.radius(pw)
                    dens = (
                        2 * math.pi * dom.density * r * dom.p(r)
                        * np.exp(-dom.void(r) - other.void(r_other))
                    )
                    sr = s[rows][:, None, :, :]  # (rows, 1, nn, nT)
                    lap = dom.laplace(sr, r[:, :, None, None]) + other.laplace(
                        sr, r_other[:, :, None, None]
                    )
                    out = dens[:, :, None, None] * np.exp(-lap)
                    return out.reshape(out.shape[0], out.shape[1], -1)

                vals, _ = integrate_batch(g, r_lo, r_hi, inner_spec)
                acc = acc + vals.reshape(s.shape)
            terms = (coef[None, :, None] * np.exp(-expo_s) * acc).sum(axis=1)
            return density_s[:, None] * terms

        return f

    # -- association probabilities -------------------------------------------

    def case_probabilities(self) -> np.ndarray:
        p1 = float(self.single("small", 1.0, 0.0).value)
        p13 = float(self.single("small", self.bias, 0.0).value)
        p2 = float(self.single("macro", 1.0 / self.bias, 0.0).value)
        return np.array([p1, p2, p13 - p1])


def _squeeze(a):
    a = np.asarray(a)
    return float(a[0]) if a.shape == (1,) else a


def _clamp(value, what):
    v = np.asarray(value, dtype=float)
    if np.any(v > 1 + 1e-6):
        log.warning("%s exceeds 1 by %.3g; clamped", what, float(np.max(v) - 1))
    if np.any(v < -1e-6):
        log.warning("%s is negative (%.3g); clamped to 0", what, float(np.min(v)))
    out = np.clip(v, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _model(cfg, spec):
    return cfg if isinstance(cfg, CoverageModel) else CoverageModel(cfg, spec)


def _t(noma, t):
    return noma.t_pl if t is None else t


# --- public operations -------------------------------------------------------


def coverage_case1(cfg, noma: NomaConfig, t=None, spec=None) -> Estimate:
    """PL coverage jointly with association case 1 (SBS strongest outright)."""
    model = _model(cfg, spec)
    teff = effective_threshold(noma.alpha_p, _t(noma, t))
    est = model.single("small", 1.0, teff)
    return Estimate(_clamp(est.value, "case-1 coverage"), est.error, est.parts)


def coverage_case2(cfg, noma: NomaConfig, t=None, spec=None) -> Estimate:
    """PL coverage jointly with case 2 (MBS beats the biased SBS)."""
    model = _model(cfg, spec)
    teff = effective_threshold(noma.alpha_p, _t(noma, t))
    est = model.single("macro", 1.0 / model.bias, teff)
    return Estimate(_clamp(est.value, "case-2 coverage"), est.error, est.parts)


def coverage_case3(cfg, noma: NomaConfig, t=None, spec=None) -> Estimate:
    """PL coverage jointly with case 3 (cell-range-expansion region).

    ``parts`` holds ``direct`` (decoded without cancellation), ``cancelled``
    (decodable once the dominant MBS is removed) and ``after_sic`` (the
    extra mass attributed to cancellation).
    """
    model = _model(cfg, spec)
    teff = effective_threshold(noma.alpha_p, _t(noma, t))
    union = model.single("small", model.bias, teff)
    first = model.single("small", 1.0, teff)
    direct = np.asarray(union.value) - np.asarray(first.value)
    if noma.sic_enabled:
        cancelled = model.cancelled(teff)
        extra = np.asarray(cancelled.value) - direct
        if np.any(extra < -1e-6):
            log.warning("negative post-cancellation term (%.3g); clamped to 0", float(np.min(extra)))
        extra = np.maximum(extra, 0.0)
        error = np.asarray(union.error) + first.error + cancelled.error
        cancelled_value = cancelled.value
    else:
        extra = np.zeros_like(direct)
        error = np.asarray(union.error) + first.error
        cancelled_value = np.full_like(direct, np.nan)
    value = _clamp(direct + extra, "case-3 coverage")
    parts = {
        "direct": _squeeze(np.atleast_1d(direct)),
        "cancelled": _squeeze(np.atleast_1d(cancelled_value)),
        "after_sic": _squeeze(np.atleast_1d(extra)),
    }
    return Estimate(value, _squeeze(np.atleast_1d(error)), parts)


def coverage_pl(cfg, noma: NomaConfig, t=None, spec=None) -> Estimate:
    """Primary-layer coverage summed over the three association cases."""
    model = _model(cfg, spec)
    c1 = coverage_case1(model, noma, t)
    c2 = coverage_case2(model, noma, t)
    c3 = coverage_case3(model, noma, t)
    value = np.asarray(c1.value) + c2.value + c3.value
    error = np.asarray(c1.error) + c2.error + c3.error
    parts = {"case1": c1.value, "case2": c2.value, "case3": c3.value, **{f"case3_{k}": v for k, v in c3.parts.items()}}
    return Estimate(_clamp(value, "PL coverage"), _squeeze(np.atleast_1d(error)), parts)


def coverage_both_layers(
    cfg, noma: NomaConfig, t_pl=None, t_sl=None, spec=None, mode: str = "paper"
) -> Estimate:
    """Probability that both layers are decoded.

    Branches without cancellation (cases 1, 2 and direct decoding in case 3)
    use the joint threshold selected by :func:`alpha_star`.  The
    cancellation branch of case 3 depends on ``mode``:

    ``paper``     P(A) - P(not C) / P(A) - P(not D): the post-cancellation
                  joint event minus the directly decodable mass
    ``direct``    case-3 total equals the post-cancellation joint event
    ``verbatim``  P(A) - P(C) / P(A) - P(D) as printed (clamped at 0)
    """
    if mode not in PSL_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    model = _model(cfg, spec)
    t_pl = noma.t_pl if t_pl is None else t_pl
    t_sl = noma.t_sl if t_sl is None else t_sl
    a = noma.alpha_p
    t_pl_b, t_sl_b = np.broadcast_arrays(np.asarray(t_pl, float), np.asarray(t_sl, float))
    tp = np.atleast_1d(effective_threshold(a, t_pl_b))
    tb = np.atleast_1d(both_layer_threshold(a, t_pl_b, t_sl_b))
    if a >= 1:
        zero = _squeeze(np.zeros(tb.shape))
        return Estimate(zero, zero, {"case1": zero, "case2": zero, "case3": zero})
    b1 = model.single("small", 1.0, tb)
    b2 = model.single("macro", 1.0 / model.bias, tb)
    b13 = model.single("small", model.bias, tb)
    direct3 = np.atleast_1d(b13.value) - np.atleast_1d(b1.value)
    error = np.atleast_1d(b1.error) + np.atleast_1d(b2.error) + np.atleast_1d(b13.error)
    sic = np.zeros_like(direct3)
    if noma.sic_enabled:
        cd = model.cancelled(tb)
        error = error + np.atleast_1d(cd.error)
        if mode in ("paper", "verbatim"):
            pa13 = model.single("small", model.bias, tp)
            pa1 = model.single("small", 1.0, tp)
            p30 = np.atleast_1d(pa13.value) - np.atleast_1d(pa1.value)
            error = error + np.atleast_1d(pa13.error) + np.atleast_1d(pa1.error)
            if mode == "paper":
                sic = np.atleast_1d(cd.value) - p30
            else:
                case3 = model.case_probabilities()[2]
                sic = (case3 - p30) - np.atleast_1d(cd.value)
            # routinely negative in paper mode once the joint threshold
            # exceeds the PL one, so report once per model
            if np.any(sic < -1e-6) and mode not in model.warned:
                model.warned.add(mode)
                log.warning("negative cancellation-branch probability (%.3g); clamped to 0", float(np.min(sic)))
            sic = np.maximum(sic, 0.0)
            case3_total = direct3 + sic
        else:
            case3_total = np.maximum(np.atleast_1d(cd.value), direct3)
            sic = case3_total - direct3
    else:
        case3_total = direct3
    total = np.atleast_1d(b1.value) + np.atleast_1d(b2.value) + case3_total
    parts = {
        "case1": _squeeze(np.atleast_1d(b1.value)),
        "case2": _squeeze(np.atleast_1d(b2.value)),
        "case3": _squeeze(case3_total),
        "case3_direct": _squeeze(direct3),
        "case3_sic": _squeeze(sic),
    }
    return Estimate(_clamp(_squeeze(total), "both-layer coverage"), _squeeze(error), parts)


def case_probabilities(cfg, spec=None) -> np.ndarray:
    """Association probabilities of cases 1, 2, 3."""
    return _model(cfg, spec).case_probabilities()


__all__ = [
    "CoverageModel",
    "Estimate",
    "LinkClass",
    "PSL_MODES",
    "QuadratureError",
    "alpha_star",
    "alzer_F",
    "alzer_eta",
    "both_layer_threshold",
    "case_probabilities",
    "coverage_both_layers",
    "coverage_case1",
    "coverage_case2",
    "coverage_case3",
    "coverage_pl",
    "effective_threshold",
    "link_classes",
    "secondary_threshold",
]
