"""Single-link channel model: exponential blockage, LOS/NLOS path loss and
Nakagami-m power fading."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import TierParams


@dataclass(frozen=True)
class LinkState:
    distance_m: float
    los: bool
    tier: str  # "macro" | "small"
    fading_h: float


def p_los(beta, d):
    """Probability that a link of length ``d`` is line-of-sight."""
    return np.exp(-np.multiply(beta, d))


def p_nlos(beta, d):
    return 1.0 - p_los(beta, d)


def path_loss(tier: TierParams, los, d):
    """Linear gain ``c * d**-alpha``; ``los`` may be a boolean array."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path loss is singular at d <= 0")
    los = np.asarray(los, dtype=bool)
    c = np.where(los, tier.c_los, tier.c_nlos)
    alpha = np.where(los, tier.alpha_los, tier.alpha_nlos)
    out = c * d ** (-alpha)
    return float(out) if out.ndim == 0 else out


def sample_fading(shape_n, rng: np.random.Generator, size=None):
    """Normalized Gamma draws (shape ``n``, scale ``1/n``): mean 1, variance 1/n.

    Integer shapes use the exact product form ``-log(U_1 ... U_n)`` of a
    Gamma(n) variable, several times faster than the generic sampler.
    """
    if np.ndim(shape_n) == 0 and float(shape_n).is_integer():
        n = int(shape_n)
        if n < 1:
            raise ValueError("Nakagami shape must be >= 1")
        count = 1 if size is None else size
        u = 1.0 - rng.random((n, int(np.prod(count, dtype=int))))
        draws = -np.log(u.prod(axis=0)) / n
        return float(draws[0]) if size is None else draws.reshape(count)
    shape_n = np.asarray(shape_n)
    if np.any(shape_n < 1):
        raise ValueError("Nakagami shape must be >= 1")
    return rng.standard_gamma(shape_n, size=size) / shape_n


def gamma_ccdf(shape_n: int, x):
    """Exact tail P(H > x) of a normalized Gamma variable with integer shape."""
    if shape_n < 1 or int(shape_n) != shape_n:
        raise ValueError("shape must be a positive integer")
    nx = shape_n * np.asarray(x, dtype=float)
    term = np.ones_like(nx)
    total = np.ones_like(nx)
    for k in range(1, int(shape_n)):
        term = term * nx / k
        total = total + term
    out = np.exp(-nx) * total
    return float(out) if out.ndim == 0 else out


def alzer_eta(shape_n: int) -> float:
    """Coefficient ``n * (n!)**(-1/n)`` of the Gamma tail approximation."""
    return shape_n * math.factorial(shape_n) ** (-1.0 / shape_n)


def alzer_F(shape_n: int, x):
    """``1 - (1 + x)**-n``: Laplace-exponent kernel of a Gamma-faded interferer."""
    x = np.asarray(x, dtype=float)
    out = -np.expm1(-shape_n * np.log1p(x))
    return float(out) if out.ndim == 0 else out
