"""scikit-learn style wrappers around the coverage evaluators.

``fit`` prepares the expensive, threshold-independent state (the quadrature
model or the sampled link statistics); ``predict`` maps rows of
``[rate_pl, rate_sl]`` to coverage probabilities.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import analytic, simulator
from .config import NetworkConfig, check, defaults, rate_to_threshold


class CoverageEstimator(BaseEstimator):
    """Coverage probability as a function of the layer rates.

    Parameters
    ----------
    method : {"analytic", "sim"}
    layer : {"pl", "both"}
        Primary layer alone, or both layers jointly.
    alpha_p : float
        Power share of the primary layer.
    network : NetworkConfig or None
        Defaults to the standard two-tier parameter set.
    n_trials, seed : Monte Carlo controls (``method="sim"`` only).
    psl_mode : str
        Case-3 treatment for ``layer="both"``; see ``analytic.coverage_both_layers``.
    """

    def __init__(self, method="analytic", layer="pl", alpha_p=0.8, network=None, n_trials=10_000, seed=0, psl_mode="paper"):
        self.method = method
        self.layer = layer
        self.alpha_p = alpha_p
        self.network = network
        self.n_trials = n_trials
        self.seed = seed
        self.psl_mode = psl_mode

    def _validate_params(self):
        if self.method not in ("analytic", "sim"):
            raise ValueError(f"method must be 'analytic' or 'sim', got {self.method!r}")
        if self.layer not in ("pl", "both"):
            raise ValueError(f"layer must be 'pl' or 'both', got {self.layer!r}")
        if self.psl_mode not in analytic.PSL_MODES:
            raise ValueError(f"unknown psl_mode {self.psl_mode!r}")
        if self.network is not None and not isinstance(self.network, NetworkConfig):
            raise TypeError("network must be a NetworkConfig")

    def fit(self, X=None, y=None):
        """Build the evaluator; ``X`` and ``y`` are accepted for API symmetry and ignored."""
        self._validate_params()
        cfg, noma = defaults()
        cfg = self.network or cfg
        self.noma_ = replace(noma, alpha_p=float(self.alpha_p))
        check(cfg, self.noma_)
        self.network_ = cfg
        if self.method == "analytic":
            self.model_ = analytic.CoverageModel(cfg)
        else:
            self.stats_ = simulator.sample_link_stats(cfg, int(self.n_trials), int(self.seed))
        self.n_features_in_ = 2
        return self

    def _rates(self, X):
        X = check_array(X, ensure_min_features=1)
        if X.shape[1] > 2:
            raise ValueError(f"expected 1 or 2 columns [rate_pl, rate_sl], got {X.shape[1]}")
        if np.any(X < 0):
            raise ValueError("rates must be >= 0")
        rate_pl = X[:, 0]
        rate_sl = X[:, 1] if X.shape[1] == 2 else np.full(X.shape[0], self.noma_.rate_sl)
        return rate_pl, rate_sl

    def predict(self, X):
        return self.predict_interval(X)[0]

    def predict_interval(self, X):
        """Coverage and its error bar (quadrature error or 95% CI half-width)."""
        check_is_fitted(self, "noma_")
        rate_pl, rate_sl = self._rates(X)
        if self.method == "analytic":
            t_pl = rate_to_threshold(rate_pl)
            t_sl = rate_to_threshold(rate_sl)
            if self.layer == "pl":
                est = analytic.coverage_pl(self.model_, self.noma_, t=t_pl)
            else:
                est = analytic.coverage_both_layers(self.model_, self.noma_, t_pl=t_pl, t_sl=t_sl, mode=self.psl_mode)
            value = np.broadcast_to(np.asarray(est.value, float), rate_pl.shape).copy()
            error = np.broadcast_to(np.asarray(est.error, float), rate_pl.shape).copy()
            return value, error
        value = np.empty(rate_pl.shape)
        error = np.empty(rate_pl.shape)
        for k, (rp, rs) in enumerate(zip(rate_pl, rate_sl)):
            res = simulator.evaluate(self.stats_, replace(self.noma_, rate_pl=float(rp), rate_sl=float(rs)))
            est = res.p_pl if self.layer == "pl" else res.p_psl
            value[k], error[k] = est.value, est.half_width_95
        return value, error
