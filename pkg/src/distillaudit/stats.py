"""Small numeric helpers used throughout the package."""

from __future__ import annotations

import numpy as np
from scipy import special
from scipy.stats import rankdata

from .errors import DegenerateStatisticsError


def sigmoid(z: np.ndarray) -> np.ndarray:
    return special.expit(z)


def logit(p: np.ndarray) -> np.ndarray:
    return special.logit(p)


def clamp_probability(p: np.ndarray, eps: float) -> np.ndarray:
    """Clamp probabilities into [eps, 1 - eps] so their logit is finite."""
    return np.clip(p, eps, 1.0 - eps)


def bernoulli_loglik(y: np.ndarray, logits: np.ndarray) -> float:
    """Sum of per-row Bernoulli log-likelihoods at the given logits."""
    return float(np.sum(y * special.log_expit(logits) + (1.0 - y) * special.log_expit(-logits)))


def mean_nll(y: np.ndarray, logits: np.ndarray) -> float:
    """Mean negative Bernoulli log-likelihood (the classification training loss)."""
    return -bernoulli_loglik(y, logits) / len(y)


def pseudo_residuals(y: np.ndarray, logits: np.ndarray) -> np.ndarray:
    """Boosting pseudo-residuals for the Bernoulli log-likelihood: y - sigmoid(logits).

    These equal the per-row gradient of :func:`bernoulli_loglik` with respect
    to the logits, which is what each boosting round fits.
    """
    return y - sigmoid(logits)


def rmse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.mean((np.asarray(a, float) - np.asarray(b, float)) ** 2)))


def auc(y: np.ndarray, scores: np.ndarray) -> float:
    """Area under the ROC curve via the rank statistic, ties averaged.

    Raises DegenerateStatisticsError when only one class is present.
    """
    y = np.asarray(y)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise DegenerateStatisticsError("AUC undefined: single outcome class")
    ranks = rankdata(scores)
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def weighted_line_fit(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> tuple[float, float, float]:
    """Weighted least-squares line y ~ a*x + b.

    Returns (slope, intercept, weighted RMSE of the residuals). Degenerate x
    (a single distinct value) yields slope 0 and the weighted mean as intercept.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.asarray(w, float)
    sw = w.sum()
    xm = float(np.dot(w, x) / sw)
    ym = float(np.dot(w, y) / sw)
    sxx = float(np.dot(w, (x - xm) ** 2))
    if sxx <= 0.0:
        slope = 0.0
    else:
        slope = float(np.dot(w, (x - xm) * (y - ym)) / sxx)
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    return slope, intercept, float(np.sqrt(np.dot(w, resid**2) / sw))
