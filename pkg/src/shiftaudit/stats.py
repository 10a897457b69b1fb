"""Weighted Welch t-test and Bonferroni correction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .exceptions import EmptyInput, InsufficientEffectiveSamples
from .weighting import WeightVector, kish_ess

__all__ = ["TestResult", "weighted_welch_ttest", "bonferroni"]


@dataclass(frozen=True)
class TestResult:
    statistic: float
    df: float
    p_value: float
    means: tuple[float, float]
    ess: tuple[float, float]

    __test__ = False  # keep pytest from collecting this class


def _normalised(x, w):
    x = np.asarray(x, dtype=float)
    if isinstance(w, WeightVector):
        raw = w.raw if w.raw is not None else w.weights
        ess = w.ess
    else:
        raw = np.asarray(w, dtype=float)
        ess = kish_ess(raw)
    if x.shape != raw.shape:
        raise ValueError(f"values ({x.shape}) and weights ({raw.shape}) differ in shape")
    return x, raw / raw.sum(), ess


def weighted_welch_ttest(x0, w0, x1, w1) -> TestResult:
    """Two-sided Welch test of equal weighted means.

    Variances carry a Kish effective-sample-size correction,
    ``v = sum w (x - m)^2 * n_eff / (n_eff - 1)``, and ``n_eff`` replaces the
    sample size in the standard error and in the Welch-Satterthwaite degrees
    of freedom. With uniform weights this is the textbook Welch test.

    Degenerate case: zero variance on both sides gives ``p = 1`` when the
    means agree and ``p = 0`` otherwise.
    """
    x0, w0, n0 = _normalised(x0, w0)
    x1, w1, n1 = _normalised(x1, w1)
    if n0 <= 1 or n1 <= 1:
        raise InsufficientEffectiveSamples(f"effective sample sizes {n0:.3g}, {n1:.3g} must exceed 1")
    m0 = float(w0 @ x0)
    m1 = float(w1 @ x1)
    v0 = float(w0 @ (x0 - m0) ** 2) * n0 / (n0 - 1.0)
    v1 = float(w1 @ (x1 - m1) ** 2) * n1 / (n1 - 1.0)
    a, b = v0 / n0, v1 / n1
    se2 = a + b
    if se2 <= 0.0:
        df = n0 + n1 - 2.0
        if m0 == m1:
            return TestResult(0.0, df, 1.0, (m0, m1), (n0, n1))
        return TestResult(float(np.copysign(np.inf, m0 - m1)), df, 0.0, (m0, m1), (n0, n1))
    t = (m0 - m1) / np.sqrt(se2)
    # scale by the larger term so tiny variances do not underflow when squared
    s = max(a, b)
    ra, rb = a / s, b / s
    df = (ra + rb) ** 2 / (ra * ra / (n0 - 1.0) + rb * rb / (n1 - 1.0))
    p = float(min(1.0, 2.0 * sps.t.sf(abs(t), df)))
    return TestResult(float(t), float(df), p, (m0, m1), (n0, n1))


def bonferroni(p_values, alpha: float = 0.05) -> np.ndarray:
    """Reject ``p_i`` when ``p_i < alpha / k``."""
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size == 0:
        raise EmptyInput("no p-values given")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("p-values must lie in [0, 1]")
    return p < alpha / p.size
