"""Environment propensity models and overlap / inverse-probability weights."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._logistic import FeatureEncoder, as_frame, newton_logistic, with_intercept
from .exceptions import DegenerateInput

__all__ = [
    "WeightScheme",
    "PropensityConfig",
    "PropensityModel",
    "WeightVector",
    "fit_propensity",
    "compute_weights",
    "weights_from_scores",
    "uniform_weights",
    "kish_ess",
]


class WeightScheme(enum.Enum):
    OVERLAP = "ow"
    INVERSE_PROBABILITY = "ipw"


@dataclass(frozen=True)
class PropensityConfig:
    l2: float = 1e-4
    tol: float = 1e-8
    max_iter: int = 100
    holdout_fraction: float = 0.2
    seed: int = 0
    max_samples_per_env: int | None = 10_000


class PropensityModel(ClassifierMixin, BaseEstimator):
    """Logistic classifier of environment membership, ``P(S=1 | V)``.

    Fitted by Newton/IRLS on the L2-penalised negative log-likelihood.
    Held-out accuracy is measured on a seeded split; the final coefficients
    are then refit on all (possibly subsampled) rows.

    Parameters
    ----------
    l2 : float
        Ridge penalty on the non-intercept coefficients (mean-loss scale).
    tol : float
        Convergence threshold on the max absolute coefficient change.
    max_iter : int
        Newton iteration cap.
    holdout_fraction : float
        Fraction of rows held out for the accuracy diagnostic.
    seed : int
        Seed for the subsample and the holdout split.
    max_samples_per_env : int or None
        Environments larger than this are subsampled for fitting.
    """

    def __init__(self, l2=1e-4, tol=1e-8, max_iter=100, holdout_fraction=0.2, seed=0,
                 max_samples_per_env=10_000):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter
        self.holdout_fraction = holdout_fraction
        self.seed = seed
        self.max_samples_per_env = max_samples_per_env

    def _solve(self, frame, env):
        enc = FeatureEncoder().fit(frame)
        design, _ = enc.transform(frame)
        beta, n_iter, obj, converged = newton_logistic(
            with_intercept(design), env, l2=self.l2, tol=self.tol, max_iter=self.max_iter
        )
        return enc, beta, n_iter, obj, converged

    def fit(self, X, y):
        if self.l2 < 0 or self.tol <= 0 or not 0 < self.holdout_fraction < 1:
            raise ValueError("require l2 >= 0, tol > 0 and 0 < holdout_fraction < 1")
        frame = as_frame(X).reset_index(drop=True)
        env = np.asarray(y).astype(int).ravel()
        if len(env) != len(frame):
            raise ValueError("features and environment labels differ in length")
        counts = [int(np.sum(env == s)) for s in (0, 1)]
        if min(counts) < 2 or counts[0] + counts[1] != len(env):
            raise DegenerateInput(f"need >= 2 samples in each of environments 0/1, got {counts}")

        rng = np.random.default_rng(self.seed)
        keep = []
        for s in (0, 1):
            idx = np.flatnonzero(env == s)
            cap = self.max_samples_per_env
            if cap is not None and len(idx) > cap:
                idx = np.sort(rng.choice(idx, size=cap, replace=False))
            keep.append(idx)
        keep = np.concatenate(keep)
        frame, env = frame.iloc[keep].reset_index(drop=True), env[keep]

        holdout_acc = None
        perm = rng.permutation(len(env))
        n_hold = int(round(self.holdout_fraction * len(env)))
        hold, train = perm[:n_hold], perm[n_hold:]
        if n_hold > 0 and len(np.unique(env[train])) == 2:
            enc, beta, *_ = self._solve(frame.iloc[train], env[train])
            design, _ = enc.transform(frame.iloc[hold])
            pred = (with_intercept(design) @ beta) > 0
            holdout_acc = float(np.mean(pred == env[hold]))

        enc, beta, n_iter, obj, converged = self._solve(frame, env)
        train_pred = (with_intercept(enc.transform(frame)[0]) @ beta) > 0
        self.encoder_ = enc
        self.coefficients_ = beta
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:].copy()
        self.classes_ = np.array([0, 1])
        self.diagnostics_ = {
            "n_fit": int(len(env)),
            "n_iter": int(n_iter),
            "objective": obj,
            "converged": bool(converged),
            "holdout_accuracy": holdout_acc,
            "dropped_columns": list(enc.dropped),
            "perfect_separation": bool(enc.n_features > 0 and np.all(train_pred == env)),
        }
        return self

    def propensity(self, X) -> tuple[np.ndarray, int]:
        """Return ``(P(S=1|V) per row, number of rows with unseen levels)``."""
        check_is_fitted(self, "coefficients_")
        design, unseen = self.encoder_.transform(as_frame(X))
        return expit(with_intercept(design) @ self.coefficients_), unseen

    def predict_proba(self, X):
        e, _ = self.propensity(X)
        return np.column_stack([1.0 - e, e])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(int)

    def encoding_map(self) -> dict:
        check_is_fitted(self, "coefficients_")
        return {"columns": dict(self.encoder_.spec), "dropped": list(self.encoder_.dropped)}


def fit_propensity(features, env, config: PropensityConfig | None = None) -> PropensityModel:
    """Fit a :class:`PropensityModel` on blocking-set features pooled from both environments."""
    config = config or PropensityConfig()
    return PropensityModel(
        l2=config.l2,
        tol=config.tol,
        max_iter=config.max_iter,
        holdout_fraction=config.holdout_fraction,
        seed=config.seed,
        max_samples_per_env=config.max_samples_per_env,
    ).fit(features, env)


@dataclass(frozen=True)
class WeightVector:
    """Normalised per-sample weights for one environment."""

    weights: np.ndarray
    scheme: WeightScheme
    ess: float
    n_unseen: int = 0
    raw: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.weights)


def kish_ess(w) -> float:
    w = np.asarray(w, dtype=float)
    return float(w.sum() ** 2 / np.sum(w * w))


def weights_from_scores(scores, env_value: int, scheme, clip: float = 0.01, n_unseen: int = 0) -> WeightVector:
    """Turn propensity scores ``e = P(S=1|V)`` of one environment into weights.

    Overlap weights use the probability of the opposite environment
    (``e`` for environment 0, ``1 - e`` for environment 1); inverse
    probability weights use ``1/(1-e)`` and ``1/e``.
    """
    scheme = WeightScheme(scheme)
    if not 0 < clip < 0.5:
        raise ValueError("clip must lie in (0, 0.5)")
    if env_value not in (0, 1):
        raise ValueError("env_value must be 0 or 1")
    e = np.clip(np.asarray(scores, dtype=float), clip, 1.0 - clip)
    if scheme is WeightScheme.OVERLAP:
        raw = e if env_value == 0 else 1.0 - e
    else:
        raw = 1.0 / (1.0 - e) if env_value == 0 else 1.0 / e
    if len(raw) == 0:
        raise DegenerateInput("no samples to weight")
    return WeightVector(raw / raw.sum(), scheme, kish_ess(raw), n_unseen, raw)


def compute_weights(model: PropensityModel, features, env_value: int, scheme, clip: float = 0.01) -> WeightVector:
    e, unseen = model.propensity(features)
    return weights_from_scores(e, env_value, scheme, clip, n_unseen=unseen)


def uniform_weights(n: int, scheme=WeightScheme.OVERLAP) -> WeightVector:
    if n < 1:
        raise DegenerateInput("no samples to weight")
    raw = np.ones(n)
    return WeightVector(raw / n, WeightScheme(scheme), float(n), 0, raw)
