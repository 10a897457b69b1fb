"""Feature encoding and a Newton/IRLS solver for L2-penalised logistic regression."""

from __future__ import annotations

import numpy as np
import pandas as pd
from scipy.special import expit

from .exceptions import EncodingMismatch


def _is_categorical(series: pd.Series) -> bool:
    return not (pd.api.types.is_numeric_dtype(series) or pd.api.types.is_bool_dtype(series))


class FeatureEncoder:
    """One-hot encodes categorical columns and standardises numeric ones.

    The reference level of a categorical column is its lexicographically
    first level. Constant columns are dropped and listed in ``dropped``.
    """

    def __init__(self):
        self.columns: list[str] = []
        self.spec: dict[str, dict] = {}
        self.dropped: list[str] = []

    def fit(self, frame: pd.DataFrame) -> "FeatureEncoder":
        self.columns = [str(c) for c in frame.columns]
        self.spec = {}
        self.dropped = []
        for col in frame.columns:
            s = frame[col]
            if _is_categorical(s):
                levels = sorted({str(v) for v in s})
                if len(levels) < 2:
                    self.dropped.append(str(col))
                    continue
                self.spec[str(col)] = {"kind": "categorical", "reference": levels[0], "levels": levels[1:]}
            else:
                x = s.to_numpy(dtype=float)
                sd = float(x.std())
                if not sd > 0:
                    self.dropped.append(str(col))
                    continue
                self.spec[str(col)] = {"kind": "numeric", "mean": float(x.mean()), "std": sd}
        return self

    @property
    def n_features(self) -> int:
        return sum(len(s["levels"]) if s["kind"] == "categorical" else 1 for s in self.spec.values())

    def transform(self, frame: pd.DataFrame) -> tuple[np.ndarray, int]:
        """Return ``(design, n_unseen)``; unseen levels encode as all zeros."""
        missing = [c for c in self.columns if c not in frame.columns]
        if missing:
            raise EncodingMismatch(f"features lack encoded column(s): {', '.join(missing)}")
        blocks = []
        unseen = 0
        for col, spec in self.spec.items():
            s = frame[col]
            if spec["kind"] == "numeric":
                if _is_categorical(s):
                    raise EncodingMismatch(f"column {col!r} was numeric at fit time")
                blocks.append(((s.to_numpy(dtype=float) - spec["mean"]) / spec["std"])[:, None])
            else:
                vals = s.astype(str).to_numpy()
                known = set(spec["levels"]) | {spec["reference"]}
                unseen += int(sum(v not in known for v in vals))
                blocks.append(np.column_stack([vals == lvl for lvl in spec["levels"]]).astype(float))
        if not blocks:
            return np.zeros((len(frame), 0)), unseen
        return np.hstack(blocks), unseen


def as_frame(features, prefix: str = "v") -> pd.DataFrame:
    if isinstance(features, pd.DataFrame):
        return features
    if isinstance(features, pd.Series):
        return features.to_frame()
    arr = np.asarray(features)
    if arr.ndim == 1:
        arr = arr[:, None]
    return pd.DataFrame(arr, columns=[f"{prefix}{i}" for i in range(arr.shape[1])])


def _objective(design, y, beta, l2):
    eta = design @ beta
    nll = np.mean(np.logaddexp(0.0, eta) - y * eta)
    return nll + 0.5 * l2 * float(beta[1:] @ beta[1:])


def newton_logistic(design: np.ndarray, y: np.ndarray, l2: float = 1e-4, tol: float = 1e-8, max_iter: int = 100):
    """Minimise mean negative log-likelihood plus ``l2/2 * ||beta[1:]||^2``.

    ``design`` must carry the intercept in column 0 (left unpenalised).
    Returns ``(beta, n_iter, objective, converged)``.
    """
    n, d = design.shape
    y = np.asarray(y, dtype=float)
    beta = np.zeros(d)
    penalty = np.full(d, l2)
    penalty[0] = 0.0
    obj = _objective(design, y, beta, l2)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(design @ beta)
        grad = design.T @ (p - y) / n + penalty * beta
        hess = (design * (p * (1.0 - p))[:, None]).T @ design / n + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        # step halving keeps the objective monotone under near-separation
        t = 1.0
        while True:
            cand = beta - t * step
            cand_obj = _objective(design, y, cand, l2)
            if cand_obj <= obj + 1e-12 or t < 1e-10:
                break
            t *= 0.5
        change = np.max(np.abs(cand - beta)) if d else 0.0
        beta, obj = cand, cand_obj
        if change < tol:
            converged = True
            break
    return beta, it, float(obj), converged


def with_intercept(design: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((design.shape[0], 1)), design])
