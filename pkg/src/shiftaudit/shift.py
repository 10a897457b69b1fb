"""Direct-effect tests of the environment on graph nodes and shift classification."""

from __future__ import annotations

import enum
import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import pandas as pd
from scipy.special import expit
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._logistic import FeatureEncoder, as_frame, newton_logistic, with_intercept
from .exceptions import (
    IncompleteResults,
    MissingColumns,
    SingleClassOutcome,
    UnblockedPathWarning,
)
from .graph import CausalGraph, NodeRole, blocking_set
from .stats import TestResult, bonferroni, weighted_welch_ttest
from .weighting import (
    PropensityConfig,
    WeightScheme,
    compute_weights,
    fit_propensity,
    uniform_weights,
)

__all__ = [
    "Verdict",
    "ShiftVerdict",
    "DirectEffectConfig",
    "ShiftTestResult",
    "ShiftClassification",
    "SummaryScorer",
    "fit_summary_model",
    "node_columns",
    "direct_effect_test",
    "classify_shift",
]


class Verdict(enum.Enum):
    DIRECT_EFFECT = "direct_effect"
    NO_EVIDENCE = "no_evidence"


class ShiftVerdict(enum.Enum):
    NONE = "none"
    DEMOGRAPHIC = "demographic"
    COVARIATE = "covariate"
    LABEL = "label"
    COMPOUND = "compound"


@dataclass(frozen=True)
class DirectEffectConfig:
    max_dims: int = 30
    clip: float = 0.01
    summary_fraction: float = 0.5
    propensity: PropensityConfig = field(default_factory=PropensityConfig)

    @property
    def seed(self) -> int:
        return self.propensity.seed


@dataclass(frozen=True)
class ShiftTestResult:
    node: str
    dims: tuple[str, ...]
    results: tuple[TestResult, ...]
    significant: tuple[bool, ...]
    blocking_set: tuple[str, ...]
    scheme: WeightScheme
    alpha: float
    verdict: Verdict
    summary_used: bool = False
    propensity: dict | None = None
    n_missing_dropped: tuple[int, int] = (0, 0)
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class ShiftClassification:
    verdict: ShiftVerdict
    contributing: dict[str, tuple[str, ...]]


# node columns: either a column named exactly like the node, or "node[0]", "node[1]", ...

def node_columns(frame: pd.DataFrame, node: str) -> list[str]:
    if node in frame.columns:
        return [node]
    pat = re.compile(re.escape(node) + r"\[(\d+)\]$")
    hits = [(int(m.group(1)), c) for c in frame.columns if (m := pat.match(str(c)))]
    return [c for _, c in sorted(hits)]


def _numeric_block(src: pd.DataFrame, tgt: pd.DataFrame, cols: list[str]):
    """Numeric matrices for both environments; categorical columns become level indicators."""
    names, a, b = [], [], []
    for c in cols:
        s, t = src[c], tgt[c]
        if pd.api.types.is_numeric_dtype(s) and pd.api.types.is_numeric_dtype(t):
            names.append(c)
            a.append(s.to_numpy(dtype=float))
            b.append(t.to_numpy(dtype=float))
        else:
            levels = sorted({str(v) for v in s} | {str(v) for v in t})
            sv, tv = s.astype(str).to_numpy(), t.astype(str).to_numpy()
            for lvl in levels:
                names.append(f"{c}={lvl}")
                a.append((sv == lvl).astype(float))
                b.append((tv == lvl).astype(float))
    return names, np.column_stack(a), np.column_stack(b)


class SummaryScorer(TransformerMixin, BaseEstimator):
    """Compress a high-dimensional node to one score: a logistic model of the outcome.

    Binary outcomes map to the predicted probability of the larger label;
    categorical outcomes map to the one-vs-rest probability of the most
    prevalent class.
    """

    def __init__(self, l2=1e-4, tol=1e-8, max_iter=100, holdout_fraction=0.2, seed=0):
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter
        self.holdout_fraction = holdout_fraction
        self.seed = seed

    def fit(self, X, y):
        frame = as_frame(X, prefix="x").reset_index(drop=True)
        y = pd.Series(np.asarray(y)).astype(str) if not pd.api.types.is_numeric_dtype(pd.Series(y)) \
            else pd.Series(np.asarray(y))
        counts = y.value_counts()
        if len(counts) < 2:
            raise SingleClassOutcome("outcome takes a single value")
        if len(counts) == 2:
            self.positive_class_ = sorted(counts.index)[-1]
        else:
            top = counts.max()
            self.positive_class_ = sorted(counts.index[counts == top])[0]
        target = (y == self.positive_class_).to_numpy().astype(float)

        rng = np.random.default_rng(self.seed)
        perm = rng.permutation(len(target))
        n_hold = int(round(self.holdout_fraction * len(target)))
        hold, train = perm[:n_hold], perm[n_hold:]
        self.holdout_accuracy_ = None
        if n_hold > 0 and len(np.unique(target[train])) == 2:
            enc = FeatureEncoder().fit(frame.iloc[train])
            beta = newton_logistic(with_intercept(enc.transform(frame.iloc[train])[0]), target[train],
                                   self.l2, self.tol, self.max_iter)[0]
            pred = with_intercept(enc.transform(frame.iloc[hold])[0]) @ beta > 0
            self.holdout_accuracy_ = float(np.mean(pred == target[hold]))

        self.encoder_ = FeatureEncoder().fit(frame)
        self.coefficients_ = newton_logistic(with_intercept(self.encoder_.transform(frame)[0]), target,
                                             self.l2, self.tol, self.max_iter)[0]
        return self

    def transform(self, X):
        check_is_fitted(self, "coefficients_")
        design, _ = self.encoder_.transform(as_frame(X, prefix="x"))
        return expit(with_intercept(design) @ self.coefficients_)


def fit_summary_model(x, y, config: PropensityConfig | None = None) -> SummaryScorer:
    """Fit a :class:`SummaryScorer` on source-environment rows only."""
    config = config or PropensityConfig()
    return SummaryScorer(config.l2, config.tol, config.max_iter, config.holdout_fraction, config.seed).fit(x, y)


def direct_effect_test(
    source: pd.DataFrame,
    target: pd.DataFrame,
    graph: CausalGraph,
    node: str,
    scheme=WeightScheme.OVERLAP,
    alpha: float = 0.05,
    config: DirectEffectConfig | None = None,
) -> ShiftTestResult:
    """Test whether the environment directly affects ``node``.

    The indirect paths are blocked by reweighting both environments over the
    node's blocking set; then each dimension of the node is compared with a
    weighted Welch test under a Bonferroni correction. Nodes wider than
    ``config.max_dims`` are first reduced to the score of an outcome model
    trained on a held-apart part of the source data.
    """
    config = config or DirectEffectConfig()
    scheme = WeightScheme(scheme)
    notes: list[str] = []

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UnblockedPathWarning)
        vset = tuple(sorted(blocking_set(graph, node)))
    notes += [str(w.message) for w in caught if issubclass(w.category, UnblockedPathWarning)]

    node_cols = {}
    for name in (node, *vset):
        for where, frame in (("source", source), ("target", target)):
            cols = node_columns(frame, name)
            if not cols:
                raise MissingColumns([name], f"{where} data, needed to test {node!r}")
            node_cols.setdefault(name, cols)
            if cols != node_cols[name]:
                raise MissingColumns(sorted(set(node_cols[name]) ^ set(cols)), f"{where} data")
    used = [c for name in (node, *vset) for c in node_cols[name]]

    src = source[used]
    tgt = target[used]
    dropped = (int(src.isna().any(axis=1).sum()), int(tgt.isna().any(axis=1).sum()))
    if any(dropped):
        notes.append(f"{node}: dropped {dropped[0]} source / {dropped[1]} target rows with missing values")
    src = src.dropna().reset_index(drop=True)
    tgt = tgt.dropna().reset_index(drop=True)

    dims, x0, x1 = _numeric_block(src, tgt, node_cols[node])
    summary_used = False
    if len(dims) > config.max_dims:
        outcome = graph.outcome
        if node == outcome:
            raise ValueError(f"outcome node {node!r} is too wide to summarise by an outcome model")
        y_cols = node_columns(source, outcome)
        if len(y_cols) != 1:
            raise MissingColumns([outcome], "source data, needed for the summary model")
        y_src = source.loc[source[used].notna().all(axis=1), y_cols[0]].to_numpy()
        rng = np.random.default_rng(config.seed)
        perm = rng.permutation(len(src))
        n_fit = int(round(config.summary_fraction * len(src)))
        fit_idx, test_idx = np.sort(perm[:n_fit]), np.sort(perm[n_fit:])
        scorer = fit_summary_model(x0[fit_idx], y_src[fit_idx], config.propensity)
        x0 = scorer.transform(x0[test_idx])[:, None]
        x1 = scorer.transform(x1)[:, None]
        src = src.iloc[test_idx].reset_index(drop=True)
        dims = [f"summary({node})"]
        summary_used = True

    diag = None
    if vset:
        vcols = [c for name in vset for c in node_cols[name]]
        pooled = pd.concat([src[vcols], tgt[vcols]], ignore_index=True)
        env = np.r_[np.zeros(len(src), int), np.ones(len(tgt), int)]
        model = fit_propensity(pooled, env, config.propensity)
        w0 = compute_weights(model, src[vcols], 0, scheme, config.clip)
        w1 = compute_weights(model, tgt[vcols], 1, scheme, config.clip)
        diag = dict(model.diagnostics_)
        diag["ess"] = [w0.ess, w1.ess]
        if diag["perfect_separation"]:
            notes.append(f"{node}: environments perfectly separable from blocking set {list(vset)}")
    else:
        w0 = uniform_weights(len(src), scheme)
        w1 = uniform_weights(len(tgt), scheme)

    results = tuple(weighted_welch_ttest(x0[:, j], w0, x1[:, j], w1) for j in range(x0.shape[1]))
    sig = tuple(bool(s) for s in bonferroni([r.p_value for r in results], alpha))
    return ShiftTestResult(
        node=node,
        dims=tuple(dims),
        results=results,
        significant=sig,
        blocking_set=vset,
        scheme=scheme,
        alpha=alpha,
        verdict=Verdict.DIRECT_EFFECT if any(sig) else Verdict.NO_EVIDENCE,
        summary_used=summary_used,
        propensity=diag,
        n_missing_dropped=dropped,
        warnings=tuple(notes),
    )


_CATEGORY = {
    NodeRole.ATTRIBUTE: "demographic",
    NodeRole.COVARIATE: "covariate",
    NodeRole.AUXILIARY: "covariate",
    NodeRole.OUTCOME: "label",
}


def classify_shift(results: Mapping[str, ShiftTestResult] | Iterable[ShiftTestResult], graph: CausalGraph) -> ShiftClassification:
    """Map detected direct effects to the demographic / covariate / label taxonomy.

    Two or more affected categories make a compound shift.
    """
    if isinstance(results, Mapping):
        by_node = dict(results)
    else:
        by_node = {r.node: r for r in results}
    required = [
        n.name for n in graph.nodes
        if n.observed and n.role in (NodeRole.ATTRIBUTE, NodeRole.COVARIATE, NodeRole.OUTCOME)
    ]
    missing = [n for n in required if n not in by_node]
    if missing:
        raise IncompleteResults(f"no test results for node(s): {', '.join(missing)}")

    contributing: dict[str, list[str]] = {"demographic": [], "covariate": [], "label": []}
    for name, res in by_node.items():
        role = graph.role(name)
        if role in _CATEGORY and res.verdict is Verdict.DIRECT_EFFECT:
            contributing[_CATEGORY[role]].append(name)
    hit = [k for k, v in contributing.items() if v]
    if not hit:
        verdict = ShiftVerdict.NONE
    elif len(hit) >= 2:
        verdict = ShiftVerdict.COMPOUND
    else:
        verdict = ShiftVerdict(hit[0])
    return ShiftClassification(verdict, {k: tuple(sorted(v)) for k, v in contributing.items()})
