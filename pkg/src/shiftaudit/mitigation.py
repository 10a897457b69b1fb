"""Per-group threshold post-processing and its transfer across environments.

The post-processor is a transparent grid search over one decision threshold
per group. A sample is positive iff ``score >= threshold``; the sentinel
threshold ``2.0`` lies above every score and makes a group all-negative.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import MissingClassInGroup, SingleGroup, UnknownGroupLevel
from .fairness import PredictionSet
from .graph import FairnessCriterion

__all__ = [
    "ABOVE_MAX",
    "GroupThresholds",
    "GapEstimate",
    "MitigationReport",
    "threshold_grid",
    "fit_group_thresholds",
    "apply_thresholds",
    "thresholded_gap",
    "mitigation_transfer_experiment",
    "GroupThresholdClassifier",
]

ABOVE_MAX = 2.0
_TOL = 1e-12
_EXHAUSTIVE_LIMIT = 3


@dataclass(frozen=True)
class GroupThresholds:
    thresholds: dict[str, float]
    criterion: FairnessCriterion
    achieved_gap: float
    grid_step: float
    gap_slack: float = 0.0

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion.value,
            "thresholds": {g: self.thresholds[g] for g in sorted(self.thresholds)},
            "achieved_gap": self.achieved_gap,
            "grid_step": self.grid_step,
            "gap_slack": self.gap_slack,
            "method": "per-group threshold grid search",
        }


def threshold_grid(step: float) -> np.ndarray:
    """``{0, step, 2*step, ...}`` capped at 1, with 1 always included."""
    if not 0 < step <= 1:
        raise ValueError("grid_step must lie in (0, 1]")
    k = int(np.floor(1.0 / step + 1e-9))
    grid = np.round(np.arange(k + 1) * step, 12)
    if grid[-1] < 1.0:
        grid = np.append(grid, 1.0)
    return grid


@dataclass
class _GroupTable:
    n: int
    pos_rate: np.ndarray
    tpr: np.ndarray | None
    fpr: np.ndarray | None
    correct: np.ndarray


def _tables(preds: PredictionSet, grid: np.ndarray, need_classes: bool) -> dict[str, _GroupTable]:
    out = {}
    for g in sorted(set(preds.groups.tolist())):
        m = preds.groups == g
        s, y = preds.scores[m], preds.y_true[m]
        # count of scores >= t for every grid value
        s_sorted = np.sort(s)
        n_pos_pred = len(s) - np.searchsorted(s_sorted, grid, side="left")
        pos_s = np.sort(s[y == 1])
        neg_s = np.sort(s[y == 0])
        tp = len(pos_s) - np.searchsorted(pos_s, grid, side="left")
        fp = len(neg_s) - np.searchsorted(neg_s, grid, side="left")
        tn = len(neg_s) - fp
        if need_classes and (len(pos_s) == 0 or len(neg_s) == 0):
            raise MissingClassInGroup(f"group {g!r} lacks one of the outcome classes")
        out[g] = _GroupTable(
            n=len(s),
            pos_rate=n_pos_pred / len(s),
            tpr=tp / len(pos_s) if len(pos_s) else None,
            fpr=fp / len(neg_s) if len(neg_s) else None,
            correct=(tp + tn).astype(np.int64),
        )
    return out


def _current_gap(preds: PredictionSet, eo: bool) -> float:
    """Gap of the existing hard labels over all groups of the fitting data."""
    levels = sorted(set(preds.groups.tolist()))
    hard = preds.hard_labels.astype(float)
    if not eo:
        rates = [hard[preds.groups == g].mean() for g in levels]
        return float(max(rates) - min(rates))
    spreads = []
    for cls in (1, 0):
        rates = [hard[(preds.groups == g) & (preds.y_true == cls)].mean() for g in levels]
        spreads.append(max(rates) - min(rates))
    return float(0.5 * sum(spreads))


def _fit_dp(tables: dict[str, _GroupTable], slack: float, cap: float):
    """Exact search by sliding a window over achievable positive rates.

    Total accuracy is separable across groups once the window is fixed, so
    each group picks its most accurate (then lowest) threshold inside it.
    """
    names = sorted(tables)
    rates = [tables[g].pos_rate for g in names]
    starts = np.unique(np.concatenate(rates))
    best_gap = np.inf
    for m in starts:
        tops = []
        for r in rates:
            above = r[r >= m - _TOL]
            if above.size == 0:
                break
            tops.append(above.min())
        else:
            best_gap = min(best_gap, max(tops) - m)

    bound = _bound(best_gap, slack, cap)
    best_key, best_idx = None, None
    for m in starts:
        idx = []
        for g, r in zip(names, rates):
            ok = np.flatnonzero((r >= m - _TOL) & (r <= m + bound + _TOL))
            if ok.size == 0:
                break
            corr = tables[g].correct[ok]
            idx.append(int(ok[np.flatnonzero(corr == corr.max())[0]]))
        else:
            chosen = [r[i] for r, i in zip(rates, idx)]
            if max(chosen) - min(chosen) > bound + _TOL:
                continue
            total = sum(int(tables[g].correct[i]) for g, i in zip(names, idx))
            key = (-total, tuple(idx))
            if best_key is None or key < best_key:
                best_key, best_idx = key, idx
    chosen = [r[i] for r, i in zip(rates, best_idx)]
    return best_idx, max(chosen) - min(chosen)


def _bound(floor: float, slack: float, cap: float) -> float:
    # near-minimal gaps tie, but never beyond the gap the classifier had before
    return max(floor, min(floor + slack, cap))


def _eo_objective(tables, names, idx):
    tprs = [tables[g].tpr[i] for g, i in zip(names, idx)]
    fprs = [tables[g].fpr[i] for g, i in zip(names, idx)]
    return 0.5 * ((max(tprs) - min(tprs)) + (max(fprs) - min(fprs)))


def _fit_eo_exhaustive(tables, names, n_grid, slack, cap):
    """Brute force over the full threshold product, vectorised over all but the first group."""
    rest = names[1:]
    shape = (n_grid,) * len(rest)
    grids = np.meshgrid(*[np.arange(n_grid)] * len(rest), indexing="ij")
    rest_tpr = [tables[g].tpr[ix] for g, ix in zip(rest, grids)]
    rest_fpr = [tables[g].fpr[ix] for g, ix in zip(rest, grids)]
    rest_corr = sum(tables[g].correct[ix] for g, ix in zip(rest, grids))
    t_hi, t_lo = np.max(rest_tpr, axis=0), np.min(rest_tpr, axis=0)
    f_hi, f_lo = np.max(rest_fpr, axis=0), np.min(rest_fpr, axis=0)
    first = tables[names[0]]

    def gaps(i):
        tp, fp = first.tpr[i], first.fpr[i]
        return 0.5 * ((np.maximum(t_hi, tp) - np.minimum(t_lo, tp)) + (np.maximum(f_hi, fp) - np.minimum(f_lo, fp)))

    floor = min(float(gaps(i).min()) for i in range(n_grid))
    bound = _bound(floor, slack, cap)
    best = None  # (-correct, idx)
    for i in range(n_grid):
        cand = gaps(i) <= bound + _TOL
        if not cand.any():
            continue
        corr = np.where(cand, rest_corr + first.correct[i], -1)
        j = int(np.argmax(corr))  # first max in C order is the lexicographically lowest
        idx = (i, *np.unravel_index(j, shape))
        key = (-int(corr.flat[j]), tuple(int(v) for v in idx))
        if best is None or key < best:
            best = key
    idx = list(best[1])
    return idx, _eo_objective(tables, names, idx)


def _fit_eo_coordinate(tables, names, n_grid, slack, cap, max_sweeps=50):
    """Coordinate descent for many groups; not guaranteed to reach the global optimum."""
    start = int(np.argmin(np.abs(np.linspace(0, 1, n_grid) - 0.5)))
    idx = [start] * len(names)

    def improve(ix, score):
        for _ in range(max_sweeps):
            moved = False
            for pos in range(len(names)):
                for cand in range(n_grid):
                    trial = list(ix)
                    trial[pos] = cand
                    k = score(trial)
                    if k < score(ix):
                        ix, moved = trial, True
            if not moved:
                break
        return ix

    idx = improve(idx, lambda ix: (round(_eo_objective(tables, names, ix), 12), tuple(ix)))
    bound = _bound(_eo_objective(tables, names, idx), slack, cap)

    def constrained(ix):
        over = _eo_objective(tables, names, ix) > bound + _TOL
        return (over, -sum(int(tables[g].correct[i]) for g, i in zip(names, ix)), tuple(ix))

    idx = improve(idx, constrained)
    return idx, _eo_objective(tables, names, idx)


def fit_group_thresholds(
    calibration: PredictionSet, criterion, grid_step: float = 0.005, gap_slack: float | None = None
) -> GroupThresholds:
    """Grid-search one threshold per group to equalise rates on ``calibration``.

    Demographic parity minimises the max-min spread of positive rates;
    equalized odds minimises the mean of the TPR and FPR spreads. Gaps
    within ``gap_slack`` (default: ``grid_step``) of the minimum count as
    ties, as long as they do not exceed the gap of the existing hard labels;
    ties go to higher overall accuracy, then to the lexicographically lowest
    thresholds over sorted group names.
    """
    if not calibration.is_binary:
        raise ValueError("threshold post-processing needs binary scores")
    criterion = FairnessCriterion(criterion)
    grid = threshold_grid(grid_step)
    levels = sorted(set(calibration.groups.tolist()))
    if len(levels) < 2:
        raise SingleGroup("need at least two groups to post-process")
    eo = criterion is FairnessCriterion.EQUALIZED_ODDS
    slack = float(grid_step if gap_slack is None else gap_slack)
    if slack < 0:
        raise ValueError("gap_slack must be >= 0")
    tables = _tables(calibration, grid, need_classes=eo)
    cap = _current_gap(calibration, eo)
    if not eo:
        idx, gap = _fit_dp(tables, slack, cap)
    elif len(levels) <= _EXHAUSTIVE_LIMIT:
        idx, gap = _fit_eo_exhaustive(tables, levels, len(grid), slack, cap)
    else:
        idx, gap = _fit_eo_coordinate(tables, levels, len(grid), slack, cap)
    return GroupThresholds(
        {g: float(grid[i]) for g, i in zip(levels, idx)}, criterion, float(max(gap, 0.0)), float(grid_step), slack
    )


def apply_thresholds(preds: PredictionSet, thresholds: GroupThresholds) -> PredictionSet:
    """Replace hard labels by ``score >= threshold[group]``; scores are unchanged."""
    unknown = sorted(set(preds.groups.tolist()) - set(thresholds.thresholds))
    if unknown:
        raise UnknownGroupLevel(f"no threshold for group level(s) {unknown}")
    thr = np.array([thresholds.thresholds[g] for g in preds.groups], dtype=float)
    return preds.with_hard_labels((preds.scores >= thr).astype(int))


@dataclass(frozen=True)
class GapEstimate:
    gap: float
    se: float

    def to_dict(self) -> dict:
        return {"gap": self.gap, "se": self.se}


def _rate_spread(rates: dict[str, tuple[float, int]]):
    hi = max(rates, key=lambda g: (rates[g][0], g))
    lo = min(rates, key=lambda g: (rates[g][0], g))
    (p1, n1), (p2, n2) = rates[hi], rates[lo]
    return p1 - p2, p1 * (1 - p1) / max(n1, 1) + p2 * (1 - p2) / max(n2, 1)


def thresholded_gap(preds: PredictionSet, criterion) -> GapEstimate:
    """Hard-label gap (positive-rate spread, or mean TPR/FPR spread) with a delta-method SE."""
    criterion = FairnessCriterion(criterion)
    levels = preds.available_groups()
    if len(levels) < 2:
        raise SingleGroup(f"need >= 2 groups with >= {preds.min_group_size} samples")
    hard = preds.hard_labels
    if criterion is FairnessCriterion.DEMOGRAPHIC_PARITY:
        rates = {g: (float(hard[preds.groups == g].mean()), int(np.sum(preds.groups == g))) for g in levels}
        gap, var = _rate_spread(rates)
        return GapEstimate(float(gap), float(np.sqrt(var)))
    gaps, var = [], 0.0
    for cls in (1, 0):
        rates = {}
        for g in levels:
            m = (preds.groups == g) & (preds.y_true == cls)
            if m.any():
                rates[g] = (float(hard[m].mean()), int(m.sum()))
        if len(rates) < 2:
            raise MissingClassInGroup(f"class {cls} is present in fewer than two groups")
        g_, v_ = _rate_spread(rates)
        gaps.append(g_)
        var += v_
    return GapEstimate(float(0.5 * sum(gaps)), float(0.5 * np.sqrt(var)))


@dataclass(frozen=True)
class MitigationReport:
    criterion: FairnessCriterion
    thresholds: GroupThresholds
    source_before: GapEstimate
    source_after: GapEstimate
    target_before: GapEstimate
    target_after: GapEstimate
    n_fit: int
    n_source_test: int
    n_target: int

    def reduction(self, env: str) -> float:
        """Relative gap reduction in ``"source"`` or ``"target"``; 1 means fully removed."""
        before, after = (self.source_before, self.source_after) if env == "source" else \
            (self.target_before, self.target_after)
        if before.gap == 0:
            return 0.0
        return 1.0 - after.gap / before.gap

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion.value,
            "thresholds": self.thresholds.to_dict(),
            "source": {"before": self.source_before.to_dict(), "after": self.source_after.to_dict(),
                       "n_fit": self.n_fit, "n_test": self.n_source_test},
            "target": {"before": self.target_before.to_dict(), "after": self.target_after.to_dict(),
                       "n": self.n_target},
        }


def mitigation_transfer_experiment(
    source: PredictionSet,
    target: PredictionSet,
    criterion,
    fit_fraction: float = 0.5,
    grid_step: float = 0.005,
    seed: int = 0,
) -> MitigationReport:
    """Fit thresholds on part of the source, then compare gaps before/after in both environments.

    "Before" uses the prediction sets' existing hard labels.
    """
    if not 0 < fit_fraction < 1:
        raise ValueError("fit_fraction must lie in (0, 1)")
    criterion = FairnessCriterion(criterion)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(source))
    n_fit = int(round(fit_fraction * len(source)))
    fit_mask = np.zeros(len(source), dtype=bool)
    fit_mask[perm[:n_fit]] = True
    fit_part, test_part = source.subset(fit_mask), source.subset(~fit_mask)
    thresholds = fit_group_thresholds(fit_part, criterion, grid_step)
    return MitigationReport(
        criterion=criterion,
        thresholds=thresholds,
        source_before=thresholded_gap(test_part, criterion),
        source_after=thresholded_gap(apply_thresholds(test_part, thresholds), criterion),
        target_before=thresholded_gap(target, criterion),
        target_after=thresholded_gap(apply_thresholds(target, thresholds), criterion),
        n_fit=int(fit_mask.sum()),
        n_source_test=int((~fit_mask).sum()),
        n_target=len(target),
    )


class GroupThresholdClassifier(ClassifierMixin, BaseEstimator):
    """scikit-learn wrapper: ``fit(scores, y, groups=...)`` then ``predict(scores, groups=...)``."""

    def __init__(self, criterion="dp", grid_step=0.005):
        self.criterion = criterion
        self.grid_step = grid_step

    def fit(self, X, y, groups=None):
        if groups is None:
            raise ValueError("groups are required")
        preds = PredictionSet(np.asarray(X, dtype=float).ravel(), y, groups, min_group_size=1)
        self.thresholds_ = fit_group_thresholds(preds, self.criterion, self.grid_step)
        self.classes_ = np.array([0, 1])
        return self

    def predict(self, X, groups=None):
        check_is_fitted(self, "thresholds_")
        scores = np.asarray(X, dtype=float).ravel()
        preds = PredictionSet(scores, np.zeros(len(scores), int), groups, min_group_size=1)
        return apply_thresholds(preds, self.thresholds_).hard_labels
