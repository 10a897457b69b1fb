"""Group-fairness metrics per environment and their cross-environment deltas."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import IncompatiblePredictionSets, InvalidK, MissingClassInGroup, SingleGroup

__all__ = [
    "PredictionSet",
    "SubgroupAccuracy",
    "EnvironmentMetrics",
    "FairnessReport",
    "demographic_parity_gap",
    "equalized_odds_gap",
    "equalized_odds_detail",
    "subgroup_accuracy",
    "fairness_transfer_report",
]


@dataclass(frozen=True)
class PredictionSet:
    """Scores, true labels and group membership for one environment.

    ``scores`` is a 1-D array of positive-class probabilities for binary
    tasks, or an ``(n, n_classes)`` array with ``y_true`` holding class
    indices. ``hard_labels`` default to ``score >= 0.5`` (binary) or the
    arg-max class.
    """

    scores: np.ndarray
    y_true: np.ndarray
    groups: np.ndarray
    hard_labels: np.ndarray | None = None
    environment: str | None = None
    min_group_size: int = 20

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        y = np.asarray(self.y_true)
        groups = np.asarray(self.groups).astype(str)
        if scores.ndim not in (1, 2):
            raise ValueError("scores must be 1-D (binary) or 2-D (per-class)")
        if not (len(scores) == len(y) == len(groups)):
            raise ValueError("scores, labels and groups must align")
        if np.any(np.isnan(scores)) or np.any((scores < 0) | (scores > 1)):
            raise ValueError("scores must lie in [0, 1]")
        if self.hard_labels is None:
            hard = (scores >= 0.5).astype(int) if scores.ndim == 1 else scores.argmax(axis=1)
        else:
            hard = np.asarray(self.hard_labels)
            if len(hard) != len(y):
                raise ValueError("hard labels must align with scores")
        y = y.astype(int)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "y_true", y)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "hard_labels", hard.astype(int))

    def __len__(self):
        return len(self.y_true)

    @property
    def is_binary(self) -> bool:
        return self.scores.ndim == 1

    @property
    def n_classes(self) -> int:
        return 2 if self.is_binary else self.scores.shape[1]

    def group_counts(self) -> dict[str, int]:
        levels, counts = np.unique(self.groups, return_counts=True)
        return {str(g): int(c) for g, c in zip(levels, counts)}

    def available_groups(self) -> list[str]:
        return [g for g, c in self.group_counts().items() if c >= self.min_group_size]

    def excluded_groups(self) -> list[str]:
        return [g for g, c in self.group_counts().items() if c < self.min_group_size]

    def subset(self, mask) -> "PredictionSet":
        return replace(self, scores=self.scores[mask], y_true=self.y_true[mask],
                       groups=self.groups[mask], hard_labels=self.hard_labels[mask])

    def with_hard_labels(self, labels) -> "PredictionSet":
        return replace(self, hard_labels=np.asarray(labels))


def _need_binary(preds: PredictionSet, what: str):
    if not preds.is_binary:
        raise ValueError(f"{what} is defined for binary tasks only")


def _range_of_means(values, groups, levels):
    # shift by a shared reference so equal-valued groups give exactly equal means
    ref = float(values[0]) if len(values) else 0.0
    means = [ref + float((values[groups == g] - ref).mean()) for g in levels]
    return max(means) - min(means)


def demographic_parity_gap(preds: PredictionSet, thresholded: bool = False) -> float:
    """Largest difference in mean score (or positive rate) between groups."""
    _need_binary(preds, "demographic parity")
    levels = preds.available_groups()
    if len(levels) < 2:
        raise SingleGroup(f"need >= 2 groups with >= {preds.min_group_size} samples, have {levels}")
    values = preds.hard_labels.astype(float) if thresholded else preds.scores
    return _range_of_means(values, preds.groups, levels)


def equalized_odds_detail(preds: PredictionSet, thresholded: bool = False) -> dict:
    """Per-class max-min gaps and the groups left out of each class."""
    _need_binary(preds, "equalized odds")
    levels = preds.available_groups()
    if len(levels) < 2:
        raise SingleGroup(f"need >= 2 groups with >= {preds.min_group_size} samples, have {levels}")
    values = preds.hard_labels.astype(float) if thresholded else preds.scores
    per_class, excluded = {}, {}
    for cls in (0, 1):
        in_cls = preds.y_true == cls
        present = [g for g in levels if np.any(in_cls & (preds.groups == g))]
        excluded[cls] = [g for g in levels if g not in present]
        if len(present) < 2:
            raise MissingClassInGroup(f"class {cls} is present in fewer than two groups")
        per_class[cls] = _range_of_means(values[in_cls], preds.groups[in_cls], present)
    return {"per_class": per_class, "excluded": excluded, "gap": 0.5 * (per_class[0] + per_class[1])}


def equalized_odds_gap(preds: PredictionSet, thresholded: bool = False) -> float:
    """Average over the two true classes of the max-min gap in mean score."""
    return equalized_odds_detail(preds, thresholded)["gap"]


@dataclass(frozen=True)
class SubgroupAccuracy:
    k: int
    per_group: dict[str, float]
    gap: float
    excluded: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"k": self.k, "per_group": dict(self.per_group), "gap": self.gap, "excluded": list(self.excluded)}


def _correct(preds: PredictionSet, k: int) -> np.ndarray:
    if preds.is_binary:
        if k == 1:
            return preds.hard_labels == preds.y_true
        return np.ones(len(preds), dtype=bool)
    true_score = preds.scores[np.arange(len(preds)), preds.y_true]
    rank = np.sum(preds.scores > true_score[:, None], axis=1)
    return rank < k


def subgroup_accuracy(preds: PredictionSet, k: int = 1) -> SubgroupAccuracy:
    """Top-``k`` accuracy per available group and the max pairwise gap."""
    if int(k) != k or k < 1 or k > preds.n_classes:
        raise InvalidK(f"k={k} must be in [1, {preds.n_classes}]")
    levels = preds.available_groups()
    if len(levels) < 2:
        raise SingleGroup(f"need >= 2 groups with >= {preds.min_group_size} samples, have {levels}")
    correct = _correct(preds, int(k))
    per_group = {g: float(correct[preds.groups == g].mean()) for g in levels}
    vals = list(per_group.values())
    return SubgroupAccuracy(int(k), per_group, max(vals) - min(vals), tuple(preds.excluded_groups()))


@dataclass(frozen=True)
class EnvironmentMetrics:
    n: int
    group_counts: dict[str, int]
    excluded_groups: tuple[str, ...]
    demographic_parity_gap: float | None
    equalized_odds_gap: float | None
    accuracy: dict[int, SubgroupAccuracy]
    notes: tuple[str, ...] = ()

    def max_accuracy_gap(self, k: int = 1) -> float:
        return self.accuracy[k].gap

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "group_counts": dict(self.group_counts),
            "excluded_groups": list(self.excluded_groups),
            "demographic_parity_gap": self.demographic_parity_gap,
            "equalized_odds_gap": self.equalized_odds_gap,
            "accuracy": {f"top{k}": v.to_dict() for k, v in sorted(self.accuracy.items())},
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class FairnessReport:
    source: EnvironmentMetrics
    target: EnvironmentMetrics
    deltas: dict[str, float | None]
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "source": self.source.to_dict(),
            "target": self.target.to_dict(),
            "deltas": dict(self.deltas),
            "notes": list(self.notes),
        }


def _env_metrics(preds: PredictionSet, k_list) -> EnvironmentMetrics:
    notes = []
    dp = eo = None
    if preds.is_binary:
        try:
            dp = demographic_parity_gap(preds)
        except SingleGroup as exc:
            notes.append(f"demographic parity unavailable: {exc}")
        try:
            detail = equalized_odds_detail(preds)
            eo = detail["gap"]
            for cls, gs in detail["excluded"].items():
                if gs:
                    notes.append(f"equalized odds: group(s) {gs} lack class {cls}")
        except (SingleGroup, MissingClassInGroup) as exc:
            notes.append(f"equalized odds unavailable: {exc}")
    acc = {int(k): subgroup_accuracy(preds, k) for k in k_list}
    if preds.excluded_groups():
        notes.append(f"groups below {preds.min_group_size} samples excluded: {preds.excluded_groups()}")
    return EnvironmentMetrics(len(preds), preds.group_counts(), tuple(preds.excluded_groups()),
                              dp, eo, acc, tuple(notes))


def _delta(a, b):
    return None if a is None or b is None else b - a


def fairness_transfer_report(source: PredictionSet, target: PredictionSet, k_list=(1,)) -> FairnessReport:
    """All metrics in both environments and ``target - source`` deltas."""
    if source.n_classes != target.n_classes or source.is_binary != target.is_binary:
        raise IncompatiblePredictionSets(
            f"class spaces differ: {source.n_classes} vs {target.n_classes} classes"
        )
    k_list = sorted({int(k) for k in k_list})
    notes = []
    s_levels, t_levels = set(source.group_counts()), set(target.group_counts())
    if s_levels != t_levels:
        notes.append(
            f"group levels differ: source-only {sorted(s_levels - t_levels)}, "
            f"target-only {sorted(t_levels - s_levels)}"
        )
    src, tgt = _env_metrics(source, k_list), _env_metrics(target, k_list)
    deltas = {
        "demographic_parity_gap": _delta(src.demographic_parity_gap, tgt.demographic_parity_gap),
        "equalized_odds_gap": _delta(src.equalized_odds_gap, tgt.equalized_odds_gap),
    }
    for k in k_list:
        deltas[f"top{k}_accuracy_gap"] = tgt.accuracy[k].gap - src.accuracy[k].gap
    return FairnessReport(src, tgt, deltas, tuple(notes))
