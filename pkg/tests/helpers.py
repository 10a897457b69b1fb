"""Shared fixtures built from the synthetic generators."""

import numpy as np
from sklearn.linear_model import LogisticRegression

from shiftaudit.fairness import PredictionSet
from shiftaudit.synthetic import ScenarioSpec, generate

FEATURES = ["A", "X[0]", "X[1]", "X[2]"]


def fixed_scorer(scenario, seed, n_train=5000):
    """Logistic model of Y on (A, X) trained once on an independent source draw."""
    train, _, _ = generate(ScenarioSpec(scenario, n=n_train, seed=seed))
    return LogisticRegression(C=1e4, max_iter=1000).fit(train[FEATURES], train["Y"])


def scored_environments(scenario, seed, n=5000, model=None):
    """PredictionSets for a fresh (source, target) draw, grouped by A."""
    model = model or fixed_scorer(scenario, seed + 10_000)
    src, tgt, _ = generate(ScenarioSpec(scenario, n=n, seed=seed))
    out = []
    for frame, env in ((src, "source"), (tgt, "target")):
        p = model.predict_proba(frame[FEATURES])[:, 1]
        out.append(PredictionSet(p, frame["Y"].to_numpy(), frame["A"].to_numpy(), environment=env))
    return tuple(out)


def planted_binary(rng, spec, labels=None):
    """PredictionSet whose scores are constant within (group, label) cells.

    ``spec`` maps group -> (n, score) or group -> {label: (n, score)}.
    """
    scores, y, groups = [], [], []
    for g, cell in spec.items():
        cells = cell if isinstance(cell, dict) else {0: cell}
        for label, (n, s) in cells.items():
            scores += [s] * n
            y += [label] * n
            groups += [g] * n
    order = rng.permutation(len(y))
    return PredictionSet(np.array(scores)[order], np.array(y)[order], np.array(groups)[order])
