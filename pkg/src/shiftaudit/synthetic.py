"""Synthetic source/target datasets for the anti-causal and causal shift scenarios.

Every functional form and default coefficient here is a modelling choice of
this package; only the graph topologies are fixed. Shift magnitudes are in
noise-standard-deviation units for ``X`` and on the logit scale for ``Y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import expit

from .exceptions import InvalidSpec
from .graph import CausalGraph, Node, NodeRole, build_graph

__all__ = [
    "SCENARIOS",
    "ScenarioSpec",
    "DermatologySpec",
    "scenario_graph",
    "dermatology_graph",
    "generate",
    "generate_dermatology_style",
]

SCENARIOS = ("AC-a", "AC-b", "AC-c", "AC-d", "C-a", "C-b", "C-c", "C-d")

_ACTIVE = {"a": ("A",), "b": ("X",), "c": ("Y",), "d": ("A", "X", "Y")}
_DEFAULT_DELTA = {"A": 0.2, "X": 0.5, "Y": 0.8}


def _split(scenario: str) -> tuple[str, str]:
    if scenario not in SCENARIOS:
        raise InvalidSpec(f"unknown scenario {scenario!r}; expected one of {', '.join(SCENARIOS)}")
    family, kind = scenario.split("-")
    return family, kind


def scenario_graph(scenario: str) -> CausalGraph:
    family, kind = _split(scenario)
    nodes = [("S", "env"), ("A", "attr"), ("X", "cov"), ("Y", "out")]
    if family == "AC":
        edges = [("A", "Y"), ("A", "X"), ("Y", "X")]
    else:
        edges = [("A", "X"), ("X", "Y"), ("A", "Y")]
    edges += [("S", v) for v in _ACTIVE[kind]]
    return build_graph(nodes, edges)


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one scenario; ``None`` deltas take the default when the edge is active."""

    scenario: str
    n: int = 5000
    seed: int = 0
    delta_A: float | None = None
    delta_X: float | None = None
    delta_Y: float | None = None
    p_A: float = 0.4
    b0: float = -0.5
    b1: float = 1.0
    mu_Y: tuple[float, ...] = (1.0, 0.5, 0.0)
    mu_A: tuple[float, ...] = (0.5, 0.0, 0.5)
    w: tuple[float, ...] = (0.8, 0.4, 0.0)

    def resolved_deltas(self) -> dict[str, float]:
        """Effective magnitudes: inactive edges forced to 0, active ``None`` to defaults."""
        _, kind = _split(self.scenario)
        given = {"A": self.delta_A, "X": self.delta_X, "Y": self.delta_Y}
        out = {}
        for k in ("A", "X", "Y"):
            if k not in _ACTIVE[kind]:
                out[k] = 0.0
            else:
                out[k] = _DEFAULT_DELTA[k] if given[k] is None else float(given[k])
        return out

    def validate(self) -> dict[str, float]:
        _, kind = _split(self.scenario)
        if int(self.n) != self.n or self.n < 1:
            raise InvalidSpec(f"n must be a positive integer, got {self.n!r}")
        if not 0 < self.p_A < 1:
            raise InvalidSpec("p_A must lie in (0, 1)")
        if not len(self.mu_Y) == len(self.mu_A) == len(self.w) >= 1:
            raise InvalidSpec("mu_Y, mu_A and w must have the same positive length")
        d = self.resolved_deltas()
        if not 0 <= self.p_A + d["A"] <= 1:
            raise InvalidSpec("p_A + delta_A must lie in [0, 1]")
        if kind == "d" and sum(v != 0 for v in d.values()) < 2:
            raise InvalidSpec("compound scenarios need at least two nonzero shift magnitudes")
        return d


def _sample_env(spec: ScenarioSpec, d: dict, s: int, rng: np.random.Generator) -> pd.DataFrame:
    family, _ = _split(spec.scenario)
    n = int(spec.n)
    mu_y, mu_a, w = (np.asarray(v, dtype=float) for v in (spec.mu_Y, spec.mu_A, spec.w))
    k = len(mu_y)
    a = (rng.random(n) < spec.p_A + s * d["A"]).astype(int)
    if family == "AC":
        y = (rng.random(n) < expit(spec.b0 + spec.b1 * a + s * d["Y"])).astype(int)
        x = np.outer(y, mu_y) + np.outer(a, mu_a) + s * d["X"] + rng.standard_normal((n, k))
    else:
        x = np.outer(a, mu_a) + s * d["X"] + rng.standard_normal((n, k))
        y = (rng.random(n) < expit(spec.b0 + spec.b1 * a + x @ w + s * d["Y"])).astype(int)
    frame = pd.DataFrame({"S": np.full(n, s), "A": a, "Y": y})
    for j in range(k):
        frame[f"X[{j}]"] = x[:, j]
    return frame


def generate(spec: ScenarioSpec) -> tuple[pd.DataFrame, pd.DataFrame, CausalGraph]:
    """Sample ``(source, target, graph)``; the source is ``S=0``, the target ``S=1``."""
    d = spec.validate()
    rng = np.random.default_rng(spec.seed)
    source = _sample_env(spec, d, 0, rng)
    target = _sample_env(spec, d, 1, rng)
    return source, target, scenario_graph(spec.scenario)


_DERM_DEFAULTS = {"A": 0.2, "M": 0.8, "X_s": 0.8, "Y": 0.8, "X": 0.5}


@dataclass(frozen=True)
class DermatologySpec:
    """Extended anti-causal graph with comorbidities ``M`` and symptoms ``X_s``.

    ``deltas`` maps each environment-edge child to its magnitude; missing
    keys take the defaults in ``_DERM_DEFAULTS``.
    """

    n: int = 5000
    seed: int = 0
    deltas: dict = field(default_factory=dict)
    hide_M_in_target: bool = False
    hide_Xs_in_target: bool = False
    p_A: float = 0.4
    mu_Y: tuple[float, ...] = (1.0, 0.5, 0.0)
    mu_A: tuple[float, ...] = (0.5, 0.0, 0.5)

    def resolved_deltas(self) -> dict[str, float]:
        unknown = set(self.deltas) - set(_DERM_DEFAULTS)
        if unknown:
            raise InvalidSpec(f"unknown environment edge(s): {', '.join(sorted(unknown))}")
        return {k: float(self.deltas.get(k, v)) for k, v in _DERM_DEFAULTS.items()}


def dermatology_graph(hide_M: bool = False, hide_Xs: bool = False) -> CausalGraph:
    nodes = [
        Node("S", NodeRole.ENVIRONMENT),
        Node("A", NodeRole.ATTRIBUTE),
        Node("M", NodeRole.AUXILIARY, not hide_M),
        Node("X_s", NodeRole.AUXILIARY, not hide_Xs),
        Node("Y", NodeRole.OUTCOME),
        Node("X", NodeRole.COVARIATE),
    ]
    edges = [("S", v) for v in ("A", "M", "X_s", "Y", "X")]
    edges += [("A", "M"), ("A", "Y"), ("A", "X"), ("M", "Y"), ("Y", "X"), ("Y", "X_s")]
    return build_graph(nodes, edges)


def generate_dermatology_style(spec: DermatologySpec) -> tuple[pd.DataFrame, pd.DataFrame, CausalGraph]:
    if int(spec.n) != spec.n or spec.n < 1:
        raise InvalidSpec(f"n must be a positive integer, got {spec.n!r}")
    d = spec.resolved_deltas()
    if not 0 <= spec.p_A + d["A"] <= 1 or not 0 < spec.p_A < 1:
        raise InvalidSpec("p_A and p_A + delta_A must be probabilities")
    rng = np.random.default_rng(spec.seed)
    mu_y, mu_a = np.asarray(spec.mu_Y, float), np.asarray(spec.mu_A, float)
    frames = []
    for s in (0, 1):
        n = int(spec.n)
        a = (rng.random(n) < spec.p_A + s * d["A"]).astype(int)
        m = (rng.random(n) < expit(-1.0 + 1.0 * a + s * d["M"])).astype(int)
        y = (rng.random(n) < expit(-0.5 + 1.0 * a + 1.0 * m + s * d["Y"])).astype(int)
        xs = (rng.random(n) < expit(-0.5 + 1.5 * y + s * d["X_s"])).astype(int)
        x = np.outer(y, mu_y) + np.outer(a, mu_a) + s * d["X"] + rng.standard_normal((n, len(mu_y)))
        frame = pd.DataFrame({"S": np.full(n, s), "A": a, "M": m, "X_s": xs, "Y": y})
        for j in range(x.shape[1]):
            frame[f"X[{j}]"] = x[:, j]
        frames.append(frame)
    source, target = frames
    drop = [c for c, hide in (("M", spec.hide_M_in_target), ("X_s", spec.hide_Xs_in_target)) if hide]
    target = target.drop(columns=drop)
    return source, target, dermatology_graph(spec.hide_M_in_target, spec.hide_Xs_in_target)
