"""Causal DAGs with roles, d-separation, blocking sets and separating sets."""

from __future__ import annotations

import enum
import itertools
import re
import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .exceptions import (
    CycleDetected,
    DuplicateNode,
    GraphSpecParseError,
    MissingEnvironmentNode,
    MultipleOutcomeNodes,
    NodeIsEnvironment,
    NoValidBlockingSet,
    OverlappingArguments,
    UnblockedPathWarning,
    UnknownEndpoint,
    UnknownNode,
)

__all__ = [
    "NodeRole",
    "FairnessCriterion",
    "Node",
    "CausalGraph",
    "build_graph",
    "d_separated",
    "blocking_set",
    "separating_set",
    "table_form",
    "parse_graph_spec",
    "format_graph_spec",
]


class NodeRole(enum.Enum):
    ENVIRONMENT = "env"
    ATTRIBUTE = "attr"
    COVARIATE = "cov"
    OUTCOME = "out"
    AUXILIARY = "aux"


class FairnessCriterion(enum.Enum):
    DEMOGRAPHIC_PARITY = "dp"
    EQUALIZED_ODDS = "eo"


@dataclass(frozen=True)
class Node:
    name: str
    role: NodeRole
    observed: bool = True


@dataclass(frozen=True)
class CausalGraph:
    """Immutable DAG over named, role-tagged nodes.

    Instances should be created through :func:`build_graph`, which validates
    acyclicity and role constraints.
    """

    nodes: tuple[Node, ...]
    edges: tuple[tuple[str, str], ...]
    _validated: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        if not self._validated:
            raise TypeError("use build_graph() to construct a CausalGraph")

    @cached_property
    def _by_name(self) -> dict[str, Node]:
        return {n.name: n for n in self.nodes}

    @cached_property
    def parents(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {n.name: [] for n in self.nodes}
        for p, c in self.edges:
            out[c].append(p)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def children(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {n.name: [] for n in self.nodes}
        for p, c in self.edges:
            out[p].append(c)
        return {k: tuple(v) for k, v in out.items()}

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes)

    def node(self, name: str) -> Node:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownNode(f"unknown node {name!r}") from None

    def role(self, name: str) -> NodeRole:
        return self.node(name).role

    def is_observed(self, name: str) -> bool:
        return self.node(name).observed

    def nodes_with_role(self, role: NodeRole) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes if n.role is role)

    @property
    def environment(self) -> str:
        return self.nodes_with_role(NodeRole.ENVIRONMENT)[0]

    @property
    def outcome(self) -> str:
        return self.nodes_with_role(NodeRole.OUTCOME)[0]

    @property
    def attributes(self) -> tuple[str, ...]:
        return self.nodes_with_role(NodeRole.ATTRIBUTE)

    def descendants(self, name: str) -> set[str]:
        seen: set[str] = set()
        stack = list(self.children[name])
        while stack:
            v = stack.pop()
            if v not in seen:
                seen.add(v)
                stack.extend(self.children[v])
        return seen

    def ancestors(self, names: Iterable[str]) -> set[str]:
        """Ancestors of ``names``, including the nodes themselves."""
        seen = set(names)
        stack = list(seen)
        while stack:
            v = stack.pop()
            for p in self.parents[v]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def without_edges(self, drop: Iterable[tuple[str, str]]) -> "CausalGraph":
        drop = set(drop)
        return build_graph(self.nodes, [e for e in self.edges if e not in drop])

    def with_edges(self, extra: Iterable[tuple[str, str]]) -> "CausalGraph":
        edges = list(self.edges)
        for e in extra:
            if e not in edges:
                edges.append(e)
        return build_graph(self.nodes, edges)

    def environment_edges(self) -> tuple[tuple[str, str], ...]:
        env = self.environment
        return tuple(e for e in self.edges if e[0] == env)


def _as_node(spec) -> Node:
    if isinstance(spec, Node):
        return spec
    if isinstance(spec, (tuple, list)):
        name, role, *rest = spec
        observed = bool(rest[0]) if rest else True
        return Node(str(name), NodeRole(role) if not isinstance(role, NodeRole) else role, observed)
    raise TypeError(f"cannot interpret {spec!r} as a node")


def build_graph(nodes, edges) -> CausalGraph:
    """Validate nodes and edges and return a :class:`CausalGraph`.

    ``nodes`` holds :class:`Node` instances or ``(name, role[, observed])``
    tuples, where ``role`` is a :class:`NodeRole` or its short string value.
    ``edges`` holds ``(parent, child)`` pairs.
    """
    node_list = [_as_node(n) for n in nodes]
    names = [n.name for n in node_list]
    seen: set[str] = set()
    for name in names:
        if name in seen:
            raise DuplicateNode(f"duplicate node {name!r}")
        seen.add(name)

    edge_list: list[tuple[str, str]] = []
    for p, c in edges:
        for end in (p, c):
            if end not in seen:
                raise UnknownEndpoint(f"edge {p!r} -> {c!r} references unknown node {end!r}")
        if (p, c) not in edge_list:
            edge_list.append((p, c))

    envs = [n.name for n in node_list if n.role is NodeRole.ENVIRONMENT]
    if not envs:
        raise MissingEnvironmentNode("graph has no environment node")
    if len(envs) > 1:
        raise MissingEnvironmentNode(f"graph has {len(envs)} environment nodes, expected exactly one")
    outs = [n.name for n in node_list if n.role is NodeRole.OUTCOME]
    if len(outs) > 1:
        raise MultipleOutcomeNodes(f"graph has multiple outcome nodes: {', '.join(outs)}")
    if not outs:
        raise MultipleOutcomeNodes("graph has no outcome node, expected exactly one")

    for p, c in edge_list:
        if p == c:
            raise CycleDetected(f"self-loop on {p!r}")
        if c == envs[0]:
            raise CycleDetected(f"environment node {c!r} must not have parents (edge {p} -> {c})")

    # Kahn's algorithm
    indeg = {n: 0 for n in names}
    kids: dict[str, list[str]] = {n: [] for n in names}
    for p, c in edge_list:
        indeg[c] += 1
        kids[p].append(c)
    queue = deque(n for n in names if indeg[n] == 0)
    visited = 0
    while queue:
        v = queue.popleft()
        visited += 1
        for c in kids[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    if visited != len(names):
        cyc = sorted(n for n, d in indeg.items() if d > 0)
        raise CycleDetected(f"edges form a cycle among {', '.join(cyc)}")

    return CausalGraph(tuple(node_list), tuple(edge_list), _validated=True)


def d_separated(graph: CausalGraph, u: str, w: str, z: Iterable[str] = ()) -> bool:
    """Return True iff ``u`` and ``w`` are d-separated given ``z``.

    Uses the reachability ("Bayes ball") traversal: a trail may pass a
    non-collider only if it is not in ``z``, and a collider only if the
    collider is an ancestor of (or in) ``z``.
    """
    z = frozenset(z)
    for name in (u, w, *z):
        graph.node(name)
    if u == w or u in z or w in z:
        raise OverlappingArguments(f"u={u!r}, w={w!r} and z={sorted(z)} must be disjoint")

    parents = graph.parents
    children = graph.children
    anc_z = graph.ancestors(z)

    # direction: True = arrived from a child (moving up), False = from a parent
    visited: set[tuple[str, bool]] = set()
    stack = [(u, True)]
    while stack:
        v, up = stack.pop()
        if (v, up) in visited:
            continue
        visited.add((v, up))
        if v == w:
            return False
        if up:
            if v in z:
                continue
            for p in parents[v]:
                stack.append((p, True))
            for c in children[v]:
                stack.append((c, False))
        else:
            if v not in z:
                for c in children[v]:
                    stack.append((c, False))
            if v in anc_z:
                for p in parents[v]:
                    stack.append((p, True))
    return True


def blocking_set(graph: CausalGraph, node: str) -> frozenset[str]:
    """Observed variables isolating the direct effect of the environment on ``node``.

    The observed parents of ``node`` (without the environment) are tried
    first. The candidate must d-separate the environment from ``node`` once
    any direct environment edge into ``node`` is removed. Otherwise all
    subsets of observed non-descendants are searched, smallest first and in
    lexicographic order.

    When nothing verifies but the observed parents only leak through
    unobserved parents of ``node``, the observed parents are returned and an
    :class:`UnblockedPathWarning` is emitted; any other failure raises
    :class:`NoValidBlockingSet`.
    """
    graph.node(node)
    env = graph.environment
    if node == env:
        raise NodeIsEnvironment(f"{node!r} is the environment node")

    cut = graph.without_edges([(env, node)])
    parents = frozenset(p for p in graph.parents[node] if p != env and graph.is_observed(p))
    if d_separated(cut, env, node, parents):
        return parents

    desc = graph.descendants(node)
    pool = sorted(
        v for v in graph.names if v not in desc and v not in (env, node) and graph.is_observed(v)
    )
    for size in range(len(pool) + 1):
        for combo in itertools.combinations(pool, size):
            if d_separated(cut, env, node, combo):
                return frozenset(combo)

    hidden = sorted(p for p in graph.parents[node] if p != env and not graph.is_observed(p))
    if hidden:
        relaxed = cut.without_edges([(h, node) for h in hidden])
        if d_separated(relaxed, env, node, parents):
            warnings.warn(
                f"blocking set {sorted(parents)} for {node!r} leaves paths open "
                f"through unobserved parent(s) {hidden}",
                UnblockedPathWarning,
                stacklevel=2,
            )
            return parents
    raise NoValidBlockingSet(f"no observed set blocks the indirect paths from {env!r} to {node!r}")


def _sort_family(family) -> list[frozenset[str]]:
    return sorted(family, key=lambda s: (-len(s), sorted(s)))


def separating_set(graph: CausalGraph, criterion: FairnessCriterion) -> list[frozenset[str]]:
    """All inclusion-maximal admissible input sets for a fairness-transferable predictor.

    A candidate ``V`` drawn from the observed nodes other than the
    environment ``S`` and outcome ``Y`` is admissible when

    * demographic parity: ``Y ⊥ S | V`` and ``v ⊥ S | A`` for every ``v`` in ``V``;
    * equalized odds: ``Y ⊥ S | V ∪ A`` and ``v ⊥ S | Y, A`` for every ``v`` in ``V``.

    Attribute nodes pass the per-variable condition trivially. An empty list
    means no set is admissible (only a trivial predictor remains).
    """
    criterion = FairnessCriterion(criterion)
    env, out = graph.environment, graph.outcome
    attrs = frozenset(graph.attributes)
    pool = sorted(v for v in graph.names if v not in (env, out) and graph.is_observed(v))

    if criterion is FairnessCriterion.DEMOGRAPHIC_PARITY:
        per_var_cond = attrs
    else:
        per_var_cond = attrs | {out}
    ok_var = {
        v: v in attrs or d_separated(graph, v, env, per_var_cond - {v})
        for v in pool
    }

    valid: list[frozenset[str]] = []
    for size in range(len(pool) + 1):
        for combo in itertools.combinations(pool, size):
            if not all(ok_var[v] for v in combo):
                continue
            cond = set(combo)
            if criterion is FairnessCriterion.EQUALIZED_ODDS:
                cond |= attrs
            if d_separated(graph, out, env, cond):
                valid.append(frozenset(combo))
    maximal = [v for v in valid if not any(v < other for other in valid)]
    return _sort_family(maximal)


def table_form(family, graph: CausalGraph, criterion: FairnessCriterion) -> list[frozenset[str]]:
    """Render a separating-set family the way feature-selection tables list it.

    Under equalized odds the attribute is part of every conditioning set, so
    it is left implicit unless it is the only admissible input. Under
    demographic parity the full set is reported.
    """
    criterion = FairnessCriterion(criterion)
    if criterion is FairnessCriterion.DEMOGRAPHIC_PARITY:
        return _sort_family(family)
    attrs = frozenset(graph.attributes)
    rendered = []
    for vset in family:
        rest = vset - attrs
        rendered.append(rest if rest else vset)
    return _sort_family(set(rendered))


# graph-spec text format

_ROLE_WORDS = {r.value: r for r in NodeRole}
_NAME = r"[A-Za-z_][A-Za-z0-9_.]*"
_EDGE_RE = re.compile(rf"^({_NAME})->({_NAME})$")


def parse_graph_spec(text: str) -> CausalGraph:
    """Parse the line-oriented graph-spec format.

    ::

        # comment
        nodes: S:env, A:attr, M:aux:unobserved, X:cov, Y:out
        S -> A
        A -> Y
    """
    nodes = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = "".join(raw.split())
        if not line or line.startswith("#"):
            continue
        if nodes is None:
            if not line.startswith("nodes:"):
                raise GraphSpecParseError("expected header 'nodes: name:role, ...'", lineno)
            nodes = []
            body = line[len("nodes:"):]
            if not body:
                raise GraphSpecParseError("header lists no nodes", lineno)
            for item in body.split(","):
                parts = item.split(":")
                if len(parts) not in (2, 3) or not re.fullmatch(_NAME, parts[0]):
                    raise GraphSpecParseError(f"bad node entry {item!r}", lineno)
                if parts[1] not in _ROLE_WORDS:
                    raise GraphSpecParseError(f"unknown role {parts[1]!r} (use env|attr|cov|out|aux)", lineno)
                observed = True
                if len(parts) == 3:
                    if parts[2] != "unobserved":
                        raise GraphSpecParseError(f"unknown node flag {parts[2]!r}", lineno)
                    observed = False
                nodes.append(Node(parts[0], _ROLE_WORDS[parts[1]], observed))
            continue
        m = _EDGE_RE.match(line)
        if not m:
            raise GraphSpecParseError(f"bad edge line {raw.strip()!r}", lineno)
        edges.append((m.group(1), m.group(2)))
    if nodes is None:
        raise GraphSpecParseError("empty graph spec")
    return build_graph(nodes, edges)


def format_graph_spec(graph: CausalGraph) -> str:
    items = []
    for n in graph.nodes:
        item = f"{n.name}:{n.role.value}"
        if not n.observed:
            item += ":unobserved"
        items.append(item)
    lines = ["nodes: " + ", ".join(items)]
    lines += [f"{p} -> {c}" for p, c in graph.edges]
    return "\n".join(lines) + "\n"
