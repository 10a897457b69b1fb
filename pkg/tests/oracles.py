"""Independent brute-force references used by the test-suite."""

import itertools

import numpy as np

from shiftaudit.graph import build_graph


def random_dag(rng, n_nodes, edge_prob):
    """Graph over V0..V{n-1} in topological order; V0 is the environment, the last node the outcome."""
    names = [f"V{i}" for i in range(n_nodes)]
    roles = ["env"] + ["cov"] * (n_nodes - 2) + ["out"] if n_nodes >= 2 else ["env"]
    edges = [(names[i], names[j]) for i in range(n_nodes) for j in range(i + 1, n_nodes)
             if rng.random() < edge_prob]
    return build_graph(list(zip(names, roles)), edges)


def _descendants_incl(names, edges):
    kids = {v: [] for v in names}
    for p, c in edges:
        kids[p].append(c)
    out = {}
    for v in names:
        seen, stack = {v}, [v]
        while stack:
            for c in kids[stack.pop()]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        out[v] = seen
    return out


def simple_paths(names, edges, u, w):
    """All simple paths between u and w in the undirected skeleton."""
    adj = {v: set() for v in names}
    for p, c in edges:
        adj[p].add(c)
        adj[c].add(p)
    paths = []

    def walk(path):
        last = path[-1]
        if last == w:
            paths.append(list(path))
            return
        for nxt in sorted(adj[last]):
            if nxt not in path:
                path.append(nxt)
                walk(path)
                path.pop()

    walk([u])
    return paths


def path_blocked(path, edge_set, desc, z):
    for i in range(1, len(path) - 1):
        a, b, c = path[i - 1], path[i], path[i + 1]
        collider = (a, b) in edge_set and (c, b) in edge_set
        if collider:
            if not (desc[b] & z):
                return True
        elif b in z:
            return True
    return False


def brute_d_separated(graph, u, w, z):
    names, edges = list(graph.names), list(graph.edges)
    desc = _descendants_incl(names, edges)
    edge_set = set(edges)
    z = set(z)
    return all(path_blocked(p, edge_set, desc, z) for p in simple_paths(names, edges, u, w))


class PathTable:
    """Vectorised path-enumeration oracle for one graph and one (u, w) pair.

    Node sets are bitmasks; each path stores its non-collider mask and the
    inclusive-descendant masks of its colliders. A path is open given ``z``
    iff no non-collider is in ``z`` and every collider has a descendant in ``z``.
    """

    def __init__(self, graph, u, w):
        names, edges = list(graph.names), list(graph.edges)
        bit = {v: 1 << i for i, v in enumerate(names)}
        self.bit = bit
        desc = _descendants_incl(names, edges)
        dmask = {v: sum(bit[d] for d in desc[v]) for v in names}
        edge_set = set(edges)
        noncol, cols = [], []
        for p in simple_paths(names, edges, u, w):
            nm, cm = 0, []
            for i in range(1, len(p) - 1):
                a, b, c = p[i - 1], p[i], p[i + 1]
                if (a, b) in edge_set and (c, b) in edge_set:
                    cm.append(dmask[b])
                else:
                    nm |= bit[b]
            noncol.append(nm)
            cols.append(cm)
        width = max([len(c) for c in cols] + [1])
        self.noncol = np.array(noncol, dtype=np.int64)
        self.cols = np.array([c + [0] * (width - len(c)) for c in cols], dtype=np.int64).reshape(len(cols), width)
        # padding slots are not colliders and never block
        self.pad = np.array([[False] * len(c) + [True] * (width - len(c)) for c in cols], dtype=bool).reshape(len(cols), width)

    def separated(self, zmasks):
        z = np.asarray(zmasks, dtype=np.int64)[:, None]
        if self.noncol.size == 0:
            return np.ones(len(z), dtype=bool)
        open_nc = (self.noncol[None, :] & z) == 0
        open_col = np.all(((self.cols[None, :, :] & z[:, :, None]) != 0) | self.pad[None], axis=2)
        return ~np.any(open_nc & open_col, axis=1)


def _gap(hard, labels, groups, levels, criterion):
    if criterion == "dp":
        rates = [hard[groups == g].mean() for g in levels]
        return max(rates) - min(rates)
    tpr = [hard[(groups == g) & (labels == 1)].mean() for g in levels]
    fpr = [hard[(groups == g) & (labels == 0)].mean() for g in levels]
    return 0.5 * ((max(tpr) - min(tpr)) + (max(fpr) - min(fpr)))


def threshold_oracle(scores, labels, groups, grid, criterion, slack):
    """Exhaustive search over the product grid with the documented tie-break order.

    Gaps within ``slack`` of the minimum tie, capped at the gap of the
    default 0.5 threshold.
    """
    scores, labels, groups = map(np.asarray, (scores, labels, groups))
    levels = sorted(set(groups.tolist()))
    best = None
    rows = []
    for combo in itertools.product(range(len(grid)), repeat=len(levels)):
        thr = np.empty(len(scores))
        for g, i in zip(levels, combo):
            thr[groups == g] = grid[i]
        hard = scores >= thr
        gap = _gap(hard, labels, groups, levels, criterion)
        correct = int(np.sum(hard == (labels == 1)))
        rows.append((gap, correct, combo))
    floor = min(r[0] for r in rows)
    before = _gap(scores >= 0.5, labels, groups, levels, criterion)
    bound = max(floor, min(floor + slack, before))
    for gap, correct, combo in rows:
        if gap <= bound + 1e-12:
            key = (-correct, combo)
            if best is None or key < best:
                best = key
    return {g: float(grid[i]) for g, i in zip(levels, best[1])}
