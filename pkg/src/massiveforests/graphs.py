"""Weighted directed graphs with vertex masses.

The basic object is a finite connected graph with positive conductances on
directed edges and nonnegative masses on vertices.  Parallel edges are kept
as distinct edge ids and loops are allowed.  Conductances and masses may be
floats or exact `fractions.Fraction` values; exact values survive through
the enumeration and rational linear algebra routines.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

ROOT = -1  # pseudo-target for "no outgoing edge" / cemetery in edge tuples


def _is_exact(v):
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


class WeightedGraph:
    """Finite directed graph with conductances and masses.

    Vertices are dense integers 0..n-1.  `edges` is a list of
    (tail, head, conductance) triples; for every edge (x, y) with x != y the
    reverse (y, x) must also be present (possibly with a different
    conductance).  Loops (x, x) are allowed and count as their own reverse.
    """

    def __init__(self, n, edges, masses, positions=None, check=True):
        self.n = int(n)
        self.tail = np.array([e[0] for e in edges], dtype=int)
        self.head = np.array([e[1] for e in edges], dtype=int)
        self.cond = [e[2] for e in edges]
        self.masses = list(masses)
        self.positions = None if positions is None else np.asarray(positions, float)
        self.m_edges = len(edges)

        self.out_edges = [[] for _ in range(self.n)]
        for eid in range(self.m_edges):
            self.out_edges[self.tail[eid]].append(eid)

        if check:
            self._validate()

        # float views used by samplers and numeric linear algebra
        self.cond_f = np.array([float(c) for c in self.cond])
        self.masses_f = np.array([float(m) for m in self.masses])

    # -- validation -------------------------------------------------------

    def _validate(self):
        if len(self.masses) != self.n:
            raise ValueError("need one mass per vertex")
        for c in self.cond:
            if not c > 0:
                raise ValueError("conductances must be strictly positive")
        for m in self.masses:
            if m < 0:
                raise ValueError("masses must be nonnegative")
        pairs = set(zip(self.tail.tolist(), self.head.tolist()))
        for x, y in pairs:
            if x == y:
                continue
            if (y, x) not in pairs:
                raise ValueError(f"directed edge ({x},{y}) has no reverse")
        if self.n > 1 and not self._connected():
            raise ValueError("graph must be connected")

    def _connected(self):
        seen = [False] * self.n
        stack = [0]
        seen[0] = True
        while stack:
            x = stack.pop()
            for eid in self.out_edges[x]:
                y = self.head[eid]
                if not seen[y]:
                    seen[y] = True
                    stack.append(y)
        return all(seen)

    # -- basic quantities ---------------------------------------------------

    def is_exact(self):
        return all(_is_exact(c) for c in self.cond) and all(
            _is_exact(m) for m in self.masses
        )

    def total_conductance(self, x):
        """c(x): total conductance of edges leaving x (loops included)."""
        return sum(self.cond[eid] for eid in self.out_edges[x])

    def ck(self, x):
        """c(x) + m(x), the total rate out of x for the killed walk."""
        return self.total_conductance(x) + self.masses[x]

    def edge_conductance(self, x, y):
        """Sum of conductances of all parallel edges x -> y (0 if none)."""
        tot = 0
        for eid in self.out_edges[x]:
            if self.head[eid] == y:
                tot = tot + self.cond[eid]
        return tot

    def neighbours(self, x):
        return sorted({int(self.head[eid]) for eid in self.out_edges[x]})

    def directed_edge_set(self):
        """Distinct (tail, head) pairs, loops included."""
        return sorted({(int(t), int(h)) for t, h in zip(self.tail, self.head)})

    def copy_with_conductances(self, new_cond):
        edges = [(int(self.tail[i]), int(self.head[i]), new_cond[i])
                 for i in range(self.m_edges)]
        return WeightedGraph(self.n, edges, list(self.masses),
                             positions=self.positions, check=False)


def symmetric_graph(n, und_edges, masses, positions=None):
    """Build a WeightedGraph from undirected (x, y, c) triples."""
    edges = []
    for x, y, c in und_edges:
        if x == y:
            edges.append((x, y, c))
        else:
            edges.append((x, y, c))
            edges.append((y, x, c))
    return WeightedGraph(n, edges, masses, positions=positions)


class CemeteryGraph:
    """The graph extended by a cemetery vertex absorbing the masses.

    The cemetery is a fresh vertex `rho` with an incoming edge (x, rho) of
    conductance m(x) for every x with positive mass; rho has no outgoing
    edges, so the (non-massive) Laplacian of the extension restricted to the
    base vertices is the massive Laplacian of the base.
    """

    def __init__(self, base: WeightedGraph):
        self.base = base
        self.rho = base.n
        self.cemetery_edges = [
            (x, self.rho, base.masses[x])
            for x in range(base.n)
            if base.masses[x] > 0
        ]

    @property
    def has_cemetery(self):
        return len(self.cemetery_edges) > 0

    def tree_to_forest(self, tree):
        """Drop the (x, rho) edges of a spanning tree rooted at rho."""
        return RootedForest(
            self.base.n,
            {x: (y if y != self.rho else ROOT) for x, y in tree.items()},
        )

    def forest_to_tree(self, forest):
        """Add an (x, rho) edge at every root of the forest."""
        out = {}
        for x in range(self.base.n):
            y = forest.outgoing[x]
            out[x] = self.rho if y == ROOT else y
        return out


def cemetery_extension(g: WeightedGraph) -> CemeteryGraph:
    return CemeteryGraph(g)


class RootedForest:
    """Outgoing-edge assignment: vertex -> head vertex or ROOT.

    Forests are stored over (tail, head) pairs rather than edge ids; the
    weight of a forest on a multigraph sums the parallel conductances, which
    matches the Boltzmann measure of the edge-id configuration space.
    """

    def __init__(self, n, outgoing):
        self.n = n
        self.outgoing = {int(x): int(outgoing[x]) for x in range(n)}

    def roots(self):
        return sorted(x for x, y in self.outgoing.items() if y == ROOT)

    def edges(self):
        return sorted((x, y) for x, y in self.outgoing.items() if y != ROOT)

    def is_acyclic(self):
        color = [0] * self.n  # 0 unseen, 1 on path, 2 done
        for start in range(self.n):
            x = start
            path = []
            while x != ROOT and color[x] == 0:
                color[x] = 1
                path.append(x)
                x = self.outgoing[x]
            if x != ROOT and color[x] == 1:
                return False
            for v in path:
                color[v] = 2
        return True

    def key(self):
        return tuple(sorted(self.outgoing.items()))

    def __eq__(self, other):
        return isinstance(other, RootedForest) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def weight(self, g: WeightedGraph):
        """Boltzmann weight: product of conductances and root masses."""
        w = Fraction(1) if g.is_exact() else 1.0
        for x, y in self.outgoing.items():
            if y == ROOT:
                w = w * g.masses[x]
            else:
                w = w * g.edge_conductance(x, y)
        return w


def wired_restriction(ambient: WeightedGraph, subset) -> WeightedGraph:
    """Restrict to `subset` with wired boundary conditions.

    Conductances restrict, and every conductance leaving the subset is added
    to the mass of its tail vertex, so the massive Laplacian of the result
    is the restriction of the ambient massive Laplacian.
    """
    subset = sorted(set(int(v) for v in subset))
    index = {v: i for i, v in enumerate(subset)}
    inside = set(subset)
    edges = []
    masses = [ambient.masses[v] for v in subset]
    for v in subset:
        for eid in ambient.out_edges[v]:
            y = int(ambient.head[eid])
            c = ambient.cond[eid]
            if y in inside:
                edges.append((index[v], index[y], c))
            else:
                masses[index[v]] = masses[index[v]] + c
    positions = None
    if ambient.positions is not None:
        positions = ambient.positions[subset]
    g = WeightedGraph(len(subset), edges, masses, positions=positions)
    if len(subset) > 1 and not g._connected():
        raise ValueError("subset induces a disconnected subgraph")
    g.ambient_ids = subset
    return g


class CollapsedGraph:
    """The window with all outside vertices identified to an outer vertex o.

    Vertices 0..n-1 are the window vertices (reindexed); `o` is the extra
    vertex.  Every ambient edge leaving the window becomes its own parallel
    edge (x, o); `ambient_target` remembers the ambient head vertex, which
    the killed dimer weights need.
    """

    def __init__(self, n, edges, o_edges, positions, ambient_ids):
        self.n = n
        self.o = n
        self.edges = edges            # window (x, y, c) with both ends kept
        self.o_edges = o_edges        # (x, c, ambient_target)
        self.positions = positions
        self.ambient_ids = ambient_ids

    def as_weighted_graph(self):
        """The collapsed graph itself as a WeightedGraph on n+1 vertices.

        Edges to o get reverses (o, x) with equal conductance so the object
        passes validation; the Boltzmann measures used here never leave o.
        """
        edges = list(self.edges)
        for x, c, _ in self.o_edges:
            edges.append((x, self.o, c))
            edges.append((self.o, x, c))
        masses = [0] * (self.n + 1)
        return WeightedGraph(self.n + 1, edges, masses, check=False)

    def total_o_conductance(self, x):
        return sum(c for (v, c, _) in self.o_edges if v == x)


def collapse_boundary(ambient: WeightedGraph, subset) -> CollapsedGraph:
    """Identify everything outside `subset` to a single outer vertex."""
    subset = sorted(set(int(v) for v in subset))
    if len(subset) == ambient.n:
        # nothing to collapse
        edges = [(int(ambient.tail[i]), int(ambient.head[i]), ambient.cond[i])
                 for i in range(ambient.m_edges)]
        return CollapsedGraph(ambient.n, edges, [], ambient.positions,
                              subset)
    index = {v: i for i, v in enumerate(subset)}
    inside = set(subset)
    edges, o_edges = [], []
    for v in subset:
        for eid in ambient.out_edges[v]:
            y = int(ambient.head[eid])
            c = ambient.cond[eid]
            if y in inside:
                edges.append((index[v], index[y], c))
            else:
                o_edges.append((index[v], c, y))
    positions = None
    if ambient.positions is not None:
        positions = ambient.positions[subset]
    return CollapsedGraph(len(subset), edges, o_edges, positions, subset)


# -- exhaustive enumeration oracles ---------------------------------------

def enumerate_forests(g: WeightedGraph, cap=8, include_zero_weight=False):
    """All rooted spanning forests with their exact Boltzmann weights.

    Every vertex independently picks ROOT or an out-neighbour (loops are
    never part of a forest); configurations with a directed cycle are
    discarded.  Weights are Fractions when the graph data is rational.
    Forests rooted at a zero-mass vertex have weight zero and are skipped
    unless `include_zero_weight` is set.
    """
    if g.n > cap:
        raise ValueError(f"enumeration capped at {cap} vertices")
    choices = []
    for x in range(g.n):
        opts = [ROOT] + [y for y in g.neighbours(x) if y != x]
        choices.append(opts)

    exact = g.is_exact()
    out = {}
    results = []

    def weight_factor(x, y):
        if y == ROOT:
            return g.masses[x]
        return g.edge_conductance(x, y)

    def rec(x, w):
        if x == g.n:
            forest = RootedForest(g.n, dict(out))
            if forest.is_acyclic():
                results.append((forest, w))
            return
        for y in choices[x]:
            f = weight_factor(x, y)
            if f == 0 and not include_zero_weight:
                continue
            out[x] = y
            rec(x + 1, w * f)
        del out[x]

    rec(0, Fraction(1) if exact else 1.0)
    return results


def forest_partition_function(g: WeightedGraph, cap=8):
    total = Fraction(0) if g.is_exact() else 0.0
    for _, w in enumerate_forests(g, cap=cap):
        total = total + w
    return total


def enumerate_trees_rooted_at(g: WeightedGraph, root, cap=9):
    """All directed spanning trees rooted at `root`, with weights."""
    if g.n > cap:
        raise ValueError(f"enumeration capped at {cap} vertices")
    exact = g.is_exact()
    results = []
    out = {}
    order = [x for x in range(g.n) if x != root]

    def rec(i, w):
        if i == len(order):
            assign = dict(out)
            assign[root] = ROOT
            forest = RootedForest(g.n, assign)
            if forest.is_acyclic():
                results.append((forest, w))
            return
        x = order[i]
        for y in g.neighbours(x):
            if y == x:
                continue
            out[x] = y
            rec(i + 1, w * g.edge_conductance(x, y))
        del out[x]

    rec(0, Fraction(1) if exact else 1.0)
    return results


def tree_partition_function(g: WeightedGraph, root, cap=9):
    exact = g.is_exact()
    total = Fraction(0) if exact else 0.0
    for _, w in enumerate_trees_rooted_at(g, root, cap=cap):
        total = total + w
    return total
