"""Doob transform of killed walks and the matching tree/forest identities.

A positive function lambda on the ambient vertices tilts the conductances,
c~_(x,y) = lambda(y)/lambda(x) c_(x,y).  When lambda is massive harmonic on
a window, the tilted walk restricted to the window is a plain walk killed
at the boundary, and the forest model on the window matches the tree model
on the collapsed graph, determinant for determinant.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .graphs import (
    WeightedGraph,
    collapse_boundary,
    forest_partition_function,
    tree_partition_function,
    wired_restriction,
)
from .linalg import (
    assemble_massive_laplacian,
    assemble_massive_laplacian_exact,
    determinant,
    determinant_exact,
    potential,
    transfer_current,
)

HARMONICITY_GATE = 1e-8


def _lam(lam, x):
    return lam[x]


def doob_conductances(ambient: WeightedGraph, lam) -> WeightedGraph:
    """Tilted graph: c~_(x,y) = lambda(y)/lambda(x) c_(x,y), masses dropped."""
    for x in range(ambient.n):
        if not _lam(lam, x) > 0:
            raise ValueError("lambda must be positive everywhere")
    new_cond = []
    for eid in range(ambient.m_edges):
        x, y = int(ambient.tail[eid]), int(ambient.head[eid])
        new_cond.append(ambient.cond[eid] * _lam(lam, y) / _lam(lam, x))
    edges = [(int(ambient.tail[i]), int(ambient.head[i]), new_cond[i])
             for i in range(ambient.m_edges)]
    zero = Fraction(0) if ambient.is_exact() else 0.0
    return WeightedGraph(ambient.n, edges, [zero] * ambient.n,
                         positions=ambient.positions, check=False)


def massive_laplacian_apply(g: WeightedGraph, f, x):
    """(Delta^k f)(x) for a function given on x and its neighbours."""
    val = g.masses[x] * f[x]
    for eid in g.out_edges[x]:
        y = int(g.head[eid])
        if y == x:
            continue
        val = val + g.cond[eid] * (f[x] - f[y])
    return val


def check_massive_harmonic(ambient: WeightedGraph, lam, subset):
    """Max relative harmonicity residual |(Delta^k lam)(x)| / (c^k(x) lam(x))."""
    worst = 0.0
    for x in subset:
        r = massive_laplacian_apply(ambient, lam, x)
        rel = abs(float(r)) / (float(ambient.ck(x)) * float(_lam(lam, x)))
        worst = max(worst, rel)
    return worst


def verify_gauge_identity(ambient: WeightedGraph, lam, subset):
    """sup-norm of Delta~_V - Lambda^-1 Delta^k_V Lambda on the window."""
    subset = sorted(subset)
    window = wired_restriction(ambient, subset)
    tilde_window = wired_restriction(doob_conductances(ambient, lam), subset)
    Lk = assemble_massive_laplacian(window)
    Lt = assemble_massive_laplacian(tilde_window)
    lam_v = np.array([float(_lam(lam, x)) for x in subset])
    gauge = (Lk * lam_v[None, :]) / lam_v[:, None]
    return float(np.max(np.abs(Lt - gauge)))


def verify_partition_equality(ambient: WeightedGraph, subset, lam,
                              exact=False, enumerate_cap=None):
    """Z_RSF on the wired window vs Z_RST rooted at o on the tilted graph.

    Returns (z_forest, z_tree, relative gap).  Refuses when lambda fails the
    harmonicity gate on the window.
    """
    subset = sorted(subset)
    resid = check_massive_harmonic(ambient, lam, subset)
    if resid > HARMONICITY_GATE:
        raise ValueError(
            f"lambda is not massive harmonic on the window "
            f"(residual {resid:.3e} > {HARMONICITY_GATE:.0e})")
    window = wired_restriction(ambient, subset)
    tilde = doob_conductances(ambient, lam)
    tilde_window = wired_restriction(tilde, subset)
    if exact:
        z_forest = determinant_exact(
            assemble_massive_laplacian_exact(window))
        z_tree = determinant_exact(
            assemble_massive_laplacian_exact(tilde_window))
        gap = abs(z_forest - z_tree)
    else:
        z_forest = determinant(assemble_massive_laplacian(window))
        z_tree = determinant(assemble_massive_laplacian(tilde_window))
        gap = abs(z_forest - z_tree) / max(abs(z_forest), 1e-300)
    if enumerate_cap is not None:
        # independent enumeration arm: trees of G^o vs forests of the window
        col = collapse_boundary(tilde, subset)
        go = col.as_weighted_graph()
        z_tree_enum = tree_partition_function(go, col.o, cap=enumerate_cap)
        z_forest_enum = forest_partition_function(window, cap=enumerate_cap)
        return z_forest, z_tree, gap, z_forest_enum, z_tree_enum
    return z_forest, z_tree, gap


def tilted_transfer(window: WeightedGraph, lam_window, pot=None, exact=False):
    """Tilted transfer currents from the untilted potential.

    H~_{e,f} = (lam(y)/lam(w)) V(w,y)/c^k(y) - (lam(y)/lam(x)) V(x,y)/c^k(y)
    for e = (w, x), f = (y, z); entries for edges inside the window.
    `lam_window` is indexed by window vertices.
    """
    if pot is None:
        pot = potential(window, exact=exact)
    zero = Fraction(0) if exact else 0.0

    def entry(e, f):
        from .graphs import ROOT

        w, x = e
        y, z = f
        if y == ROOT:
            return zero
        ly = _lam(lam_window, y)
        t1 = zero if w == ROOT else \
            (ly / _lam(lam_window, w)) * pot.continuous(w, y)
        t2 = zero if x == ROOT else \
            (ly / _lam(lam_window, x)) * pot.continuous(x, y)
        return t1 - t2

    return entry


def tilted_transfer_direct(ambient: WeightedGraph, subset, lam, exact=False):
    """Transfer currents of the tilted window computed the long way."""
    subset = sorted(subset)
    tilde_window = wired_restriction(doob_conductances(ambient, lam), subset)
    pot = potential(tilde_window, exact=exact)
    return transfer_current(tilde_window, pot)


def martin_kernel_ratio(window: WeightedGraph, x, x0, z_sequence,
                        exact=False):
    """Killed Martin kernel ratios V(x, z)/V(x0, z) along a vertex sequence."""
    pot = potential(window, exact=exact)
    return [pot.value(x, z) / pot.value(x0, z) for z in z_sequence]
