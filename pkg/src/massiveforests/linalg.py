"""Massive Laplacians, potentials and transfer currents.

Float paths go through numpy (dense LU); the exact paths use fraction-free
Bareiss elimination and rational Gaussian solves so that the matrix-forest
and determinantal identities can be checked bit-exactly against the
enumeration oracles.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import scipy.linalg

from .graphs import ROOT, WeightedGraph

DENSE_SOLVE_LIMIT = 4000


class RecurrentWalkError(ValueError):
    """Raised when the massive Laplacian is singular (m == 0, finite graph)."""


def assemble_massive_laplacian(g: WeightedGraph):
    """Dense float massive Laplacian: diag m(x)+c(x)-c_(x,x), off -c_(x,y)."""
    n = g.n
    L = np.zeros((n, n))
    for x in range(n):
        L[x, x] = g.masses_f[x]
        for eid in g.out_edges[x]:
            y = g.head[eid]
            c = g.cond_f[eid]
            if y == x:
                continue  # c(x) - c_(x,x) cancels the loop
            L[x, x] += c
            L[x, y] -= c
    return L


def assemble_massive_laplacian_exact(g: WeightedGraph):
    """Same matrix with Fraction entries (graph data must be rational)."""
    n = g.n
    L = [[Fraction(0)] * n for _ in range(n)]
    for x in range(n):
        L[x][x] += Fraction(g.masses[x])
        for eid in g.out_edges[x]:
            y = int(g.head[eid])
            c = Fraction(g.cond[eid])
            if y == x:
                continue
            L[x][x] += c
            L[x][y] -= c
    return L


def determinant(M):
    """LU determinant of a dense float matrix (0.0 for singular input)."""
    M = np.asarray(M, float)
    if M.size == 0:
        return 1.0
    lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    sign = 1.0
    for i, p in enumerate(piv):
        if p != i:
            sign = -sign
    diag = np.diag(lu)
    if np.any(diag == 0.0):
        return 0.0
    return sign * float(np.prod(diag))


def log_determinant(M):
    """(sign, log|det|) for scale-robust comparisons."""
    M = np.asarray(M, float)
    lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    sign = 1.0
    for i, p in enumerate(piv):
        if p != i:
            sign = -sign
    diag = np.diag(lu)
    sign *= np.prod(np.sign(diag))
    return sign, float(np.sum(np.log(np.abs(diag))))


def determinant_exact(M):
    """Fraction determinant by fraction-free Bareiss elimination."""
    n = len(M)
    if n == 0:
        return Fraction(1)
    A = [[Fraction(v) for v in row] for row in M]
    sign = 1
    prev = Fraction(1)
    for k in range(n - 1):
        if A[k][k] == 0:
            for i in range(k + 1, n):
                if A[i][k] != 0:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return Fraction(0)
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) / prev
            A[i][k] = Fraction(0)
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def solve_exact(M, B):
    """Solve M X = B in rational arithmetic (Gaussian elimination)."""
    n = len(M)
    m = len(B[0])
    A = [[Fraction(v) for v in row] + [Fraction(b) for b in brow]
         for row, brow in zip(M, B)]
    for k in range(n):
        piv = next((i for i in range(k, n) if A[i][k] != 0), None)
        if piv is None:
            raise RecurrentWalkError("singular matrix in exact solve")
        A[k], A[piv] = A[piv], A[k]
        pk = A[k][k]
        for i in range(n):
            if i == k or A[i][k] == 0:
                continue
            f = A[i][k] / pk
            for j in range(k, n + m):
                A[i][j] -= f * A[k][j]
    return [[A[i][n + j] / A[i][i] for j in range(m)] for i in range(n)]


class Potential:
    """The matrix V(x, y) of expected visits of the killed walk.

    V solves Delta^k V = D(c^k); entries are Fractions in exact mode.
    `continuous(x, y)` is V(x, y)/c^k(y), the quantity entering the
    transfer current.
    """

    def __init__(self, g: WeightedGraph, V, exact=False, provenance="inverse"):
        self.g = g
        self.V = V
        self.exact = exact
        self.provenance = provenance

    def value(self, x, y):
        if x == ROOT or y == ROOT:
            return Fraction(0) if self.exact else 0.0
        return self.V[x][y] if self.exact else self.V[x, y]

    def continuous(self, x, y):
        if x == ROOT or y == ROOT:
            return Fraction(0) if self.exact else 0.0
        return self.value(x, y) / self.g.ck(y)


def potential(g: WeightedGraph, exact=False) -> Potential:
    """V = (I - Q^k)^{-1}, computed via Delta^k V = D(c^k)."""
    if all(m == 0 for m in g.masses):
        raise RecurrentWalkError(
            "m == 0 on a finite graph: the walk is recurrent and the "
            "potential diverges")
    if exact:
        if not g.is_exact():
            raise ValueError("exact potential needs rational graph data")
        L = assemble_massive_laplacian_exact(g)
        D = [[Fraction(g.ck(x)) if x == y else Fraction(0)
              for y in range(g.n)] for x in range(g.n)]
        V = solve_exact(L, D)
        return Potential(g, V, exact=True)
    L = assemble_massive_laplacian(g)
    D = np.diag([float(g.ck(x)) for x in range(g.n)])
    if g.n <= DENSE_SOLVE_LIMIT:
        V = np.linalg.solve(L, D)
    else:
        import scipy.sparse
        import scipy.sparse.linalg
        Ls = scipy.sparse.csc_matrix(L)
        solve = scipy.sparse.linalg.factorized(Ls)
        V = np.column_stack([solve(D[:, j]) for j in range(g.n)])
    return Potential(g, V, exact=False)


def potential_walk_sum(g: WeightedGraph, n_terms=200):
    """Truncated series sum_{i<=n} (Q^k)^i, an independent oracle for V."""
    n = g.n
    Q = np.zeros((n, n))
    for x in range(n):
        ckx = float(g.ck(x))
        for eid in g.out_edges[x]:
            Q[x, g.head[eid]] += g.cond_f[eid] / ckx
    V = np.eye(n)
    P = np.eye(n)
    for _ in range(n_terms):
        P = P @ Q
        V += P
    return V


class TransferOperator:
    """H[e, f] for directed edges e=(w,x), f=(y,z), cemetery edges included.

    Edges are (tail, head) pairs with head possibly ROOT (the cemetery).
    H is zero when f points at the cemetery or e is a loop.
    """

    def __init__(self, g: WeightedGraph, pot: Potential):
        self.g = g
        self.pot = pot

    def entry(self, e, f):
        w, x = e
        y, z = f
        zero = Fraction(0) if self.pot.exact else 0.0
        if y == ROOT or w == x:
            return zero
        return self.pot.continuous(w, y) - self.pot.continuous(x, y)

    def minor(self, edges):
        return [[self.entry(e, f) for f in edges] for e in edges]


def transfer_current(g: WeightedGraph, pot: Potential) -> TransferOperator:
    return TransferOperator(g, pot)


def edge_conductance_k(g: WeightedGraph, e):
    """c^k of a directed edge; (x, ROOT) carries the mass m(x)."""
    x, y = e
    if y == ROOT:
        return g.masses[x]
    return g.edge_conductance(x, y)


def edge_probability(g: WeightedGraph, edges, exact=False):
    """Boltzmann probability that all given directed edges are present.

    Determinantal formula: det[(H_{e_i,e_j})] * prod c^k_{e_i}.
    """
    if len(set(edges)) != len(edges):
        raise ValueError("duplicate edges in probability query")
    pot = potential(g, exact=exact)
    H = transfer_current(g, pot)
    minor = H.minor(edges)
    det = determinant_exact(minor) if exact else determinant(
        np.array(minor, float))
    prob = det
    for e in edges:
        prob = prob * edge_conductance_k(g, e)
    return prob
