"""Kasteleyn machinery on the double graph.

Phases, drifted and killed weight systems, Temperley's bijection in both
directions, local statistics, the block identity (K^k)^dagger K^k and the
determinant relation det K^k = C det Delta^k, plus matching sampling and
the height field.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .graphs import ROOT, WeightedGraph, wired_restriction
from .linalg import (
    assemble_massive_laplacian,
    determinant_exact,
)
from .planar import DoubleGraph

PHASES = (1, 1j, -1, -1j)  # slots: x, left dual, y, right dual


class GaussianRational:
    """Exact complex number with Fraction real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def from_phase(cls, phase):
        phase = complex(phase)
        return cls(Fraction(int(phase.real)), Fraction(int(phase.imag)))

    def __add__(self, o):
        return GaussianRational(self.re + o.re, self.im + o.im)

    def __sub__(self, o):
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __mul__(self, o):
        return GaussianRational(self.re * o.re - self.im * o.im,
                                self.re * o.im + self.im * o.re)

    def __truediv__(self, o):
        d = o.re * o.re + o.im * o.im
        return GaussianRational((self.re * o.re + self.im * o.im) / d,
                                (self.im * o.re - self.re * o.im) / d)

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def is_zero(self):
        return self.re == 0 and self.im == 0

    def abs2(self):
        return self.re * self.re + self.im * self.im


def gaussian_det(rows):
    """Exact determinant of a square GaussianRational matrix."""
    n = len(rows)
    A = [row[:] for row in rows]
    det = GaussianRational(1)
    for k in range(n):
        piv = next((i for i in range(k, n) if not A[i][k].is_zero()), None)
        if piv is None:
            return GaussianRational(0)
        if piv != k:
            A[k], A[piv] = A[piv], A[k]
            det = -det
        det = det * A[k][k]
        for i in range(k + 1, n):
            f = A[i][k] / A[k][k]
            for j in range(k, n):
                A[i][j] = A[i][j] - f * A[k][j]
    return det


def kasteleyn_phases(dg: DoubleGraph):
    """Phase per (white, slot): 1, i, -1, -i clockwise from the tail."""
    return {(w, slot): PHASES[slot]
            for w in range(dg.n_white)
            for slot in range(4)}


def check_kasteleyn_property(dg: DoubleGraph, phases=None):
    """Alternating product around every surviving quad must be -1."""
    if phases is None:
        phases = kasteleyn_phases(dg)
    bad = []
    for (corner, w1, fid, w2) in dg.quad_faces():
        s1c = _slot_of(dg, w1, corner, fid)
        s1f = _slot_of_face(dg, w1, fid)
        s2c = _slot_of(dg, w2, corner, fid)
        s2f = _slot_of_face(dg, w2, fid)
        prod = (phases[(w1, s1c)] * phases[(w2, s2f)]) / \
            (phases[(w2, s2c)] * phases[(w1, s1f)])
        if abs(prod + 1) > 1e-12:
            bad.append((corner, w1, fid, w2, prod))
    return bad


def _slot_of(dg, w, corner, fid):
    info = dg.whites[w]
    if info["x"] == corner:
        return 0
    if info["y"] == corner:
        return 2
    raise ValueError("corner not on white")


def _slot_of_face(dg, w, fid):
    info = dg.whites[w]
    if info["left"] == fid:
        return 1
    if info["right"] == fid:
        return 3
    raise ValueError("face not on white")


class WeightSystem:
    """Weights nu on the surviving half-edges of the double graph."""

    def __init__(self, dg: DoubleGraph, values):
        self.dg = dg
        self.values = values  # (w, slot) -> weight

    def weight(self, w, slot):
        return self.values[(w, slot)]


def _lam_at(dg, lam_ambient, white_info, end):
    """lambda at a primal endpoint; o reads the ambient vertex behind it."""
    col = dg.col
    if end == "o":
        return lam_ambient[white_info["edge"].ambient_target]
    return lam_ambient[col.ambient_ids[end]]


def drifted_weights(dg: DoubleGraph, lam_ambient) -> WeightSystem:
    """Dual half-edges weigh 1; the half-edge at x weighs c~_(x, y)."""
    values = {}
    for w, info in enumerate(dg.whites):
        c = info["edge"].cond
        lx = _lam_at(dg, lam_ambient, info, info["x"])
        ly = _lam_at(dg, lam_ambient, info, info["y"])
        if info["x"] != "o":
            values[(w, 0)] = c * ly / lx
        if info["y"] != "o":
            values[(w, 2)] = c * lx / ly
        one = Fraction(1) if isinstance(c, (int, Fraction)) else 1.0
        if info["left"] != dg.r:
            values[(w, 1)] = one
        if info["right"] != dg.r:
            values[(w, 3)] = one
    return WeightSystem(dg, values)


def killed_weights(dg: DoubleGraph, lam_ambient, lam_star) -> WeightSystem:
    """nu^k: primal (c lambda(y))^1/2 lambda(x)^-1/2, dual the inverse root.

    lam_star is indexed by faces of G^o (dual vertices); the r column is
    removed so its value is never read.
    """
    values = {}
    for w, info in enumerate(dg.whites):
        c = float(info["edge"].cond)
        lx = float(_lam_at(dg, lam_ambient, info, info["x"]))
        ly = float(_lam_at(dg, lam_ambient, info, info["y"]))
        root = math.sqrt(c * lx * ly)
        if info["x"] != "o":
            values[(w, 0)] = math.sqrt(c * ly / lx)
        if info["y"] != "o":
            values[(w, 2)] = math.sqrt(c * lx / ly)
        if info["left"] != dg.r:
            values[(w, 1)] = 1.0 / (float(lam_star[info["left"]]) * root)
        if info["right"] != dg.r:
            values[(w, 3)] = 1.0 / (float(lam_star[info["right"]]) * root)
    return WeightSystem(dg, values)


def killed_drifted_gauge(dg: DoubleGraph, lam_ambient, lam_star):
    """Gauge functions (phi on whites, psi on blacks) with K^k = Phi K^d Psi."""
    phi = {}
    for w, info in enumerate(dg.whites):
        c = float(info["edge"].cond)
        lx = float(_lam_at(dg, lam_ambient, info, info["x"]))
        ly = float(_lam_at(dg, lam_ambient, info, info["y"]))
        phi[w] = 1.0 / math.sqrt(c * lx * ly)
    psi = {}
    for x in range(dg.col.n):
        psi[dg.black_of_vertex(x)] = float(
            lam_ambient[dg.col.ambient_ids[x]])
    for f in dg.dual_ids:
        psi[dg.black_of_face(f)] = 1.0 / float(lam_star[f])
    return phi, psi


def kasteleyn_matrix(dg: DoubleGraph, weights: WeightSystem, exact=False):
    """K with rows = whites, columns = blacks, entries zeta * nu."""
    if exact:
        zero = GaussianRational(0)
        K = [[zero for _ in range(dg.n_black)] for _ in range(dg.n_white)]
        for w in range(dg.n_white):
            for (b, kind, slot) in dg.white_neighbours(w):
                val = GaussianRational(weights.weight(w, slot)) * \
                    GaussianRational.from_phase(complex(PHASES[slot]))
                K[w][b] = K[w][b] + val
        return K
    K = np.zeros((dg.n_white, dg.n_black), dtype=complex)
    for w in range(dg.n_white):
        for (b, kind, slot) in dg.white_neighbours(w):
            K[w, b] += PHASES[slot] * float(weights.weight(w, slot))
    return K


def kasteleyn_determinant(K):
    if isinstance(K, np.ndarray):
        if K.shape[0] != K.shape[1]:
            raise ValueError("Kasteleyn matrix must be square (|W| = |B|)")
        return complex(np.linalg.det(K))
    return gaussian_det(K)


def enumerate_matchings(dg: DoubleGraph, weights: WeightSystem,
                        cap_whites=14, exact=False):
    """All perfect matchings with weights (oracle; capped size)."""
    if dg.n_white > cap_whites:
        raise ValueError(f"matching enumeration capped at {cap_whites}")
    neigh = [dg.white_neighbours(w) for w in range(dg.n_white)]
    used_black = set()
    matching = {}
    results = []
    one = Fraction(1) if exact else 1.0

    def rec(w, weight):
        if w == dg.n_white:
            if len(used_black) == dg.n_black:
                results.append((dict(matching), weight))
            return
        for (b, kind, slot) in neigh[w]:
            if b in used_black:
                continue
            used_black.add(b)
            matching[w] = (b, slot)
            wt = weights.weight(w, slot)
            rec(w + 1, weight * (Fraction(wt) if exact else float(wt)))
            used_black.discard(b)
            del matching[w]

    rec(0, one)
    return results


def partition_check(dg: DoubleGraph, weights: WeightSystem, exact=False,
                    cap_whites=14):
    """(|det K|, sum over matchings, gap).  Exact mode compares squares."""
    K = kasteleyn_matrix(dg, weights, exact=exact)
    matchings = enumerate_matchings(dg, weights, cap_whites=cap_whites,
                                    exact=exact)
    if exact:
        det = kasteleyn_determinant(K)
        z = sum((wt for _, wt in matchings), Fraction(0))
        gap = det.abs2() - z * z
        return det, z, gap
    det = abs(kasteleyn_determinant(K))
    z = float(sum(wt for _, wt in matchings))
    gap = abs(det - z) / max(abs(z), 1e-300)
    return det, z, gap


# -- Temperley bijection ----------------------------------------------------


def resolve_tree(dg: DoubleGraph, assignment, rng=None):
    """Vertex -> head map into vertex -> white map, resolving parallels.

    Parallel edges (several whites between the same endpoints, e.g. spokes
    to o) are resolved proportionally to conductance, or to the unique
    candidate when there is no choice.
    """
    by_pair = {}
    for w, info in enumerate(dg.whites):
        by_pair.setdefault((info["x"], info["y"]), []).append(w)
        by_pair.setdefault((info["y"], info["x"]), []).append(w)
    out = {}
    for x, y in assignment.items():
        y = "o" if y == dg.col.o or y == ROOT else y
        cands = by_pair.get((x, y), [])
        if not cands:
            raise ValueError(f"no double-graph edge for tree edge {x}->{y}")
        if len(cands) == 1 or rng is None:
            out[x] = cands[0]
        else:
            weights = np.array([float(dg.whites[w]["edge"].cond)
                                for w in cands])
            out[x] = cands[int(rng.choice(len(cands),
                                          p=weights / weights.sum()))]
    return out


def temperley_forward(dg: DoubleGraph, tree_whites):
    """Tree rooted at o -> perfect matching (with its dual tree).

    `tree_whites` maps every window vertex to the white of its outgoing
    edge.  The dual tree is the unique spanning tree of the dual graph on
    the unused whites, oriented toward r.
    """
    col = dg.col
    matching = {}
    used = set()
    for x in range(col.n):
        w = tree_whites[x]
        info = dg.whites[w]
        if info["x"] != x and info["y"] != x:
            raise ValueError("tree edge does not start at its vertex")
        matching[w] = (dg.black_of_vertex(x), 0 if info["x"] == x else 2)
        used.add(w)

    # dual adjacency over unused whites
    adj = {}
    for w, info in enumerate(dg.whites):
        if w in used:
            continue
        a, b = info["left"], info["right"]
        adj.setdefault(a, []).append((b, w))
        adj.setdefault(b, []).append((a, w))
    parent = {dg.r: None}
    stack = [dg.r]
    dual_tree = {}
    while stack:
        f = stack.pop()
        for (g2, w) in adj.get(f, []):
            if g2 in parent:
                continue
            parent[g2] = (f, w)
            dual_tree[g2] = w
            stack.append(g2)
    for f in dg.dual_ids:
        if f not in dual_tree:
            raise ValueError("dual complement is not spanning: input was "
                             "not a tree rooted at o")
        w = dual_tree[f]
        info = dg.whites[w]
        slot = 1 if info["left"] == f else 3
        matching[w] = (dg.black_of_face(f), slot)
    if len(matching) != dg.n_white:
        raise ValueError("Temperley image is not perfect")
    return matching, dual_tree


def temperley_inverse(dg: DoubleGraph, matching):
    """Matching -> (primal tree as vertex->white, dual tree as face->white)."""
    tree, dual_tree = {}, {}
    for w, (b, slot) in matching.items():
        info = dg.whites[w]
        if slot in (0, 2):
            x = info["x"] if slot == 0 else info["y"]
            if x == "o" or tree.get(x) is not None:
                raise ValueError("not a Temperley matching")
            tree[x] = w
        else:
            f = info["left"] if slot == 1 else info["right"]
            dual_tree[f] = w
    if len(tree) != dg.col.n or len(dual_tree) != len(dg.dual_ids):
        raise ValueError("matching does not cover the blacks")
    # primal part must be a forest flowing into o
    head = {}
    for x, w in tree.items():
        info = dg.whites[w]
        head[x] = info["y"] if info["x"] == x else info["x"]
    color = {}
    for start in head:
        x, chain = start, []
        while x != "o" and x in head and color.get(x, 0) == 0:
            color[x] = 1
            chain.append(x)
            x = head[x]
        if x != "o" and color.get(x) == 1:
            raise ValueError("matching decodes to a cyclic primal part")
        for v in chain:
            color[v] = 2
    return tree, dual_tree


def tree_weight(dg: DoubleGraph, tree_whites, lam_ambient):
    """Product of tilted conductances over the tree's directed edges."""
    w_total = None
    for x, w in tree_whites.items():
        info = dg.whites[w]
        c = info["edge"].cond
        lx = _lam_at(dg, lam_ambient, info, x)
        other = info["y"] if info["x"] == x else info["x"]
        ly = _lam_at(dg, lam_ambient, info, other)
        factor = c * ly / lx
        w_total = factor if w_total is None else w_total * factor
    return w_total


def matching_weight(dg: DoubleGraph, weights: WeightSystem, matching,
                    exact=False):
    total = Fraction(1) if exact else 1.0
    for w, (b, slot) in matching.items():
        wt = weights.weight(w, slot)
        total = total * (Fraction(wt) if exact else float(wt))
    return total


def sample_matching(dg: DoubleGraph, lam_ambient, rng):
    """Sample a drifted-model matching through Wilson + Temperley."""
    from .walks import wilson_sample

    col = dg.col
    tilde_window = _tilted_window(dg, lam_ambient)
    forest = wilson_sample(tilde_window, rng)
    assignment = {}
    for x, y in forest.outgoing.items():
        assignment[x] = "o" if y == ROOT else y
    tree_whites = resolve_tree(dg, assignment, rng=rng)
    matching, _ = temperley_forward(dg, tree_whites)
    return matching


def _tilted_window(dg: DoubleGraph, lam_ambient):
    """Wired window with tilted conductances matching the drifted model."""
    col = dg.col
    edges = []
    masses = [0.0] * col.n
    for info in (dg.whites[w] for w in range(dg.n_white)):
        c = float(info["edge"].cond)
        if info["y"] == "o":
            x = info["x"]
            lz = float(lam_ambient[info["edge"].ambient_target])
            lx = float(lam_ambient[col.ambient_ids[x]])
            masses[x] += c * lz / lx
        else:
            x, y = info["x"], info["y"]
            lx = float(lam_ambient[col.ambient_ids[x]])
            ly = float(lam_ambient[col.ambient_ids[y]])
            edges.append((x, y, c * ly / lx))
            edges.append((y, x, c * lx / ly))
    return WeightedGraph(col.n, edges, masses, positions=col.positions,
                         check=False)


# -- determinantal identities ------------------------------------------------


def local_statistics(dg: DoubleGraph, K, half_edges, Kinv=None):
    """P(half-edges in the matching) = prod K[w,b] det K^-1[b_i, w_j]."""
    if Kinv is None:
        Kinv = np.linalg.inv(K)
    coeff = 1.0 + 0.0j
    for (w, b) in half_edges:
        coeff *= K[w, b]
    minor = np.array([[Kinv[b_i, w_j] for (w_j, _) in half_edges]
                      for (_, b_i) in half_edges])
    return (coeff * np.linalg.det(minor)).real


def verify_block_identity(dg: DoubleGraph, lam_ambient, lam_star, window):
    """Blocks of (K^k)^dagger K^k against Delta^k_V and the dual operator.

    `window` is the wired restriction of the ambient graph on the same
    vertex order as the collapse.  Returns (max off-block entry, max
    V-block off-diagonal gap, max dual-block gap, max V-block diagonal
    gap); the last is the harmonicity defect of lambda and vanishes when
    lambda is massive harmonic on the window.
    """
    weights = killed_weights(dg, lam_ambient, lam_star)
    K = kasteleyn_matrix(dg, weights)
    A = K.conj().T @ K
    n = dg.col.n

    off = 0.0
    if dg.n_black > n:
        off = max(float(np.max(np.abs(A[:n, n:]))),
                  float(np.max(np.abs(A[n:, :n]))))

    Lk = assemble_massive_laplacian(window)
    v_block = A[:n, :n].real
    diff = v_block - Lk
    v_offdiag = float(np.max(np.abs(diff - np.diag(np.diag(diff)))))
    v_diag_defect = float(np.max(np.abs(np.diag(diff))))

    dual = A[n:, n:].real
    dual_ref = dual_operator(dg, lam_ambient, lam_star)
    dual_dev = float(np.max(np.abs(dual - dual_ref))) if dual.size else 0.0
    return off, v_offdiag, dual_dev, v_diag_defect


def dual_operator(dg: DoubleGraph, lam_ambient, lam_star):
    """Delta~* on the kept dual vertices from its defining formula."""
    nd = len(dg.dual_ids)
    D = np.zeros((nd, nd))
    for w, info in enumerate(dg.whites):
        c = float(info["edge"].cond)
        lx = float(_lam_at(dg, lam_ambient, info, info["x"]))
        ly = float(_lam_at(dg, lam_ambient, info, info["y"]))
        ctilde_star = 1.0 / (c * lx * ly)
        a, b = info["left"], info["right"]
        for f in (a, b):
            if f == dg.r:
                continue
            i = dg.dual_index[f]
            D[i, i] += ctilde_star / float(lam_star[f]) ** 2
        if a != dg.r and b != dg.r and a != b:
            i, j = dg.dual_index[a], dg.dual_index[b]
            val = ctilde_star / (float(lam_star[a]) * float(lam_star[b]))
            D[i, j] -= val
            D[j, i] -= val
    return D


def recover_fields_from_weights(dg: DoubleGraph, weights: WeightSystem):
    """Reciprocal direction: weights passing the block test come from fields.

    Recovers (lambda on window vertices, lambda* on kept faces) up to one
    global factor from a killed weight system; returns maps normalized so
    lambda = 1 at the smallest window vertex.
    """
    # lambda ratios along window edges: nu_wx / nu_wy = lam(y)/lam(x)
    lam = {0: 1.0}
    order = [0]
    seen = {0}
    adj = {}
    for w, info in enumerate(dg.whites):
        if info["y"] == "o" or info["x"] == "o":
            continue
        adj.setdefault(info["x"], []).append((info["y"], w))
        adj.setdefault(info["y"], []).append((info["x"], w))
    while order:
        x = order.pop()
        for (y, w) in adj.get(x, []):
            if y in seen:
                continue
            info = dg.whites[w]
            nu_x = float(weights.weight(w, 0 if info["x"] == x else 2))
            nu_y = float(weights.weight(w, 2 if info["x"] == x else 0))
            lam[y] = lam[x] * nu_x / nu_y
            seen.add(y)
            order.append(y)
    lam_star = {}
    for w, info in enumerate(dg.whites):
        if info["y"] == "o":
            # sqrt(c lam(x) lam(z)) = nu_wx * lam(x): no outside value needed
            x = info["x"]
            root = float(weights.weight(w, 0)) * lam[x]
        else:
            x, y = info["x"], info["y"]
            c = float(weights.weight(w, 0)) * float(weights.weight(w, 2))
            root = math.sqrt(c * lam[x] * lam[y])
        for f, slot in ((info["left"], 1), (info["right"], 3)):
            if f == dg.r or (w, slot) not in weights.values:
                continue
            lam_star[f] = 1.0 / (float(weights.weight(w, slot)) * root)
    return lam, lam_star


def det_relation_constant(dg: DoubleGraph, lam_ambient, lam_star):
    """C(c, lambda, lambda*) of the determinant identity."""
    col = dg.col
    logc = 0.0
    deg = [0] * col.n
    for info in (dg.whites[w] for w in range(dg.n_white)):
        logc -= 0.5 * math.log(float(info["edge"].cond))
        if info["x"] != "o":
            deg[info["x"]] += 1
        if info["y"] != "o":
            deg[info["y"]] += 1
        if info["y"] == "o":
            lz = float(lam_ambient[info["edge"].ambient_target])
            logc -= 0.5 * math.log(lz)
    for x in range(col.n):
        lx = float(lam_ambient[col.ambient_ids[x]])
        logc += (1.0 - 0.5 * deg[x]) * math.log(lx)
    # dual columns of K^k scale as 1/lambda*, hence the inverse product
    for f in dg.dual_ids:
        logc -= math.log(float(lam_star[f]))
    return math.exp(logc)


def verify_det_relation(dg: DoubleGraph, lam_ambient, lam_star, window):
    """(|det K^k|, C * det Delta^k_V, relative gap)."""
    weights = killed_weights(dg, lam_ambient, lam_star)
    K = kasteleyn_matrix(dg, weights)
    detK = abs(kasteleyn_determinant(K))
    detL = float(np.linalg.det(assemble_massive_laplacian(window)))
    C = det_relation_constant(dg, lam_ambient, lam_star)
    rhs = C * detL
    gap = abs(detK - rhs) / max(abs(rhs), 1e-300)
    return detK, rhs, gap


def self_duality_residuals(dg: DoubleGraph, lam_ambient, lam_star):
    """|lam(x) lam(y) lam*(left) lam*(right) - 1| per interior quad white."""
    boundary = set(dg.structure.o_faces) | {dg.r}
    out = []
    for w, info in enumerate(dg.whites):
        if info["x"] == "o" or info["y"] == "o":
            continue
        if info["left"] in boundary or info["right"] in boundary:
            continue
        lx = float(_lam_at(dg, lam_ambient, info, info["x"]))
        ly = float(_lam_at(dg, lam_ambient, info, info["y"]))
        ls1 = float(lam_star[info["left"]])
        ls2 = float(lam_star[info["right"]])
        out.append((w, abs(lx * ly * ls1 * ls2 - 1.0)))
    return out


def dual_block_vs_inverse_conductances(dg: DoubleGraph, lam_ambient,
                                       lam_star, interior_only=True):
    """Off-diagonal of the dual block against -1/c_xy (self-dual form).

    Returns (max off-diagonal gap over interior dual pairs, implied dual
    masses); self-duality demands the masses be nonnegative (and ~0 at
    criticality).
    """
    D = dual_operator(dg, lam_ambient, lam_star)
    nd = len(dg.dual_ids)
    boundary = set(dg.structure.o_faces) | {dg.r}
    keep = set(range(nd))
    if interior_only:
        keep = {dg.dual_index[f] for f in dg.dual_ids if f not in boundary}
    cstar = np.zeros((nd, nd))
    for w, info in enumerate(dg.whites):
        a, b = info["left"], info["right"]
        if a == dg.r or b == dg.r or a == b:
            continue
        i, j = dg.dual_index[a], dg.dual_index[b]
        cstar[i, j] += 1.0 / float(info["edge"].cond)
        cstar[j, i] += 1.0 / float(info["edge"].cond)
    off_gap = 0.0
    for i in keep:
        for j in keep:
            if i != j and cstar[i, j] > 0:
                off_gap = max(off_gap, abs(-D[i, j] - cstar[i, j]))
    masses = np.array([D[i, i] - cstar[i].sum() for i in range(nd)])
    return off_gap, masses


# -- height field -------------------------------------------------------------


class HeightField:
    """Height per quad of the double graph, zero at the reference quad."""

    def __init__(self, values, reference):
        self.values = values      # (corner, face) -> height
        self.reference = reference

    def __getitem__(self, quad):
        return self.values[quad]


def reference_matching(dg: DoubleGraph):
    """Deterministic matching from a BFS tree of the collapsed window."""
    col = dg.col
    # BFS toward o: boundary vertices point at a spoke, others at parents
    adj = {}
    spoke_white = {}
    for w, info in enumerate(dg.whites):
        if info["y"] == "o":
            spoke_white.setdefault(info["x"], w)
        else:
            adj.setdefault(info["x"], []).append((info["y"], w))
            adj.setdefault(info["y"], []).append((info["x"], w))
    tree = {}
    seen = set()
    frontier = []
    for x in sorted(spoke_white):
        tree[x] = spoke_white[x]
        seen.add(x)
        frontier.append(x)
    while frontier:
        nxt = []
        for x in frontier:
            for (y, w) in sorted(adj.get(x, [])):
                if y not in seen:
                    tree[y] = w
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    if len(tree) != col.n:
        raise ValueError("window has vertices with no route to o")
    matching, _ = temperley_forward(dg, tree)
    return matching


def height_function(dg: DoubleGraph, matching, reference=None) -> HeightField:
    """Height of `matching` relative to the deterministic reference.

    The difference flow of the two matchings is divergence-free at every
    surviving vertex, so its dual potential is well-defined on the quads;
    the BFS below asserts closure (curl-freeness) as it goes.
    """
    if reference is None:
        reference = reference_matching(dg)
    flow = {}
    for w in range(dg.n_white):
        b_ref = reference[w][0]
        b_cur = matching[w][0]
        if b_ref != b_cur:
            flow[(w, b_ref)] = 1
            flow[(w, b_cur)] = -1

    pos = dg.col.positions
    boundary_faces = set(dg.structure.o_faces) | {dg.r}
    face_centroid = {}
    for fid, walk in enumerate(dg.structure.faces):
        if fid in boundary_faces:
            continue
        pts = [pos[h.tail] for h in walk]
        face_centroid[fid] = np.mean(pts, axis=0)

    def quad_centroid(q):
        corner, f = q
        return 0.5 * (pos[corner] + face_centroid[f])

    white_pos = {}
    for w, info in enumerate(dg.whites):
        if info["y"] == "o":
            white_pos[w] = pos[info["x"]] + 0.5 * np.asarray(
                info["edge"].direction, float)
        else:
            white_pos[w] = 0.5 * (pos[info["x"]] + pos[info["y"]])

    # interior quads are the faces of the double graph once o, r and their
    # edges are removed; everything else merges into one outer region
    quads = sorted({(corner, f) for (corner, w1, f, w2) in dg.quad_faces()
                    if f not in boundary_faces})
    if not quads:
        raise ValueError("window has no interior double-graph faces")
    quad_ids = {q: i for i, q in enumerate(quads)}
    whites_at_corner = {}
    whites_at_face = {}
    for w, info in enumerate(dg.whites):
        for end in ("x", "y"):
            if info[end] != "o":
                whites_at_corner.setdefault(info[end], []).append(w)
        for side in ("left", "right"):
            whites_at_face.setdefault(info[side], []).append(w)

    def neighbours(q):
        corner, f = q
        out = []
        for w in whites_at_corner.get(corner, []):
            info = dg.whites[w]
            a, b = info["left"], info["right"]
            other = b if f == a else (a if f == b else None)
            if other is not None and (corner, other) in quad_ids:
                out.append(((corner, other), w, dg.black_of_vertex(corner)))
        for w in whites_at_face.get(f, []):
            info = dg.whites[w]
            xx, yy = info["x"], info["y"]
            other = yy if corner == xx else (xx if corner == yy else None)
            if other is not None and (other, f) in quad_ids:
                out.append(((other, f), w, dg.black_of_face(f)))
        return out

    reference_quad = quads[0]
    values = {reference_quad: 0.0}
    stack = [reference_quad]
    while stack:
        q = stack.pop()
        cq = quad_centroid(q)
        for (q2, w, b) in neighbours(q):
            c2 = quad_centroid(q2)
            step = c2 - cq
            wvec = white_pos[w] - cq
            sign = 1.0 if step[0] * wvec[1] - step[1] * wvec[0] > 0 else -1.0
            dh = sign * flow.get((w, b), 0)
            if q2 in values:
                if abs(values[q2] - (values[q] + dh)) > 1e-9:
                    raise ValueError("height increments have curl")
            else:
                values[q2] = values[q] + dh
                stack.append(q2)
    if len(values) != len(quads):
        raise ValueError("interior double-graph faces are disconnected")
    return HeightField(values, reference_quad)
