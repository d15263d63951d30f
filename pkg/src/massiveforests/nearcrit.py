"""Near-critical Monte Carlo experiments on the square isoradial lattice.

The regime ties the elliptic nome to the mesh, q = M*delta/2, which makes
the killing probability of order delta^2.  Walk kernels on the square
lattice are translation invariant, so the samplers below vectorize over
walkers; every experiment draws from counter-based per-task streams keyed
by the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .elliptic import (
    complete_integrals,
    exponential_step_factor,
    mass_value,
    near_critical_modulus,
    sc,
)
from .walks import loop_erase, rng_stream

SQRT2 = math.sqrt(2.0)


@dataclass
class ExperimentConfig:
    domain: str = "disk"       # disk | rectangle
    delta: float = 1 / 32
    M: float = 1.0
    u_bar: float = 0.0
    n_samples: int = 10**4
    seed: int = 0

    def __post_init__(self):
        if self.M * self.delta / 2 >= 1:
            raise ValueError("nome q = M*delta/2 must be < 1")


class SquareLatticeKernel:
    """Transition data of the (killed or drifted) walk on sqrt(2)*delta*Z^2.

    Directions are E, N, W, S.  The drifted kernel tilts by the discrete
    exponential with drift u_bar; the killed kernel carries the elliptic
    mass.  Both kernels coincide at M = 0.
    """

    RAYS = {
        "E": (-math.pi / 4, math.pi / 4),
        "N": (math.pi / 4, 3 * math.pi / 4),
        "W": (3 * math.pi / 4, 5 * math.pi / 4),
        "S": (-3 * math.pi / 4, -math.pi / 4),
    }
    STEPS = np.array([1.0, 1.0j, -1.0, -1.0j])

    def __init__(self, M, delta, u_bar=None):
        self.M = float(M)
        self.delta = float(delta)
        self.spacing = SQRT2 * delta
        self.mod = near_critical_modulus(M, delta) if M > 0 else \
            complete_integrals(0.0)
        self.c = sc(self.mod.abstract_angle(math.pi / 4), self.mod)
        self.m2 = mass_value([math.pi / 4] * 4, self.mod) if M > 0 else 0.0
        self.u_bar = u_bar
        if u_bar is None:
            cond = np.full(4, self.c)
            self.p_die = self.m2 / (self.m2 + cond.sum())
        else:
            factors = np.array([self.edge_factor(d, u_bar)
                                for d in ("E", "N", "W", "S")])
            cond = self.c * factors
            self.p_die = 0.0  # drifted walk carries no mass
        self.cond = cond
        self.p_dirs = (1.0 - self.p_die) * cond / cond.sum()
        self.cum = np.cumsum(np.concatenate(([self.p_die], self.p_dirs)))
        self.cum[-1] = 1.0

    def edge_factor(self, direction, u_bar):
        a, b = self.RAYS[direction]
        return exponential_step_factor(a, u_bar, self.mod) * \
            exponential_step_factor(b, u_bar, self.mod)

    def exponential(self, displacement, u_bar):
        """e_(x,y) for a lattice displacement (complex, in plane units)."""
        di = round(displacement.real / self.spacing)
        dj = round(displacement.imag / self.spacing)
        return self.edge_factor("E", u_bar) ** di * \
            self.edge_factor("N", u_bar) ** dj

    def step_many(self, pos, rng):
        """(new positions, died mask) for one synchronous step."""
        u = rng.random(pos.shape[0])
        idx = np.searchsorted(self.cum, u, side="right")
        died = idx == 0
        moves = np.where(died, 0, self.STEPS[np.minimum(idx, 4) - 1])
        return pos + self.spacing * moves, died

    def step_single(self, z, rng):
        u = rng.random()
        idx = int(np.searchsorted(self.cum, u, side="right"))
        if idx == 0:
            return None
        return z + self.spacing * complex(self.STEPS[idx - 1])


def _nearest_site(kernel, z):
    s = kernel.spacing
    return s * complex(round(z.real / s), round(z.imag / s))


# -- Girsanov ratio ------------------------------------------------------------


def girsanov_ratio_check(M, u_bar, deltas, radius=1.0):
    """Deterministic path-probability ratios against the Girsanov target.

    For each delta, takes the straight east path from the origin to the
    boundary of the disk window and evaluates the exact finite-volume ratio
    P(drifted walk follows it then exits) / P(killed walk follows it then
    exits or dies); the comparison value is exp(2M <e^{iu}, y - x>).
    Returns rows (delta, ratio, target, |ratio - target|).
    """
    rows = []
    for d in deltas:
        killed = SquareLatticeKernel(M, d)
        drifted = SquareLatticeKernel(M, d, u_bar=u_bar)
        s = killed.spacing
        inside = lambda z: abs(z) < radius
        x = 0.0 + 0.0j
        path = [x]
        while inside(path[-1] + s):
            path.append(path[-1] + s)
        y = path[-1]
        if len(path) < 2:
            raise ValueError("window too small for a straight path")
        # per-step ratio telescopes to the exponential between endpoints
        ratio = drifted.exponential(y - x, u_bar)
        num = 0.0
        den = killed.m2
        for k, direction in enumerate(("E", "N", "W", "S")):
            z = y + s * complex(SquareLatticeKernel.STEPS[k])
            if not inside(z):
                num += killed.c * drifted.exponential(z - y, u_bar)
                den += killed.c
        ratio *= num / den
        target = math.exp(2 * M * (math.cos(u_bar) * (y - x).real
                                   + math.sin(u_bar) * (y - x).imag))
        rows.append((d, ratio, target, abs(ratio - target)))
    return rows


# -- LERW ratio ----------------------------------------------------------------


def _window_graph(M, delta, radius, u_bar=None):
    """Wired disk window of the near-critical lattice as a WeightedGraph."""
    from .graphs import WeightedGraph

    kernel = SquareLatticeKernel(M, delta, u_bar=u_bar)
    s = kernel.spacing
    n_side = int(radius / s) + 2
    sites = {}
    for i in range(-n_side, n_side + 1):
        for j in range(-n_side, n_side + 1):
            z = s * complex(i, j)
            if abs(z) < radius:
                sites[(i, j)] = len(sites)
    edges = []
    masses = [float(kernel.m2 if u_bar is None else 0.0)] * len(sites)
    conds = kernel.cond
    for (i, j), v in sites.items():
        for k, (di, dj) in enumerate([(1, 0), (0, 1), (-1, 0), (0, -1)]):
            c = float(conds[k])
            if (i + di, j + dj) in sites:
                edges.append((v, sites[(i + di, j + dj)], c))
            else:
                masses[v] += c
    pos = np.array([[s * i, s * j] for (i, j) in sites])
    g = WeightedGraph(len(sites), edges, masses, positions=pos, check=False)
    g.site_index = sites
    g.kernel = kernel
    return g


def lerw_ratio_check(M, u_bar, delta, gamma_sites, n_samples, seed,
                     radius=0.35):
    """Monte Carlo LERW ratio against the Girsanov target.

    gamma_sites is a short simple path in lattice coordinates starting at
    the origin.  The drifted-arm probability is estimated by sampling; the
    killed-arm probability is computed exactly by the Green-function
    product formula ("exact-count denominator").  Returns (empirical ratio,
    target ratio, stderr of the ratio).
    """
    from .walks import TransitionTable, lerw_exact_probability

    killed_g = _window_graph(M, delta, radius)
    drifted_g = _window_graph(M, delta, radius, u_bar=u_bar)
    gamma = [killed_g.site_index[ij] for ij in gamma_sites]

    p_killed = lerw_exact_probability(killed_g, gamma)
    if p_killed == 0:
        raise ZeroDivisionError("killed arm has zero probability")

    table = TransitionTable(drifted_g)
    hits = 0
    per_task = 4096
    n_tasks = (n_samples + per_task - 1) // per_task
    done = 0
    start = gamma[0]
    for task in range(n_tasks):
        rng = rng_stream(seed, task)
        todo = min(per_task, n_samples - done)
        done += todo
        for _ in range(todo):
            x = start
            traj = [x]
            while True:
                y = table.step(x, rng.random())
                if y == -1:
                    break
                traj.append(y)
                x = y
            if loop_erase(traj) == gamma:
                hits += 1
    p_drift = hits / n_samples
    ratio = p_drift / p_killed
    stderr = math.sqrt(max(p_drift * (1 - p_drift), 1e-12) / n_samples) \
        / p_killed
    x0 = killed_g.positions[gamma[0]]
    x1 = killed_g.positions[gamma[-1]]
    target = math.exp(2 * M * (math.cos(u_bar) * (x1[0] - x0[0])
                               + math.sin(u_bar) * (x1[1] - x0[1])))
    # exact finite-delta ratio: the gauge telescopes along the path and the
    # Green diagonals cancel, leaving the exponential times the death ratio
    kern = drifted_g.kernel
    expo = kern.exponential(complex(x1[0], x1[1]) - complex(x0[0], x0[1]),
                            u_bar)
    exact = expo * drifted_g.masses_f[gamma[-1]] / killed_g.masses_f[gamma[-1]]
    return ratio, target, stderr, exact


# -- uniform crossing ---------------------------------------------------------


@dataclass
class CrossingSpec:
    r: float
    z: complex = 0.0 + 0.0j
    horizontal: bool = True

    def rectangle(self):
        if self.horizontal:
            return (self.z, self.z + self.r * complex(3, 1))
        return (self.z, self.z + self.r * complex(1, 3))

    def start_center(self):
        return self.z + self.r * complex(0.5, 0.5)

    def target_center(self):
        if self.horizontal:
            return self.z + self.r * complex(2.5, 0.5)
        return self.z + self.r * complex(0.5, 2.5)


def crossing_probability(spec: CrossingSpec, delta, M, n_samples, seed,
                         max_steps=None, coupled_uniforms=None):
    """MC estimate of P(hit the target ball before leaving R or dying).

    Walkers start at the lattice site nearest the start-ball center.  With
    `coupled_uniforms` a pre-drawn uniform block is reused, which couples
    estimates across masses (same trajectories, earlier deaths).
    Returns (estimate, stderr).
    """
    kernel = SquareLatticeKernel(M, delta)
    lo, hi = spec.rectangle()
    c_t = spec.target_center()
    start = _nearest_site(kernel, spec.start_center())
    if abs(start - spec.start_center()) > spec.r / 4:
        raise ValueError("no lattice site inside the start ball")
    if max_steps is None:
        max_steps = int(40 * (3 * spec.r / kernel.spacing) ** 2) + 1000

    pos = np.full(n_samples, start, dtype=complex)
    active = np.ones(n_samples, dtype=bool)
    success = np.zeros(n_samples, dtype=bool)
    rng = rng_stream(seed, 0)
    for step in range(max_steps):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        if coupled_uniforms is not None:
            u = coupled_uniforms[step][: idx.size]
        else:
            u = rng.random(idx.size)
        choice = np.searchsorted(kernel.cum, u, side="right")
        died = choice == 0
        moves = np.where(died, 0,
                         kernel.STEPS[np.minimum(choice, 4) - 1])
        newpos = pos[idx] + kernel.spacing * moves
        pos[idx] = newpos
        hit = np.abs(newpos - c_t) < spec.r / 4
        out = (newpos.real < lo.real) | (newpos.real > hi.real) | \
              (newpos.imag < lo.imag) | (newpos.imag > hi.imag)
        stop = died | hit | out
        success[idx[hit & ~died]] = True
        active[idx[stop]] = False
    est = float(success.mean())
    stderr = math.sqrt(max(est * (1 - est), 1e-12) / n_samples)
    return est, stderr


def crossing_grid(radii=(0.1, 0.3, 1.0), masses=(0.0, 1.0),
                  translations=(0j, 0.37 + 0.11j, -1.2 - 0.53j),
                  n_samples=10**5, seed=0, delta_ratio=1 / 64):
    """The full crossing battery; yields (spec, M, delta, estimate, stderr)."""
    rows = []
    task = 0
    for r in radii:
        for horizontal in (True, False):
            for z in translations:
                for M in masses:
                    spec = CrossingSpec(r=r, z=z, horizontal=horizontal)
                    est, se = crossing_probability(
                        spec, r * delta_ratio, M, n_samples, seed + task)
                    rows.append((spec, M, r * delta_ratio, est, se))
                    task += 1
    return rows


# -- exit law ------------------------------------------------------------------



def _arc_bin(angles, n_arcs):
    """Arc index with bins centered on the symmetry axes.

    Centering keeps the atomic lattice exit angles (0, pi/2, ...) in the
    middle of a bin, away from floating-point knife edges.
    """
    width = 2 * math.pi / n_arcs
    shifted = (np.asarray(angles) + width / 2) % (2 * math.pi)
    return np.minimum((shifted / width).astype(int), n_arcs - 1)


def _circle_crossing_angle(p, q, radius):
    """Angle where the segment p -> q (p inside, q outside) meets the circle."""
    d = q - p
    a = np.abs(d) ** 2
    b = 2 * (p.real * d.real + p.imag * d.imag)
    c = np.abs(p) ** 2 - radius * radius
    t = (-b + np.sqrt(np.maximum(b * b - 4 * a * c, 0.0))) / (2 * a)
    z = p + t * d
    return np.angle(z) % (2 * math.pi)


def exit_law_walk(M, u_bar, delta, n_samples, seed, radius=1.0, n_arcs=16,
                  start=0j, drifted=True):
    """Exit-arc histogram of the drifted (or killed) walk on the disk.

    The recorded exit location is where the walk's last step crosses the
    domain boundary, the natural discrete stand-in for the Brownian exit
    point.
    """
    kernel = SquareLatticeKernel(M, delta, u_bar=u_bar if drifted else None)
    start_site = _nearest_site(kernel, start)
    counts = np.zeros(n_arcs, dtype=np.int64)
    per_task = 1 << 14
    n_tasks = (n_samples + per_task - 1) // per_task
    done = 0
    exited_total = 0
    for task in range(n_tasks):
        rng = rng_stream(seed, task)
        todo = min(per_task, n_samples - done)
        done += todo
        pos = np.full(todo, start_site, dtype=complex)
        active = np.ones(todo, dtype=bool)
        for _ in range(10**7):
            if not active.any():
                break
            idx = np.nonzero(active)[0]
            old = pos[idx]
            newpos, died = kernel.step_many(old, rng)
            pos[idx] = newpos
            out = np.abs(newpos) >= radius
            take = out & ~died
            if take.any():
                ang = _circle_crossing_angle(old[take], newpos[take], radius)
                np.add.at(counts, _arc_bin(ang, n_arcs), 1)
                exited_total += int(take.sum())
            active[idx[out | died]] = False
    return counts, exited_total


def exit_law_brownian(M, u_bar, delta, n_samples, seed, radius=1.0,
                      n_arcs=16, start=0j):
    """Drifted-Brownian reference: Euler steps of size h = delta/4."""
    h = delta / 4.0
    dt = h * h
    drift = 2 * M * complex(math.cos(u_bar), math.sin(u_bar)) * dt
    counts = np.zeros(n_arcs, dtype=np.int64)
    per_task = 1 << 14
    n_tasks = (n_samples + per_task - 1) // per_task
    done = 0
    for task in range(n_tasks):
        rng = rng_stream(seed, task)
        todo = min(per_task, n_samples - done)
        done += todo
        pos = np.full(todo, complex(start), dtype=complex)
        active = np.ones(todo, dtype=bool)
        while active.any():
            idx = np.nonzero(active)[0]
            gauss = rng.standard_normal((idx.size, 2))
            old = pos[idx]
            new = old + drift + h * (gauss[:, 0] + 1j * gauss[:, 1])
            pos[idx] = new
            out = np.abs(new) >= radius
            if out.any():
                ang = _circle_crossing_angle(old[out], new[out], radius)
                np.add.at(counts, _arc_bin(ang, n_arcs), 1)
            active[idx[out]] = False
    return counts, int(counts.sum())


def total_variation(counts_a, counts_b):
    p = counts_a / max(counts_a.sum(), 1)
    q = counts_b / max(counts_b.sum(), 1)
    return 0.5 * float(np.abs(p - q).sum())


# -- conditioned branch sampler ------------------------------------------------


def conditioned_branch_sampler(M, delta, target_arc, n_accepted, seed,
                               radius=1.0, n_arcs=16, start=0j,
                               min_acceptance=1e-4, max_attempts=None):
    """Killed LERW conditioned on surviving and exiting through an arc.

    Rejection sampling: run the killed walk until death or exit; keep the
    loop erasure when it exits in the target arc.  Returns (paths,
    acceptance rate); aborts when the acceptance rate is hopeless.
    """
    kernel = SquareLatticeKernel(M, delta)
    start_site = _nearest_site(kernel, start)
    if max_attempts is None:
        max_attempts = max(int(n_accepted / min_acceptance), 10**5)
    paths = []
    attempts = 0
    task = 0
    while len(paths) < n_accepted and attempts < max_attempts:
        rng = rng_stream(seed, task)
        task += 1
        for _ in range(2048):
            attempts += 1
            z = start_site
            traj = [z]
            exited = False
            while True:
                z2 = kernel.step_single(z, rng)
                if z2 is None:
                    break
                traj.append(z2)
                z = z2
                if abs(z) >= radius:
                    exited = True
                    break
            if not exited:
                continue
            ang = float(_circle_crossing_angle(
                np.complex128(traj[-2]), np.complex128(traj[-1]), radius))
            arc = int(_arc_bin(ang, n_arcs))
            if arc != target_arc:
                continue
            paths.append(loop_erase(traj))
            if len(paths) >= n_accepted:
                break
    acceptance = len(paths) / max(attempts, 1)
    if len(paths) < n_accepted:
        raise RuntimeError(
            f"acceptance rate {acceptance:.2e} too low; enlarge the arc, "
            f"reduce M, or lower n_accepted")
    return paths, acceptance


# -- approximation property ----------------------------------------------------


def approximation_property_check(M, deltas, test_functions=None,
                                 grid_kind="square", rng_seed=4):
    """Residual of the discrete-to-continuum Laplacian expansion.

    For smooth f: |Delta^k_d f(x) + (d^2/2)(sum sin 2tb) Lap f(x)
    - m^2(x) f(x)| / d^3 per delta, at a bulk vertex.  Returns
    {name: [(delta, residual/d^3), ...]}.
    """
    from .isoradial import (
        build_rhombic_grid,
        build_square_grid,
        random_rhombic_angles,
        z_invariant_weights,
    )

    if test_functions is None:
        u0 = 0.7

        def f_const(p):
            return 1.0

        def f_harm(p):
            return p[0] ** 2 - p[1] ** 2

        def f_exp(p):
            return math.exp(2 * M * (math.cos(u0) * p[0]
                                     + math.sin(u0) * p[1]))

        test_functions = {
            "constant": (f_const, lambda p: 0.0),
            "harmonic_poly": (f_harm, lambda p: 0.0),
            "massive_exp": (f_exp, lambda p: 4 * M * M * f_exp(p)),
        }

    out = {name: [] for name in test_functions}
    for d in deltas:
        mod = near_critical_modulus(M, d)
        if grid_kind == "square":
            grid = build_square_grid(d, 8)
        else:
            rng = np.random.default_rng(rng_seed)
            phis, psis = random_rhombic_angles(rng, 8)
            grid = build_rhombic_grid(d, phis, psis)
        wg = z_invariant_weights(grid, mod)
        x = grid.bulk_vertices()[len(grid.bulk_vertices()) // 2]
        mu = 0.5 * sum(math.sin(2 * grid.half_angle(e))
                       for e in grid.edges_at(x))
        px = grid.positions[x]
        for name, (f, lap) in test_functions.items():
            discrete = wg.masses[x] * f(px)
            for eid in grid.edges_at(x):
                other = grid.edge_head[eid] if grid.edge_tail[eid] == x \
                    else grid.edge_tail[eid]
                discrete += wg.cond_f[eid] * (f(px) - f(grid.positions[other]))
            resid = abs(discrete + d * d * mu * lap(px)
                        - wg.masses[x] * f(px))
            out[name].append((d, resid / d**3))
    return out


# -- dimer height statistics ---------------------------------------------------


def height_field_stats(M, u_bar, delta, block, n_samples, seed):
    """Centered second moments of sampled dimer heights on a lattice block.

    `block` is the number of primal vertices per side of the window.
    Returns (quads, mean, variance, samples-by-quad matrix is not kept).
    """
    from .dimers import height_function, reference_matching, sample_matching
    from .graphs import collapse_boundary
    from .isoradial import (
        build_square_grid,
        discrete_exponential,
        z_invariant_weights,
    )
    from .planar import build_dual_and_double

    mod = near_critical_modulus(M, delta) if M > 0 else \
        complete_integrals(0.0)
    size = 2 * block + 6
    grid = build_square_grid(delta, size)
    ambient = z_invariant_weights(grid, mod)
    cx = grid.positions[:, 0].mean()
    cy = grid.positions[:, 1].mean()
    half = (block - 1) * SQRT2 * delta / 2 + 1e-9
    bulk = set(grid.bulk_vertices())
    subset = [v for v in grid.rectangle_window(cx - half, cx + half,
                                               cy - half, cy + half)
              if v in bulk]
    col = collapse_boundary(ambient, subset)
    _, dg = build_dual_and_double(col, ambient.positions)
    field = discrete_exponential(grid, mod, u_bar)
    lam = field.primal
    ref = reference_matching(dg)

    sums = None
    sums2 = None
    quads = None
    per_task = 256
    n_tasks = (n_samples + per_task - 1) // per_task
    done = 0
    for task in range(n_tasks):
        rng = rng_stream(seed, task)
        todo = min(per_task, n_samples - done)
        done += todo
        for _ in range(todo):
            m = sample_matching(dg, lam, rng)
            h = height_function(dg, m, reference=ref)
            if quads is None:
                quads = sorted(h.values.keys())
                sums = np.zeros(len(quads))
                sums2 = np.zeros(len(quads))
            vals = np.array([h.values[q] for q in quads])
            sums += vals
            sums2 += vals * vals
    mean = sums / n_samples
    var = sums2 / n_samples - mean**2
    return quads, mean, var, dg
