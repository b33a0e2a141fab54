"""Discrete classical transport with quadratic phase-space cost.

The transportation simplex works on spanning trees of the bipartite
support graph: a basis is a set of m + n - 1 cells forming a tree, flows
on it are forced by the marginals, and MODI potentials price the
remaining cells. Demands are perturbed by a tiny multiple of the row
index during the search so no basic flow vanishes; the reported plan is
recomputed on the final tree from the exact weights.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Optional

import numpy as np

from .fock import DEFAULT_TAIL_TOL, FockSpace, choose_cutoff
from .states import PhaseSpaceMeasure, toeplitz_quantize

PERTURBATION = 1e-13
ROUND_TOL = 1e-11
BRUTE_FORCE_MAX = 4


@dataclass(frozen=True)
class TransportPlan:
    matrix: np.ndarray
    cost: float
    basis: tuple = field(default=(), repr=False)
    pivots: int = 0

    def __post_init__(self):
        if np.any(self.matrix < 0):
            raise ValueError("transport plan has negative entries")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


def cost_matrix(mu: PhaseSpaceMeasure, nu: PhaseSpaceMeasure) -> np.ndarray:
    """c(z1, z2) = |q1 - q2|^2 + |p1 - p2|^2 for every pair of atoms."""
    if mu.dim_d != nu.dim_d:
        raise ValueError(f"dimension mismatch: {mu.dim_d} vs {nu.dim_d}")
    dq = mu.q[:, None, :] - nu.q[None, :, :]
    dp = mu.p[:, None, :] - nu.p[None, :, :]
    return np.sum(dq**2 + dp**2, axis=-1)


def _northwest_corner(a: np.ndarray, b: np.ndarray) -> list[tuple[int, int]]:
    a, b = a.copy(), b.copy()
    m, n = a.size, b.size
    i = j = 0
    cells = []
    while True:
        cells.append((i, j))
        x = min(a[i], b[j])
        a[i] -= x
        b[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if j == n - 1 or (i < m - 1 and a[i] <= b[j]):
            i += 1
        else:
            j += 1
    return cells


def _tree_flows(cells, a: np.ndarray, b: np.ndarray) -> dict:
    """Flows on a spanning tree forced by the marginals (leaf elimination)."""
    m = a.size
    remaining = np.concatenate([a, b]).astype(float)
    adj = {k: set() for k in range(m + b.size)}
    for i, j in cells:
        adj[i].add(m + j)
        adj[m + j].add(i)
    flows = {}
    leaves = deque(k for k, nb in adj.items() if len(nb) == 1)
    while leaves:
        k = leaves.popleft()
        if len(adj[k]) != 1:
            continue
        other = adj[k].pop()
        adj[other].discard(k)
        x = remaining[k]
        remaining[other] -= x
        cell = (k, other - m) if k < m else (other, k - m)
        flows[cell] = x
        if len(adj[other]) == 1:
            leaves.append(other)
    return flows


def _potentials(cells, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m, n = c.shape
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    by_row = {i: [] for i in range(m)}
    by_col = {j: [] for j in range(n)}
    for i, j in cells:
        by_row[i].append(j)
        by_col[j].append(i)
    queue = deque([("r", 0)])
    while queue:
        kind, k = queue.popleft()
        if kind == "r":
            for j in by_row[k]:
                if np.isnan(v[j]):
                    v[j] = c[k, j] - u[k]
                    queue.append(("c", j))
        else:
            for i in by_col[k]:
                if np.isnan(u[i]):
                    u[i] = c[i, k] - v[k]
                    queue.append(("r", i))
    return u, v


def _tree_path(cells, m: int, start: int, goal: int) -> list[int]:
    """Node path in the basis tree from row ``start`` to column node ``goal``."""
    adj = {}
    for i, j in cells:
        adj.setdefault(i, []).append(m + j)
        adj.setdefault(m + j, []).append(i)
    parent = {start: None}
    queue = deque([start])
    while queue:
        k = queue.popleft()
        if k == goal:
            break
        for nb in adj.get(k, ()):
            if nb not in parent:
                parent[nb] = k
                queue.append(nb)
    path = [goal]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def _check_measures(mu: PhaseSpaceMeasure, nu: PhaseSpaceMeasure) -> None:
    for name, m in (("mu", mu), ("nu", nu)):
        if len(m) == 0 or m.weights.sum() <= 0:
            raise ValueError(f"{name} has empty support")


def transport_simplex(c: np.ndarray, a: np.ndarray, b: np.ndarray, max_pivots: int = 10_000) -> TransportPlan:
    """Optimal plan for cost ``c`` between weight vectors ``a`` (rows) and ``b`` (columns)."""
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = c.shape
    if a.size != m or b.size != n:
        raise ValueError("weights do not match the cost shape")
    # perturbed supplies; the last demand absorbs the total so both sides balance
    eps = PERTURBATION * np.arange(1, m + 1)
    ap = a + eps
    bp = b.copy()
    bp[-1] += eps.sum()

    cells = _northwest_corner(ap, bp)
    flows = _tree_flows(cells, ap, bp)
    scale = max(1.0, float(np.abs(c).max()))
    pivots = 0
    while pivots < max_pivots:
        u, v = _potentials(cells, c)
        reduced = c - u[:, None] - v[None, :]
        basic = set(cells)
        entering = None
        # Bland: first improving cell in row-major order
        for i, j in zip(*np.nonzero(reduced < -1e-12 * scale)):
            if (i, j) not in basic:
                entering = (int(i), int(j))
                break
        if entering is None:
            break
        i, j = entering
        path = _tree_path(cells, m, i, m + j)
        edges = []
        for k in range(len(path) - 1):
            x, y = path[k], path[k + 1]
            edges.append((x, y - m) if x < m else (y, x - m))
        minus = edges[0::2]
        plus = edges[1::2]
        theta = min(flows[e] for e in minus)
        leaving = min(e for e in minus if flows[e] == theta)
        for e in minus:
            flows[e] -= theta
        for e in plus:
            flows[e] += theta
        flows[entering] = theta
        del flows[leaving]
        cells = [e for e in cells if e != leaving] + [entering]
        pivots += 1
    else:
        raise RuntimeError(f"transportation simplex did not terminate in {max_pivots} pivots")

    exact = _tree_flows(cells, a, b)
    plan = np.zeros((m, n))
    for (i, j), x in exact.items():
        plan[i, j] = x
    plan[np.abs(plan) < ROUND_TOL] = 0.0
    plan = np.clip(plan, 0.0, None)
    return TransportPlan(plan, float(np.sum(plan * c)), tuple(sorted(cells)), pivots)


def solve_discrete_mk2(mu: PhaseSpaceMeasure, nu: PhaseSpaceMeasure) -> TransportPlan:
    """Squared quadratic Wasserstein distance between two discrete measures on phase space."""
    _check_measures(mu, nu)
    return transport_simplex(cost_matrix(mu, nu), mu.weights, nu.weights)


@lru_cache(maxsize=None)
def _tree_maps(m: int, n: int) -> np.ndarray:
    """For every spanning tree of K_{m,n}: the linear map marginals -> flows on all m*n cells."""
    incidence = np.zeros((m + n, m * n))
    for i in range(m):
        for j in range(n):
            incidence[i, i * n + j] = 1.0
            incidence[m + j, i * n + j] = 1.0
    maps = []
    for cols in combinations(range(m * n), m + n - 1):
        sub = incidence[:, cols]
        if np.linalg.matrix_rank(sub) < m + n - 1:
            continue
        full = np.zeros((m * n, m + n))
        full[list(cols)] = np.linalg.pinv(sub)
        maps.append(full)
    return np.array(maps)


def brute_force_mk2(mu: PhaseSpaceMeasure, nu: PhaseSpaceMeasure) -> float:
    """Exact optimum by enumerating all basic feasible solutions (supports up to 4 x 4)."""
    _check_measures(mu, nu)
    return brute_force_cost(cost_matrix(mu, nu), mu.weights, nu.weights)


def brute_force_cost(c: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    m, n = c.shape
    if m > BRUTE_FORCE_MAX or n > BRUTE_FORCE_MAX:
        raise ValueError(f"support {m}x{n} too large for enumeration (max {BRUTE_FORCE_MAX})")
    maps = _tree_maps(m, n)
    flows = maps @ np.concatenate([a, b])
    feasible = np.all(flows >= -1e-12, axis=1)
    return float(np.min(flows[feasible] @ c.ravel()))


@dataclass(frozen=True)
class SemiclassicalGap:
    quantum: float
    classical: float
    bound_slack: float
    hbar: float
    dim_d: int
    cutoff: int
    converged: bool


def semiclassical_gap(
    mu: PhaseSpaceMeasure,
    nu: PhaseSpaceMeasure,
    space: Optional[FockSpace] = None,
    hbar: Optional[float] = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
    opts=None,
) -> SemiclassicalGap:
    """Compare MK_hbar^2 of the Toeplitz quantizations with the classical cost plus 2 d hbar.

    Either ``space`` or ``hbar`` must be given; without a space the cutoff
    is chosen from the atoms.
    """
    from .sdp import mk2

    if space is None:
        if hbar is None:
            raise ValueError("give a FockSpace or hbar")
        points = mu.points() + nu.points()
        space = FockSpace(hbar, choose_cutoff(points, hbar, tail_tol), mu.dim_d)
    R = toeplitz_quantize(mu, space, tail_tol)
    S = toeplitz_quantize(nu, space, tail_tol)
    report = mk2(R, S, space, opts)
    classical = solve_discrete_mk2(mu, nu).cost
    d = space.dim_d
    quantum = report.value
    return SemiclassicalGap(quantum, classical, classical + 2 * d * space.hbar - quantum, space.hbar, d, space.cutoff, report.converged)
