"""Finite metric spaces and their basic combinatorial-metric analysis.

Provides the carrier type for every construction in the package, metric
validation, delta/relative chains, threshold components, Whitney nets,
uniform-disconnectedness measurement, doubling constants, and the
McShane inf-convolution extension of real-valued Lipschitz data.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-9

# Exact minimum set cover is only attempted up to this many points; beyond,
# the greedy cover count is reported with exact=False.
EXACT_DOUBLING_LIMIT = 20


class MetricError(ValueError):
    """Raised when an input violates a metric-space precondition."""


@dataclass(frozen=True)
class FiniteMetricSpace:
    """A finite metric space: point ids, symmetric distance matrix, optional basepoint.

    Distances are dimensionless nonnegative reals. The constructor checks shape
    only; use :func:`validate_metric` for the full axiom report.
    """

    point_ids: tuple
    dist: np.ndarray
    basepoint: int | None = None

    def __post_init__(self):
        ids = tuple(str(p) for p in self.point_ids)
        object.__setattr__(self, "point_ids", ids)
        d = np.asarray(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise MetricError(f"distance matrix must be square, got shape {d.shape}")
        if d.shape[0] != len(ids):
            raise MetricError(
                f"dimension mismatch: {len(ids)} points vs {d.shape[0]}x{d.shape[1]} matrix"
            )
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        if self.basepoint is not None and not (0 <= self.basepoint < len(ids)):
            raise MetricError(f"basepoint {self.basepoint} out of range")

    @property
    def n(self) -> int:
        return len(self.point_ids)

    def d(self, i: int, j: int) -> float:
        return float(self.dist[i, j])

    def set_dist(self, i: int, a_set) -> float:
        """Distance from point i to a nonempty index set."""
        idx = list(a_set)
        if not idx:
            raise MetricError("distance to empty set is undefined")
        return float(self.dist[i, idx].min())

    def diameter(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    def with_basepoint(self, i: int) -> "FiniteMetricSpace":
        return FiniteMetricSpace(self.point_ids, self.dist, basepoint=i)

    def subspace(self, indices, basepoint: int | None = None) -> "FiniteMetricSpace":
        """Metric subspace on `indices` (order preserved); indices refer to self."""
        idx = list(indices)
        sub = self.dist[np.ix_(idx, idx)]
        ids = tuple(self.point_ids[i] for i in idx)
        bp = None
        if basepoint is not None:
            bp = idx.index(basepoint)
        elif self.basepoint is not None and self.basepoint in idx:
            bp = idx.index(self.basepoint)
        return FiniteMetricSpace(ids, sub, basepoint=bp)


def space_from_points(coords, ids=None, basepoint=None, p=2.0) -> FiniteMetricSpace:
    """Euclidean (or l^p) metric space from a coordinate array."""
    pts = np.asarray(coords, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    diff = pts[:, None, :] - pts[None, :, :]
    if p == 2.0:
        d = np.sqrt((diff**2).sum(axis=-1))
    else:
        d = (np.abs(diff) ** p).sum(axis=-1) ** (1.0 / p)
    np.fill_diagonal(d, 0.0)
    if ids is None:
        ids = tuple(f"p{i}" for i in range(len(pts)))
    return FiniteMetricSpace(tuple(ids), d, basepoint=basepoint)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of metric axiom checks; empty violation lists iff the input is a metric."""

    symmetry_violations: list = field(default_factory=list)
    diagonal_violations: list = field(default_factory=list)
    positivity_violations: list = field(default_factory=list)
    triangle_violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (
            self.symmetry_violations
            or self.diagonal_violations
            or self.positivity_violations
            or self.triangle_violations
        )

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "symmetry": self.symmetry_violations,
            "diagonal": self.diagonal_violations,
            "positivity": self.positivity_violations,
            "triangle": self.triangle_violations,
        }


def validate_metric(space: FiniteMetricSpace, tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check symmetry, vanishing diagonal, positivity and all triangles.

    Lists every violated entry/triple; the report is empty iff the invariants
    hold within `tol`.
    """
    d = space.dist
    n = space.n
    sym = [
        (i, j, float(d[i, j]), float(d[j, i]))
        for i in range(n)
        for j in range(i + 1, n)
        if abs(d[i, j] - d[j, i]) > tol
    ]
    diag = [(i, float(d[i, i])) for i in range(n) if abs(d[i, i]) > tol]
    pos = [
        (i, j, float(d[i, j]))
        for i in range(n)
        for j in range(i + 1, n)
        if d[i, j] <= tol and i != j
    ]
    tri = []
    # vectorized triangle scan: d[i,j] <= d[i,k] + d[k,j] + tol for all k
    for i in range(n):
        best = (d[i, :, None] + d).min(axis=0)  # min over k of d[i,k]+d[k,j]
        bad = np.where(d[i] > best + tol)[0]
        for j in bad:
            k = int(np.argmin(d[i, :] + d[:, j]))
            tri.append((i, int(j), k, float(d[i, j]), float(d[i, k] + d[k, j])))
    return ValidationReport(sym, diag, pos, tri)


# ---------------------------------------------------------------------------
# chains and threshold components


@dataclass(frozen=True)
class Chain:
    """An ordered chain of point indices at a given scale.

    `relative=False`: consecutive distances <= scale (a delta-chain).
    `relative=True`: consecutive distances <= scale * d(first, last).
    """

    indices: tuple
    scale: float
    relative: bool = False

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        if len(self.indices) < 1:
            raise MetricError("chain needs at least one point")
        if self.scale <= 0:
            raise MetricError("chain scale must be positive")

    def __len__(self):
        return len(self.indices)


def is_delta_chain(space: FiniteMetricSpace, indices, delta: float, tol: float = DEFAULT_TOL) -> bool:
    idx = list(indices)
    return all(space.d(idx[k], idx[k + 1]) <= delta + tol for k in range(len(idx) - 1))


def check_relative_chain(
    space: FiniteMetricSpace, indices, alpha: float, tol: float = DEFAULT_TOL
):
    """Validate the relative-alpha-chain condition; returns (ok, detail).

    Steps must satisfy d(x_i, x_{i+1}) <= alpha * d(x_0, x_last) (non-strict).
    Nondegeneracy (distinct endpoints) is reported separately in the detail.
    """
    idx = list(indices)
    if len(idx) < 2:
        return False, {"reason": "fewer than two points"}
    span = space.d(idx[0], idx[-1])
    worst = 0.0
    worst_step = None
    for k in range(len(idx) - 1):
        s = space.d(idx[k], idx[k + 1])
        if s > worst:
            worst, worst_step = s, (idx[k], idx[k + 1])
    ok = worst <= alpha * span + tol
    return ok, {
        "span": span,
        "max_step": worst,
        "worst_step": worst_step,
        "nondegenerate": span > tol,
    }


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, u: int) -> int:
        p = self.parent
        while p[u] != u:
            p[u] = p[p[u]]
            u = p[u]
        return u

    def union(self, u: int, v: int) -> bool:
        ru, rv = self.find(u), self.find(v)
        if ru == rv:
            return False
        self.parent[rv] = ru
        return True


def delta_components(space: FiniteMetricSpace, subset, delta: float, tol: float = DEFAULT_TOL):
    """Partition `subset` into maximal delta-connected classes (threshold graph union-find)."""
    if delta <= 0:
        raise MetricError("delta must be positive")
    idx = sorted(set(int(i) for i in subset))
    if not idx:
        return []
    pos = {v: k for k, v in enumerate(idx)}
    uf = _UnionFind(len(idx))
    for a, b in itertools.combinations(idx, 2):
        if space.d(a, b) <= delta + tol:
            uf.union(pos[a], pos[b])
    groups: dict = {}
    for v in idx:
        groups.setdefault(uf.find(pos[v]), []).append(v)
    return sorted(groups.values())


def find_relative_alpha_chain(
    space: FiniteMetricSpace, x: int, y: int, alpha: float, tol: float = DEFAULT_TOL
) -> Chain | None:
    """Shortest (fewest-hop) relative alpha-chain from x to y, or None.

    A chain exists iff x and y are connected in the graph whose edges are the
    pairs at distance <= alpha * d(x, y); the threshold is non-strict.
    """
    if x == y:
        raise MetricError("relative chains require distinct endpoints (nondegeneracy)")
    if not (0 < alpha <= 1):
        raise MetricError("alpha must lie in (0, 1]")
    thr = alpha * space.d(x, y) + tol
    n = space.n
    # BFS over the threshold graph
    prev = {x: None}
    frontier = [x]
    while frontier and y not in prev:
        nxt = []
        for u in frontier:
            for v in range(n):
                if v not in prev and 0 < space.d(u, v) <= thr:
                    prev[v] = u
                    nxt.append(v)
        frontier = nxt
    if y not in prev:
        return None
    path = []
    cur = y
    while cur is not None:
        path.append(cur)
        cur = prev[cur]
    path.reverse()
    return Chain(tuple(path), alpha, relative=True)


def bottleneck_matrix(space: FiniteMetricSpace, subset=None) -> tuple:
    """All-pairs minimax path values over the complete graph on `subset`.

    Returns (indices, B) where B[a, b] is the smallest possible maximum step of
    a chain from indices[a] to indices[b] through subset points.
    """
    idx = sorted(set(int(i) for i in subset)) if subset is not None else list(range(space.n))
    m = len(idx)
    B = np.zeros((m, m))
    if m <= 1:
        return idx, B
    edges = sorted(
        (space.d(idx[a], idx[b]), a, b) for a in range(m) for b in range(a + 1, m)
    )
    uf = _UnionFind(m)
    comp_members = {k: [k] for k in range(m)}
    for w, a, b in edges:
        ra, rb = uf.find(a), uf.find(b)
        if ra == rb:
            continue
        for u in comp_members[ra]:
            for v in comp_members[rb]:
                B[u, v] = B[v, u] = w
        uf.union(a, b)
        root = uf.find(a)
        merged = comp_members.pop(ra) + comp_members.pop(rb)
        comp_members[root] = merged
    return idx, B


def uniform_disconnectedness_constant(
    space: FiniteMetricSpace, subset=None
) -> float:
    """Critical alpha for relative chains within `subset`.

    Returns alpha* such that no nondegenerate relative alpha-chain exists for
    alpha < alpha*, while one exists (non-strict steps) at every alpha >= alpha*.
    Singleton subsets are vacuously disconnected: returns 1.0.
    """
    idx = sorted(set(int(i) for i in subset)) if subset is not None else list(range(space.n))
    if len(idx) < 1:
        raise MetricError("subset must be nonempty")
    if len(idx) == 1:
        return 1.0
    ids, B = bottleneck_matrix(space, idx)
    m = len(ids)
    best = 1.0
    for a in range(m):
        for b in range(a + 1, m):
            ratio = B[a, b] / space.d(ids[a], ids[b])
            if ratio < best:
                best = ratio
    return float(min(best, 1.0))


# ---------------------------------------------------------------------------
# Whitney nets


@dataclass(frozen=True)
class WhitneyNet:
    """A maximal epsilon-separated net in B relative to the target set A.

    Distinct net points satisfy d(u, v) >= eps * max(d(u, A), d(v, A));
    maximality means no further point of B \\ (A u N) can be inserted.
    """

    net_indices: tuple
    epsilon: float
    target_set: tuple  # A
    source_set: tuple  # B

    @property
    def eps_prime(self) -> float:
        return self.epsilon / (1.0 - self.epsilon) if self.epsilon < 1.0 else float("inf")


def whitney_net(
    space: FiniteMetricSpace,
    B,
    A,
    epsilon: float,
    insertion_order=None,
    tol: float = DEFAULT_TOL,
) -> WhitneyNet:
    """Greedy maximal Whitney net in B relative to A, in the given insertion order.

    The order is part of the input so results are reproducible; any order
    yields a maximal net. B a subset of A gives the (valid, trivially maximal)
    empty net.
    """
    if not (0 < epsilon <= 1):
        raise MetricError("epsilon must lie in (0, 1]")
    a_idx = sorted(set(int(i) for i in A))
    if not a_idx:
        raise MetricError("target set A must be nonempty")
    b_idx = [int(i) for i in B]
    candidates = [i for i in (insertion_order if insertion_order is not None else sorted(set(b_idx))) if i in set(b_idx) and i not in set(a_idx)]
    dA = {i: space.set_dist(i, a_idx) for i in candidates}
    net: list = []
    for u in candidates:
        if u in net:
            continue
        if all(
            space.d(u, v) >= epsilon * max(dA[u], dA[v]) - tol for v in net
        ):
            net.append(u)
    # maximality audit: one full pass over the leftovers
    for u in candidates:
        if u in net:
            continue
        if all(space.d(u, v) >= epsilon * max(dA[u], dA[v]) - tol for v in net):
            raise MetricError(f"net not maximal: point {u} could still be inserted")
    return WhitneyNet(tuple(net), epsilon, tuple(a_idx), tuple(sorted(set(b_idx))))


def whitney_covering_violations(
    space: FiniteMetricSpace, net: WhitneyNet, tol: float = DEFAULT_TOL
) -> list:
    """Points of B \\ (A u N) (and N itself) with no net point within eps' * d(x, A).

    An empty list certifies the covering property of maximal Whitney nets.
    """
    eps_p = net.eps_prime
    a_idx = list(net.target_set)
    bad = []
    nset = set(net.net_indices)
    for x in net.source_set:
        if x in net.target_set:
            continue
        dxa = space.set_dist(x, a_idx)
        if x in nset:
            continue
        if not any(space.d(x, u) <= eps_p * dxa + tol for u in net.net_indices):
            bad.append(x)
    return bad


# ---------------------------------------------------------------------------
# doubling constant


def _ball(space: FiniteMetricSpace, center: int, radius: float) -> frozenset:
    # open balls, matching the convention used for covering counts
    return frozenset(int(j) for j in np.where(space.dist[center] < radius)[0])


def _min_cover_exact(universe: frozenset, sets: list) -> int:
    """Exact minimum set cover by branch and bound; `sets` are candidate balls."""
    # drop dominated candidates
    sets = sorted({s & universe for s in sets}, key=len, reverse=True)
    kept = []
    for s in sets:
        if s and not any(s <= t for t in kept):
            kept.append(s)
    best = [len(kept)]

    # greedy upper bound
    def greedy(unc):
        cnt = 0
        unc = set(unc)
        while unc:
            s = max(kept, key=lambda t: len(t & unc))
            gain = len(s & unc)
            if gain == 0:
                return None
            unc -= s
            cnt += 1
        return cnt

    g = greedy(universe)
    if g is not None:
        best[0] = g

    order = kept

    def dfs(uncovered: set, used: int):
        if not uncovered:
            best[0] = min(best[0], used)
            return
        if used + 1 >= best[0]:
            return
        # branch on an uncovered element with fewest candidate sets
        x = min(uncovered, key=lambda e: sum(1 for s in order if e in s))
        for s in order:
            if x in s:
                dfs(uncovered - s, used + 1)

    dfs(set(universe), 0)
    return best[0]


def doubling_constant(space: FiniteMetricSpace) -> tuple:
    """Smallest D such that every ball B(x; r) is covered by D balls of radius r/2.

    r ranges over all pairwise distances. Exact (set-cover search) for
    n <= EXACT_DOUBLING_LIMIT; otherwise the greedy cover count is returned
    with exact=False. Returns (D_hat, exact_flag).
    """
    n = space.n
    if n == 0:
        raise MetricError("empty space")
    if n == 1:
        return 1, True
    exact = n <= EXACT_DOUBLING_LIMIT
    radii = sorted(set(float(space.dist[i, j]) for i in range(n) for j in range(i + 1, n)))
    D = 1
    for r in radii:
        half_balls = [_ball(space, y, r / 2.0) for y in range(n)]
        for x in range(n):
            target = _ball(space, x, r)
            if len(target) <= 1:
                continue
            if exact:
                need = _min_cover_exact(target, half_balls)
            else:
                unc = set(target)
                need = 0
                while unc:
                    s = max(half_balls, key=lambda t: len(t & unc))
                    unc -= s
                    need += 1
            D = max(D, need)
    return D, exact


# ---------------------------------------------------------------------------
# Lipschitz measurement and McShane extension


def measure_lipschitz_values(space: FiniteMetricSpace, values, subset=None) -> float:
    """Exact maximum of |f(u)-f(v)| / d(u,v) over pairs (of `subset` if given)."""
    idx = list(subset) if subset is not None else list(range(space.n))
    if len(idx) < 2:
        return 0.0
    v = np.asarray([values[i] for i in idx], dtype=float)
    d = space.dist[np.ix_(idx, idx)]
    num = np.abs(v[:, None] - v[None, :])
    iu = np.triu_indices(len(idx), 1)
    return float((num[iu] / d[iu]).max())


def mcshane_extend(
    space: FiniteMetricSpace, subset, f: dict, L: float, tol: float = DEFAULT_TOL
) -> np.ndarray:
    """McShane inf-convolution extension F(x) = min_{y in S} f(y) + L d(x, y).

    Requires f to be L-Lipschitz on S (checked; violation reported with a
    witnessing pair). F agrees with f on S and is L-Lipschitz on all points.
    """
    if L <= 0:
        raise MetricError("Lipschitz bound L must be positive")
    s_idx = sorted(set(int(i) for i in subset))
    if not s_idx:
        raise MetricError("subset must be nonempty")
    for a, b in itertools.combinations(s_idx, 2):
        if abs(f[a] - f[b]) > L * space.d(a, b) + tol:
            raise MetricError(
                f"data not {L}-Lipschitz on subset: |f({a})-f({b})| = "
                f"{abs(f[a]-f[b]):.12g} > L*d = {L * space.d(a, b):.12g}"
            )
    vals = np.array([f[i] for i in s_idx], dtype=float)
    F = (vals[None, :] + L * space.dist[:, s_idx]).min(axis=1)
    for i in s_idx:
        F[i] = f[i]
    return F
