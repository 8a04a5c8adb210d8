"""Combinatorial metric trees with bounded-turning structure.

Arcs, medians, component decompositions, hulls, 1-Lipschitz retractions onto
arcs, the diameter remetrization that makes a tree 1-bounded turning, branch
separation pairs, and seeded generators for geodesic / snowflaked / comb /
Vicsek-style instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metric import (
    DEFAULT_TOL,
    FiniteMetricSpace,
    MetricError,
    is_delta_chain,
    measure_lipschitz_values,
)


class TreeError(ValueError):
    """Raised when an input violates a tree-structure precondition."""


@dataclass(frozen=True)
class MetricTree:
    """A combinatorial tree over a finite metric space.

    `C` and `D` are the declared bounded-turning and doubling constants of the
    instance (usually supplied by a generator); measured values are computed
    on demand. Leaves are degree-1 vertices, branch points degree >= 3.
    """

    space: FiniteMetricSpace
    edges: tuple
    C: float | None = None
    D: float | None = None

    def __post_init__(self):
        edges = tuple(tuple(sorted((int(a), int(b)))) for a, b in self.edges)
        object.__setattr__(self, "edges", edges)
        n = self.space.n
        if n == 0:
            raise TreeError("tree needs at least one vertex")
        if len(edges) != n - 1:
            raise TreeError(f"a tree on {n} vertices needs {n - 1} edges, got {len(edges)}")
        adj = {i: [] for i in range(n)}
        seen_edges = set()
        for a, b in edges:
            if a == b or not (0 <= a < n and 0 <= b < n):
                raise TreeError(f"bad edge ({a}, {b})")
            if (a, b) in seen_edges:
                raise TreeError(f"duplicate edge ({a}, {b})")
            seen_edges.add((a, b))
            adj[a].append(b)
            adj[b].append(a)
        # connectivity (with n-1 edges this also rules out cycles)
        stack, seen = [0], {0}
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != n:
            raise TreeError("edge set is not connected")
        object.__setattr__(self, "_adj", {k: tuple(v) for k, v in adj.items()})

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def adjacency(self) -> dict:
        return self._adj

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def leaves(self) -> list:
        return [v for v in range(self.n) if self.degree(v) == 1]

    def branch_points(self) -> list:
        return [v for v in range(self.n) if self.degree(v) >= 3]


def arc(tree: MetricTree, u: int, v: int) -> list:
    """The unique simple vertex path from u to v; arc(u, u) = [u]."""
    if u == v:
        return [u]
    prev = {u: None}
    stack = [u]
    while stack:
        a = stack.pop()
        if a == v:
            break
        for b in tree.adjacency[a]:
            if b not in prev:
                prev[b] = a
                stack.append(b)
    path = [v]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def median(tree: MetricTree, x: int, y: int, z: int) -> int:
    """The unique vertex common to arc(x,y), arc(x,z) and arc(y,z)."""
    common = set(arc(tree, x, y)) & set(arc(tree, x, z)) & set(arc(tree, y, z))
    if len(common) != 1:
        raise TreeError(f"median of ({x},{y},{z}) not unique: {sorted(common)}")
    return common.pop()


@dataclass(frozen=True)
class ComponentPiece:
    """One component of tree-minus-E with its closure and boundary."""

    component: tuple  # vertices outside E
    closure: tuple  # component plus adjacent E-vertices
    boundary: tuple  # the adjacent E-vertices (subset of E)
    closure_tree: MetricTree = field(repr=False)
    closure_index_map: dict = field(repr=False)  # parent index -> closure-local index


def _induced_subtree(tree: MetricTree, vertices) -> tuple:
    idx = sorted(vertices)
    pos = {v: k for k, v in enumerate(idx)}
    sub_edges = [
        (pos[a], pos[b]) for a, b in tree.edges if a in pos and b in pos
    ]
    sub_space = tree.space.subspace(idx)
    return MetricTree(sub_space, tuple(sub_edges), C=tree.C, D=tree.D), pos


def components_minus(tree: MetricTree, E) -> list:
    """Components of the forest obtained by deleting the vertex set E.

    Each piece carries its closure (component plus adjacent E-vertices), which
    is itself a subtree, and its boundary inside E. Deleting every vertex
    yields the empty list.
    """
    e_set = set(int(i) for i in E)
    remaining = [v for v in range(tree.n) if v not in e_set]
    seen = set()
    pieces = []
    for start in remaining:
        if start in seen:
            continue
        comp = []
        stack = [start]
        seen.add(start)
        while stack:
            a = stack.pop()
            comp.append(a)
            for b in tree.adjacency[a]:
                if b in e_set or b in seen:
                    continue
                seen.add(b)
                stack.append(b)
        boundary = sorted(
            {b for a in comp for b in tree.adjacency[a] if b in e_set}
        )
        closure = sorted(set(comp) | set(boundary))
        sub, pos = _induced_subtree(tree, closure)
        pieces.append(
            ComponentPiece(
                component=tuple(sorted(comp)),
                closure=tuple(closure),
                boundary=tuple(boundary),
                closure_tree=sub,
                closure_index_map=pos,
            )
        )
    return sorted(pieces, key=lambda p: p.component)


def hull(tree: MetricTree, M) -> list:
    """Vertices of the convex hull of M: the union of all arcs between pairs of M.

    Computed by pruning degree-1 vertices outside M, which yields the minimal
    subtree spanning M; for |M| = 1 this is the single vertex.
    """
    m_set = set(int(i) for i in M)
    if not m_set:
        raise TreeError("hull of the empty set is undefined")
    deg = {v: tree.degree(v) for v in range(tree.n)}
    alive = set(range(tree.n))
    frontier = [v for v in alive if deg[v] <= 1 and v not in m_set]
    while frontier:
        v = frontier.pop()
        if v not in alive or v in m_set or deg[v] > 1:
            continue
        alive.discard(v)
        for w in tree.adjacency[v]:
            if w in alive:
                deg[w] -= 1
                if deg[w] <= 1 and w not in m_set:
                    frontier.append(w)
    return sorted(alive)


def hull_subtree(tree: MetricTree, M) -> tuple:
    """The hull as an induced MetricTree, with the parent->local index map."""
    verts = hull(tree, M)
    return _induced_subtree(tree, verts)


def retract_to_arc(tree: MetricTree, u: int, v: int) -> dict:
    """The retraction g: vertices -> arc(u, v).

    g(x) = x on the arc, u when u lies in arc(x, v), v when v lies in
    arc(u, x), and the median of (u, v, x) otherwise; all four cases agree
    with the median, which is how it is computed. On a 1-bounded-turning tree
    g is 1-Lipschitz.
    """
    if u == v:
        raise TreeError("retraction target arc needs distinct endpoints")
    return {x: median(tree, u, v, x) for x in range(tree.n)}


def arc_diameter_matrix(tree: MetricTree) -> np.ndarray:
    """dprime[u, v] = diameter of the vertex set of arc(u, v)."""
    n = tree.n
    d = tree.space.dist
    dp = np.zeros((n, n))
    for root in range(n):
        # iterative DFS carrying the root path; the diameter grows monotonically
        path: list = []
        stack = [(root, -1, 0.0, 0)]
        while stack:
            a, parent, cur, phase = stack.pop()
            if phase == 1:
                path.pop()
                continue
            cross = float(d[a, path].max()) if path else 0.0
            val = max(cur, cross)
            dp[root, a] = val
            path.append(a)
            stack.append((a, parent, val, 1))
            for b in tree.adjacency[a]:
                if b != parent:
                    stack.append((b, a, val, 0))
    return np.maximum(dp, dp.T)


def bounded_turning_constant(tree: MetricTree) -> float:
    """Exact max over pairs of diam(arc(u, v)) / d(u, v); always >= 1."""
    if tree.n < 2:
        raise TreeError("need at least two vertices")
    dp = arc_diameter_matrix(tree)
    d = tree.space.dist
    iu = np.triu_indices(tree.n, 1)
    return float((dp[iu] / d[iu]).max())


def remetrize_1bt(tree: MetricTree) -> MetricTree:
    """Replace d by d'(u, v) = diam(arc(u, v)); the result is 1-bounded turning.

    The new metric satisfies (1/C) d' <= d <= d' for the input's measured
    turning constant C.
    """
    dp = arc_diameter_matrix(tree)
    np.fill_diagonal(dp, 0.0)
    space = FiniteMetricSpace(tree.space.point_ids, dp, basepoint=tree.space.basepoint)
    return MetricTree(space, tree.edges, C=1.0, D=tree.D)


def retract_chain_to_arc(tree: MetricTree, chain_indices) -> list:
    """Project a chain to the arc between its endpoints via the retraction."""
    idx = list(chain_indices)
    g = retract_to_arc(tree, idx[0], idx[-1])
    return [g[x] for x in idx]


def chain_neighborhood_violations(
    tree: MetricTree, chain_indices, delta: float, tol: float = DEFAULT_TOL
) -> list:
    """Arc vertices between the chain endpoints farther than delta from the chain.

    Empty on 1-bounded-turning trees for genuine delta-chains.
    """
    idx = list(chain_indices)
    if not is_delta_chain(tree.space, idx, delta, tol):
        raise TreeError("input is not a delta-chain at the stated scale")
    verts = arc(tree, idx[0], idx[-1])
    bad = []
    for w in verts:
        if min(tree.space.d(w, z) for z in idx) > delta + tol:
            bad.append(w)
    return bad


# ---------------------------------------------------------------------------
# separation pairs along an arc


def sep_points(tree: MetricTree, u: int, v: int, eps: float, tol: float = DEFAULT_TOL) -> list:
    """Branch separation pairs (a_j, b_j) along arc(u, v).

    Requires a 1-bounded-turning tree and every vertex of arc(u, v) at
    distance > eps from the leaf set. For each branch point a_j on the arc, a
    witness b_j is picked in a component of tree minus {a_j} disjoint from the
    arc: the first vertex, walking toward a leaf of that component, with
    d(a_j, b_j) >= eps. Pairwise the b_j satisfy
    eps <= d(b_i, b_j) <= 2 d_max + diam(arc).
    """
    if eps <= 0:
        raise TreeError("eps must be positive")
    arc_verts = arc(tree, u, v)
    leaves = tree.leaves()
    for w in arc_verts:
        dl = min(tree.space.d(w, l) for l in leaves)
        if dl <= eps + tol:
            raise TreeError(
                f"arc vertex {w} is within eps of the leaf set (d = {dl:.6g} <= eps = {eps:.6g})"
            )
    arc_set = set(arc_verts)
    branch_on_arc = [a for a in arc_verts if tree.degree(a) >= 3]
    pairs = []
    for a in branch_on_arc:
        pieces = components_minus(tree, [a])
        off_arc = [p for p in pieces if not (set(p.component) & arc_set)]
        if not off_arc:
            raise TreeError(f"branch point {a} has no component disjoint from the arc")
        piece = min(off_arc, key=lambda p: p.component[0])
        cand_leaves = [
            l for l in leaves if l in set(piece.component) and tree.space.d(a, l) >= eps - tol
        ]
        if not cand_leaves:
            raise TreeError(f"no leaf deep enough off branch point {a}")
        target = min(cand_leaves)
        walk = arc(tree, a, target)
        b = next(w for w in walk if tree.space.d(a, w) >= eps - tol)
        pairs.append((a, b))
    # pairwise audit
    if pairs:
        d_max = max(tree.space.d(a, b) for a, b in pairs)
        arc_diam = max(
            tree.space.d(x, y) for x in arc_verts for y in arc_verts
        )
        for i in range(len(pairs)):
            for j in range(i + 1, len(pairs)):
                dij = tree.space.d(pairs[i][1], pairs[j][1])
                if not (eps - tol <= dij <= 2 * d_max + arc_diam + tol):
                    raise TreeError(
                        f"separation pair distance {dij:.6g} outside "
                        f"[{eps:.6g}, {2 * d_max + arc_diam:.6g}]"
                    )
    return pairs


# ---------------------------------------------------------------------------
# generators


def _subdivide(edges, lengths, n_target, rng):
    """Split edges (keeping total length) until the vertex count reaches n_target."""
    edges = [list(e) for e in edges]
    lengths = list(lengths)
    n = max(max(e) for e in edges) + 1 if edges else 1
    while n < n_target:
        k = int(np.argmax(lengths))
        a, b = edges[k]
        mid = n
        n += 1
        w = lengths[k]
        t = float(rng.uniform(0.35, 0.65))
        edges[k] = [a, mid]
        lengths[k] = w * t
        edges.append([mid, b])
        lengths.append(w * (1 - t))
    return edges, lengths, n


def _geodesic_space(n, edges, lengths, ids_prefix="v") -> FiniteMetricSpace:
    """Path-length metric of a tree with positive edge lengths."""
    adj = {i: [] for i in range(n)}
    for (a, b), w in zip(edges, lengths):
        adj[a].append((b, w))
        adj[b].append((a, w))
    d = np.zeros((n, n))
    for s in range(n):
        dist = {s: 0.0}
        stack = [s]
        while stack:
            x = stack.pop()
            for y, w in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + w
                    stack.append(y)
        for y, val in dist.items():
            d[s, y] = val
    d = (d + d.T) / 2.0
    ids = tuple(f"{ids_prefix}{i}" for i in range(n))
    return FiniteMetricSpace(ids, d)


def _random_topology(n_struct, rng):
    """Random recursive tree on n_struct vertices with random edge lengths."""
    edges = []
    lengths = []
    for i in range(1, n_struct):
        j = int(rng.integers(0, i))
        edges.append([j, i])
        lengths.append(float(rng.uniform(0.5, 1.5)))
    return edges, lengths


def _comb(n, rng):
    """Spine with teeth; teeth lengths comfortably above the spine spacing."""
    n_teeth = max(2, n // 6)
    spine = n_teeth + 1
    edges = []
    lengths = []
    for i in range(spine - 1):
        edges.append([i, i + 1])
        lengths.append(1.0)
    nxt = spine
    for t in range(n_teeth):
        root = t
        edges.append([root, nxt])
        lengths.append(float(rng.uniform(1.5, 2.5)))
        nxt += 1
    return edges, lengths, nxt


def _vicsek(step: int) -> tuple:
    """Vicsek-cross iteration: cell centers of the + pattern, depth `step`."""
    cells = [(0, 0)]
    size = 1
    for _ in range(step):
        nxt = []
        for (x, y) in cells:
            bx, by = 3 * x, 3 * y
            nxt.extend(
                [(bx + 1, by + 1), (bx, by + 1), (bx + 2, by + 1), (bx + 1, by), (bx + 1, by + 2)]
            )
        cells = nxt
        size *= 3
    pts = np.array(cells, dtype=float) / size
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    cell = 1.0 / size
    n = len(pts)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            dx = abs(pts[i, 0] - pts[j, 0])
            dy = abs(pts[i, 1] - pts[j, 1])
            if (abs(dx - cell) < 1e-12 and dy < 1e-12) or (
                abs(dy - cell) < 1e-12 and dx < 1e-12
            ):
                edges.append([i, j])
    return pts, edges


def gen_tree(n: int, seed: int, profile: str = "geodesic", snowflake_s: float = 0.5) -> MetricTree:
    """Deterministic tree generator.

    Profiles:
      geodesic      random subdivided tree with path-length metric (C = 1)
      snowflake     geodesic tree with d -> d**s, s in (0, 1] (stays C = 1)
      comb          spine-with-teeth geodesic tree
      vicsek-step   Vicsek cross iteration with Euclidean metric
    """
    if n < 2:
        raise TreeError("need n >= 2")
    rng = np.random.default_rng(seed)
    if profile == "vicsek-step":
        step = 1
        while 5 ** (step + 1) <= n:
            step += 1
        pts, edges = _vicsek(step)
        diff = pts[:, None, :] - pts[None, :, :]
        d = np.sqrt((diff**2).sum(axis=-1))
        np.fill_diagonal(d, 0.0)
        space = FiniteMetricSpace(tuple(f"c{i}" for i in range(len(pts))), d)
        tree = MetricTree(space, tuple(tuple(e) for e in edges), C=None, D=None)
        return tree
    if profile == "comb":
        edges, lengths, n0 = _comb(n, rng)
        edges, lengths, n0 = _subdivide(edges, lengths, n, rng)
        space = _geodesic_space(n0, edges, lengths)
        return MetricTree(space, tuple(tuple(e) for e in edges), C=1.0, D=None)
    if profile in ("geodesic", "snowflake"):
        if profile == "snowflake" and not (0 < snowflake_s <= 1):
            raise TreeError(f"snowflake exponent must lie in (0, 1], got {snowflake_s}")
        n_struct = max(2, n // 3)
        edges, lengths = _random_topology(n_struct, rng)
        edges, lengths, n0 = _subdivide(edges, lengths, n, rng)
        space = _geodesic_space(n0, edges, lengths)
        if profile == "snowflake" and snowflake_s < 1:
            d = space.dist**snowflake_s
            space = FiniteMetricSpace(space.point_ids, d)
        return MetricTree(space, tuple(tuple(e) for e in edges), C=1.0, D=None)
    raise TreeError(f"unknown profile: {profile}")
