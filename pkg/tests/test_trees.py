"""Tests for the tree model: arcs, medians, hulls, retraction, remetrization."""

import itertools

import numpy as np
import pytest

from qctrees.metric import (
    FiniteMetricSpace,
    measure_lipschitz_values,
    validate_metric,
)
from qctrees.trees import (
    MetricTree,
    TreeError,
    arc,
    arc_diameter_matrix,
    bounded_turning_constant,
    chain_neighborhood_violations,
    components_minus,
    gen_tree,
    hull,
    hull_subtree,
    median,
    remetrize_1bt,
    retract_chain_to_arc,
    retract_to_arc,
    sep_points,
)

from oracles import bfs_path, median_by_hops


def path_tree(xs):
    """Geodesic path tree on collinear positions."""
    xs = np.asarray(xs, dtype=float)
    d = np.abs(xs[:, None] - xs[None, :])
    sp = FiniteMetricSpace(tuple(f"p{i}" for i in range(len(xs))), d)
    edges = [(i, i + 1) for i in range(len(xs) - 1)]
    return MetricTree(sp, tuple(edges), C=1.0)


def tripod(leg=1.0, steps=2):
    """Center 0 with three subdivided legs of length `leg`."""
    coords = {0: (0.0, 0.0)}
    edges = []
    idx = 1
    dirs = [(1.0, 0.0), (-0.5, np.sqrt(3) / 2), (-0.5, -np.sqrt(3) / 2)]
    tips = []
    for dx, dy in dirs:
        prev = 0
        for s in range(1, steps + 1):
            t = leg * s / steps
            coords[idx] = (dx * t, dy * t)
            edges.append((prev, idx))
            prev = idx
            idx += 1
        tips.append(prev)
    pts = np.array([coords[i] for i in range(idx)])
    # geodesic (arclength) metric along the tripod: through the center
    n = idx
    d = np.zeros((n, n))
    arm = lambda i: (i - 1) // steps
    pos = lambda i: 0.0 if i == 0 else leg * (((i - 1) % steps) + 1) / steps
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if i == 0 or j == 0 or arm(i) == arm(j):
                d[i, j] = abs(pos(i) - pos(j))
            else:
                d[i, j] = pos(i) + pos(j)
    sp = FiniteMetricSpace(tuple(f"t{i}" for i in range(n)), d)
    return MetricTree(sp, tuple(edges), C=1.0), tips


class TestArcAndMedian:
    def test_path_arc(self):
        t = path_tree([0.0, 1.0, 2.0])
        assert arc(t, 0, 2) == [0, 1, 2]

    def test_degenerate_arc(self):
        t = path_tree([0.0, 1.0])
        assert arc(t, 1, 1) == [1]

    def test_arc_matches_bfs_oracle_on_random_trees(self):
        for seed in range(4):
            t = gen_tree(25, seed)
            adj = {k: list(v) for k, v in t.adjacency.items()}
            rng = np.random.default_rng(seed)
            for _ in range(10):
                u, v = rng.integers(0, t.n, size=2)
                assert arc(t, int(u), int(v)) == bfs_path(adj, int(u), int(v))

    def test_median_collinear(self):
        t = path_tree([0.0, 1.0, 2.0])
        assert median(t, 0, 1, 2) == 1

    def test_median_of_tripod_is_center(self):
        t, tips = tripod(steps=3)
        assert median(t, *tips) == 0

    def test_median_matches_hop_oracle(self):
        for seed in range(3):
            t = gen_tree(20, seed)
            adj = {k: list(v) for k, v in t.adjacency.items()}
            rng = np.random.default_rng(seed + 100)
            for _ in range(8):
                x, y, z = (int(a) for a in rng.integers(0, t.n, size=3))
                assert median(t, x, y, z) == median_by_hops(adj, t.n, x, y, z)


class TestComponentsMinus:
    def test_star_center_removal(self):
        t, tips = tripod(steps=1)
        pieces = components_minus(t, [0])
        assert len(pieces) == 3
        for p in pieces:
            assert p.boundary == (0,)
            assert 0 in p.closure

    def test_empty_E_is_whole_tree(self):
        t = path_tree([0.0, 1.0, 2.0])
        pieces = components_minus(t, [])
        assert len(pieces) == 1 and p_all(pieces[0], t)

    def test_delete_everything(self):
        t = path_tree([0.0, 1.0])
        assert components_minus(t, [0, 1]) == []

    def test_closures_are_valid_metric_trees(self):
        for seed in range(3):
            t = gen_tree(30, seed)
            rng = np.random.default_rng(seed)
            E = list(rng.choice(t.n, size=4, replace=False))
            for p in components_minus(t, E):
                sub = p.closure_tree
                assert validate_metric(sub.space).ok
                assert len(sub.edges) == sub.n - 1  # connected + acyclic by construction


def p_all(piece, tree):
    return set(piece.component) == set(range(tree.n))


class TestHull:
    def test_two_points_is_arc(self):
        t = gen_tree(20, 3)
        u, v = 0, t.n - 1
        assert hull(t, [u, v]) == sorted(arc(t, u, v))

    def test_all_leaves_of_unsubdivided_tree(self):
        # with no degree-2 vertices the hull of all leaves is everything
        t, tips = tripod(steps=1)
        assert hull(t, tips) == list(range(t.n))

    def test_tripod_two_tips(self):
        t, tips = tripod(steps=2)
        h = hull(t, [tips[0], tips[1]])
        assert h == sorted(arc(t, tips[0], tips[1]))

    def test_union_of_arcs_oracle(self):
        for seed in range(3):
            t = gen_tree(25, seed)
            rng = np.random.default_rng(seed + 7)
            M = sorted(set(int(a) for a in rng.choice(t.n, size=5, replace=False)))
            direct = set()
            for a, b in itertools.combinations(M, 2):
                direct.update(arc(t, a, b))
            if len(M) == 1:
                direct = set(M)
            assert hull(t, M) == sorted(direct)

    def test_leaves_of_hull_are_exactly_M(self):
        for seed in range(5):
            t = gen_tree(30, seed)
            leaves = t.leaves()
            rng = np.random.default_rng(seed)
            k = int(rng.integers(2, max(3, len(leaves))))
            M = sorted(set(int(a) for a in rng.choice(leaves, size=min(k, len(leaves)), replace=False)))
            sub, pos = hull_subtree(t, M)
            assert sorted(pos[m] for m in M) == sorted(sub.leaves())

    def test_empty_errors(self):
        t = path_tree([0.0, 1.0])
        with pytest.raises(TreeError):
            hull(t, [])


class TestRetraction:
    def test_fixes_arc(self):
        t = path_tree([0.0, 1.0, 2.0, 3.0])
        g = retract_to_arc(t, 0, 3)
        assert all(g[x] == x for x in range(4))

    def test_tripod_third_leg_maps_to_center(self):
        t, tips = tripod(steps=2)
        g = retract_to_arc(t, tips[0], tips[1])
        assert g[tips[2]] == 0

    def test_one_lipschitz_on_remetrized_trees(self):
        for seed in range(4):
            t = remetrize_1bt(gen_tree(25, seed, profile="snowflake", snowflake_s=0.7))
            u, v = 0, int(np.argmax(t.space.dist[0]))
            g = retract_to_arc(t, u, v)
            # measured Lipschitz constant of the retraction as a map into the arc
            worst = 0.0
            for x, y in itertools.combinations(range(t.n), 2):
                worst = max(worst, t.space.d(g[x], g[y]) / t.space.d(x, y))
            assert worst <= 1.0 + 1e-9

    def test_branch_points_map_to_branch_or_endpoints(self):
        t = gen_tree(40, 12)
        u, v = 0, int(np.argmax(t.space.dist[0]))
        g = retract_to_arc(t, u, v)
        arc_set = set(arc(t, u, v))
        for b in t.branch_points():
            img = g[b]
            assert img in arc_set
            if b not in arc_set:
                assert t.degree(img) >= 3 or img in (u, v)

    def test_chain_projection_stays_chain(self):
        t = remetrize_1bt(gen_tree(30, 5))
        rng = np.random.default_rng(5)
        for _ in range(10):
            u, v = (int(a) for a in rng.integers(0, t.n, size=2))
            if u == v:
                continue
            path = arc(t, u, v)
            delta = max(
                t.space.d(path[k], path[k + 1]) for k in range(len(path) - 1)
            )
            proj = retract_chain_to_arc(t, path)
            for k in range(len(proj) - 1):
                assert t.space.d(proj[k], proj[k + 1]) <= delta + 1e-9


class TestRemetrize:
    def test_geodesic_tree_unchanged(self):
        t = gen_tree(25, 2, profile="geodesic")
        r = remetrize_1bt(t)
        assert np.allclose(r.space.dist, t.space.dist, atol=1e-9)

    def test_snowflake_unchanged(self):
        # diameter of a snowflaked path equals the endpoint distance
        t = gen_tree(25, 4, profile="snowflake", snowflake_s=0.5)
        r = remetrize_1bt(t)
        assert np.allclose(r.space.dist, t.space.dist, atol=1e-9)

    def test_sandwich_and_validity_on_distorted_tree(self):
        base = gen_tree(20, 8)
        rng = np.random.default_rng(8)
        # distort the metric multiplicatively but keep it a metric via sqrt
        d = base.space.dist**0.6
        t = MetricTree(FiniteMetricSpace(base.space.point_ids, d), base.edges)
        C = bounded_turning_constant(t)
        r = remetrize_1bt(t)
        assert validate_metric(r.space).ok
        assert bounded_turning_constant(r) <= 1.0 + 1e-9
        dp = r.space.dist
        iu = np.triu_indices(t.n, 1)
        assert np.all(d[iu] <= dp[iu] + 1e-12)
        assert np.all(dp[iu] / C <= d[iu] + 1e-9)


class TestBoundedTurning:
    def test_geodesic_is_one(self):
        t = gen_tree(20, 1)
        assert bounded_turning_constant(t) == pytest.approx(1.0, abs=1e-12)

    def test_after_remetrize_is_one(self):
        t = gen_tree(20, 6)
        d = t.space.dist**0.5
        t2 = MetricTree(FiniteMetricSpace(t.space.point_ids, d), t.edges)
        assert bounded_turning_constant(remetrize_1bt(t2)) <= 1.0 + 1e-9

    def test_euclidean_v_shape(self):
        # sharp V in the plane: the legs exceed the chord between the tips
        pts = [(-1.0, 2.0), (0.0, 0.0), (1.0, 2.0)]
        sp = FiniteMetricSpace(("a", "b", "c"), _euclid(pts))
        t = MetricTree(sp, ((0, 1), (1, 2)))
        # oracle: exhaustive pair scan
        dp = arc_diameter_matrix(t)
        want = max(
            dp[i, j] / sp.d(i, j) for i, j in itertools.combinations(range(3), 2)
        )
        assert bounded_turning_constant(t) == pytest.approx(want)
        assert want == pytest.approx(np.sqrt(5) / 2.0, abs=1e-12)


def _euclid(pts):
    pts = np.asarray(pts, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff**2).sum(axis=-1))
    np.fill_diagonal(d, 0.0)
    return d


class TestSepPoints:
    def test_no_interior_branch_points(self):
        t = path_tree([0.0, 1.0, 2.0, 3.0])
        # a path has no leaves near... every vertex of the arc must be > eps
        # from the leaf set, so pick an interior pair and a small eps
        with pytest.raises(TreeError):
            sep_points(t, 0, 3, 0.5)  # endpoints are leaves: precondition fails

    def test_comb_pairs(self):
        t = gen_tree(40, 3, profile="comb")
        t = remetrize_1bt(t)
        spine_branch = t.branch_points()
        u, v = spine_branch[0], spine_branch[-1]
        eps = 0.5
        pairs = sep_points(t, u, v, eps)
        on_arc_branch = [a for a in arc(t, u, v) if t.degree(a) >= 3]
        assert len(pairs) == len(on_arc_branch)
        bs = [b for _, b in pairs]
        for x, y in itertools.combinations(bs, 2):
            assert t.space.d(x, y) >= eps - 1e-9

    def test_empty_when_arc_has_no_branch(self):
        t = gen_tree(40, 3, profile="comb")
        t = remetrize_1bt(t)
        # two adjacent subdivision vertices inside one tooth: no branch points
        b = t.branch_points()[0]
        tooth = [p for p in components_minus(t, [b]) if len(p.component) > 1]
        comp = tooth[-1].component
        inner = [x for x in comp if t.degree(x) <= 2 and x not in t.leaves()]
        if len(inner) >= 2:
            u, v = inner[0], inner[1]
            if all(
                min(t.space.d(w, l) for l in t.leaves()) > 0.05
                for w in arc(t, u, v)
            ):
                assert sep_points(t, u, v, 0.05) == [] or all(
                    t.degree(a) >= 3 for a, _ in sep_points(t, u, v, 0.05)
                )


class TestChainNeighborhood:
    def test_arc_vertices_near_chains(self):
        for seed in range(6):
            t = remetrize_1bt(gen_tree(30, seed, profile="snowflake", snowflake_s=0.8))
            rng = np.random.default_rng(seed)
            for _ in range(5):
                u, v = (int(a) for a in rng.integers(0, t.n, size=2))
                if u == v:
                    continue
                path = arc(t, u, v)
                delta = max(
                    t.space.d(path[k], path[k + 1]) for k in range(len(path) - 1)
                )
                assert chain_neighborhood_violations(t, path, delta) == []


class TestGenerators:
    def test_two_point_geodesic(self):
        t = gen_tree(2, 0)
        assert t.n >= 2 and len(t.edges) == t.n - 1

    def test_snowflake_s1_identity(self):
        a = gen_tree(15, 9, profile="geodesic")
        b = gen_tree(15, 9, profile="snowflake", snowflake_s=1.0)
        assert np.allclose(a.space.dist, b.space.dist)

    def test_snowflake_path_is_1bt(self):
        t = gen_tree(20, 11, profile="snowflake", snowflake_s=0.5)
        assert bounded_turning_constant(t) <= 1.0 + 1e-9

    def test_determinism(self):
        a = gen_tree(20, 5)
        b = gen_tree(20, 5)
        assert a.edges == b.edges and np.array_equal(a.space.dist, b.space.dist)

    def test_invalid_snowflake_exponent(self):
        with pytest.raises(TreeError):
            gen_tree(10, 0, profile="snowflake", snowflake_s=1.5)

    def test_vicsek_is_tree(self):
        t = gen_tree(125, 0, profile="vicsek-step")
        assert t.n == 125 and len(t.edges) == 124
        assert validate_metric(t.space).ok

    def test_comb_has_teeth(self):
        t = gen_tree(36, 2, profile="comb")
        assert len(t.branch_points()) >= 2
