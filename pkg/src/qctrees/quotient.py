"""Metric quotients, pointed sums, and the tree decompositions built on them.

Implements the quotient metric rho([a],[b]) = min(d(a,b), d(a,E) + d(b,E)),
the pointed sum sigma, their mutual 2-bi-Lipschitz comparisons for
1-bounded-turning trees, chain lifting out of a quotient, Whitney net
quotient/isometry checks, and the branch-set uniform-disconnectedness check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .metric import (
    DEFAULT_TOL,
    Chain,
    FiniteMetricSpace,
    MetricError,
    WhitneyNet,
    check_relative_chain,
    doubling_constant,
    uniform_disconnectedness_constant,
    validate_metric,
    whitney_covering_violations,
)
from .trees import MetricTree, TreeError, components_minus, hull_subtree, remetrize_1bt


class QuotientError(ValueError):
    """Raised when an input violates a quotient/sum precondition."""


@dataclass(frozen=True)
class QuotientSpace:
    """The metric quotient of `parent` by the collapsed index set E.

    Points: every parent point outside E keeps its identity; E becomes a
    single class. `class_of` maps parent indices to quotient indices and
    `members` lists parent indices per quotient point.
    """

    parent: FiniteMetricSpace
    collapsed: tuple
    space: FiniteMetricSpace
    class_of: dict = field(repr=False)
    members: tuple = field(repr=False)

    @property
    def class_index(self) -> int:
        """Quotient index of the collapsed class."""
        return self.class_of[self.collapsed[0]]


def quotient(parent: FiniteMetricSpace, E, basepoint_class: bool = True) -> QuotientSpace:
    """Collapse the nonempty index set E to one point with the shortcut metric.

    rho([a],[b]) = min(d(a,b), d(a,E) + d(b,E)); the collapsed class becomes
    the basepoint of the quotient unless basepoint_class is False (then the
    parent basepoint survives if it was outside E).
    """
    e_idx = sorted(set(int(i) for i in E))
    if not e_idx:
        raise QuotientError("collapsed set E must be nonempty")
    rest = [i for i in range(parent.n) if i not in set(e_idx)]
    order = rest + [e_idx[0]]  # class point goes last
    m = len(rest) + 1
    dE = parent.dist[:, e_idx].min(axis=1)
    rho = np.zeros((m, m))
    for a_pos, a in enumerate(rest):
        for b_pos in range(a_pos + 1, len(rest)):
            b = rest[b_pos]
            val = min(parent.d(a, b), dE[a] + dE[b])
            rho[a_pos, b_pos] = rho[b_pos, a_pos] = val
        rho[a_pos, m - 1] = rho[m - 1, a_pos] = dE[a]
    ids = [parent.point_ids[i] for i in rest]
    e_names = [parent.point_ids[i] for i in e_idx]
    label = f"[{e_names[0]}]" if len(e_names) == 1 else f"[{e_names[0]}+{len(e_names) - 1}]"
    ids.append(label)
    class_of = {i: pos for pos, i in enumerate(rest)}
    for i in e_idx:
        class_of[i] = m - 1
    members = tuple([(i,) for i in rest] + [tuple(e_idx)])
    bp = None
    if basepoint_class:
        bp = m - 1
    elif parent.basepoint is not None and parent.basepoint not in set(e_idx):
        bp = class_of[parent.basepoint]
    qspace = FiniteMetricSpace(tuple(ids), rho, basepoint=bp)
    return QuotientSpace(parent, tuple(e_idx), qspace, class_of, members)


def double_quotient_check(
    Z: FiniteMetricSpace, X, Y, tol: float = DEFAULT_TOL
) -> dict:
    """Compare Z/Y with (Z/X)/(Y/X) under the natural identification.

    X and Y are index sets with X a subset of Y; the report records the
    maximum deviation over all pairs (an isometry up to tolerance).
    """
    x_idx = sorted(set(int(i) for i in X))
    y_idx = sorted(set(int(i) for i in Y))
    if not x_idx or not y_idx:
        raise QuotientError("X and Y must be nonempty")
    if not set(x_idx) <= set(y_idx):
        raise QuotientError("X must be contained in Y")
    one = quotient(Z, y_idx)
    zx = quotient(Z, x_idx)
    y_in_zx = sorted(set(zx.class_of[i] for i in y_idx))
    two = quotient(zx.space, y_in_zx)
    # natural identification: z not in Y keeps its identity in both
    outside = [i for i in range(Z.n) if i not in set(y_idx)]
    worst = 0.0
    worst_pair = None
    for a, b in itertools.combinations(outside + [y_idx[0]], 2):
        lhs = one.space.d(one.class_of[a], one.class_of[b])
        rhs = two.space.d(two.class_of[zx.class_of[a]], two.class_of[zx.class_of[b]])
        dev = abs(lhs - rhs)
        if dev > worst:
            worst, worst_pair = dev, (a, b)
    return {
        "max_deviation": worst,
        "worst_pair": worst_pair,
        "ok": worst <= tol,
        "n_pairs": len(outside) * (len(outside) + 1) // 2,
    }


@dataclass(frozen=True)
class SumSpace:
    """Pointed sum of metric spaces: basepoints identified to a single point e.

    Index 0 of `space` is the glue point; `piece_of` maps each sum index to
    (piece number, index within that piece), with piece_of[0] = None.
    """

    pieces: tuple  # the input (FiniteMetricSpace with basepoint) per piece
    space: FiniteMetricSpace
    piece_of: tuple = field(repr=False)
    to_sum: tuple = field(repr=False)  # per piece: dict piece index -> sum index

    @property
    def glue_index(self) -> int:
        return 0


def pointed_sum(pieces) -> SumSpace:
    """Glue pointed spaces at their basepoints.

    sigma(a, b) = d_i(a, b) within a piece and d_i(a, p_i) + d_j(b, p_j)
    across pieces.
    """
    pieces = tuple(pieces)
    if not pieces:
        raise QuotientError("sum needs at least one piece")
    for k, p in enumerate(pieces):
        if p.basepoint is None:
            raise QuotientError(f"piece {k} is missing a basepoint")
    total = 1 + sum(p.n - 1 for p in pieces)
    sigma = np.zeros((total, total))
    ids = ["e"]
    piece_of: list = [None]
    to_sum = []
    offsets = []
    cur = 1
    for k, p in enumerate(pieces):
        local = {}
        for i in range(p.n):
            if i == p.basepoint:
                local[i] = 0
                continue
            local[i] = cur
            ids.append(f"{k}:{p.point_ids[i]}")
            piece_of.append((k, i))
            cur += 1
        to_sum.append(local)
        offsets.append(local)
    for k, p in enumerate(pieces):
        loc = to_sum[k]
        bp = p.basepoint
        for i in range(p.n):
            for j in range(p.n):
                if loc[i] == 0 or loc[j] == 0 or i == j:
                    continue
                sigma[loc[i], loc[j]] = p.d(i, j)
        for i in range(p.n):
            if loc[i] != 0:
                sigma[0, loc[i]] = sigma[loc[i], 0] = p.d(i, bp)
    for k1, k2 in itertools.combinations(range(len(pieces)), 2):
        p1, p2 = pieces[k1], pieces[k2]
        for i in range(p1.n):
            a = to_sum[k1][i]
            if a == 0:
                continue
            for j in range(p2.n):
                b = to_sum[k2][j]
                if b == 0:
                    continue
                val = p1.d(i, p1.basepoint) + p2.d(j, p2.basepoint)
                sigma[a, b] = sigma[b, a] = val
    space = FiniteMetricSpace(tuple(ids), sigma, basepoint=0)
    return SumSpace(pieces, space, tuple(piece_of), tuple(to_sum))


# ---------------------------------------------------------------------------
# tree decompositions


@dataclass(frozen=True)
class DecompositionPiece:
    """One closure T_i of a component of T minus M, with its boundary M_i."""

    closure_tree: MetricTree
    parent_vertices: tuple  # closure vertices as parent indices
    boundary: tuple  # M_i as parent indices
    quotient: QuotientSpace  # T_i / M_i (basepoint = class)
    kind: str = "TREE"  # TREE or WREATH (used by the coproduct classification)


def _decompose(tree: MetricTree, M) -> list:
    m_set = sorted(set(int(i) for i in M))
    pieces = []
    for p in components_minus(tree, m_set):
        local_boundary = [p.closure_index_map[b] for b in p.boundary]
        q = quotient(p.closure_tree.space, local_boundary)
        pieces.append(
            DecompositionPiece(
                closure_tree=p.closure_tree,
                parent_vertices=p.closure,
                boundary=p.boundary,
                quotient=q,
            )
        )
    return pieces


def pre_coproduct_decompose(tree: MetricTree, M, tol: float = DEFAULT_TOL) -> dict:
    """Decompose T/M into the pointed sum of the pieces T_i/M_i and compare.

    T_i are the closures of the components of T minus M, M_i = T_i ∩ M. On a
    1-bounded-turning tree the identity correspondence satisfies
    (1/2) sigma <= rho <= sigma; the report carries the worst ratio.
    """
    m_set = sorted(set(int(i) for i in M))
    if not m_set:
        raise QuotientError("M must be nonempty")
    q = quotient(tree.space, m_set)
    pieces = _decompose(tree, m_set)
    if pieces:
        s = pointed_sum([p.quotient.space for p in pieces])
    else:
        s = None
    # identification: parent vertex -> sum index
    to_sum = {}
    for k, p in enumerate(pieces):
        for parent_v in p.parent_vertices:
            if parent_v in set(p.boundary):
                continue
            local_q = p.quotient.class_of[_local_index(p, parent_v)]
            to_sum[parent_v] = s.to_sum[k][local_q]
    worst_low, worst_high = 1.0, 1.0
    worst_pair = None
    outside = [v for v in range(tree.n) if v not in set(m_set)]
    for a, b in itertools.combinations(outside, 2):
        rho = q.space.d(q.class_of[a], q.class_of[b])
        sig = s.space.d(to_sum[a], to_sum[b])
        ratio = rho / sig if sig > 0 else 1.0
        if ratio < worst_low:
            worst_low, worst_pair = ratio, (a, b)
        worst_high = max(worst_high, ratio)
    for a in outside:
        rho = q.space.d(q.class_of[a], q.class_index)
        sig = s.space.d(to_sum[a], 0)
        if sig > 0:
            ratio = rho / sig
            worst_low = min(worst_low, ratio)
            worst_high = max(worst_high, ratio)
    ok = worst_low >= 0.5 - tol and worst_high <= 1.0 + tol
    return {
        "quotient": q,
        "pieces": pieces,
        "sum": s,
        "vertex_to_sum": to_sum,
        "worst_ratio_low": worst_low,
        "worst_ratio_high": worst_high,
        "worst_pair": worst_pair,
        "ok": ok,
    }


def _local_index(piece: DecompositionPiece, parent_v: int) -> int:
    return piece.parent_vertices.index(parent_v)


def wreath(tree: MetricTree, P, tol: float = DEFAULT_TOL) -> QuotientSpace:
    """Quotient of a tree by a two-point subset of its leaves."""
    p_idx = sorted(set(int(i) for i in P))
    if len(p_idx) != 2:
        raise QuotientError("wreath needs exactly two distinct points")
    leaves = set(tree.leaves())
    if not set(p_idx) <= leaves:
        raise QuotientError(f"wreath points {p_idx} must both be leaves")
    return quotient(tree.space, p_idx)


def coproduct_decompose(tree: MetricTree, M, tol: float = DEFAULT_TOL) -> dict:
    """Decompose T/(B u M) into tree and wreath pieces.

    M must be a closed set of leaves; S = hull(M), B = branch points of S.
    Every closure of a component of T minus (B u M) meets B u M in exactly one
    point (a TREE piece) or two points (a WREATH piece); anything else raises,
    since it signals a modeling bug rather than data error.
    """
    m_set = sorted(set(int(i) for i in M))
    if not m_set:
        raise QuotientError("M must be nonempty")
    leaves = set(tree.leaves())
    if not set(m_set) <= leaves:
        raise QuotientError("M must consist of leaves")
    sub, pos = hull_subtree(tree, m_set)
    hull_branch = sorted(
        v for v, k in pos.items() if sub.degree(k) >= 3
    )
    BM = sorted(set(hull_branch) | set(m_set))
    result = pre_coproduct_decompose(tree, BM, tol=tol)
    classified = []
    for p in result["pieces"]:
        bcount = len(p.boundary)
        if bcount == 1:
            kind = "TREE"
        elif bcount == 2:
            kind = "WREATH"
        else:
            raise QuotientError(
                f"structural error: piece meets B u M in {bcount} points "
                f"(boundary {p.boundary}); the decomposition invariant is violated"
            )
        classified.append(
            DecompositionPiece(
                closure_tree=p.closure_tree,
                parent_vertices=p.parent_vertices,
                boundary=p.boundary,
                quotient=p.quotient,
                kind=kind,
            )
        )
    result["pieces"] = classified
    result["hull_branch_points"] = hull_branch
    result["collapsed_set"] = BM
    return result


# ---------------------------------------------------------------------------
# chain lifting


def chain_lift(
    parent: FiniteMetricSpace,
    B,
    E,
    quotient_chain,
    alpha: float,
    tol: float = DEFAULT_TOL,
) -> Chain:
    """Lift a nondegenerate relative alpha-chain out of the quotient X/E.

    `quotient_chain` is given by parent indices (any E member stands for the
    collapsed class). Requires alpha <= 1/8. Returns a nondegenerate relative
    8*alpha chain inside B whose start satisfies d(w0, E) > 2 d(w0, w_last).
    """
    if not (0 < alpha <= 0.125 + 1e-15):
        raise QuotientError("alpha must lie in (0, 1/8]")
    e_idx = sorted(set(int(i) for i in E))
    b_idx = set(int(i) for i in B)
    if not e_idx:
        raise QuotientError("E must be nonempty")
    q = quotient(parent, e_idx)
    qs = q.space
    cls = [q.class_of[int(i)] for i in quotient_chain]
    allowed = set(q.class_of[i] for i in b_idx) | {q.class_index}
    if not set(cls) <= allowed:
        raise QuotientError("chain leaves [B u E]")
    ok, detail = check_relative_chain(qs, cls, alpha, tol=tol)
    if not ok or not detail["nondegenerate"]:
        raise QuotientError(f"input is not a nondegenerate relative alpha-chain: {detail}")
    # orient so the start is farther from the collapsed class
    eclass = q.class_index
    if qs.d(cls[0], eclass) < qs.d(cls[-1], eclass):
        cls = cls[::-1]
    # remove repeated classes (cut out the cycles)
    pos: dict = {}
    dedup: list = []
    for c in cls:
        if c in pos:
            for removed in dedup[pos[c] + 1 :]:
                del pos[removed]
            dedup = dedup[: pos[c] + 1]
        else:
            pos[c] = len(dedup)
            dedup.append(c)
    cls = dedup
    span = qs.d(cls[0], cls[-1])
    dxE = qs.d(cls[0], eclass)
    half = 0.5 * dxE
    crossing = [i for i, c in enumerate(cls) if qs.d(cls[0], c) >= half]
    if not crossing:
        kept = cls
    else:
        i_star = min(crossing)
        kept = cls[:i_star]
    if len(kept) < 2:
        raise QuotientError("lift degenerated; input chain violates the case analysis")
    if eclass in kept:
        raise QuotientError("lifted chain passes through the collapsed class")
    # map classes back to parent representatives (all singletons in B)
    back = {q.class_of[i]: i for i in range(parent.n) if q.class_of[i] != eclass}
    w = [back[c] for c in kept]
    ok8, det8 = check_relative_chain(parent, w, 8.0 * alpha, tol=tol)
    if not (ok8 and det8["nondegenerate"]):
        raise QuotientError(f"lift failed the 8-alpha audit: {det8}")
    dw_span = parent.d(w[0], w[-1])
    dw_E = min(parent.d(w[0], e) for e in e_idx)
    if not dw_E > 2.0 * dw_span - tol:
        raise QuotientError(
            f"lift failed the distance-to-E audit: d(w0,E)={dw_E:.6g} "
            f"<= 2*d(w0,w_last)={2 * dw_span:.6g}"
        )
    if not set(w) <= b_idx:
        raise QuotientError("lifted chain leaves B")
    return Chain(tuple(w), 8.0 * alpha, relative=True)


# ---------------------------------------------------------------------------
# Whitney net checks in quotients


def whitney_quotient_check(
    Z: FiniteMetricSpace, X, net: WhitneyNet, tol: float = DEFAULT_TOL
) -> dict:
    """Ultrametric comparison on (X u N)/X.

    u([n1],[n2]) = max(d(n1, X), d(n2, X)) is an ultrametric and satisfies
    eps * u <= rho <= 2 * u on the quotient of the net by the target set.
    """
    x_idx = sorted(set(int(i) for i in X))
    if whitney_covering_violations(Z, net, tol=tol):
        raise QuotientError("net fails its own covering property; invalid input")
    n_idx = [i for i in net.net_indices if i not in set(x_idx)]
    sub_idx = x_idx + n_idx
    sub = Z.subspace(sub_idx)
    local_x = list(range(len(x_idx)))
    q = quotient(sub, local_x)
    dX = {u: Z.set_dist(u, x_idx) for u in n_idx}
    worst_low = np.inf
    worst_high = 0.0
    ultra_ok = True
    for a, b in itertools.combinations(n_idx, 2):
        u_ab = max(dX[a], dX[b])
        rho = q.space.d(
            q.class_of[sub_idx.index(a)], q.class_of[sub_idx.index(b)]
        )
        if u_ab > 0:
            worst_low = min(worst_low, rho / u_ab)
            worst_high = max(worst_high, rho / u_ab)
    for a, b, c in itertools.combinations(n_idx, 3):
        for x, y, z in ((a, b, c), (b, a, c), (a, c, b)):
            u_xz = max(dX[x], dX[z])
            if u_xz > max(max(dX[x], dX[y]), max(dX[y], dX[z])) + tol:
                ultra_ok = False
    if len(n_idx) < 2:
        worst_low, worst_high = 1.0, 1.0
    ok = ultra_ok and worst_low >= net.epsilon - tol and worst_high <= 2.0 + tol
    return {
        "ultrametric_ok": ultra_ok,
        "low": float(worst_low),
        "high": float(worst_high),
        "epsilon": net.epsilon,
        "net_size": len(n_idx),
        "ok": bool(ok),
    }


def whitney_isometry_check(
    Z: FiniteMetricSpace, X, Y, net: WhitneyNet, tol: float = DEFAULT_TOL
) -> dict:
    """Compare Y/(Y ∩ (X u N)) with (X u Y)/(X u N) under the identity map.

    Valid for eps <= 1/2; larger eps is reported as a hypothesis violation
    rather than a failure.
    """
    if net.epsilon > 0.5 + 1e-12:
        return {"hypothesis_violation": True, "epsilon": net.epsilon, "ok": None}
    x_idx = sorted(set(int(i) for i in X))
    y_idx = sorted(set(int(i) for i in Y))
    n_idx = [i for i in net.net_indices]
    xn = sorted(set(x_idx) | set(n_idx))
    y_cap = sorted(set(y_idx) & set(xn))
    if not y_cap:
        raise QuotientError("Y ∩ (X u N) is empty; nothing to collapse on the left")
    sub_y = Z.subspace(y_idx)
    left = quotient(sub_y, [y_idx.index(i) for i in y_cap])
    xy = sorted(set(x_idx) | set(y_idx))
    sub_xy = Z.subspace(xy)
    right = quotient(sub_xy, [xy.index(i) for i in xn])
    free = [i for i in y_idx if i not in set(xn)]
    worst = 0.0
    worst_pair = None
    for a, b in itertools.combinations(free + [y_cap[0]], 2):
        lhs = left.space.d(
            left.class_of[y_idx.index(a)], left.class_of[y_idx.index(b)]
        )
        rhs = right.space.d(
            right.class_of[xy.index(a)], right.class_of[xy.index(b)]
        )
        dev = abs(lhs - rhs)
        if dev > worst:
            worst, worst_pair = dev, (a, b)
    return {
        "hypothesis_violation": False,
        "max_deviation": worst,
        "worst_pair": worst_pair,
        "free_points": len(free),
        "ok": worst <= tol,
    }


# ---------------------------------------------------------------------------
# branch-set uniform disconnectedness


def branch_uniform_disconnect_check(tree: MetricTree, tol: float = DEFAULT_TOL) -> dict:
    """Check the branch-set disconnectedness bound on a 1-bounded-turning tree.

    Forms T/L (leaves collapsed), restricts to the classes of branch points
    plus the leaf class, and verifies that no nondegenerate relative
    alpha-chain exists at alpha = 1/(8 D^2), D the measured doubling constant
    of the tree. Reports the measured critical alpha* alongside the bound.
    """
    work = remetrize_1bt(tree)
    D, exact = doubling_constant(work.space)
    leaves = work.leaves()
    if len(leaves) == work.n:
        raise TreeError("tree has only leaves; nothing to check")
    q = quotient(work.space, leaves)
    subset = sorted(
        {q.class_of[b] for b in work.branch_points()} | {q.class_index}
    )
    alpha_bound = 1.0 / (8.0 * D * D)
    alpha_star = uniform_disconnectedness_constant(q.space, subset)
    ok = alpha_star > alpha_bound + tol or len(subset) <= 1
    return {
        "doubling": D,
        "doubling_exact": exact,
        "alpha_bound": alpha_bound,
        "alpha_star": alpha_star,
        "subset_size": len(subset),
        "ok": bool(ok),
    }
