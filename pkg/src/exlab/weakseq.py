"""Weakly (bi-)complete r-sequences and small clique minors in dense graphs.

The sequence pipeline runs: equitable bipartition, degree filter, random
cover partition into r-blocks, an auxiliary block-vs-vertex incidence graph,
a second filter and partition chosen by a density case split, and an exact
K_{t,t} search in the final incidence graph.  Every filter and partition
asserts its own counted clause; witnesses are re-verified from scratch.

The minor pipeline combines the same machinery with two rounds of
dependent random choice for 4-edge path systems, then connects each r-set
through fresh internal vertices.  All absolute constants are configuration
values; the published-constant preset ("paper") can be swapped for a desk
preset that keeps the guarantees non-vacuous on small instances.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Optional, Sequence, Union

from .core import (BipartiteGraph, Failure, Graph, GuardError, RetryError,
                   RngStream, iter_bits, mask_of, random_equitable_bipartition,
                   _bipartite_from_split)

ORACLE_MAX_N = 12
KTT_MAX_T = 12


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class WeakSequence:
    """Disjoint r-sets with an edge between every required pair of sets.

    kind "complete": every pair (s_sets[i], s_sets[j]), i < j, is joined.
    kind "bicomplete": every pair (s_sets[i], t_sets[j]) is joined.
    """

    kind: str
    r: int
    t: int
    s_sets: tuple
    t_sets: Optional[tuple] = None
    stats: Optional[dict] = None


@dataclass(frozen=True)
class CoverPartition:
    """Partition of V1 into r-blocks plus its exact uncovered-pair fraction."""

    blocks: tuple
    fraction: Fraction
    threshold: Fraction
    tries: int
    met: bool


@dataclass(frozen=True)
class SeqParams:
    """Input parameters with derived quantities and the detected regime."""

    n: int
    p: Fraction
    r: int
    t: int
    rho: Fraction
    part_floor: Fraction
    delta_target: Fraction
    regime: int


@dataclass(frozen=True)
class PathsParams:
    """Constants of the 4-edge-path extraction; defaults fit large hosts."""

    x_frac_div: int = 50
    budget_coeff: Fraction = Fraction(1, 10 ** 9)
    min_p2n: int = 1600


@dataclass(frozen=True)
class PathsResult:
    """X plus the per-pair disjoint-path budget certified for it."""

    X: tuple
    budget: int
    tries: int


@dataclass(frozen=True)
class MinorConstants:
    """Constants of the minor pipeline; defaults fit large hosts."""

    cleanup_div: int = 8
    split_edge_div: int = 32
    split_mindeg_div: int = 32
    xprime_div: int = 400
    z_density_div: int = 64
    w_density_div: int = 32
    paths: PathsParams = field(default_factory=PathsParams)


@dataclass(frozen=True)
class MinorModel:
    """Branch sets of a clique minor with their size and diameter caps."""

    branch_sets: tuple
    size_cap: int
    diameter_cap: Optional[int]
    stats: Optional[dict] = None


def load_preset(name: str) -> MinorConstants:
    """Named constant sets: "paper" is the default, others ship as JSON."""
    if name == "paper":
        return MinorConstants()
    data = json.loads(resources.files("exlab").joinpath(
        f"presets/{name}.json").read_text())
    paths = data.pop("paths", {})
    if "budget_coeff" in paths:
        paths["budget_coeff"] = Fraction(paths["budget_coeff"]).limit_denominator(10 ** 12)
    return MinorConstants(paths=PathsParams(**paths), **data)


# ---------------------------------------------------------------------------
# Parameters and regimes


def seq_params(n: int, p, r: int, t: int) -> SeqParams:
    """Derived quantities plus which (if any) parameter regime holds.

    Regime membership mixes exact rational checks with float evaluations of
    the transcendental bounds; it is recorded for diagnostics only and never
    gates a verifier.
    """
    p = Fraction(p)
    if not 0 < p <= 1:
        raise GuardError("density must lie in (0, 1]")
    if r < 1 or t < 1:
        raise GuardError("need r, t >= 1")
    rho = (1 - p / 2) ** r
    part_floor = p * n / (16 * r)
    delta_target = Fraction(math.exp(-float(p) * r * r / 8)).limit_denominator(10 ** 12)
    pf, rr = float(p), float(r)
    ln = math.log(n) if n > 1 else 0.0
    regime = 0
    if p ** 3 * n >= 1 and p * r * r <= 4 and pf * rr * rr < 32:
        if t <= ln / (4 * math.log(32 / (pf * rr * rr))):
            regime = 1
    if regime == 0 and p ** 5 * n >= 1 and 16 <= p * r * r and pf * rr * rr <= ln:
        if t <= math.exp(pf * rr * rr / 8) * ln / 16:
            regime = 2
    if regime == 0 and p * r * r >= 16 * Fraction(ln).limit_denominator(10 ** 6):
        if t <= min(pf * n / (64 * math.sqrt(ln)) if ln else 0.0, n / (2 * rr)):
            regime = 3
    return SeqParams(n, p, r, t, rho, part_floor, delta_target, regime)


def regime2_order(n: int, p, r: int) -> int:
    """Largest t of the middle regime: floor(e^(p r^2 / 8) * log(n) / 16)."""
    pf = float(Fraction(p))
    return max(1, math.floor(math.exp(min(50.0, pf * r * r / 8))
                             * math.log(n) / 16))


# ---------------------------------------------------------------------------
# Filters, partitions, and the exact K_{t,t} search


def degree_filter(B: BipartiteGraph, mode: str, value) -> tuple:
    """High-degree subset of V2; both output clauses are asserted exactly.

    sparse(p): needs density >= p, keeps degrees > p|V1|/2, returns at least
    p|V2|/2 vertices.  dense(q): needs density >= 1-q, keeps degrees >
    (1-2q)|V1|, returns at least |V2|/2 vertices.
    """
    if B.n0:
        raise GuardError("overlay parts are not supported here")
    value = Fraction(value)
    n1, n2 = B.n1, B.n2
    if n1 == 0 or n2 == 0:
        raise GuardError("both parts must be nonempty")
    mask1 = B.mask(1)
    if mode == "sparse":
        if B.density() < value:
            raise GuardError(f"density {B.density()} below {value}")
        cut = value * n1 / 2
        floor = value * n2 / 2
    elif mode == "dense":
        if B.density() < 1 - value:
            raise GuardError(f"density {B.density()} below 1 - {value}")
        cut = (1 - 2 * value) * n1
        floor = Fraction(n2, 2)
    else:
        raise ValueError(f"unknown filter mode {mode!r}")
    kept = tuple(b for b in B.v2 if B.degree_into(b, mask1) > cut)
    if len(kept) < floor:
        raise AssertionError("degree filter output below its size clause")
    return kept


def cover_partition(B: BipartiteGraph, r: int, rng: RngStream,
                    retry_cap: int = 200) -> CoverPartition:
    """Random partition of V1 into r-blocks, accepted when the fraction of
    (block, V2-vertex) pairs without an edge is at most (1 - p_min)^r.

    p_min is the measured minimum V2-degree over |V1|.  When the cap runs
    out, the best partition is returned with met=False.
    """
    if B.n0:
        raise GuardError("overlay parts are not supported here")
    n1, n2 = B.n1, B.n2
    if n1 == 0 or n2 == 0:
        raise GuardError("both parts must be nonempty")
    if n1 % r:
        raise GuardError(f"r = {r} does not divide |V1| = {n1}")
    mask1 = B.mask(1)
    p_min = Fraction(min(B.degree_into(b, mask1) for b in B.v2), n1)
    threshold = (1 - p_min) ** r
    d = n1 // r
    order = list(B.v1)
    best = None
    for tries in range(1, max(retry_cap, 1) + 1):
        rng.shuffle(order)
        blocks = tuple(tuple(sorted(order[i * r:(i + 1) * r]))
                       for i in range(d))
        masks = [mask_of(blk) for blk in blocks]
        bad = sum(1 for m in masks for b in B.v2 if not B.adj[b] & m)
        fraction = Fraction(bad, d * n2)
        cand = CoverPartition(blocks, fraction, threshold, tries,
                              fraction <= threshold)
        if cand.met:
            return cand
        if best is None or fraction < best.fraction:
            best = CoverPartition(blocks, fraction, threshold, tries, False)
    return best


def find_ktt(T: BipartiteGraph, t: int):
    """Exact search for K_{t,t}: t-subsets (L, R) with all t^2 edges.

    Branches over V1 in descending degree order, pruning on the common
    neighborhood size; a returned witness is re-verified edge by edge, and
    None certifies absence because the search is complete.
    """
    if not 1 <= t <= KTT_MAX_T:
        raise GuardError(f"t must lie in 1..{KTT_MAX_T}")
    if T.n0:
        raise GuardError("overlay parts are not supported here")
    if T.n1 < t or T.n2 < t:
        return None
    mask2 = T.mask(2)
    order = sorted(T.v1, key=lambda v: (-T.degree(v), v))

    def search(idx: int, chosen: list, common: int):
        if len(chosen) == t:
            right = []
            for b in iter_bits(common):
                right.append(b)
                if len(right) == t:
                    break
            return tuple(chosen), tuple(right)
        for i in range(idx, len(order)):
            if len(chosen) + len(order) - i < t:
                break
            nxt = common & T.adj[order[i]]
            if nxt.bit_count() < t:
                continue
            chosen.append(order[i])
            hit = search(i + 1, chosen, nxt)
            if hit is not None:
                return hit
            chosen.pop()
        return None

    wit = search(0, [], mask2)
    if wit is None:
        return None
    left, right = wit
    for u in left:
        for v in right:
            if not T.has_edge(u, v):
                raise AssertionError("K_{t,t} witness failed re-verification")
    return tuple(sorted(left)), tuple(sorted(right))


# ---------------------------------------------------------------------------
# Sequence verification


def _sets_joined(g: Graph, a, b) -> bool:
    mb = mask_of(b)
    return any(g.adj[u] & mb for u in a)


def verify_sequence(g: Graph, w: WeakSequence):
    """Exhaustive invariant check; returns (ok, first violation or None)."""
    if w.kind == "complete":
        families = [("S", w.s_sets)]
        if w.t_sets is not None:
            raise ValueError("complete sequences carry no T-sets")
    elif w.kind == "bicomplete":
        if w.t_sets is None or len(w.t_sets) != len(w.s_sets):
            raise ValueError("bicomplete sequences need matching T-sets")
        families = [("S", w.s_sets), ("T", w.t_sets)]
    else:
        raise ValueError(f"unknown kind {w.kind!r}")
    if len(w.s_sets) != w.t:
        return False, ("order", len(w.s_sets))
    labeled = [((name, i), frozenset(s))
               for name, sets in families for i, s in enumerate(sets)]
    for tag, s in labeled:
        if len(s) != w.r:
            return False, ("size", tag)
        if any(not 0 <= v < g.n for v in s):
            raise ValueError(f"set {tag} has out-of-range vertices")
    for (tag1, s1), (tag2, s2) in itertools.combinations(labeled, 2):
        if s1 & s2:
            return False, ("overlap", tag1, tag2)
    if w.kind == "complete":
        for i, j in itertools.combinations(range(w.t), 2):
            if not _sets_joined(g, w.s_sets[i], w.s_sets[j]):
                return False, ("pair", i, j)
    else:
        for i in range(w.t):
            for j in range(w.t):
                if not _sets_joined(g, w.s_sets[i], w.t_sets[j]):
                    return False, ("pair", i, j)
    return True, None


def as_complete_sequence(w: WeakSequence) -> WeakSequence:
    """Merge S_i with T_i: a bicomplete r-sequence is a complete 2r-sequence."""
    if w.kind != "bicomplete":
        raise ValueError("only bicomplete sequences can be merged")
    merged = tuple(frozenset(s) | frozenset(t)
                   for s, t in zip(w.s_sets, w.t_sets))
    return WeakSequence("complete", 2 * w.r, w.t, merged)


# ---------------------------------------------------------------------------
# The bicomplete sequence pipeline


def _sub_bipartite(B: BipartiteGraph, side1: Sequence[int],
                   side2: Sequence[int]) -> BipartiteGraph:
    """Induced bipartite subgraph on (side1, side2); labels follow along."""
    lab = B.labels if B.labels is not None else tuple(range(B.n))
    n1 = len(side1)
    pos = {v: i for i, v in enumerate(side1)}
    pos.update({v: n1 + j for j, v in enumerate(side2)})
    rows = [0] * (n1 + len(side2))
    m2 = mask_of(side2)
    for i, v in enumerate(side1):
        row = 0
        for w in iter_bits(B.adj[v] & m2):
            row |= 1 << pos[w]
        rows[i] = row
    m1 = mask_of(side1)
    for j, v in enumerate(side2):
        row = 0
        for w in iter_bits(B.adj[v] & m1):
            row |= 1 << pos[w]
        rows[n1 + j] = row
    labels = [lab[v] for v in side1] + [lab[v] for v in side2]
    return BipartiteGraph.from_adjacency(n1, len(side2), rows, labels=labels)


def _incidence_graph(n_left: int, left_adj, block_masks,
                     left_labels, block_labels) -> BipartiteGraph:
    """Bipartite graph: left vertex ~ block iff some edge lands in it."""
    d = len(block_masks)
    rows = [0] * (n_left + d)
    for i, adj in enumerate(left_adj):
        row = 0
        for j, m in enumerate(block_masks):
            if adj & m:
                row |= 1 << (n_left + j)
        rows[i] = row
        for j in iter_bits(row >> n_left):
            rows[n_left + j] |= 1 << i
    return BipartiteGraph.from_adjacency(n_left, d, rows,
                                         labels=list(left_labels) + list(block_labels))


def _weakseq_stages(B0: BipartiteGraph, r: int, t: int, rng: RngStream,
                    retry_cap: int, stats: dict) -> Union[WeakSequence, Failure]:
    """Filter/partition/incidence stages on a labeled bipartite graph.

    B0's labels must carry original host-graph vertex ids; the returned
    sequence is expressed in that label space.
    """
    if B0.labels is None:
        raise GuardError("stage input must carry vertex labels")
    p = B0.density()
    if p == 0:
        return Failure("degree_filter", "empty bipartite graph", dict(stats))
    stats["stage_density"] = p

    kept = degree_filter(B0, "sparse", p)
    stats["filter1_size"] = len(kept)
    stats["filter1_floor"] = p * B0.n2 / 2

    v1 = list(B0.v1)
    d = len(v1) // r
    if d == 0:
        return Failure("cover_partition", "V1 smaller than r", dict(stats))
    B1 = _sub_bipartite(B0, v1[:d * r], list(kept))
    cp1 = cover_partition(B1, r, rng, retry_cap)
    stats["fraction1"] = cp1.fraction
    stats["threshold1"] = cp1.threshold
    stats["partition1_tries"] = cp1.tries
    if not cp1.met:
        return Failure("cover_partition", "uncovered fraction above threshold",
                       dict(stats))

    # incidence graph X: filtered vertices vs first-partition blocks
    n_b = B1.n2
    kept_ids = list(B1.v2)
    block_masks1 = [mask_of(blk) for blk in cp1.blocks]
    lab1 = B1.labels
    X1 = _incidence_graph(n_b, [B1.adj[b] for b in kept_ids], block_masks1,
                          [lab1[b] for b in kept_ids], range(d))

    if p <= Fraction(3, r):
        stats["case"] = 1
        s_value = p * r / 4
        try:
            s_ids = degree_filter(X1, "sparse", s_value)
        except GuardError as err:
            stats["filter2_value"] = s_value
            return Failure("degree_filter", str(err), dict(stats))
        stats["filter2_floor"] = s_value * X1.n2 / 2
    else:
        stats["case"] = 2
        q = Fraction(math.exp(-float(p) * r / 2)).limit_denominator(10 ** 12)
        if q == 0:
            q = Fraction(1, 10 ** 12)
        try:
            s_ids = degree_filter(X1, "dense", q)
        except GuardError as err:
            stats["filter2_value"] = q
            return Failure("degree_filter", str(err), dict(stats))
        stats["filter2_floor"] = Fraction(X1.n2, 2)
    stats["s_size"] = len(s_ids)

    h = n_b // r
    if h == 0:
        return Failure("cover_partition", "filtered side smaller than r",
                       dict(stats))
    X2 = _sub_bipartite(X1, list(range(h * r)), list(s_ids))
    cp2 = cover_partition(X2, r, rng, retry_cap)
    stats["fraction2"] = cp2.fraction
    stats["threshold2"] = cp2.threshold
    stats["partition2_tries"] = cp2.tries
    if not cp2.met:
        return Failure("cover_partition", "uncovered fraction above threshold",
                       dict(stats))

    # final incidence graph T: S-blocks vs second-partition blocks
    s_vertices = list(X2.v2)
    block_masks2 = [mask_of(blk) for blk in cp2.blocks]
    T = _incidence_graph(len(s_vertices),
                         [X2.adj[s] for s in s_vertices], block_masks2,
                         [X2.labels[s] for s in s_vertices], range(h))
    delta = 1 - T.density()
    stats["t_parts"] = (T.n1, T.n2)
    stats["t_delta"] = delta

    wit = find_ktt(T, t)
    if wit is None:
        return Failure("find_ktt", "no K_{t,t} witness", dict(stats))
    left, right = wit
    lab2 = X2.labels
    s_sets = tuple(frozenset(lab1[v] for v in cp1.blocks[T.labels[u]])
                   for u in left)
    t_sets = tuple(frozenset(lab2[v] for v in cp2.blocks[T.labels[j]])
                   for j in right)
    return WeakSequence("bicomplete", r, t, s_sets, t_sets, dict(stats))


def weak_sequence_pipeline(G: Graph, r: int, t: int, rng: RngStream,
                           retry_cap: int = 200) -> Union[WeakSequence, Failure]:
    """Find a verified weakly bi-complete r-sequence of order t in G."""
    if r < 1 or t < 1:
        raise GuardError("need r, t >= 1")
    if 2 * r * t > G.n:
        raise GuardError("2rt exceeds the vertex count")
    if G.m == 0:
        raise GuardError("G has no edges")
    params = seq_params(G.n, G.density(), r, t)
    if params.regime == 0:
        warnings.warn("parameters outside the theorem regimes; proceeding",
                      RuntimeWarning, stacklevel=2)
    stats = {"n": G.n, "p": G.density(), "r": r, "t": t,
             "regime": params.regime, "delta_target": params.delta_target}
    try:
        eq = random_equitable_bipartition(G, rng, retry_cap)
    except RetryError as err:
        return Failure("bipartition", "no dense equitable split", err.best or {})
    stats["cross_density"] = eq.cross_density
    stats["bipartition_tries"] = eq.tries
    result = _weakseq_stages(eq.bipartite, r, t, rng, retry_cap, stats)
    if isinstance(result, Failure):
        return result
    ok, viol = verify_sequence(G, result)
    if not ok:
        raise AssertionError(f"pipeline produced an invalid sequence: {viol}")
    return result


# ---------------------------------------------------------------------------
# Paths by dependent random choice


def _pick_two(a_cands: int, b_cands: int):
    """Distinct bits a from a_cands and b from b_cands, if any pair exists."""
    if not a_cands or not b_cands:
        return None
    a = a_cands & -a_cands
    rest_b = b_cands & ~a
    if rest_b:
        return a.bit_length() - 1, (rest_b & -rest_b).bit_length() - 1
    rest_a = a_cands & ~b_cands
    if rest_a:
        return (rest_a & -rest_a).bit_length() - 1, b_cands.bit_length() - 1
    return None


def _greedy_paths(H: BipartiteGraph, x: int, y: int, xmask: int,
                  budget: int) -> list:
    """Internally disjoint x-a-m-b-y paths, internal vertices outside X."""
    mask1 = H.mask(1)
    used = 0
    paths = []
    for m in iter_bits(mask1 & ~xmask):
        if used >> m & 1:
            continue
        pick = _pick_two(H.adj[x] & H.adj[m] & ~used,
                         H.adj[y] & H.adj[m] & ~used)
        if pick is None:
            continue
        a, b = pick
        paths.append((x, a, m, b, y))
        used |= (1 << a) | (1 << m) | (1 << b)
        if len(paths) == budget:
            break
    return paths


def paths_drc(H: BipartiteGraph, rng: RngStream,
              constants: Optional[PathsParams] = None,
              retry_cap: int = 50) -> Union[PathsResult, Failure]:
    """Subset X of V1 whose pairs all carry a certified disjoint-path budget.

    X is the truncated common-neighborhood draw of one random V2 vertex.  For
    every pair of X, 4-edge paths with unused internal vertices outside X are
    extracted greedily up to the budget and re-verified; any shortfall
    triggers a redraw.
    """
    c = constants or PathsParams()
    if H.n0:
        raise GuardError("overlay parts are not supported here")
    if H.n1 != H.n2:
        raise GuardError("parts must have equal size")
    n = H.n
    p = H.density()
    if p == 0:
        raise GuardError("H has no edges")
    if p * p * n < c.min_p2n:
        raise GuardError(f"p^2 n = {float(p * p * n):.1f} below {c.min_p2n}")
    target = -((-p.numerator * n) // (p.denominator * c.x_frac_div))
    coeff = Fraction(c.budget_coeff)
    bf = coeff * p ** 5 * n
    budget = max(1, -((-bf.numerator) // bf.denominator))
    v2 = list(H.v2)
    best = None
    for tries in range(1, max(retry_cap, 1) + 1):
        v = rng.choice(v2)
        nbhd = H.adj[v] & H.mask(1)
        if nbhd.bit_count() < target:
            cand = {"x_size": nbhd.bit_count(), "target": target}
            if best is None or cand.get("x_size", 0) > best.get("x_size", -1):
                best = cand
            continue
        X = []
        for u in iter_bits(nbhd):
            X.append(u)
            if len(X) == target:
                break
        xmask = mask_of(X)
        shortfall = None
        for x, y in itertools.combinations(X, 2):
            paths = _greedy_paths(H, x, y, xmask, budget)
            if len(paths) < budget:
                shortfall = {"pair": (x, y), "count": len(paths),
                             "budget": budget, "x_size": len(X)}
                break
            seen = 0
            for (px, a, m, b, py) in paths:
                for u, w in ((px, a), (a, m), (m, b), (b, py)):
                    if not H.has_edge(u, w):
                        raise AssertionError("extracted path misses an edge")
                inner = (1 << a) | (1 << m) | (1 << b)
                if inner & seen or inner & xmask:
                    raise AssertionError("path internals collide")
                seen |= inner
        if shortfall is None:
            return PathsResult(tuple(X), budget, tries)
        if best is None or shortfall["count"] > best.get("count", -1):
            best = shortfall
    reason = ("pair below path budget" if best and "count" in best
              else "common neighborhood below target")
    return Failure("paths_drc", reason, best or {})


# ---------------------------------------------------------------------------
# Minor pipeline


def _ceil_frac(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def _cleanup(G: Graph, threshold: Fraction) -> list:
    """Repeatedly drop the lowest-index vertex of induced degree < threshold."""
    alive = (1 << G.n) - 1
    changed = True
    while changed and alive:
        changed = False
        for v in iter_bits(alive):
            if (G.adj[v] & alive).bit_count() < threshold:
                alive &= ~(1 << v)
                changed = True
                break
    return list(iter_bits(alive))


def _balanced_split(G: Graph, alive: list, threshold: Fraction,
                    edge_floor: Fraction, rng: RngStream, retry_cap: int):
    """Random half split pruned to cross-degree >= threshold, sides equal."""
    order = list(alive)
    for _ in range(max(retry_cap, 1)):
        rng.shuffle(order)
        half = len(order) // 2
        u_side = set(order[:half])
        v_side = set(order[half:2 * half])
        while True:
            mu, mv = mask_of(u_side), mask_of(v_side)
            cut = None
            for v in sorted(u_side):
                if (G.adj[v] & mv).bit_count() < threshold:
                    cut = ("u", v)
                    break
            if cut is None:
                for v in sorted(v_side):
                    if (G.adj[v] & mu).bit_count() < threshold:
                        cut = ("v", v)
                        break
            if cut is not None:
                (u_side if cut[0] == "u" else v_side).discard(cut[1])
                continue
            if len(u_side) != len(v_side):
                big, other_mask = (u_side, mv) if len(u_side) > len(v_side) \
                    else (v_side, mu)
                drop = min(big, key=lambda v: ((G.adj[v] & other_mask).bit_count(), v))
                big.discard(drop)
                continue
            break
        if not u_side:
            continue
        mu, mv = mask_of(u_side), mask_of(v_side)
        cross = sum((G.adj[v] & mv).bit_count() for v in u_side)
        if cross >= edge_floor:
            return sorted(u_side), sorted(v_side)
    return None


def _top_by_degree(vertices, count: int, target_mask: int, adj) -> list:
    """count vertices with the most neighbors in target_mask; ties by index."""
    ranked = sorted(vertices,
                    key=lambda v: (-(adj[v] & target_mask).bit_count(), v))
    return sorted(ranked[:count])


def _connect_into(G: Graph, members: Sequence[int], anchor: int,
                  used: int):
    """Fresh lex-first 4-edge paths from every member to the anchor.

    Returns (internal vertices, new used mask) or None when some member has
    no available path.
    """
    internals = []
    for u in members:
        if u == anchor:
            continue
        found = None
        for m in iter_bits(~used & ((1 << G.n) - 1)):
            pick = _pick_two(G.adj[u] & G.adj[m] & ~used,
                             G.adj[anchor] & G.adj[m] & ~used & ~(1 << m))
            if pick is None:
                continue
            a, b = pick
            if a == m or b == m:
                continue
            found = (a, m, b)
            break
        if found is None:
            return None
        internals.extend(found)
        for w in found:
            used |= 1 << w
    return internals, used


def minor_pipeline(G: Graph, r: int, t: int, rng: RngStream,
                   constants: Optional[MinorConstants] = None,
                   diameter_aware: bool = True,
                   retry_cap: int = 50) -> Union[MinorModel, Failure]:
    """Find a verified K_t-minor with branch sets of size at most 8r.

    Stages: degree cleanup, balanced dense split, two rounds of path
    extraction, intermediate degree selections, a bicomplete r-sequence on
    the surviving pair, and branch-set assembly through fresh 4-edge paths.
    Each stage checks its measured clause and fails with its stage name.
    """
    c = constants or MinorConstants()
    if r < 1 or t < 2:
        raise GuardError("need r >= 1 and t >= 2")
    if G.m == 0:
        raise GuardError("G has no edges")
    n = G.n
    p = G.density()
    pf, ln = float(p), math.log(n) if n > 1 else 0.0
    in_regime = (p ** 8 * n >= 1 and p * r * r >= 576
                 and 4 * pf * r * r <= ln
                 and t <= math.exp(pf * r * r / 256) * ln / 32)
    if not in_regime:
        warnings.warn("parameters outside the guaranteed regime; proceeding",
                      RuntimeWarning, stacklevel=2)
    stats = {"n": n, "p": p, "r": r, "t": t, "in_regime": in_regime}

    alive = _cleanup(G, p * n / c.cleanup_div)
    stats["cleanup_size"] = len(alive)
    if len(alive) < 4:
        return Failure("cleanup", "graph vanished under degree cleanup",
                       dict(stats))

    split = _balanced_split(G, alive, p * n / c.split_mindeg_div,
                            p * n * n / c.split_edge_div, rng, retry_cap)
    if split is None:
        return Failure("split", "no dense balanced split", dict(stats))
    u_side, v_side = split
    H = _bipartite_from_split(G, u_side, v_side)
    stats["split_sizes"] = (len(u_side), len(v_side))
    stats["split_density"] = H.density()

    try:
        res1 = paths_drc(H, rng, c.paths, retry_cap)
    except GuardError as err:
        return Failure("paths_drc[1]", str(err), dict(stats))
    if isinstance(res1, Failure):
        return Failure(res1.stage + "[1]", res1.reason, res1.stats)
    stats["x_size"] = len(res1.X)
    stats["path_budget1"] = res1.budget

    xp = _ceil_frac(p * n / Fraction(c.xprime_div))
    if xp > len(res1.X):
        return Failure("xprime", "X smaller than the required subset",
                       {"x_size": len(res1.X), "need": xp, **stats})
    xprime = list(res1.X[:xp])
    xp_mask = mask_of(xprime)

    v_count = len(alive)
    z_cut = (p * n / (c.split_mindeg_div * v_count)) * xp
    mask2 = H.mask(2)
    z = [w for w in iter_bits(mask2) if (H.adj[w] & xp_mask).bit_count() >= z_cut]
    stats["z_size"] = len(z)
    if len(z) < xp:
        return Failure("z_select", "Z smaller than X'",
                       {"z_size": len(z), "need": xp, **stats})
    zprime = _top_by_degree(z, xp, xp_mask, H.adj)
    zp_mask = mask_of(zprime)
    e_xz = sum((H.adj[u] & zp_mask).bit_count() for u in xprime)
    stats["zprime_density"] = Fraction(e_xz, xp * xp)
    if Fraction(e_xz, xp * xp) < p / c.z_density_div:
        return Failure("zprime", "X'-Z' density below clause", dict(stats))

    # second path extraction on (Z', X') in host-vertex space
    h_labels = H.labels
    h1 = _bipartite_from_split(G, sorted(h_labels[v] for v in zprime),
                               sorted(h_labels[v] for v in xprime))
    try:
        res2 = paths_drc(h1, rng, c.paths, retry_cap)
    except GuardError as err:
        return Failure("paths_drc[2]", str(err), dict(stats))
    if isinstance(res2, Failure):
        return Failure(res2.stage + "[2]", res2.reason, res2.stats)
    y_host = sorted(h1.labels[v] for v in res2.X)
    stats["y_size"] = len(y_host)
    stats["path_budget2"] = res2.budget

    xprime_host = sorted(h_labels[v] for v in xprime)
    y_mask_host = mask_of(y_host)
    if len(y_host) > len(xprime_host):
        return Failure("w_select", "Y larger than X'", dict(stats))
    w_host = _top_by_degree(xprime_host, len(y_host), y_mask_host, G.adj)
    e_wy = sum((G.adj[u] & y_mask_host).bit_count() for u in w_host)
    stats["w_density"] = Fraction(e_wy, len(w_host) * len(y_host))
    if stats["w_density"] < p / c.w_density_div:
        return Failure("w_select", "W-Y density below clause", dict(stats))

    b_wy = _bipartite_from_split(G, w_host, y_host)
    seq = _weakseq_stages(b_wy, r, t, rng, max(retry_cap, 100), dict(stats))
    if isinstance(seq, Failure):
        return seq
    ok, viol = verify_sequence(G, seq)
    if not ok:
        raise AssertionError(f"invalid intermediate sequence: {viol}")
    stats = dict(seq.stats)

    # assembly: connect each S_i and T_i through a crossing edge
    used = 0
    for s in seq.s_sets:
        used |= mask_of(s)
    for s in seq.t_sets:
        used |= mask_of(s)
    branch_sets = []
    for i in range(t):
        a_set = sorted(seq.s_sets[i])
        b_set = sorted(seq.t_sets[i])
        edge = next(((a, b) for a in a_set for b in sorted(b_set)
                     if G.has_edge(a, b)), None)
        if edge is None:
            raise AssertionError("bicomplete pair lost its crossing edge")
        anchor_a, anchor_b = edge if diameter_aware else (a_set[0], b_set[0])
        members = set(a_set) | set(b_set)
        got = _connect_into(G, a_set, anchor_a, used)
        if got is None:
            return Failure("assembly", "no unused connecting path",
                           {"branch": i, **stats})
        internals_a, used = got
        got = _connect_into(G, b_set, anchor_b, used)
        if got is None:
            return Failure("assembly", "no unused connecting path",
                           {"branch": i, **stats})
        internals_b, used = got
        branch = frozenset(members | set(internals_a) | set(internals_b))
        if len(branch) > 8 * r:
            raise AssertionError("branch set exceeded its size cap")
        branch_sets.append(branch)

    model = MinorModel(tuple(branch_sets), 8 * r,
                       9 if diameter_aware else None, dict(stats))
    ok, viol = verify_minor(G, model)
    if not ok:
        raise AssertionError(f"assembled minor failed verification: {viol}")
    return model


def _induced_distances(g: Graph, members: frozenset) -> dict:
    """BFS distances within the induced subgraph, from every member."""
    mask = mask_of(members)
    out = {}
    for s in members:
        dist = {s: 0}
        frontier = [s]
        while frontier:
            nxt = []
            for u in frontier:
                for v in iter_bits(g.adj[u] & mask):
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        out[s] = dist
    return out


def verify_minor(g: Graph, model: MinorModel):
    """Check disjointness, connectivity, pairwise edges, and both caps."""
    sets = [frozenset(b) for b in model.branch_sets]
    for i, b in enumerate(sets):
        if not b:
            return False, ("empty", i)
        if any(not 0 <= v < g.n for v in b):
            raise ValueError(f"branch set {i} has out-of-range vertices")
        if len(b) > model.size_cap:
            return False, ("size", i)
    for i, j in itertools.combinations(range(len(sets)), 2):
        if sets[i] & sets[j]:
            return False, ("overlap", i, j)
        if not _sets_joined(g, sets[i], sets[j]):
            return False, ("pair", i, j)
    for i, b in enumerate(sets):
        dists = _induced_distances(g, b)
        root = min(b)
        if len(dists[root]) != len(b):
            return False, ("disconnected", i)
        if model.diameter_cap is not None:
            if any(max(d.values()) > model.diameter_cap for d in dists.values()):
                return False, ("diameter", i)
    return True, None


# ---------------------------------------------------------------------------
# Brute-force oracle


def max_weak_sequence_order(g: Graph, r: int) -> int:
    """Largest order of a weakly complete r-sequence, by exhaustive search."""
    if g.n > ORACLE_MAX_N:
        raise GuardError(f"oracle limited to n <= {ORACLE_MAX_N}")
    if r < 1:
        raise GuardError("need r >= 1")
    if r > g.n:
        return 0
    subsets = [(s, mask_of(s)) for s in
               itertools.combinations(range(g.n), r)]
    joined = [[bool(any(g.adj[u] & sm2 for u in s1))
               for (_, sm2) in subsets] for (s1, _) in subsets]
    best = 0

    def extend(start: int, chosen: list, used: int):
        nonlocal best
        best = max(best, len(chosen))
        for idx in range(start, len(subsets)):
            if len(chosen) + (g.n - used.bit_count()) // r <= best:
                return
            s, sm = subsets[idx]
            if sm & used:
                continue
            if all(joined[j][idx] or joined[idx][j] for j in chosen):
                chosen.append(idx)
                extend(idx + 1, chosen, used | sm)
                chosen.pop()

    extend(0, [], 0)
    return best
