"""Down-closed hypergraphs, resampling embeddings, and dependent random choice.

A down-closed hypergraph is stored through its missing top-level edges, so
dense instances cost memory proportional to what was deleted.  Targets embed
by redrawing the variables of the lowest-index violated event (vertex-pair
collisions first, then non-member edge images) until no event is violated;
every success is re-verified.  The two-color pipeline combines the majority
color, dependent random choice, auxiliary hypergraph construction, and the
resampling embedder, and re-checks the returned copy edge by edge.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .core import (BipartiteGraph, EdgeColoring, Failure, Graph, GuardError,
                   RetryError, RngStream, iter_bits, try_bipartition)

MAX_TOP_LEVEL = 10 ** 8
MAX_ENUMERATION = 10 ** 6
DIRECT_FALLBACK_N = 64


def _unrank_combination(rank: int, n: int, k: int) -> tuple:
    """The rank-th k-subset of range(n) in lexicographic order."""
    out = []
    c = 0
    for j in range(k, 0, -1):
        cnt = math.comb(n - c - 1, j - 1)
        while rank >= cnt:
            rank -= cnt
            c += 1
            cnt = cnt * (n - c - j + 1) // (n - c)
        out.append(c)
        c += 1
    return tuple(out)


class DownClosedHypergraph:
    """k-uniform top level minus a deleted set; lower levels by containment.

    An l-subset (l <= k) is a member iff it lies inside some surviving top
    edge, which keeps the edge set down-closed by construction.
    """

    __slots__ = ("N", "k", "deleted", "_deleted_sets")

    def __init__(self, N: int, k: int, deleted: Iterable = ()):
        if not 1 <= k <= N:
            raise GuardError("need 1 <= k <= N")
        dels = set()
        for item in deleted:
            t = tuple(sorted(item))
            if len(t) != k or len(set(t)) != k:
                raise ValueError(f"deleted item {t} is not a {k}-set")
            if not (0 <= t[0] and t[-1] < N):
                raise ValueError(f"deleted item {t} out of range")
            dels.add(t)
        self.N = N
        self.k = k
        self.deleted = frozenset(dels)
        self._deleted_sets = tuple(frozenset(t) for t in sorted(dels))

    @classmethod
    def from_top_edges(cls, N: int, k: int, top_edges: Iterable) -> "DownClosedHypergraph":
        if math.comb(N, k) > MAX_ENUMERATION:
            raise GuardError("explicit top-edge construction is desk-scale only")
        keep = {tuple(sorted(e)) for e in top_edges}
        deleted = [t for t in itertools.combinations(range(N), k)
                   if t not in keep]
        return cls(N, k, deleted)

    @property
    def missing_count(self) -> int:
        return len(self.deleted)

    @property
    def top_count(self) -> int:
        return math.comb(self.N, self.k) - len(self.deleted)

    def density(self) -> Fraction:
        return Fraction(self.top_count, math.comb(self.N, self.k))

    def missing_fraction(self) -> Fraction:
        return Fraction(len(self.deleted), math.comb(self.N, self.k))

    def is_top(self, S: Iterable) -> bool:
        return tuple(sorted(S)) not in self.deleted

    def member(self, S: Iterable) -> bool:
        t = tuple(sorted(S))
        level = len(t)
        if not 1 <= level <= self.k:
            raise GuardError(f"membership defined for 1..{self.k}-sets")
        if len(set(t)) != level or t[0] < 0 or t[-1] >= self.N:
            raise ValueError(f"{t} is not a vertex subset")
        if level == self.k:
            return t not in self.deleted
        # member iff not every extension to a k-set was deleted
        need = math.comb(self.N - level, self.k - level)
        ss = frozenset(t)
        hits = 0
        for d in self._deleted_sets:
            if ss <= d:
                hits += 1
                if hits == need:
                    return False
        return True

    def iter_top_edges(self):
        if math.comb(self.N, self.k) > MAX_ENUMERATION:
            raise GuardError("top-edge enumeration is desk-scale only")
        for t in itertools.combinations(range(self.N), self.k):
            if t not in self.deleted:
                yield t

    def non_member_count(self, level: int) -> int:
        """Exact number of non-member level-sets by enumeration."""
        if math.comb(self.N, level) > MAX_ENUMERATION:
            raise GuardError("level enumeration is desk-scale only")
        return sum(1 for t in itertools.combinations(range(self.N), level)
                   if not self.member(t))

    def __repr__(self) -> str:
        return (f"DownClosedHypergraph(N={self.N}, k={self.k}, "
                f"missing={len(self.deleted)})")


def random_dense_dch(N: int, k: int, delta, rng: RngStream) -> DownClosedHypergraph:
    """All k-subsets minus exactly floor(delta * C(N,k)) uniform deletions."""
    total = math.comb(N, k)
    if total > MAX_TOP_LEVEL:
        raise GuardError(f"C(N,k) = {total} exceeds {MAX_TOP_LEVEL}")
    d = Fraction(delta)
    if not 0 <= d < 1:
        raise GuardError("delta must lie in [0, 1)")
    count = int(d * total)
    ranks = rng.sample(range(total), count)
    return DownClosedHypergraph(N, k, (_unrank_combination(r, N, k)
                                       for r in ranks))


class TargetHypergraph:
    """Hypergraph to embed: n vertices, edges of size 1..k, dense indexing."""

    __slots__ = ("n", "edges")

    def __init__(self, n: int, edges: Iterable):
        es = set()
        for e in edges:
            fe = frozenset(e)
            if not fe:
                raise ValueError("edges must be nonempty")
            if any(not 0 <= v < n for v in fe):
                raise ValueError(f"edge {sorted(fe)} out of range")
            es.add(fe)
        self.n = n
        self.edges = tuple(sorted(es, key=lambda e: tuple(sorted(e))))

    @property
    def max_degree(self) -> int:
        deg = [0] * self.n
        for e in self.edges:
            for v in e:
                deg[v] += 1
        return max(deg, default=0)

    @property
    def max_edge_size(self) -> int:
        return max((len(e) for e in self.edges), default=0)

    def __repr__(self) -> str:
        return f"TargetHypergraph(n={self.n}, m={len(self.edges)})"


def neighborhood_hypergraph(g: Graph) -> TargetHypergraph:
    """Distinct nonempty vertex neighborhoods of g as hyperedges over V(g)."""
    return TargetHypergraph(g.n, {frozenset(iter_bits(g.adj[v]))
                                  for v in range(g.n) if g.adj[v]})


@dataclass(frozen=True)
class EmbeddingResult:
    """Injective vertex map preserving edge membership; rounds = resamples."""

    mapping: tuple
    rounds: int


def _in_regime(H: TargetHypergraph, G: DownClosedHypergraph) -> bool:
    """Exact check of N >= 16n and delta <= 2^(-8kn/N) / (4k*Delta)."""
    if G.N < 16 * H.n:
        return False
    delta = G.missing_fraction()
    dmax = H.max_degree
    if delta == 0 or dmax == 0:
        return True
    lhs = (delta * 4 * G.k * dmax) ** G.N * 2 ** (8 * G.k * H.n)
    return lhs <= 1


def resample_embed(H: TargetHypergraph, G: DownClosedHypergraph,
                   rng: RngStream,
                   round_cap: int = 10000) -> Union[EmbeddingResult, Failure]:
    """Embed H into G by resampling the lowest-index violated event.

    Events, in order: one collision event per vertex pair (images equal), then
    one membership event per edge (distinct images, image not a member).
    Resampling redraws only the offending event's own vertex images.  Success
    is re-verified: injectivity plus membership of every edge image.
    """
    if H.n > G.N:
        return Failure("resample_embed", "target larger than host",
                       {"n": H.n, "N": G.N})
    if H.max_edge_size > G.k:
        raise GuardError("target edge size exceeds host uniformity")
    if not _in_regime(H, G):
        warnings.warn("resample_embed outside the recommended regime; "
                      "termination is empirical", RuntimeWarning, stacklevel=2)
    pairs = list(itertools.combinations(range(H.n), 2))
    f = [rng.randrange(G.N) for _ in range(H.n)]

    def first_violation():
        for u, v in pairs:
            if f[u] == f[v]:
                return ("collision", (u, v))
        for e in H.edges:
            img = {f[v] for v in e}
            if len(img) == len(e) and not G.member(img):
                return ("non_member", e)
        return None

    performed = 0
    while True:
        viol = first_violation()
        if viol is None:
            mapping = tuple(f)
            if len(set(mapping)) != H.n:
                raise AssertionError("embedding lost injectivity")
            for e in H.edges:
                if not G.member({mapping[v] for v in e}):
                    raise AssertionError("embedding lost edge membership")
            return EmbeddingResult(mapping, performed)
        if performed >= round_cap:
            labels = []
            for u, v in pairs:
                if f[u] == f[v]:
                    labels.append(("collision", u, v))
            for e in H.edges:
                img = {f[v] for v in e}
                if len(img) == len(e) and not G.member(img):
                    labels.append(("non_member", tuple(sorted(e))))
            return Failure("resample_embed", "round cap exhausted",
                           {"rounds": performed, "violated": tuple(labels)})
        kind, what = viol
        if kind == "collision":
            u, v = what
            f[u] = rng.randrange(G.N)
            f[v] = rng.randrange(G.N)
        else:
            for v in sorted(what):
                f[v] = rng.randrange(G.N)
        performed += 1


@dataclass(frozen=True)
class DrcParams:
    """Dependent-random-choice parameters; all checks use exact arithmetic."""

    eps: Fraction
    k: int
    b: Fraction
    n: int

    def __post_init__(self):
        object.__setattr__(self, "eps", Fraction(self.eps))
        object.__setattr__(self, "b", Fraction(self.b))
        if self.k < 1 or self.n < 1 or self.eps <= 0 or self.b <= 0:
            raise GuardError("DrcParams need k, n >= 1 and eps, b > 0")


@dataclass(frozen=True)
class DrcResult:
    """A subset of V1 passing both counted clauses, with its statistics."""

    U: tuple
    tries: int
    bad_k_sets: int
    bad_bound: Fraction


def drc_subset(B: BipartiteGraph, params: DrcParams, rng: RngStream,
               retry_cap: int = 200) -> DrcResult:
    """Common neighborhood of k random V2 vertices, retried until it verifies.

    Clause 1: 2|U|^k >= (eps^k N)^k, i.e. |U| >= 2^(-1/k) eps^k N.  Clause 2:
    the number of k-subsets of U with fewer than n common neighbors in V2 is
    below 2^(k+1) b^(-k) C(|U|, k).  Both clauses are verified by direct
    counting on every attempt.
    """
    if B.n0:
        raise GuardError("overlay parts are not supported here")
    if B.n1 != B.n2:
        raise GuardError("parts must have equal size")
    N = B.n1
    k, n, eps, b = params.k, params.n, params.eps, params.b
    if B.density() < eps:
        raise GuardError(f"density {B.density()} below eps {eps}")
    if Fraction(N) * eps ** k < max(Fraction(b * n), Fraction(4 * k)):
        raise GuardError("precondition N >= eps^-k * max(bn, 4k) fails")
    mask1, mask2 = B.mask(1), B.mask(2)
    v2 = list(B.v2)
    size_rhs = (eps ** k * N) ** k
    best = None
    for t in range(1, retry_cap + 1):
        picks = [rng.choice(v2) for _ in range(k)]
        common = mask1
        for p in picks:
            common &= B.adj[p]
        U = list(iter_bits(common))
        stats = {"size": len(U), "tries": t}
        if 2 * Fraction(len(U)) ** k < size_rhs:
            if best is None or stats["size"] > best["size"]:
                best = stats
            continue
        bad = 0
        for S in itertools.combinations(U, k):
            inter = mask2
            for u in S:
                inter &= B.adj[u]
            if inter.bit_count() < n:
                bad += 1
        bound = Fraction(2 ** (k + 1), 1) / b ** k * math.comb(len(U), k)
        stats["bad"] = bad
        if bad < bound:
            return DrcResult(tuple(U), t, bad, bound)
        if best is None or stats["size"] > best["size"]:
            best = stats
    raise RetryError("drc_subset", retry_cap, best or {})


@dataclass(frozen=True)
class AuxPair:
    """Embedding target over H's V1 side and host hypergraph over U.

    ``v1_vertices[i]`` is the H vertex behind target index i; ``u_vertices[j]``
    the G vertex behind host index j.
    """

    target: TargetHypergraph
    dch: DownClosedHypergraph
    v1_vertices: tuple
    u_vertices: tuple


def _common_neighbors_mask(G, vertices: Iterable[int]) -> int:
    if isinstance(G, BipartiteGraph):
        scope = G.mask(2)
    else:
        scope = (1 << G.n) - 1
    for v in vertices:
        scope &= G.adj[v]
    return scope


def build_aux_pair(H: BipartiteGraph, U: Sequence[int], G, n: int) -> AuxPair:
    """Auxiliary pair: distinct V2 neighborhoods of H as target edges, and
    k-subsets of U with at least n common G-neighbors as host top edges."""
    if H.n0:
        raise GuardError("H must be purely bipartite")
    v1 = list(H.v1)
    v2 = list(H.v2)
    k = max((H.degree(w) for w in v2), default=0)
    if k < 1:
        raise GuardError("the V2 side of H has no edges")
    pos = {v: i for i, v in enumerate(v1)}
    mask1 = H.mask(1)
    edges = {frozenset(pos[x] for x in iter_bits(H.adj[w] & mask1))
             for w in v2}
    edges.discard(frozenset())
    target = TargetHypergraph(len(v1), edges)
    u = tuple(sorted(U))
    if len(u) < k:
        raise GuardError("U smaller than the uniformity k")
    if math.comb(len(u), k) > MAX_ENUMERATION:
        raise GuardError("U too large for top-level enumeration")
    deleted = []
    for S in itertools.combinations(range(len(u)), k):
        if _common_neighbors_mask(G, (u[i] for i in S)).bit_count() < n:
            deleted.append(S)
    return AuxPair(target, DownClosedHypergraph(len(u), k, deleted),
                   tuple(v1), u)


@dataclass(frozen=True)
class PipelineResult:
    """Monochromatic copy of H: H vertex i sits at host vertex mapping[i]."""

    mapping: tuple
    color: int
    drc_tries: int
    resample_rounds: int


def _bipartite_sides(H) -> tuple:
    """Adjacency rows plus the two independent sides of a bipartite target."""
    if isinstance(H, BipartiteGraph):
        if H.n0:
            raise GuardError("H must be purely bipartite")
        return H.adj, list(H.v1), list(H.v2)
    sides = try_bipartition(H)
    if sides is None:
        raise GuardError("H is not bipartite")
    return H.adj, sides[0], sides[1]


def _direct_embed(rows_maj: Sequence[int], N: int, hadj: Sequence[int],
                  hn: int) -> Optional[list]:
    """Deterministic backtracking search for a copy of H in one color class."""
    order = sorted(range(hn), key=lambda v: -hadj[v].bit_count())
    mapping = [-1] * hn
    used = set()

    def place(i: int) -> bool:
        if i == hn:
            return True
        v = order[i]
        need = [w for w in iter_bits(hadj[v]) if mapping[w] >= 0]
        for cand in range(N):
            if cand in used:
                continue
            if all(rows_maj[mapping[w]] >> cand & 1 for w in need):
                mapping[v] = cand
                used.add(cand)
                if place(i + 1):
                    return True
                mapping[v] = -1
                used.discard(cand)
        return False

    return mapping if place(0) else None


def bip_ramsey_pipeline(coloring: EdgeColoring, H, rng: RngStream,
                        drc_retry: int = 200,
                        round_cap: int = 10000) -> Union[PipelineResult, Failure]:
    """Find a monochromatic copy of a bipartite H in a 2-colored complete host.

    Splits the host into fixed halves, takes the majority color across the
    split, extracts U by dependent random choice, embeds the V1 side into the
    auxiliary hypergraph pair by resampling, and places the V2 side greedily
    inside common neighborhoods.  The returned copy is re-verified against
    the original coloring edge by edge.  Hosts too small for the parameter
    preconditions fall back to a direct backtracking search in the globally
    majority color.
    """
    host = coloring.graph
    if coloring.r != 2:
        raise GuardError("pipeline needs a 2-coloring")
    if not isinstance(host, Graph) or host.m != math.comb(host.n, 2):
        raise GuardError("pipeline needs a complete host graph")
    N = host.n
    hadj, side_a, side_b = _bipartite_sides(H)
    hn = len(hadj)
    if hn > N:
        return Failure("params", "target larger than host", {"n": hn, "N": N})
    deg = [hadj[v].bit_count() for v in range(hn)]
    da = max((deg[v] for v in side_a), default=0)
    db = max((deg[v] for v in side_b), default=0)
    # V2 is the side with the smaller maximum degree
    if db <= da:
        v1_side, v2_side, k, big = side_a, side_b, max(db, 1), max(da, 1)
    else:
        v1_side, v2_side, k, big = side_b, side_a, max(da, 1), max(db, 1)

    half = N // 2
    mask_a = (1 << half) - 1
    mask_b = ((1 << half) - 1) << half
    counts = [sum((coloring.rows[c][u] & mask_b).bit_count()
                  for u in range(half)) for c in range(2)]
    majority = 0 if counts[0] >= counts[1] else 1
    rows_maj = coloring.rows[majority]

    eps = Fraction(1, 2)
    cap_b = Fraction(half) * eps ** k / hn if hn else Fraction(0)
    paper_b = Fraction(16 * big ** (1.0 / k)).limit_denominator(10 ** 6)
    b = min(paper_b, cap_b)
    feasible = (b > 0 and half >= 1
                and Fraction(half) * eps ** k >= max(Fraction(b * hn),
                                                     Fraction(4 * k)))
    if not feasible:
        if N > DIRECT_FALLBACK_N:
            return Failure("params", "host too small for the parameter "
                           "regime and too large for direct search",
                           {"N": N, "n": hn})
        global_counts = [coloring.class_size(c) for c in range(2)]
        majority = 0 if global_counts[0] >= global_counts[1] else 1
        mapping = _direct_embed(coloring.rows[majority], N, hadj, hn)
        if mapping is None:
            return Failure("direct_embed",
                           "no copy in the majority color", {"N": N})
        result = PipelineResult(tuple(mapping), majority, 0, 0)
        _verify_pipeline(coloring, hadj, result)
        return result

    if b < paper_b:
        warnings.warn("quality parameter b capped below 16*Delta^(1/k) to fit "
                      "the host size", RuntimeWarning, stacklevel=2)
    bip_rows = [rows_maj[u] & mask_b for u in range(half)]
    bip_rows += [rows_maj[v] & mask_a for v in range(half, 2 * half)]
    b_maj = BipartiteGraph.from_adjacency(half, half, bip_rows)

    params = DrcParams(eps, k, b, hn)
    try:
        drc = drc_subset(b_maj, params, rng, retry_cap=drc_retry)
    except RetryError as err:
        return Failure("drc_subset", "retry cap exhausted", err.best)

    # orient H so its V1 side carries the larger degree bound
    hpos = {v: i for i, v in enumerate(v1_side + v2_side)}
    h_edges = [(hpos[u], hpos[v]) for u in v1_side
               for v in iter_bits(hadj[u])]
    h_bip = BipartiteGraph(len(v1_side), len(v2_side), h_edges)
    aux = build_aux_pair(h_bip, drc.U, b_maj, hn)

    emb = resample_embed(aux.target, aux.dch, rng, round_cap=round_cap)
    if isinstance(emb, Failure):
        return emb

    mapping = [-1] * hn
    used = set()
    for i, hv in enumerate(v1_side):
        mapping[hv] = aux.u_vertices[emb.mapping[i]]
        used.add(mapping[hv])
    for hv in v2_side:
        nbrs = [mapping[w] for w in iter_bits(hadj[hv])]
        if nbrs:
            cand = mask_b
            for img in nbrs:
                cand &= b_maj.adj[img]
        else:
            cand = mask_b  # degree-0 vertices take any unused host vertex
        choice = next((c for c in iter_bits(cand) if c not in used), None)
        if choice is None:
            return Failure("placement", "no unused common neighbor",
                           {"vertex": hv})
        mapping[hv] = choice
        used.add(choice)

    result = PipelineResult(tuple(mapping), majority, drc.tries, emb.rounds)
    _verify_pipeline(coloring, hadj, result)
    return result


def _verify_pipeline(coloring: EdgeColoring, hadj: Sequence[int],
                     result: PipelineResult) -> None:
    mapping = result.mapping
    if len(set(mapping)) != len(mapping):
        raise AssertionError("pipeline mapping is not injective")
    for u in range(len(hadj)):
        for v in iter_bits(hadj[u]):
            if v <= u:
                continue
            if coloring.color_of(mapping[u], mapping[v]) != result.color:
                raise AssertionError("copy edge has the wrong color")
