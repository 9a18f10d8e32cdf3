"""Shared substrate: bitset graphs, hypergraphs, edge colorings, seeded RNG
streams, canonical generators and edge-list file I/O.

All graph types are immutable after construction and safe to share read-only
across workers.  Vertices are dense integer indices; generators that have a
named ground set (hypercube labels, grid lines) store the bijection in
``labels`` so witnesses can be reported in domain terms.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Callable, Iterable, Iterator, Mapping, Sequence

MAX_HYPERCUBE_DIM = 20
MAX_GRID_CELLS = 10 ** 8


class GuardError(ValueError):
    """A resource guard rejected the parameters before any work started."""


class ParseError(ValueError):
    """Malformed input file; carries the 1-based offending line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class RetryError(RuntimeError):
    """A Las Vegas retry loop exhausted its cap.

    ``best`` holds the statistics of the best attempt seen, so callers can
    produce a structured failure report instead of losing the work.
    """

    def __init__(self, stage: str, tries: int, best: dict):
        super().__init__(f"{stage}: retry cap exhausted after {tries} tries")
        self.stage = stage
        self.tries = tries
        self.best = best


@dataclass(frozen=True)
class Failure:
    """Structured pipeline failure: the stage that failed plus its statistics."""

    stage: str
    reason: str
    stats: dict = field(default_factory=dict)


def iter_bits(mask: int) -> Iterator[int]:
    """Yield the indices of set bits in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for i in indices:
        m |= 1 << i
    return m


# ---------------------------------------------------------------------------
# RNG streams


class RngStream:
    """Seeded random stream with a recorded call position.

    The core generator is CPython's Mersenne Twister; equal seeds plus equal
    call sequences give equal outputs.  Child streams are derived from
    ``(seed, *path)`` through SHA-256 so that per-trial streams are
    reproducible and decoupled from the parent's position.
    """

    ALGORITHM = "mt19937/sha256-derive"

    __slots__ = ("seed", "position", "_rng")

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.position = 0
        self._rng = random.Random(self.seed)

    def derive(self, *path: object) -> "RngStream":
        key = "\x1f".join([str(self.seed), *[str(p) for p in path]])
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return RngStream(int.from_bytes(digest[:8], "big"))

    def random(self) -> float:
        self.position += 1
        return self._rng.random()

    def randrange(self, n: int) -> int:
        self.position += 1
        return self._rng.randrange(n)

    def randint(self, a: int, b: int) -> int:
        self.position += 1
        return self._rng.randint(a, b)

    def getrandbits(self, k: int) -> int:
        self.position += 1
        return self._rng.getrandbits(k)

    def choice(self, seq: Sequence):
        self.position += 1
        return self._rng.choice(seq)

    def shuffle(self, seq: list) -> None:
        self.position += 1
        self._rng.shuffle(seq)

    def sample(self, population, k: int) -> list:
        self.position += 1
        return self._rng.sample(population, k)


# ---------------------------------------------------------------------------
# Graph types


class Graph:
    """Immutable simple graph on ``{0..n-1}`` with bitmask adjacency rows.

    Constructors reject loops, duplicate edges and out-of-range endpoints.
    """

    __slots__ = ("n", "adj", "m", "labels")

    def __init__(self, n: int, edges: Iterable = (), labels=None):
        if n < 0:
            raise ValueError("vertex count must be nonnegative")
        rows = [0] * n
        for e in edges:
            u, v = e
            if u == v:
                raise ValueError(f"loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of range for n={n}")
            if rows[u] >> v & 1:
                raise ValueError(f"duplicate edge ({u},{v})")
            rows[u] |= 1 << v
            rows[v] |= 1 << u
        self.n = n
        self.adj = tuple(rows)
        self.m = sum(r.bit_count() for r in rows) // 2
        self.labels = tuple(labels) if labels is not None else None

    @classmethod
    def from_adjacency(cls, n: int, rows: Sequence[int], labels=None,
                       _validate: bool = True) -> "Graph":
        """Build from prevalidated rows; internal generators pass _validate=False."""
        if _validate:
            if len(rows) != n:
                raise ValueError("row count mismatch")
            full = (1 << n) - 1
            for u, r in enumerate(rows):
                if r >> u & 1:
                    raise ValueError(f"loop at vertex {u}")
                if r & ~full:
                    raise ValueError(f"row {u} has out-of-range bits")
            for u in range(n):
                for v in iter_bits(rows[u]):
                    if not rows[v] >> u & 1:
                        raise ValueError(f"asymmetric edge ({u},{v})")
        g = cls.__new__(cls)
        g.n = n
        g.adj = tuple(rows)
        g.m = sum(r.bit_count() for r in rows) // 2
        g.labels = tuple(labels) if labels is not None else None
        return g

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adj[u] >> v & 1)

    def degree(self, u: int) -> int:
        return self.adj[u].bit_count()

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for u in range(self.n):
            row = self.adj[u] >> (u + 1)
            for off in iter_bits(row):
                out.append((u, u + 1 + off))
        return out

    def density(self) -> Fraction:
        pairs = comb(self.n, 2)
        return Fraction(self.m, pairs) if pairs else Fraction(0)

    def complement(self) -> "Graph":
        full = (1 << self.n) - 1
        rows = [(~self.adj[u]) & full & ~(1 << u) for u in range(self.n)]
        return Graph.from_adjacency(self.n, rows, _validate=False)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Graph) and self.n == other.n
                and self.adj == other.adj)

    __hash__ = None

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


class BipartiteGraph:
    """Bipartite graph with an optional third overlay part for tripartite hosts.

    Vertex layout: V0 = [0, n0), V1 = [n0, n0+n1), V2 = [n0+n1, n). Every edge
    joins two distinct parts.  Pure bipartite graphs have n0 = 0.
    """

    __slots__ = ("n0", "n1", "n2", "n", "adj", "m", "labels")

    def __init__(self, n1: int, n2: int, edges: Iterable = (), n0: int = 0,
                 labels=None):
        if min(n0, n1, n2) < 0:
            raise ValueError("part sizes must be nonnegative")
        n = n0 + n1 + n2
        rows = [0] * n
        for e in edges:
            u, v = e
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u},{v}) out of range")
            pu, pv = _part_of(u, n0, n1), _part_of(v, n0, n1)
            if pu == pv:
                raise ValueError(f"edge ({u},{v}) joins part {pu} to itself")
            if rows[u] >> v & 1:
                raise ValueError(f"duplicate edge ({u},{v})")
            rows[u] |= 1 << v
            rows[v] |= 1 << u
        self.n0, self.n1, self.n2, self.n = n0, n1, n2, n
        self.adj = tuple(rows)
        self.m = sum(r.bit_count() for r in rows) // 2
        self.labels = tuple(labels) if labels is not None else None

    @classmethod
    def from_adjacency(cls, n1: int, n2: int, rows: Sequence[int], n0: int = 0,
                       labels=None) -> "BipartiteGraph":
        g = cls.__new__(cls)
        g.n0, g.n1, g.n2, g.n = n0, n1, n2, n0 + n1 + n2
        g.adj = tuple(rows)
        g.m = sum(r.bit_count() for r in rows) // 2
        g.labels = tuple(labels) if labels is not None else None
        return g

    def part_of(self, v: int) -> int:
        return _part_of(v, self.n0, self.n1)

    @property
    def v0(self) -> range:
        return range(0, self.n0)

    @property
    def v1(self) -> range:
        return range(self.n0, self.n0 + self.n1)

    @property
    def v2(self) -> range:
        return range(self.n0 + self.n1, self.n)

    def mask(self, part: int) -> int:
        if part == 0:
            return (1 << self.n0) - 1
        if part == 1:
            return ((1 << self.n1) - 1) << self.n0
        return ((1 << self.n2) - 1) << (self.n0 + self.n1)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adj[u] >> v & 1)

    def degree(self, u: int) -> int:
        return self.adj[u].bit_count()

    def degree_into(self, u: int, part_mask: int) -> int:
        return (self.adj[u] & part_mask).bit_count()

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for u in range(self.n):
            row = self.adj[u] >> (u + 1)
            for off in iter_bits(row):
                out.append((u, u + 1 + off))
        return out

    def cross_m(self) -> int:
        """Number of V1-V2 edges."""
        m2 = self.mask(2)
        return sum((self.adj[u] & m2).bit_count() for u in self.v1)

    def density(self) -> Fraction:
        """V1-V2 cross density."""
        cells = self.n1 * self.n2
        return Fraction(self.cross_m(), cells) if cells else Fraction(0)

    def transpose(self) -> "BipartiteGraph":
        """Swap the roles of V1 and V2 (V0 kept in place)."""
        remap = list(range(self.n0)) + \
            [self.n0 + self.n2 + i for i in range(self.n1)] + \
            [self.n0 + i for i in range(self.n2)]
        edges = [(remap[u], remap[v]) for u, v in self.edges()]
        labels = None
        if self.labels is not None:
            labels = [None] * self.n
            for old, new in enumerate(remap):
                labels[new] = self.labels[old]
        return BipartiteGraph(self.n2, self.n1, edges, n0=self.n0,
                              labels=labels)

    def __eq__(self, other) -> bool:
        return (isinstance(other, BipartiteGraph)
                and (self.n0, self.n1, self.n2) == (other.n0, other.n1, other.n2)
                and self.adj == other.adj)

    __hash__ = None

    def __repr__(self) -> str:
        parts = f"{self.n1}+{self.n2}" if not self.n0 else \
            f"{self.n0}+{self.n1}+{self.n2}"
        return f"BipartiteGraph({parts}, m={self.m})"


def _part_of(v: int, n0: int, n1: int) -> int:
    if v < n0:
        return 0
    return 1 if v < n0 + n1 else 2


class KUniformHypergraph:
    """k-uniform hypergraph; edges are frozensets of exactly k vertices."""

    __slots__ = ("n", "k", "edges")

    def __init__(self, n: int, k: int, edges: Iterable = ()):
        if n < 0 or k < 1:
            raise ValueError("need n >= 0 and k >= 1")
        es = set()
        for e in edges:
            fe = frozenset(e)
            if len(fe) != k:
                raise ValueError(f"edge {sorted(fe)} is not a {k}-set")
            if any(not 0 <= v < n for v in fe):
                raise ValueError(f"edge {sorted(fe)} out of range")
            es.add(fe)
        self.n, self.k = n, k
        self.edges = frozenset(es)

    @property
    def m(self) -> int:
        return len(self.edges)

    def __eq__(self, other) -> bool:
        return (isinstance(other, KUniformHypergraph)
                and (self.n, self.k, self.edges) == (other.n, other.k, other.edges))

    __hash__ = None

    def __repr__(self) -> str:
        return f"KUniformHypergraph(n={self.n}, k={self.k}, m={self.m})"


class EdgeColoring:
    """A host graph plus a total assignment of its edges to r color classes.

    Colors are kept as per-color bitmask adjacency rows so monochromatic
    neighborhood queries are single AND operations.
    """

    __slots__ = ("graph", "r", "rows")

    def __init__(self, graph, colors, r: int):
        if r < 1:
            raise ValueError("need at least one color")
        n = graph.n
        rows = [[0] * n for _ in range(r)]
        seen = 0
        for u, v in graph.edges():
            if isinstance(colors, Mapping):
                try:
                    c = colors[(u, v)]
                except KeyError:
                    raise ValueError(f"edge ({u},{v}) has no color assigned") from None
            else:
                c = colors(u, v)
            if not 0 <= c < r:
                raise ValueError(f"edge ({u},{v}) has color {c} outside 0..{r - 1}")
            rows[c][u] |= 1 << v
            rows[c][v] |= 1 << u
            seen += 1
        if isinstance(colors, Mapping) and len(colors) != seen:
            raise ValueError("color map keys do not match the edge set")
        self.graph = graph
        self.r = r
        self.rows = tuple(tuple(row) for row in rows)

    @classmethod
    def from_rows(cls, graph, rows, r: int) -> "EdgeColoring":
        c = cls.__new__(cls)
        c.graph, c.r = graph, r
        c.rows = tuple(tuple(row) for row in rows)
        return c

    def color_of(self, u: int, v: int):
        for c in range(self.r):
            if self.rows[c][u] >> v & 1:
                return c
        return None

    def mono_mask(self, c: int, v: int) -> int:
        return self.rows[c][v]

    def class_size(self, c: int) -> int:
        return sum(row.bit_count() for row in self.rows[c]) // 2


def random_coloring(graph, r: int, stream: RngStream) -> EdgeColoring:
    """Uniform random r-coloring of the host's edges."""
    n = graph.n
    rows = [[0] * n for _ in range(r)]
    for u, v in graph.edges():
        c = stream.randrange(r)
        rows[c][u] |= 1 << v
        rows[c][v] |= 1 << u
    return EdgeColoring.from_rows(graph, rows, r)


# ---------------------------------------------------------------------------
# Generators


def complete_graph(n: int) -> Graph:
    full = (1 << n) - 1
    rows = [full & ~(1 << u) for u in range(n)]
    return Graph.from_adjacency(n, rows, _validate=False)


def complete_bipartite(a: int, b: int) -> BipartiteGraph:
    if a < 1 or b < 1:
        raise ValueError("part sizes must be >= 1")
    mask2 = ((1 << b) - 1) << a
    mask1 = (1 << a) - 1
    rows = [mask2] * a + [mask1] * b
    return BipartiteGraph.from_adjacency(a, b, rows)


def complete_kpartite(sizes: Sequence[int]) -> Graph:
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError("all part sizes must be >= 1")
    n = sum(sizes)
    full = (1 << n) - 1
    rows = []
    labels = []
    offset = 0
    for pi, s in enumerate(sizes):
        part_mask = ((1 << s) - 1) << offset
        for j in range(s):
            rows.append(full & ~part_mask)
            labels.append((pi, j))
        offset += s
    return Graph.from_adjacency(n, rows, labels=labels, _validate=False)


def hypercube(d: int) -> Graph:
    """The d-cube: vertex set {0,1}^d, adjacency = differ in one coordinate."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d > MAX_HYPERCUBE_DIM:
        raise GuardError(f"hypercube dimension {d} exceeds guard {MAX_HYPERCUBE_DIM}")
    n = 1 << d
    rows = [0] * n
    for v in range(n):
        r = 0
        for i in range(d):
            r |= 1 << (v ^ (1 << i))
        rows[v] = r
    labels = [tuple((v >> i) & 1 for i in range(d)) for v in range(n)]
    return Graph.from_adjacency(n, rows, labels=labels, _validate=False)


def grid_lines(N: int) -> BipartiteGraph:
    """Tripartite line graph of the N x N grid.

    V0 holds the 2N-1 slope -1 lines, V1 the N vertical lines and V2 the N
    horizontal lines; two lines are adjacent iff they meet in a grid point,
    so V1 is complete to V2.  Grid coordinates are 1-based in the labels.
    """
    if N < 1:
        raise ValueError("grid side must be >= 1")
    if N * N > MAX_GRID_CELLS:
        raise GuardError(f"grid with {N * N} cells exceeds guard {MAX_GRID_CELLS}")
    n0 = 2 * N - 1
    n = n0 + 2 * N
    rows = [0] * n
    labels = [("antidiag", s) for s in range(2, 2 * N + 1)] + \
             [("vert", a) for a in range(1, N + 1)] + \
             [("horiz", b) for b in range(1, N + 1)]
    mask1 = ((1 << N) - 1) << n0
    mask2 = ((1 << N) - 1) << (n0 + N)
    for a in range(1, N + 1):
        rows[n0 + a - 1] |= mask2
    for b in range(1, N + 1):
        rows[n0 + N + b - 1] |= mask1
    for s in range(2, 2 * N + 1):
        i = s - 2
        for a in range(max(1, s - N), min(N, s - 1) + 1):
            # line x+y=s meets vertical x=a at (a, s-a), in the grid
            va = n0 + a - 1
            rows[i] |= 1 << va
            rows[va] |= 1 << i
        for b in range(max(1, s - N), min(N, s - 1) + 1):
            vb = n0 + N + b - 1
            rows[i] |= 1 << vb
            rows[vb] |= 1 << i
    return BipartiteGraph.from_adjacency(N, N, rows, n0=n0, labels=labels)


def generate(kind: str, params: Mapping):
    """Dispatch for the named generators used across the modules."""
    if kind == "complete":
        return complete_graph(int(params["n"]))
    if kind == "complete_bipartite":
        return complete_bipartite(int(params["a"]), int(params["b"]))
    if kind == "complete_kpartite":
        return complete_kpartite([int(s) for s in params["sizes"]])
    if kind == "hypercube":
        return hypercube(int(params["d"]))
    if kind == "grid_lines":
        return grid_lines(int(params["N"]))
    raise ValueError(f"unknown generator kind {kind!r}")


def random_graph(n: int, p: float, stream: RngStream) -> Graph:
    """G(n, p) with one Bernoulli draw per vertex pair, in canonical order."""
    rows = [0] * n
    for u in range(n):
        for v in range(u + 1, n):
            if stream.random() < p:
                rows[u] |= 1 << v
                rows[v] |= 1 << u
    return Graph.from_adjacency(n, rows, _validate=False)


# ---------------------------------------------------------------------------
# Random equitable bipartition


@dataclass(frozen=True)
class EquitablePartition:
    """A vertex bipartition of a graph together with its measured densities."""

    bipartite: BipartiteGraph
    side1: tuple
    side2: tuple
    cross_density: Fraction
    base_density: Fraction
    tries: int


def random_equitable_bipartition(g: Graph, stream: RngStream,
                                 retry_cap: int = 1000) -> EquitablePartition:
    """Split V(G) into halves whose cross density is at least density(G).

    Achievable in expectation, so the draw is retried; exceeding the cap
    raises :class:`RetryError` with the best density seen.
    """
    n = g.n
    base = g.density()
    half = (n + 1) // 2
    perm = list(range(n))
    best = (Fraction(0), 0)
    for t in range(1, retry_cap + 1):
        stream.shuffle(perm)
        side1 = sorted(perm[:half])
        side2 = sorted(perm[half:])
        mask2 = mask_of(side2)
        cross = sum((g.adj[u] & mask2).bit_count() for u in side1)
        cells = len(side1) * len(side2)
        dens = Fraction(cross, cells) if cells else Fraction(0)
        if dens > best[0]:
            best = (dens, t)
        if dens >= base:
            bip = _bipartite_from_split(g, side1, side2)
            return EquitablePartition(bip, tuple(side1), tuple(side2),
                                      dens, base, t)
    raise RetryError("random_equitable_bipartition", retry_cap,
                     {"best_density": float(best[0]), "target": float(base)})


def _bipartite_from_split(g: Graph, side1: list, side2: list) -> BipartiteGraph:
    n1, n2 = len(side1), len(side2)
    pos = {}
    for i, v in enumerate(side1):
        pos[v] = i
    for j, v in enumerate(side2):
        pos[v] = n1 + j
    mask1 = mask_of(side1)
    mask2 = mask_of(side2)
    rows = [0] * (n1 + n2)
    for i, v in enumerate(side1):
        r = 0
        for w in iter_bits(g.adj[v] & mask2):
            r |= 1 << pos[w]
        rows[i] = r
    for j, v in enumerate(side2):
        r = 0
        for w in iter_bits(g.adj[v] & mask1):
            r |= 1 << pos[w]
        rows[n1 + j] = r
    return BipartiteGraph.from_adjacency(n1, n2, rows,
                                         labels=list(side1) + list(side2))


def try_bipartition(g: Graph):
    """2-color the graph by BFS; returns (side1, side2) or None if odd cycle."""
    side = [-1] * g.n
    for s in range(g.n):
        if side[s] != -1:
            continue
        side[s] = 0
        queue = [s]
        while queue:
            u = queue.pop()
            for v in iter_bits(g.adj[u]):
                if side[v] == -1:
                    side[v] = 1 - side[u]
                    queue.append(v)
                elif side[v] == side[u]:
                    return None
    side1 = [v for v in range(g.n) if side[v] == 0]
    side2 = [v for v in range(g.n) if side[v] == 1]
    return side1, side2


def to_bipartite(g: Graph, side1: Sequence[int]) -> BipartiteGraph:
    """Reindex g as a bipartite graph with the given vertices as part V1."""
    side1 = sorted(side1)
    s1 = set(side1)
    side2 = [v for v in range(g.n) if v not in s1]
    m1 = mask_of(side1)
    for u in side1:
        if g.adj[u] & m1:
            raise ValueError("side1 is not independent")
    m2 = mask_of(side2)
    for u in side2:
        if g.adj[u] & m2:
            raise ValueError("side2 is not independent")
    return _bipartite_from_split(g, side1, side2)


# ---------------------------------------------------------------------------
# Edge-list file I/O
#
# Format: first line "n"; bipartite files add a second header line "n1 n2"
# (the overlay part size is n - n1 - n2); then one edge "u v" per line with
# u < v, or "u v c" for colorings.  '#' starts a comment.


def _data_lines(path) -> Iterator[tuple[int, str]]:
    with open(path, "r", encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield no, line


def _parse_ints(line: str, no: int, want: int) -> list[int]:
    parts = line.split()
    if len(parts) != want:
        raise ParseError(f"expected {want} fields, got {len(parts)}", no)
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise ParseError(f"non-integer field in {line!r}", no) from None


def write_graph(g, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{g.n}\n")
        if isinstance(g, BipartiteGraph):
            fh.write(f"{g.n1} {g.n2}\n")
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")


def read_graph(path) -> Graph:
    lines = _data_lines(path)
    try:
        no, head = next(lines)
    except StopIteration:
        raise ParseError("empty file", 1) from None
    (n,) = _parse_ints(head, no, 1)
    edges = []
    for no, line in lines:
        u, v = _parse_ints(line, no, 2)
        if not 0 <= u < v < n:
            raise ParseError(f"edge ({u},{v}) violates 0 <= u < v < {n}", no)
        edges.append((u, v))
    return Graph(n, edges)


def read_bipartite(path) -> BipartiteGraph:
    lines = _data_lines(path)
    try:
        no, head = next(lines)
    except StopIteration:
        raise ParseError("empty file", 1) from None
    (n,) = _parse_ints(head, no, 1)
    try:
        no2, head2 = next(lines)
    except StopIteration:
        raise ParseError("missing part-size header", no + 1) from None
    n1, n2 = _parse_ints(head2, no2, 2)
    n0 = n - n1 - n2
    if n0 < 0:
        raise ParseError(f"part sizes {n1}+{n2} exceed n={n}", no2)
    edges = []
    for no3, line in lines:
        u, v = _parse_ints(line, no3, 2)
        if not 0 <= u < v < n:
            raise ParseError(f"edge ({u},{v}) violates 0 <= u < v < {n}", no3)
        edges.append((u, v))
    return BipartiteGraph(n1, n2, edges, n0=n0)


def write_coloring(col: EdgeColoring, path) -> None:
    g = col.graph
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{g.n}\n")
        if isinstance(g, BipartiteGraph):
            fh.write(f"{g.n1} {g.n2}\n")
        fh.write(f"# colors: {col.r}\n")
        for u, v in g.edges():
            fh.write(f"{u} {v} {col.color_of(u, v)}\n")


def read_coloring(path, bipartite: bool = False, r: int | None = None) -> EdgeColoring:
    lines = _data_lines(path)
    try:
        no, head = next(lines)
    except StopIteration:
        raise ParseError("empty file", 1) from None
    (n,) = _parse_ints(head, no, 1)
    n0 = n1 = n2 = 0
    if bipartite:
        no2, head2 = next(lines)
        n1, n2 = _parse_ints(head2, no2, 2)
        n0 = n - n1 - n2
        if n0 < 0:
            raise ParseError(f"part sizes {n1}+{n2} exceed n={n}", no2)
    edges = []
    colors = {}
    max_c = 0
    for no3, line in lines:
        u, v, c = _parse_ints(line, no3, 3)
        if not 0 <= u < v < n:
            raise ParseError(f"edge ({u},{v}) violates 0 <= u < v < {n}", no3)
        if c < 0:
            raise ParseError(f"negative color {c}", no3)
        edges.append((u, v))
        colors[(u, v)] = c
        max_c = max(max_c, c)
    host = BipartiteGraph(n1, n2, edges, n0=n0) if bipartite else Graph(n, edges)
    return EdgeColoring(host, colors, r if r is not None else max_c + 1)
