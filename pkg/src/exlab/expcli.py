"""Experiment orchestration, record persistence, and the command line.

An experiment names a module operation, a parameter map, a seed, and a
trial count.  Parameters are validated against the operation's
preconditions before anything runs; each trial then draws its own stream
derived from (seed, trial index), so trials are order-independent and a
record can be replayed bit-exactly.  Per-trial failures are recorded,
never thrown; the process exit code is 0 exactly when every trial met
its hard postcondition.

Records are JSON with an explicit schema version.  Witnesses are stored
as SHA-256 digests of a canonical JSON form covering the package's
result types, so replay comparisons are byte-exact without shipping
full graphs.  The report command renders one row per record, sorted by
module then operation, as JSON, CSV, or a markdown table.

Trials fan out to a process pool when EXLAB_THREADS is set above 1;
record assembly stays a single-writer aggregation keyed by trial index.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from . import bipfree, lll_embed, removal, rsgraph, setmap, weakseq
from .core import (
    BipartiteGraph,
    EdgeColoring,
    Failure,
    Graph,
    GuardError,
    KUniformHypergraph,
    RetryError,
    RngStream,
    complete_graph,
    hypercube,
    random_coloring,
    random_graph,
    read_graph,
)

SCHEMA_VERSION = 1
PRESETS = ("paper", "desk")


# ---------------------------------------------------------------------------
# Canonical serialization and digests


def canonical(obj):
    """JSON-safe, deterministic form of results, stats, and parameters.

    Fractions keep exact "p/q" form; sets are sorted by their serialized
    form; dataclass fields appear by name with callables skipped.
    """
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (list, tuple)):
        return [canonical(x) for x in obj]
    if isinstance(obj, (set, frozenset)):
        items = [canonical(x) for x in obj]
        return sorted(items, key=lambda x: json.dumps(x, sort_keys=True))
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            key = k if isinstance(k, str) else json.dumps(canonical(k))
            out[key] = canonical(v)
        return dict(sorted(out.items()))
    if isinstance(obj, BipartiteGraph):
        return {"type": "BipartiteGraph", "n0": obj.n0, "n1": obj.n1,
                "n2": obj.n2, "edges": [list(e) for e in obj.edges()]}
    if isinstance(obj, Graph):
        return {"type": "Graph", "n": obj.n,
                "edges": [list(e) for e in obj.edges()]}
    if isinstance(obj, KUniformHypergraph):
        return {"type": "KUniformHypergraph", "n": obj.n, "k": obj.k,
                "edges": sorted(sorted(e) for e in obj.edges)}
    if isinstance(obj, EdgeColoring):
        return {"type": "EdgeColoring", "graph": canonical(obj.graph),
                "r": obj.r, "colors": [[u, v, obj.color_of(u, v)]
                                       for u, v in obj.graph.edges()]}
    if isinstance(obj, lll_embed.DownClosedHypergraph):
        return {"type": "DownClosedHypergraph", "N": obj.N, "k": obj.k,
                "deleted": sorted(sorted(t) for t in obj.deleted)}
    if isinstance(obj, lll_embed.TargetHypergraph):
        return {"type": "TargetHypergraph", "n": obj.n,
                "edges": sorted(sorted(e) for e in obj.edges)}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {"type": type(obj).__name__}
        for f in dataclasses.fields(obj):
            value = getattr(obj, f.name)
            if callable(value):
                continue
            out[f.name] = canonical(value)
        return out
    raise TypeError(f"cannot canonicalize {type(obj).__name__}")


def digest(obj) -> str:
    blob = json.dumps(canonical(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Spec and record types


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: module operation, parameters, seed, trial count."""

    module: str
    operation: str
    params: dict
    seed: int = 0
    trials: int = 1
    preset: str = "desk"
    out: Optional[str] = None


@dataclass(frozen=True)
class ExperimentRecord:
    """Spec echo, per-trial outcomes, and aggregates; JSON round-trippable.

    ``trials`` holds JSON-native dicts only, so equality of serialized
    trial lists is the replay-determinism check.
    """

    schema_version: int
    spec: dict
    rng: dict
    trials: list
    aggregate: dict
    wall_clock: float

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "spec": self.spec,
                "rng": self.rng, "trials": self.trials,
                "aggregate": self.aggregate, "wall_clock": self.wall_clock}


def write_record(record: ExperimentRecord, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_record(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Operation registry

_REQUIRED = object()


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


@dataclass(frozen=True)
class OpDef:
    """Runner plus parameter schema {name: (cast, default)} and checks."""

    runner: Callable
    schema: dict
    check: Optional[Callable] = None
    key_name: Optional[str] = None


def _resolve_params(opdef: OpDef, params: dict) -> dict:
    out = {}
    for name, value in params.items():
        if name not in opdef.schema:
            raise GuardError(f"unknown parameter {name!r}")
    for name, (cast, default) in opdef.schema.items():
        if name in params and params[name] is not None:
            try:
                out[name] = cast(params[name])
            except (TypeError, ValueError) as exc:
                raise GuardError(f"parameter {name!r}: {exc}") from None
        elif default is _REQUIRED:
            raise GuardError(f"missing required parameter {name!r}")
        else:
            out[name] = default
    if opdef.check is not None:
        opdef.check(out)
    return out


def _positive(params: dict, *names: str) -> None:
    for name in names:
        value = params.get(name)
        if value is not None and value < 1:
            raise GuardError(f"parameter {name!r} must be >= 1, got {value}")


def _graph_source(params: dict) -> None:
    if params.get("input") is None:
        if params.get("n") is None or params.get("p") is None:
            raise GuardError("need --input FILE or --random N P")
        _positive(params, "n")
        if not 0 < params["p"] <= 1:
            raise GuardError(f"edge probability {params['p']} outside (0, 1]")
    elif params.get("n") is not None or params.get("p") is not None:
        raise GuardError("give either --input or --random, not both")


def _host_graph(params: dict, rng: RngStream) -> Graph:
    if params.get("input") is not None:
        return read_graph(params["input"])
    return random_graph(params["n"], params["p"], rng.derive("host"))


# --- setmap ----------------------------------------------------------------

_SETMAP_VARIANTS = ("full_factorial", "lexicographic", "caro2", "caro3")


def _setmap_build(params: dict):
    variant = params["variant"]
    if variant.startswith("caro"):
        return setmap.caro_map(params["n"], int(variant[-1]))
    return setmap.eh_map(params["n"], params["k"], variant)


def _setmap_check(params: dict) -> None:
    if params["variant"] not in _SETMAP_VARIANTS:
        raise GuardError(f"unknown variant {params['variant']!r}")
    _positive(params, "k", "n", "size", "budget")
    if params["variant"].startswith("caro"):
        if params["n"] < 2:
            raise GuardError("caro mappings need side n >= 2")
    elif params["k"] < 2 or params["n"] < 2:
        raise GuardError("need n >= 2 and k >= 2")


def _setmap_oracle_check(params: dict) -> None:
    _setmap_check(params)
    if params["mode"] not in ("disjoint", "not_subset"):
        raise GuardError(f"unknown oracle mode {params['mode']!r}")
    dim = int(params["variant"][-1]) if params["variant"].startswith("caro") \
        else params["k"]
    ground = params["n"] ** dim
    if params["budget"] is None and ground > setmap.ORACLE_EXHAUSTIVE_LIMIT:
        raise GuardError(f"ground set of {ground} points needs a budget")


def _run_setmap_construct(params, rng, preset):
    f = _setmap_build(params)
    stats = {"kind": f.kind, "ground": len(f.points), "k": f.k, "l": f.l,
             "overlap": f.overlap, "side": f.side, "key": len(f.points)}
    return True, "mapping", f, stats


def _run_setmap_violate(params, rng, preset):
    f = _setmap_build(params)
    size = params["size"]
    if size is None:
        # default: just above the guaranteed free-set threshold
        size = f.k * f.k * f.side + 1 if f.kind == "eh" \
            else len(f.points) - 2
    size = min(size, len(f.points))
    region = rng.sample(sorted(f.points), size)
    finder = setmap.eh_violator if f.kind == "eh" else setmap.caro_violator
    vio = finder(f, region)
    stats = {"size": size, "found": vio is not None, "key": int(vio is not None)}
    if vio is None:
        return True, "none", None, stats
    ok = setmap.verify_violation(f, frozenset(region), vio)
    return ok, "violation", vio, stats


def _run_setmap_oracle(params, rng, preset):
    f = _setmap_build(params)
    res = setmap.free_set_oracle(f, params["mode"], params["budget"])
    stats = {"size": res.size, "upper": res.upper, "exact": res.exact,
             "nodes": res.nodes, "key": res.size}
    return True, "exact" if res.exact else "bracket", res, stats


# --- bipfree ---------------------------------------------------------------


def _bipfree_check(params: dict) -> None:
    if params["r"] < 2:
        raise GuardError(f"pattern order r must be >= 2, got {params['r']}")
    _graph_source(params)


def _run_bipfree_count(params, rng, preset):
    G = _host_graph(params, rng)
    count = bipfree.count_pattern(G, bipfree.K_rr(params["r"]))
    ok = params["r"] != 2 or count <= 2 * G.m * G.m
    stats = {"n": G.n, "m": G.m, "count": count, "key": count}
    return ok, "count", None, stats


def _run_bipfree_extract(params, rng, preset):
    G = _host_graph(params, rng)
    res = bipfree.extract_free(G, bipfree.K_rr(params["r"]),
                               rng.derive("extract"), params["retry_cap"])
    size = res.subgraph.m
    floor = res.target_size
    ok = size >= floor
    stats = {"m": G.m, "size": size, "floor": floor,
             "rounds": res.trials_used,
             "key": size / max(floor, 1)}
    return ok, "extracted", res, stats


def _bipfree_tight_check(params: dict) -> None:
    if params["r"] < 2 or params["s"] < params["r"]:
        raise GuardError("need 2 <= r <= s")
    _positive(params, "m", "budget")


def _run_bipfree_tight(params, rng, preset):
    inst = bipfree.tight_instance(params["r"], params["s"], params["m"])
    res = bipfree.zarankiewicz_oracle(inst, budget=params["budget"])
    ok = res.size <= inst.kst_bound()
    stats = {"m": params["m"], "size": res.size, "upper": res.upper,
             "bound": inst.kst_bound(), "exact": res.exact,
             "nodes": res.nodes, "key": res.size}
    return ok, "exact" if res.exact else "bracket", res, stats


def _bipfree_kcheck_check(params: dict) -> None:
    if params["k"] < 2 or params["r"] < 2 or params["n"] < 2:
        raise GuardError("need k >= 2, r >= 2, n >= 2")
    if not 0 < params["p"] <= 1:
        raise GuardError(f"edge keep probability {params['p']} outside (0, 1]")


def _run_bipfree_kcheck(params, rng, preset):
    inst = bipfree.kpartite_instance(params["k"], params["r"], params["n"])
    H = inst.hypergraph
    if params["p"] < 1:
        sub = rng.derive("sub")
        kept = [e for e in sorted(H.edges, key=sorted)
                if sub.random() < params["p"]]
        H = KUniformHypergraph(H.n, H.k, kept)
    chk = bipfree.kpartite_count_check(H, inst.parts, params["r"])
    stats = {"count": chk.count, "bound": canonical(chk.bound),
             "proof_bound": canonical(chk.proof_bound),
             "passed": chk.passed, "proof_passed": chk.proof_passed,
             "key": chk.count}
    return chk.passed, "checked", chk, stats


# --- embed -----------------------------------------------------------------


def _embed_lemma_check(params: dict) -> None:
    _positive(params, "N", "k", "d", "round_cap")
    if not 0 <= params["delta"] < 1:
        raise GuardError(f"deletion fraction {params['delta']} outside [0, 1)")


def _run_embed_lemma(params, rng, preset):
    H = lll_embed.neighborhood_hypergraph(hypercube(params["d"]))
    G = lll_embed.random_dense_dch(params["N"], params["k"], params["delta"],
                                   rng.derive("host"))
    res = lll_embed.resample_embed(H, G, rng.derive("embed"),
                                   params["round_cap"])
    if isinstance(res, Failure):
        return False, f"failure:{res.stage}", res, {"reason": res.reason,
                                                    "key": 0}
    return True, "embedded", res, {"rounds": res.rounds, "key": res.rounds}


def _embed_drc_check(params: dict) -> None:
    _positive(params, "N", "k", "n", "retry_cap")
    if not 0 < params["p"] <= 1:
        raise GuardError(f"edge probability {params['p']} outside (0, 1]")
    if params["eps"] <= 0 or params["b"] <= 0:
        raise GuardError("eps and b must be positive")
    floor = params["eps"] ** -params["k"] * max(params["b"] * params["n"],
                                                4 * params["k"])
    if params["N"] < floor:
        raise GuardError(f"host side {params['N']} below eps^-k * "
                         f"max(bn, 4k) = {floor}")


def _run_embed_drc(params, rng, preset):
    N = params["N"]
    host_rng = rng.derive("host")
    edges = [(u, N + v) for u in range(N) for v in range(N)
             if host_rng.random() < params["p"]]
    B = BipartiteGraph(N, N, edges)
    dp = lll_embed.DrcParams(params["eps"], params["k"], params["b"],
                             params["n"])
    res = lll_embed.drc_subset(B, dp, rng.derive("drc"), params["retry_cap"])
    stats = {"u_size": len(res.U), "tries": res.tries,
             "bad_k_sets": res.bad_k_sets, "key": len(res.U)}
    return True, "subset", res, stats


def _run_embed_pipeline(params, rng, preset):
    col = random_coloring(complete_graph(params["N"]), 2, rng.derive("color"))
    res = lll_embed.bip_ramsey_pipeline(col, hypercube(params["d"]),
                                        rng.derive("pipe"),
                                        params["drc_retry"],
                                        params["round_cap"])
    if isinstance(res, Failure):
        return False, f"failure:{res.stage}", res, {"reason": res.reason,
                                                    "key": 0}
    stats = {"color": res.color, "drc_tries": res.drc_tries,
             "rounds": res.resample_rounds, "key": res.resample_rounds}
    return True, "embedded", res, stats


def _run_embed_cube(params, rng, preset):
    H = lll_embed.neighborhood_hypergraph(hypercube(params["d"]))
    stats = {"n": H.n, "edges": len(H.edges), "key": len(H.edges)}
    return True, "target", H, stats


# --- weakseq ---------------------------------------------------------------


def _weakseq_check(params: dict) -> None:
    _positive(params, "n", "r", "t", "retry_cap")
    p = params.get("p")
    if p is not None and not 0 < p <= 1:
        raise GuardError(f"edge probability {p} outside (0, 1]")


def _run_weakseq_pipeline(params, rng, preset):
    G = _host_graph(params, rng)
    t = params["t"] or weakseq.regime2_order(G.n, G.density(), params["r"])
    res = weakseq.weak_sequence_pipeline(G, params["r"], t,
                                         rng.derive("pipe"),
                                         params["retry_cap"])
    if isinstance(res, Failure):
        return False, f"failure:{res.stage}", res, {"reason": res.reason,
                                                    "key": 0}
    return True, "sequence", res, {"t": res.t, "r": res.r, "key": res.t}


def _run_weakseq_verify(params, rng, preset):
    G = _host_graph(params, rng)
    t = params["t"] or weakseq.regime2_order(G.n, G.density(), params["r"])
    res = weakseq.weak_sequence_pipeline(G, params["r"], t,
                                         rng.derive("pipe"),
                                         params["retry_cap"])
    if isinstance(res, Failure):
        return False, f"failure:{res.stage}", res, {"reason": res.reason,
                                                    "key": 0}
    ok, viol = weakseq.verify_sequence(G, res)
    stats = {"t": res.t, "violation": canonical(viol), "key": res.t}
    return ok, "verified" if ok else "violation", res, stats


def _run_weakseq_minor(params, rng, preset):
    G = _host_graph(params, rng)
    constants = weakseq.load_preset(preset)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = weakseq.minor_pipeline(G, params["r"], params["t"],
                                     rng.derive("pipe"), constants,
                                     bool(params["diameter_aware"]),
                                     params["retry_cap"])
    if isinstance(res, Failure):
        return False, f"failure:{res.stage}", res, {"reason": res.reason,
                                                    "key": 0}
    ok, viol = weakseq.verify_minor(G, res)
    stats = {"t": len(res.branch_sets), "size_cap": res.size_cap,
             "diameter_cap": res.diameter_cap, "key": len(res.branch_sets)}
    if not ok:
        stats["violation"] = canonical(viol)
    return ok, "minor", res, stats


def _weakseq_oracle_check(params: dict) -> None:
    _weakseq_check(params)
    if params["n"] is not None and params["n"] > weakseq.ORACLE_MAX_N:
        raise GuardError(f"oracle limited to n <= {weakseq.ORACLE_MAX_N}")


def _run_weakseq_oracle(params, rng, preset):
    G = _host_graph(params, rng)
    best = weakseq.max_weak_sequence_order(G, params["r"])
    return True, "oracle", None, {"best": best, "key": best}


# --- rsgraph ---------------------------------------------------------------


def _run_rsgraph_behrend(params, rng, preset):
    res = rsgraph.behrend_set(params["N"])
    stats = dict(res.stats or {})
    stats.update({"size": len(res.elements), "key": len(res.elements)})
    return True, "ap_free", res, stats


def _rsgraph_construct_check(params: dict) -> None:
    _positive(params, "N", "chunk")
    if params["N"] < 15:
        raise GuardError("construction needs N >= 15")


def _run_rsgraph_construct(params, rng, preset):
    dec = rsgraph.rs_from_behrend(params["N"], params.get("chunk"))
    stats = {"n": dec.n, "t": dec.t, "m": dec.graph.m,
             "spanning": dec.spanning, "key": dec.t}
    return True, "decomposition", dec, stats


def _run_rsgraph_double(params, rng, preset):
    dec = rsgraph.rs_from_behrend(params["N"], params.get("chunk"))
    dd = rsgraph.bipartite_double(dec.graph, dec)
    stats = {"n": dd.n, "t": dd.t, "m": dd.graph.m, "key": dd.t}
    return True, "doubled", dd, stats


def _run_rsgraph_decompose(params, rng, preset):
    g = complete_graph(params["N"])
    res = rsgraph.greedy_decompose(g, params["n"], params.get("t"),
                                   params.get("budget"))
    if isinstance(res, Failure):
        return False, f"failure:{res.stage}", res, {"reason": res.reason,
                                                    "key": 0}
    if isinstance(res, rsgraph.FalsifyingColoring):
        stats = {"red_edges": len(res.red), "key": 0}
        return True, "falsified", res, stats
    return True, "decomposition", res, {"t": res.t, "n": res.n,
                                        "key": res.t}


def _rsgraph_arrow_check(params: dict) -> None:
    _positive(params, "N", "t", "n")
    if params["mode"] not in ("exhaustive", "theorem"):
        raise GuardError(f"unknown mode {params['mode']!r}")
    if params["mode"] == "theorem" and params["N"] < 15:
        raise GuardError("theorem mode builds a construction; needs N >= 15")


def _run_rsgraph_arrow(params, rng, preset):
    if params["mode"] == "theorem":
        dec = rsgraph.rs_from_behrend(params["N"])
        dd = rsgraph.bipartite_double(dec.graph, dec)
        res = rsgraph.arrow_check(dd.graph, params["t"], params["n"],
                                  "theorem", dd)
    else:
        g = complete_graph(params["N"])
        res = rsgraph.arrow_check(g, params["t"], params["n"], "exhaustive")
    ok = res.verdict != "unknown"
    stats = dict(res.stats or {})
    stats["key"] = int(res.verdict == "arrows")
    return ok, res.verdict, res, stats


# --- removal ---------------------------------------------------------------


def _removal_check(params: dict) -> None:
    if params.get("grid_file") is None:
        if params.get("N") is None or params.get("r") is None:
            raise GuardError("need --grid-file FILE or --random-grid N R")
        _positive(params, "N", "r")
    elif params.get("N") is not None or params.get("r") is not None:
        raise GuardError("give either --grid-file or --random-grid, not both")


def _grid_input(params: dict, rng: RngStream) -> removal.GridColoring:
    if params.get("grid_file") is not None:
        return removal.read_grid(params["grid_file"])
    return removal.random_grid(params["N"], params["r"], rng.derive("grid"))


def _run_removal_census(params, rng, preset):
    gc = _grid_input(params, rng)
    per, total = removal.triangle_census(removal.grid_cover(gc))
    stats = {"N": gc.N, "r": gc.r, "per_color": list(per), "total": total,
             "key": total}
    return True, "census", None, stats


def _run_removal_step(params, rng, preset):
    gc = _grid_input(params, rng)
    sp = removal.sparse_pair_step(removal.grid_cover(gc))
    stats = {"N": gc.N, "color": sp.color, "pair_size": len(sp.v1),
             "edges": sp.edges, "key": sp.edges}
    return True, "pair", sp, stats


def _run_removal_iterate(params, rng, preset):
    gc = _grid_input(params, rng)
    tr = removal.removal_iterate(removal.grid_cover(gc))
    stats = {"N": gc.N, "verdict": tr.verdict, "levels": len(tr.levels),
             "bound_met": tr.bound_met, "census": tr.stats["census"],
             "key": len(tr.levels)}
    return True, tr.verdict, tr, stats


def _run_removal_diamond(params, rng, preset):
    gc = _grid_input(params, rng)
    dia = removal.diamond_find(removal.grid_cover(gc))
    stats = {"N": gc.N, "found": dia is not None,
             "key": int(dia is not None)}
    return True, "diamond" if dia else "none", dia, stats


def _run_removal_grid(params, rng, preset):
    gc = _grid_input(params, rng)
    corner = removal.grid_pipeline(gc)
    stats = {"N": gc.N, "found": corner is not None,
             "key": int(corner is not None)}
    return True, "corner" if corner else "none", corner, stats


# --- registry ---------------------------------------------------------------

_SETMAP_BASE = {"k": (int, 2), "n": (int, _REQUIRED),
                "variant": (str, "full_factorial")}
_GRAPH_SRC = {"n": (int, None), "p": (float, None), "input": (str, None)}
_GRID_SRC = {"grid_file": (str, None), "N": (int, None), "r": (int, None)}

OPS = {
    ("setmap", "construct"): OpDef(_run_setmap_construct, dict(_SETMAP_BASE),
                                   _setmap_check, "ground"),
    ("setmap", "violate"): OpDef(_run_setmap_violate,
                                 {**_SETMAP_BASE, "size": (int, None)},
                                 _setmap_check, "found"),
    ("setmap", "oracle"): OpDef(_run_setmap_oracle,
                                {**_SETMAP_BASE, "mode": (str, "disjoint"),
                                 "budget": (int, None)},
                                _setmap_oracle_check, "size"),
    ("bipfree", "count"): OpDef(_run_bipfree_count,
                                {**_GRAPH_SRC, "r": (int, 2)},
                                _bipfree_check, "count"),
    ("bipfree", "extract"): OpDef(_run_bipfree_extract,
                                  {**_GRAPH_SRC, "r": (int, 2),
                                   "retry_cap": (int, 400)},
                                  _bipfree_check, "size_over_floor"),
    ("bipfree", "tight"): OpDef(_run_bipfree_tight,
                                {"r": (int, 2), "s": (int, 2),
                                 "m": (int, _REQUIRED),
                                 "budget": (int, None)},
                                _bipfree_tight_check, "size"),
    ("bipfree", "kcheck"): OpDef(_run_bipfree_kcheck,
                                 {"k": (int, 2), "r": (int, 2),
                                  "n": (int, 2), "p": (float, 1.0)},
                                 _bipfree_kcheck_check, "count"),
    ("embed", "lemma"): OpDef(_run_embed_lemma,
                              {"N": (int, 128), "k": (int, 3),
                               "delta": (_frac, Fraction(9, 1000)),
                               "d": (int, 3), "round_cap": (int, 10000)},
                              _embed_lemma_check, "rounds"),
    ("embed", "drc"): OpDef(_run_embed_drc,
                            {"N": (int, 32), "p": (float, 0.75),
                             "eps": (_frac, Fraction(1, 2)),
                             "k": (int, 2), "b": (_frac, Fraction(1, 1)),
                             "n": (int, 2), "retry_cap": (int, 200)},
                            _embed_drc_check, "u_size"),
    ("embed", "pipeline"): OpDef(_run_embed_pipeline,
                                 {"N": (int, 512), "d": (int, 3),
                                  "drc_retry": (int, 200),
                                  "round_cap": (int, 10000)},
                                 lambda p: _positive(p, "N", "d"),
                                 "rounds"),
    ("embed", "cube"): OpDef(_run_embed_cube, {"d": (int, 3)},
                             lambda p: _positive(p, "d"), "edges"),
    ("weakseq", "pipeline"): OpDef(_run_weakseq_pipeline,
                                   {**_GRAPH_SRC, "r": (int, 4),
                                    "t": (int, None),
                                    "retry_cap": (int, 200)},
                                   lambda p: (_weakseq_check(p),
                                              _graph_source(p)),
                                   "t"),
    ("weakseq", "verify"): OpDef(_run_weakseq_verify,
                                 {**_GRAPH_SRC, "r": (int, 4),
                                  "t": (int, None),
                                  "retry_cap": (int, 200)},
                                 lambda p: (_weakseq_check(p),
                                            _graph_source(p)),
                                 "t"),
    ("weakseq", "minor"): OpDef(_run_weakseq_minor,
                                {**_GRAPH_SRC, "r": (int, 2),
                                 "t": (int, 4),
                                 "diameter_aware": (int, 1),
                                 "retry_cap": (int, 50)},
                                lambda p: (_weakseq_check(p),
                                           _graph_source(p)),
                                "t"),
    ("weakseq", "oracle"): OpDef(_run_weakseq_oracle,
                                 {**_GRAPH_SRC, "r": (int, 2)},
                                 lambda p: (_weakseq_oracle_check(p),
                                            _graph_source(p)),
                                 "best"),
    ("rsgraph", "behrend"): OpDef(_run_rsgraph_behrend,
                                  {"N": (int, _REQUIRED)},
                                  lambda p: _positive(p, "N"), "size"),
    ("rsgraph", "construct"): OpDef(_run_rsgraph_construct,
                                    {"N": (int, _REQUIRED),
                                     "chunk": (int, None)},
                                    _rsgraph_construct_check, "t"),
    ("rsgraph", "double"): OpDef(_run_rsgraph_double,
                                 {"N": (int, _REQUIRED),
                                  "chunk": (int, None)},
                                 _rsgraph_construct_check, "t"),
    ("rsgraph", "decompose"): OpDef(_run_rsgraph_decompose,
                                    {"N": (int, 4), "n": (int, _REQUIRED),
                                     "t": (int, None),
                                     "budget": (int, None)},
                                    lambda p: _positive(p, "N", "n", "t",
                                                        "budget"),
                                    "t"),
    ("rsgraph", "arrow"): OpDef(_run_rsgraph_arrow,
                                {"N": (int, 4), "t": (int, _REQUIRED),
                                 "n": (int, _REQUIRED),
                                 "mode": (str, "exhaustive")},
                                _rsgraph_arrow_check, "arrows"),
    ("removal", "census"): OpDef(_run_removal_census, dict(_GRID_SRC),
                                 _removal_check, "total"),
    ("removal", "step"): OpDef(_run_removal_step, dict(_GRID_SRC),
                               _removal_check, "edges"),
    ("removal", "iterate"): OpDef(_run_removal_iterate, dict(_GRID_SRC),
                                  _removal_check, "levels"),
    ("removal", "diamond"): OpDef(_run_removal_diamond, dict(_GRID_SRC),
                                  _removal_check, "found"),
    ("removal", "grid"): OpDef(_run_removal_grid, dict(_GRID_SRC),
                               _removal_check, "found"),
}

MODULES = tuple(sorted({m for m, _ in OPS}))


def validate_spec(spec: ExperimentSpec) -> dict:
    """Resolve defaults and check preconditions; GuardError on any defect."""
    key = (spec.module, spec.operation)
    if key not in OPS:
        ops = sorted(op for m, op in OPS if m == spec.module)
        if ops:
            raise GuardError(f"unknown operation {spec.operation!r} for "
                             f"{spec.module}; choose from {ops}")
        raise GuardError(f"unknown module {spec.module!r}; choose from "
                         f"{list(MODULES)}")
    if spec.trials < 1:
        raise GuardError(f"trial count must be >= 1, got {spec.trials}")
    if spec.preset not in PRESETS:
        raise GuardError(f"unknown preset {spec.preset!r}")
    return _resolve_params(OPS[key], spec.params)


# ---------------------------------------------------------------------------
# Execution


def _run_one_trial(module: str, op: str, params: dict, seed: int,
                   preset: str, index: int) -> dict:
    rng = RngStream(seed).derive("trial", index)
    try:
        ok, outcome, witness, stats = OPS[(module, op)].runner(params, rng,
                                                               preset)
    except (GuardError, RetryError, ValueError, AssertionError) as exc:
        ok, outcome, witness = False, f"error:{type(exc).__name__}", None
        stats = {"error": str(exc), "key": 0}
    return {"trial": index, "ok": bool(ok), "outcome": outcome,
            "witness": digest(witness) if witness is not None else None,
            "stats": canonical(stats)}


def _pool_trial(args) -> dict:
    return _run_one_trial(*args)


def _thread_count() -> int:
    raw = os.environ.get("EXLAB_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run(spec: ExperimentSpec) -> ExperimentRecord:
    """Validate, execute all trials, aggregate, and write the record."""
    params = validate_spec(spec)
    t0 = time.perf_counter()
    jobs = [(spec.module, spec.operation, params, spec.seed, spec.preset, i)
            for i in range(spec.trials)]
    workers = _thread_count()
    if workers > 1 and spec.trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_pool_trial, jobs))
    else:
        trials = [_run_one_trial(*job) for job in jobs]
    trials.sort(key=lambda t: t["trial"])
    successes = sum(1 for t in trials if t["ok"])
    keys = [t["stats"]["key"] for t in trials
            if isinstance(t["stats"], dict)
            and isinstance(t["stats"].get("key"), (int, float))]
    aggregate = {"trials": spec.trials, "successes": successes,
                 "success_rate": successes / spec.trials,
                 "key_name": OPS[(spec.module, spec.operation)].key_name}
    if keys:
        aggregate.update({"key_mean": sum(keys) / len(keys),
                          "key_min": min(keys), "key_max": max(keys)})
    record = ExperimentRecord(
        schema_version=SCHEMA_VERSION,
        spec={"module": spec.module, "operation": spec.operation,
              "params": canonical(params), "seed": spec.seed,
              "trials": spec.trials, "preset": spec.preset},
        rng={"algorithm": RngStream.ALGORITHM, "seed": spec.seed},
        trials=trials,
        aggregate=aggregate,
        wall_clock=time.perf_counter() - t0)
    if spec.out:
        write_record(record, spec.out)
    return record


def replay(path) -> tuple[bool, ExperimentRecord]:
    """Re-run a record's spec and compare per-trial outcomes byte-exactly."""
    rec = read_record(path)
    version = rec.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"schema version mismatch in {path}: "
                         f"{version} != {SCHEMA_VERSION}")
    echo = rec["spec"]
    spec = ExperimentSpec(module=echo["module"], operation=echo["operation"],
                          params=echo["params"], seed=echo["seed"],
                          trials=echo["trials"], preset=echo["preset"])
    fresh = run(spec)
    match = (json.dumps(fresh.trials, sort_keys=True)
             == json.dumps(rec["trials"], sort_keys=True))
    return match, fresh


# ---------------------------------------------------------------------------
# Reporting

_REPORT_COLUMNS = ("module", "op", "params", "trials", "successes",
                   "success_rate", "key_name", "key_mean", "key_min",
                   "key_max")


def _record_row(rec: dict) -> dict:
    spec = rec["spec"]
    agg = rec["aggregate"]
    params = " ".join(f"{k}={v}" for k, v in sorted(spec["params"].items())
                      if v is not None)
    return {"module": spec["module"], "op": spec["operation"],
            "params": params, "trials": agg["trials"],
            "successes": agg["successes"],
            "success_rate": agg["success_rate"],
            "key_name": agg.get("key_name") or "",
            "key_mean": agg.get("key_mean", ""),
            "key_min": agg.get("key_min", ""),
            "key_max": agg.get("key_max", "")}


def report_rows(records) -> list:
    """One row per record dict, sorted by module then operation."""
    rows = []
    for rec in records:
        version = rec.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"schema version mismatch: {version} != "
                             f"{SCHEMA_VERSION}")
        rows.append(_record_row(rec))
    rows.sort(key=lambda r: (r["module"], r["op"], r["params"]))
    return rows


def render_report(rows, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=2, sort_keys=True)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=_REPORT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "md":
        lines = ["| " + " | ".join(_REPORT_COLUMNS) + " |",
                 "|" + "|".join(" --- " for _ in _REPORT_COLUMNS) + "|"]
        for row in rows:
            lines.append("| " + " | ".join(str(row[c]) for c in
                                           _REPORT_COLUMNS) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def report(paths, fmt: str = "md") -> str:
    """Render a summary table for stored records; flags version mismatches."""
    records = []
    for path in paths:
        rec = read_record(path)
        if rec.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"schema version mismatch in {path}: "
                             f"{rec.get('schema_version')} != "
                             f"{SCHEMA_VERSION}")
        records.append(rec)
    return render_report(report_rows(records), fmt)


# ---------------------------------------------------------------------------
# Command line


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=1)
    parser.add_argument("--preset", choices=PRESETS, default="desk")
    parser.add_argument("--out", help="record path (JSON)")
    parser.add_argument("--format", choices=("json", "csv"), default="json",
                        help="stdout summary format")
    parser.add_argument("--dry-run", action="store_true",
                        help="validate and print resolved parameters only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exlab",
        description="Randomized extremal-combinatorics constructions with "
                    "independent verification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("setmap", help="set mappings and free-set violations")
    p.add_argument("--mode", dest="op", required=True,
                   choices=("construct", "violate", "oracle"))
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--variant", choices=_SETMAP_VARIANTS)
    p.add_argument("--size", type=int, help="sampled region size")
    p.add_argument("--oracle-mode", dest="mode",
                   choices=("disjoint", "not_subset"))
    p.add_argument("--budget", type=int)
    _add_common(p)

    p = sub.add_parser("bipfree", help="pattern counting and free extraction")
    p.add_argument("--op", required=True,
                   choices=("count", "extract", "tight", "kcheck"))
    p.add_argument("--r", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int, help="edge count for tight instances")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--input", help="edge-list graph file")
    p.add_argument("--random", nargs=2, metavar=("N", "P"),
                   help="random host G(N, P)")
    p.add_argument("--budget", type=int)
    p.add_argument("--retry-cap", type=int)
    _add_common(p)

    p = sub.add_parser("embed", help="resampled embeddings and Ramsey copies")
    p.add_argument("--op", required=True,
                   choices=("lemma", "drc", "pipeline", "cube"))
    p.add_argument("--N", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--delta", help="host deletion fraction, e.g. 9/1000")
    p.add_argument("--d", type=int, help="hypercube dimension")
    p.add_argument("--eps")
    p.add_argument("--b")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--round-cap", type=int)
    p.add_argument("--drc-retry", type=int)
    p.add_argument("--retry-cap", type=int)
    _add_common(p)

    p = sub.add_parser("weakseq", help="weak sequences and clique minors")
    p.add_argument("--op", required=True,
                   choices=("pipeline", "minor", "verify", "oracle"))
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--r", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--input", help="edge-list graph file")
    p.add_argument("--retry-cap", type=int)
    _add_common(p)

    p = sub.add_parser("rsgraph", help="AP-free sets and induced matchings")
    p.add_argument("--op", required=True,
                   choices=("behrend", "construct", "double", "decompose",
                            "arrow"))
    p.add_argument("--N", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--chunk", type=int)
    p.add_argument("--mode", choices=("exhaustive", "theorem"))
    p.add_argument("--budget", type=int)
    _add_common(p)

    p = sub.add_parser("removal", help="triangle covers and grid corners")
    p.add_argument("--op", required=True,
                   choices=("census", "step", "iterate", "diamond", "grid"))
    p.add_argument("--grid-file")
    p.add_argument("--random-grid", nargs=2, type=int, metavar=("N", "R"))
    _add_common(p)

    p = sub.add_parser("run", help="execute a JSON experiment spec")
    p.add_argument("spec", help="spec file path")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--dry-run", action="store_true")

    p = sub.add_parser("replay", help="re-run a record and compare trials")
    p.add_argument("record", help="record file path")

    p = sub.add_parser("report", help="summarize stored records")
    p.add_argument("records", nargs="+", help="record file paths")
    p.add_argument("--format", choices=("json", "csv", "md"), default="md")
    p.add_argument("--out")
    return parser


def _collect_params(args, names) -> dict:
    params = {}
    for name in names:
        value = getattr(args, name.replace("-", "_"), None)
        if value is not None:
            params[name] = value
    return params


_MODULE_FLAGS = {
    "setmap": ("k", "n", "variant", "size", "mode", "budget"),
    "bipfree": ("r", "s", "k", "m", "n", "p", "input", "budget",
                "retry_cap"),
    "embed": ("N", "k", "delta", "d", "eps", "b", "n", "p", "round_cap",
              "drc_retry", "retry_cap"),
    "weakseq": ("n", "p", "r", "t", "input", "retry_cap"),
    "rsgraph": ("N", "n", "t", "chunk", "mode", "budget"),
    "removal": ("grid_file",),
}


def _spec_from_args(args) -> ExperimentSpec:
    module = args.command
    params = _collect_params(args, _MODULE_FLAGS[module])
    if module == "bipfree" and getattr(args, "random", None):
        params["n"] = int(args.random[0])
        params["p"] = float(args.random[1])
    if module == "removal" and getattr(args, "random_grid", None):
        params["N"], params["r"] = args.random_grid
    return ExperimentSpec(module=module, operation=args.op, params=params,
                          seed=args.seed, trials=args.trials,
                          preset=args.preset, out=args.out)


def _spec_from_file(path, out=None) -> ExperimentSpec:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    op = data.get("operation", data.get("op"))
    if not isinstance(data.get("module"), str) or not isinstance(op, str):
        raise GuardError(f"spec file {path} needs 'module' and 'operation'")
    return ExperimentSpec(module=data["module"], operation=op,
                          params=dict(data.get("params", {})),
                          seed=int(data.get("seed", 0)),
                          trials=int(data.get("trials", 1)),
                          preset=data.get("preset", "desk"),
                          out=out if out is not None else data.get("out"))


def _execute_spec(spec: ExperimentSpec, fmt: str, dry_run: bool) -> int:
    if dry_run:
        resolved = validate_spec(spec)
        print(json.dumps({"module": spec.module, "operation": spec.operation,
                          "params": canonical(resolved), "seed": spec.seed,
                          "trials": spec.trials, "preset": spec.preset},
                         indent=2, sort_keys=True))
        return 0
    record = run(spec)
    print(render_report([_record_row(record.to_dict())],
                        "json" if fmt == "json" else "csv"), end="")
    if fmt == "json":
        print()
    if spec.out:
        print(f"record written to {spec.out}", file=sys.stderr)
    return 0 if all(t["ok"] for t in record.trials) else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in _MODULE_FLAGS:
            return _execute_spec(_spec_from_args(args), args.format,
                                 args.dry_run)
        if args.command == "run":
            spec = _spec_from_file(args.spec, args.out)
            return _execute_spec(spec, args.format, args.dry_run)
        if args.command == "replay":
            match, fresh = replay(args.record)
            print(json.dumps({"match": match,
                              "successes": fresh.aggregate["successes"],
                              "trials": fresh.aggregate["trials"]},
                             sort_keys=True))
            return 0 if match and all(t["ok"] for t in fresh.trials) else 1
        if args.command == "report":
            text = report(args.records, args.format)
            print(text, end="" if text.endswith("\n") else "\n")
            if args.out:
                with open(args.out, "w", encoding="utf-8") as fh:
                    fh.write(text)
            return 0
    except (GuardError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
