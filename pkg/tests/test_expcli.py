"""Orchestration tests: canonical forms, records, replay, reports, CLI."""

import json
from fractions import Fraction

import pytest

from exlab import expcli, removal, setmap
from exlab.core import (
    BipartiteGraph,
    EdgeColoring,
    Graph,
    GuardError,
    KUniformHypergraph,
)
from exlab.expcli import ExperimentSpec


# ---------------------------------------------------------------------------
# Canonical serialization


def test_canonical_primitives_pass_through():
    assert expcli.canonical(None) is None
    assert expcli.canonical(3) == 3
    assert expcli.canonical(0.5) == 0.5
    assert expcli.canonical("x") == "x"
    assert expcli.canonical(True) is True


def test_canonical_fraction_is_exact_string():
    assert expcli.canonical(Fraction(9, 1000)) == "9/1000"
    assert expcli.canonical(Fraction(-1, 3)) == "-1/3"
    assert expcli.canonical(Fraction(4)) == "4/1"


def test_canonical_sets_and_dicts_are_ordered():
    assert expcli.canonical(frozenset({3, 1, 2})) == [1, 2, 3]
    out = expcli.canonical({"b": 1, "a": frozenset({(2, 1), (1, 2)})})
    assert list(out) == ["a", "b"]
    assert out["a"] == [[1, 2], [2, 1]]
    # non-string keys serialize deterministically
    assert expcli.canonical({(1, 2): "x"}) == {"[1, 2]": "x"}


def test_canonical_graphs_and_colorings():
    g = Graph(3, [(0, 1), (1, 2)])
    cg = expcli.canonical(g)
    assert cg == {"type": "Graph", "n": 3, "edges": [[0, 1], [1, 2]]}
    b = BipartiteGraph(2, 2, [(0, 2), (1, 3)])
    cb = expcli.canonical(b)
    assert cb["type"] == "BipartiteGraph" and cb["n1"] == 2
    col = EdgeColoring(g, {(0, 1): 0, (1, 2): 1}, 2)
    cc = expcli.canonical(col)
    assert cc["r"] == 2 and [0, 1, 0] in cc["colors"]
    h = KUniformHypergraph(4, 2, [(2, 3), (0, 1)])
    assert expcli.canonical(h)["edges"] == [[0, 1], [2, 3]]


def test_canonical_dataclass_skips_callables():
    f = setmap.eh_map(3, 2)
    out = expcli.canonical(f)
    assert out["type"] == "SetMapping" and out["kind"] == "eh"
    assert "rule" not in out
    assert out["k"] == 2 and len(out["points"]) == 9


def test_canonical_rejects_unknown_objects():
    with pytest.raises(TypeError, match="canonicalize"):
        expcli.canonical(object())


def test_digest_is_stable_and_discriminating():
    a = expcli.digest({"x": Fraction(1, 2), "y": [1, 2]})
    b = expcli.digest({"y": [1, 2], "x": Fraction(1, 2)})
    c = expcli.digest({"x": Fraction(1, 2), "y": [2, 1]})
    assert a == b and len(a) == 64
    assert a != c


# ---------------------------------------------------------------------------
# Spec validation


def test_validate_rejects_unknown_module_and_operation():
    with pytest.raises(GuardError, match="unknown module"):
        expcli.validate_spec(ExperimentSpec("nope", "x", {}))
    with pytest.raises(GuardError, match="unknown operation"):
        expcli.validate_spec(ExperimentSpec("setmap", "x", {"n": 3}))


def test_validate_rejects_bad_counts_and_presets():
    spec = ExperimentSpec("setmap", "violate", {"n": 6}, trials=0)
    with pytest.raises(GuardError, match="trial count"):
        expcli.validate_spec(spec)
    spec = ExperimentSpec("setmap", "violate", {"n": 6}, preset="lab")
    with pytest.raises(GuardError, match="preset"):
        expcli.validate_spec(spec)


def test_validate_rejects_unknown_and_missing_parameters():
    with pytest.raises(GuardError, match="unknown parameter 'q'"):
        expcli.validate_spec(ExperimentSpec("setmap", "violate",
                                            {"n": 6, "q": 1}))
    with pytest.raises(GuardError, match="missing required parameter 'n'"):
        expcli.validate_spec(ExperimentSpec("setmap", "violate", {}))


def test_validation_error_runs_nothing(tmp_path):
    # zero pattern order must fail before any trial executes
    out = tmp_path / "rec.json"
    spec = ExperimentSpec("weakseq", "pipeline",
                          {"n": 100, "p": 0.5, "r": 0},
                          trials=5, out=str(out))
    with pytest.raises(GuardError, match="'r' must be >= 1"):
        expcli.run(spec)
    assert not out.exists()


def test_validate_resolves_defaults_and_casts():
    params = expcli.validate_spec(ExperimentSpec(
        "embed", "lemma", {"delta": "9/1000", "N": "128"}))
    assert params["delta"] == Fraction(9, 1000)
    assert params["N"] == 128 and params["k"] == 3


# ---------------------------------------------------------------------------
# Execution and replay


def test_run_violate_example_all_trials_succeed():
    spec = ExperimentSpec("setmap", "violate", {"k": 2, "n": 6},
                          seed=7, trials=100)
    rec = expcli.run(spec)
    assert rec.aggregate["successes"] == 100
    assert rec.aggregate["success_rate"] == 1.0
    assert all(t["ok"] and t["outcome"] == "violation" for t in rec.trials)


def test_run_same_seed_is_byte_identical():
    spec = ExperimentSpec("bipfree", "extract", {"n": 30, "p": 0.5},
                          seed=13, trials=6)
    a = expcli.run(spec)
    b = expcli.run(spec)
    assert json.dumps(a.trials) == json.dumps(b.trials)
    assert a.aggregate == b.aggregate


def test_run_seed_changes_witnesses():
    base = {"n": 30, "p": 0.5}
    a = expcli.run(ExperimentSpec("bipfree", "extract", base, seed=1))
    b = expcli.run(ExperimentSpec("bipfree", "extract", base, seed=2))
    assert a.trials[0]["witness"] != b.trials[0]["witness"]


def test_trials_are_independent_of_count():
    # trial i derives its stream from (seed, i), so prefixes agree
    base = {"n": 30, "p": 0.5}
    short = expcli.run(ExperimentSpec("bipfree", "extract", base,
                                      seed=5, trials=2))
    long = expcli.run(ExperimentSpec("bipfree", "extract", base,
                                     seed=5, trials=5))
    assert long.trials[:2] == short.trials


def test_per_trial_failures_recorded_not_thrown():
    spec = ExperimentSpec("weakseq", "pipeline",
                          {"n": 40, "p": 0.5, "r": 4, "t": 50}, trials=2)
    rec = expcli.run(spec)
    assert rec.aggregate["successes"] == 0
    for t in rec.trials:
        assert not t["ok"]
        assert t["outcome"] == "error:GuardError"
        assert "2rt" in t["stats"]["error"] or "2 r t" in t["stats"]["error"] \
            or "n" in t["stats"]["error"]


def test_record_roundtrip_and_rng_field(tmp_path):
    path = tmp_path / "rec.json"
    spec = ExperimentSpec("rsgraph", "behrend", {"N": 500}, seed=3,
                          out=str(path))
    rec = expcli.run(spec)
    assert rec.rng["algorithm"] == "mt19937/sha256-derive"
    assert rec.schema_version == 1
    stored = expcli.read_record(path)
    assert stored["trials"] == rec.trials
    assert stored["spec"]["params"]["N"] == 500


def test_aggregate_key_statistics():
    spec = ExperimentSpec("removal", "census", {"N": 4, "r": 2},
                          seed=2, trials=8)
    rec = expcli.run(spec)
    keys = [t["stats"]["key"] for t in rec.trials]
    assert rec.aggregate["key_name"] == "total"
    assert rec.aggregate["key_min"] == min(keys)
    assert rec.aggregate["key_max"] == max(keys)
    assert rec.aggregate["key_mean"] == pytest.approx(sum(keys) / len(keys))


def test_replay_matches_and_detects_tampering(tmp_path):
    path = tmp_path / "rec.json"
    spec = ExperimentSpec("setmap", "violate", {"k": 2, "n": 6},
                          seed=7, trials=4, out=str(path))
    expcli.run(spec)
    match, fresh = expcli.replay(path)
    assert match and fresh.aggregate["successes"] == 4

    stored = expcli.read_record(path)
    stored["trials"][2]["witness"] = "0" * 64
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(stored, fh)
    match, _ = expcli.replay(path)
    assert not match


def test_replay_rejects_schema_mismatch(tmp_path):
    path = tmp_path / "rec.json"
    spec = ExperimentSpec("rsgraph", "behrend", {"N": 100}, out=str(path))
    expcli.run(spec)
    stored = expcli.read_record(path)
    stored["schema_version"] = 99
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(stored, fh)
    with pytest.raises(ValueError, match="schema version mismatch"):
        expcli.replay(path)


def test_replay_restores_fraction_parameters(tmp_path):
    path = tmp_path / "rec.json"
    spec = ExperimentSpec("embed", "lemma",
                          {"N": 64, "k": 3, "delta": "1/100"},
                          seed=4, trials=2, out=str(path))
    rec = expcli.run(spec)
    assert rec.spec["params"]["delta"] == "1/100"
    match, _ = expcli.replay(path)
    assert match


def test_parallel_pool_matches_sequential(monkeypatch):
    spec = ExperimentSpec("setmap", "violate", {"k": 2, "n": 6},
                          seed=7, trials=6)
    seq = expcli.run(spec)
    monkeypatch.setenv("EXLAB_THREADS", "3")
    par = expcli.run(spec)
    assert json.dumps(seq.trials) == json.dumps(par.trials)


# ---------------------------------------------------------------------------
# Reports


def _two_records(tmp_path):
    p1 = tmp_path / "a.json"
    p2 = tmp_path / "b.json"
    expcli.run(ExperimentSpec("rsgraph", "behrend", {"N": 200},
                              out=str(p1)))
    expcli.run(ExperimentSpec("bipfree", "extract", {"n": 30, "p": 0.5},
                              seed=2, trials=3, out=str(p2)))
    return p1, p2


def test_report_rows_sorted_by_module_then_op(tmp_path):
    p1, p2 = _two_records(tmp_path)
    rows = expcli.report_rows([expcli.read_record(p1),
                               expcli.read_record(p2)])
    assert [r["module"] for r in rows] == ["bipfree", "rsgraph"]
    assert rows[0]["op"] == "extract" and rows[1]["op"] == "behrend"


def test_report_extraction_ratio_at_least_one(tmp_path):
    _, p2 = _two_records(tmp_path)
    rows = expcli.report_rows([expcli.read_record(p2)])
    assert rows[0]["key_name"] == "size_over_floor"
    assert rows[0]["key_min"] >= 1.0


def test_report_formats_render(tmp_path):
    p1, p2 = _two_records(tmp_path)
    md = expcli.report([str(p1), str(p2)], "md")
    assert md.startswith("| module |")
    assert md.count("\n") == 4
    as_json = json.loads(expcli.report([str(p1)], "json"))
    assert as_json[0]["module"] == "rsgraph"
    csv_text = expcli.report([str(p1)], "csv")
    header, row = csv_text.strip().splitlines()
    assert header.split(",")[0] == "module"
    assert row.split(",")[0] == "rsgraph"
    with pytest.raises(ValueError, match="format"):
        expcli.report([str(p1)], "xml")


def test_report_flags_schema_mismatch(tmp_path):
    p1, _ = _two_records(tmp_path)
    stored = expcli.read_record(p1)
    stored["schema_version"] = 0
    with open(p1, "w", encoding="utf-8") as fh:
        json.dump(stored, fh)
    with pytest.raises(ValueError, match=str(p1)):
        expcli.report([str(p1)], "md")


# ---------------------------------------------------------------------------
# Command line


def test_main_success_exit_and_json_row(capsys):
    code = expcli.main(["setmap", "--mode", "violate", "--k", "2",
                        "--n", "6", "--trials", "3", "--seed", "7"])
    assert code == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows[0]["successes"] == 3


def test_main_failure_exit_on_failed_trials(capsys):
    code = expcli.main(["weakseq", "--op", "pipeline", "--n", "40",
                        "--p", "0.5", "--r", "4", "--t", "50"])
    assert code == 1
    rows = json.loads(capsys.readouterr().out)
    assert rows[0]["success_rate"] == 0.0


def test_main_validation_error_exit(capsys):
    code = expcli.main(["weakseq", "--op", "pipeline", "--n", "100",
                        "--p", "0.5", "--r", "0"])
    assert code == 2
    assert "must be >= 1" in capsys.readouterr().err


def test_main_dry_run_prints_resolved_params(tmp_path, capsys):
    out = tmp_path / "rec.json"
    code = expcli.main(["bipfree", "--op", "count", "--random", "30", "0.5",
                        "--dry-run", "--out", str(out)])
    assert code == 0
    resolved = json.loads(capsys.readouterr().out)
    assert resolved["params"]["n"] == 30 and resolved["params"]["r"] == 2
    assert not out.exists()


def test_main_random_grid_and_record(tmp_path, capsys):
    out = tmp_path / "rec.json"
    code = expcli.main(["removal", "--op", "diamond", "--random-grid",
                        "4", "2", "--trials", "2", "--out", str(out)])
    assert code == 0
    capsys.readouterr()
    stored = expcli.read_record(out)
    assert stored["spec"]["params"]["N"] == 4
    assert len(stored["trials"]) == 2


def test_main_grid_file_census(tmp_path, capsys):
    gc = removal.GridColoring(3, 2, [[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    path = tmp_path / "grid.txt"
    removal.write_grid(gc, path)
    code = expcli.main(["removal", "--op", "census", "--grid-file",
                        str(path)])
    assert code == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows[0]["key_mean"] == 11.0


def test_main_run_replay_report_commands(tmp_path, capsys):
    spec_path = tmp_path / "spec.json"
    rec_path = tmp_path / "rec.json"
    spec_path.write_text(json.dumps({
        "module": "setmap", "operation": "violate",
        "params": {"k": 2, "n": 6}, "seed": 7, "trials": 4}))
    assert expcli.main(["run", str(spec_path), "--out", str(rec_path)]) == 0
    capsys.readouterr()
    assert expcli.main(["replay", str(rec_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["match"] is True
    report_path = tmp_path / "report.md"
    assert expcli.main(["report", str(rec_path), "--format", "md",
                        "--out", str(report_path)]) == 0
    capsys.readouterr()
    assert report_path.read_text().startswith("| module |")


def test_main_spec_file_needs_module_and_operation(tmp_path, capsys):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"params": {"n": 6}}))
    assert expcli.main(["run", str(spec_path)]) == 2
    assert "module" in capsys.readouterr().err


def test_main_exclusive_graph_sources(capsys):
    code = expcli.main(["bipfree", "--op", "count", "--random", "30", "0.5",
                        "--input", "somefile"])
    assert code == 2
    assert "not both" in capsys.readouterr().err
