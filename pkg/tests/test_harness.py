import csv
import json
import math

import pytest

from rulearena import cli
from rulearena.env import census_specs, estar_spec, save_spec
from rulearena.errors import ProtocolError, SpecValidationError
from rulearena.harness import (
    ExperimentConfig,
    estar_policy_rhae,
    expand_games,
    recompute_aggregates,
    report,
    run_ablate_budget,
    run_census,
    run_compare,
    run_experiment,
    run_frontier,
    run_multi,
    verify_campaign,
)

B1 = {"budget_mode": "fixed:0", "label": "B1"}
AERA1 = {"budget_mode": "fixed:1", "label": "aera-b1"}
RANDOM = {"type": "random"}


def _cfg(**kw):
    return ExperimentConfig.from_dict(kw)


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# -- config -------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(SpecValidationError):
        _cfg(experiment="compare", game_set=[], agents=[AERA1, RANDOM])
    with pytest.raises(SpecValidationError):
        _cfg(experiment="compare", game_set=[{"recipe": "estar"}], agents=[AERA1])
    with pytest.raises(SpecValidationError):
        _cfg(experiment="compare", game_set=[{"recipe": "estar"}], agents=[AERA1, RANDOM], seeds=[])
    with pytest.raises(SpecValidationError):
        _cfg(experiment="nope", game_set=[{"recipe": "estar"}])
    with pytest.raises(SpecValidationError, match="unknown config fields"):
        _cfg(experiment="project", game_set=[], colour="blue")
    with pytest.raises(SpecValidationError):
        _cfg(experiment="ablate-budget", game_set=[{"recipe": "estar"}], agents=[AERA1])
    with pytest.raises(SpecValidationError):
        _cfg(experiment="compare", game_set=[{"recipe": "estar"}], agents=[{"type": "psychic"}, RANDOM])


def test_config_digest_ignores_output_dir_and_jobs():
    a = _cfg(experiment="project", game_set=[], projection={"n_public": 25, "solves": 4, "n_private": 55, "per_solve_score": 1.3225})
    b = ExperimentConfig.from_dict({**a.to_dict(), "output_dir": "elsewhere", "jobs": 4})
    assert a.digest == b.digest


def test_game_set_from_paths(tmp_path):
    save_spec(estar_spec(), tmp_path / "e.json")
    specs = expand_games([{"path": "e.json"}], base=tmp_path)
    assert specs[0].name == estar_spec().name
    with pytest.raises(SpecValidationError, match="unique"):
        expand_games([{"recipe": "estar"}, {"recipe": "estar"}])


# -- compare ------------------------------------------------------------------


def _compare_cfg(tmp_path, **kw):
    base = dict(
        experiment="compare",
        game_set=[{"recipe": "census"}],
        agents=[RANDOM, B1, AERA1],
        output_dir=str(tmp_path / "cmp"),
    )
    base.update(kw)
    return _cfg(**base)


def test_compare_census(tmp_path):
    rec = run_compare(_compare_cfg(tmp_path))
    agg = rec.aggregates
    assert agg["B1"]["solved"] == 0 and agg["B1"]["rhae"] == 0.0
    assert agg["aera-b1"]["solved"] > 0
    # random stumbles on one blind-1 non-select game; none of the hard games
    assert set(agg["random"]["solved_games"]) <= {s.name for s in census_specs() if s.params["tier"] == "blind-1"}
    root = tmp_path / "cmp"
    for name in ("config.json", "run_record.json", "meta.json", "levels.csv", "summary.json"):
        assert (root / name).exists()
    assert verify_campaign(root) == []
    r = report(root)
    assert r["matches_record"] and r["trace_problems"] == []


def test_compare_deterministic(tmp_path):
    a = run_compare(_compare_cfg(tmp_path, output_dir=str(tmp_path / "a")))
    b = run_compare(_compare_cfg(tmp_path, output_dir=str(tmp_path / "b"), jobs=2))
    assert a.digest == b.digest
    for name in ("run_record.json", "levels.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_compare_wrong_repeat_action(tmp_path):
    cfg = _cfg(
        experiment="compare",
        game_set=[{"recipe": "taxonomy", "tier": "blind-1", "winning_action": "ACTION3"}],
        agents=[AERA1, {"type": "repeat", "action": "ACTION2"}],
        output_dir=str(tmp_path / "w"),
    )
    assert run_compare(cfg).aggregates["repeat-ACTION2"]["solved"] == 0


def test_cell_failure_is_isolated(tmp_path, monkeypatch):
    from rulearena import harness

    real = harness.run_agent

    def flaky(desc, spec, seed, cap=200):
        if desc.get("type") == "random" and spec.name.startswith("G03"):
            raise ProtocolError("boom")
        return real(desc, spec, seed, cap)

    monkeypatch.setattr(harness, "run_agent", flaky)
    rec = run_compare(_compare_cfg(tmp_path))
    assert rec.aggregates["random"]["failures"] == 1
    assert rec.aggregates["random"]["episodes"] == 25
    assert any(r.get("failure") for r in rec.levels)


def test_crash_win_firewall(tmp_path):
    cfg = _compare_cfg(tmp_path, agents=[{"type": "null-probe"}, AERA1])
    rec = run_compare(cfg)
    np_agg = rec.aggregates["null-probe"]
    assert np_agg["crash_wins"] == 18 and np_agg["solved"] == 0 and np_agg["rhae"] == 0.0
    # every crash-win row carries no score and the recomputed aggregate agrees
    rows = _read_csv(tmp_path / "cmp" / "levels.csv")
    assert all(r["score"] == "" for r in rows if r["crash_win"] == "true")
    assert recompute_aggregates(rec.levels)["null-probe"] == 0.0


def test_all_crash_campaign_has_undefined_rhae(tmp_path):
    cfg = _cfg(
        experiment="compare",
        game_set=[{"recipe": "taxonomy", "tier": "repeated", "winning_action": "ACTION1", "repeat": 50, "fault": True}],
        agents=[{"type": "null-probe"}, AERA1],
        output_dir=str(tmp_path / "c"),
    )
    rec = run_compare(cfg)
    assert rec.aggregates["null-probe"]["rhae"] is None
    assert report(tmp_path / "c")["matches_record"]


def test_report_detects_tampering(tmp_path):
    run_compare(_compare_cfg(tmp_path))
    path = tmp_path / "cmp" / "run_record.json"
    rec = json.loads(path.read_text())
    rec["aggregates"]["aera-b1"]["rhae"] += 0.1
    path.write_text(json.dumps(rec))
    assert not report(tmp_path / "cmp")["matches_record"]
    first = next(r for r in rec["levels"] if r["trace"])
    (tmp_path / "cmp" / first["trace"]).unlink()
    assert verify_campaign(tmp_path / "cmp")


# -- ablation -----------------------------------------------------------------


def _ablate_cfg(tmp_path, budgets):
    return _cfg(
        experiment="ablate-budget",
        game_set=[
            {"recipe": "estar", "k": 5, "M": 100},
            {"recipe": "estar", "k": 2, "M": 9, "name": "estar-cheap"},
            {"recipe": "uis", "branching": 2, "digits": 2},
            {"recipe": "uis", "branching": 2, "digits": 3, "k": 3, "M": 60},
        ],
        agents=[{}],
        budgets=budgets,
        seeds=[0, 1],
        output_dir=str(tmp_path / "abl"),
    )


def test_ablate_budget(tmp_path):
    rec = run_ablate_budget(_ablate_cfg(tmp_path, [0, 1, 3, 5]))
    table = {r["budget"]: r for r in rec.report["table"]}
    assert table[0]["rhae"] == 0 and table[0]["solved"] == 0
    assert table[5]["solved"] == 8
    assert table[1]["solved"] < table[3]["solved"]


def test_ablate_single_budget(tmp_path):
    rec = run_ablate_budget(_ablate_cfg(tmp_path, [1]))
    assert len(rec.report["table"]) == 1


def test_ablate_reports_ties_with_different_games():
    from rulearena.harness import _score_ties

    rows = [
        {"budget": 3, "rhae": 0.5, "solved_games": ["x"]},
        {"budget": 5, "rhae": 0.5, "solved_games": ["y"]},
        {"budget": 7, "rhae": 0.5, "solved_games": ["y"]},
    ]
    assert _score_ties(rows) == [
        {"budgets": [3, 5], "rhae": 0.5, "solved_games": [["x"], ["y"]]},
        {"budgets": [3, 7], "rhae": 0.5, "solved_games": [["x"], ["y"]]},
    ]


# -- multi-run ----------------------------------------------------------------


def _multi_cfg(tmp_path, seeds, n_runs=8):
    return dict(
        experiment="multi-run",
        game_set=[
            {"recipe": "taxonomy", "tier": "blind-1", "winning_action": "ACTION6", "name": "blind"},
            {"recipe": "taxonomy", "tier": "probe-gated", "target": [10, 12], "name": "probe"},
        ],
        agents=[{}],
        seeds=seeds,
        n_runs=n_runs,
        output_dir=str(tmp_path / "multi"),
    )


def test_multi_run_frequency(tmp_path):
    rec = run_multi(_cfg(**_multi_cfg(tmp_path, list(range(8)))))
    assert rec.report["solve_frequency"]["probe"] == "8/8"
    assert rec.report["solve_frequency"]["blind"] == "0/8"  # exploring spoils a blind-1 game
    assert [r["seed"] for r in rec.report["runs"]] == list(range(8))
    lo, hi = rec.report["ci95"]
    assert lo <= rec.report["mean"] <= hi


def test_multi_run_duplicate_seed_warning(tmp_path):
    rec = run_multi(_cfg(**_multi_cfg(tmp_path, [4], n_runs=2)))
    assert rec.report["std"] == 0.0
    assert any("seed" in w for w in rec.report["warnings"])


def test_multi_run_needs_two_runs(tmp_path):
    with pytest.raises(SpecValidationError):
        _cfg(**_multi_cfg(tmp_path, [0], n_runs=1))


# -- frontier -----------------------------------------------------------------


def _frontier_cfg(tmp_path, grid, agents=(), episodes=2000):
    return _cfg(
        experiment="frontier",
        game_set=[{"recipe": "estar", "k": 5, "M": 100}],
        policy_grid=list(grid),
        agents=list(agents),
        episodes=episodes,
        output_dir=str(tmp_path / "fr"),
    )


def test_frontier_overlay_within_3se(tmp_path):
    grid = [round(0.1 * i, 1) for i in range(11)]
    rec = run_frontier(_frontier_cfg(tmp_path, grid, episodes=10_000))
    pts = rec.report["points"]
    assert len(pts) == 11
    assert all(p["within_3se"] for p in pts)
    for p in pts:
        assert p["depth"] == pytest.approx(p["analytic_depth"], abs=0.02)
    rhae = [p["rhae"] for p in pts]
    assert all(a < b for a, b in zip(rhae, rhae[1:]))
    rows = _read_csv(tmp_path / "fr" / "frontier.csv")
    assert len(rows) == 11 and "analytic_speed" in rows[0]


def test_frontier_single_policy(tmp_path):
    rec = run_frontier(_frontier_cfg(tmp_path, [0.5], episodes=200))
    assert len(rec.report["points"]) == 1 and rec.report["points"][0]["on_frontier"]


def test_frontier_b1_depth_zero(tmp_path):
    rec = run_frontier(_frontier_cfg(tmp_path, [], agents=[B1, {}]))
    by = {p["policy"]: p for p in rec.report["points"]}
    assert by["B1"]["depth"] == 0.0
    assert by["aera-adaptive-oracle-bayes"]["depth"] == pytest.approx(math.log(2))


def test_estar_policy_rhae_oracle():
    # probing always scores 1; not probing scores 1.15^2 half the time
    spec = estar_spec(5, 100)
    for p in (0.0, 0.5, 1.0):
        exact = p + (1 - p) * 0.5 * 1.15**2
        assert estar_policy_rhae(spec, p, 10_000, H=6) == pytest.approx(exact, abs=0.02)


# -- census -------------------------------------------------------------------


def test_census_counts(tmp_path):
    cfg = _cfg(experiment="taxonomy", game_set=[{"recipe": "census"}], budget_threshold=50, output_dir=str(tmp_path / "c"))
    rep = run_census(cfg).report
    assert rep["tier_counts"] == {
        "blind-1": 10,
        "budget-constrained": 8,
        "coordinate-click": 1,
        "probe-gated": 5,
        "repeated-action": 1,
    }
    assert rep["crash_win_reachable"] == 18


def test_census_fault_free_and_empty(tmp_path):
    cfg = _cfg(experiment="taxonomy", game_set=[{"recipe": "census", "n_fault": 0}], output_dir=str(tmp_path / "a"))
    assert run_census(cfg).report["crash_win_reachable"] == 0
    empty = _cfg(experiment="taxonomy", game_set=[], output_dir=str(tmp_path / "b"))
    rep = run_census(empty).report
    assert rep["games"] == 0 and rep["tier_counts"] == {}


def test_project_and_scan(tmp_path):
    proj = _cfg(
        experiment="project",
        game_set=[],
        projection={"n_public": 25, "solves": 4, "n_private": 55, "per_solve_score": 1.3225},
        output_dir=str(tmp_path / "p"),
    )
    assert run_experiment(proj).report["expected_rhae"] == pytest.approx(0.2116)
    scan = _cfg(experiment="scan", game_set=[{"recipe": "census"}], output_dir=str(tmp_path / "s"))
    assert run_experiment(scan).report["crash_win_reachable"] == 18


# -- CLI ----------------------------------------------------------------------


def test_cli_census_and_report(tmp_path, capsys):
    out = tmp_path / "census"
    assert cli.main(["census", "--out", str(out)]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["report"]["crash_win_reachable"] == 18


def test_cli_run_and_report(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"game_set": [{"recipe": "estar"}], "agents": [B1, RANDOM, {}]}))
    out = tmp_path / "run"
    assert cli.main(["run", "--config", str(cfg), "--seeds", "0-2", "--out", str(out), "--jobs", "2"]) == 0
    capsys.readouterr()
    assert json.loads((out / "config.json").read_text())["seeds"] == [0, 1, 2]
    assert cli.main(["report", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["matches_record"]


def test_cli_errors(tmp_path, capsys):
    assert cli.main(["run"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ArenaError" and err["command"] == "run"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"experiment": "multi-run", "game_set": [{"recipe": "estar"}], "agents": [{}], "n_runs": 1}))
    assert cli.main(["multi", "--config", str(bad)]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "SpecValidationError"
    assert cli.main(["report", str(tmp_path / "missing")]) == 1


def test_cli_seed_ranges():
    assert cli._seeds("0-2,5") == [0, 1, 2, 5]


def test_random_cell_seed_zero_is_seed_42():
    from rulearena.harness import run_agent
    from rulearena.search import random_agent

    spec = census_specs()[5]
    assert run_agent({"type": "random"}, spec, 0).to_jsonl() == random_agent(spec, 42, env_seed=0).to_jsonl()
