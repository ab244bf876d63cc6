import json

import pytest

from rulearena.env import (
    A1,
    Action,
    Status,
    census_specs,
    oracle_baseline,
    random_taxonomy_spec,
    replay,
    search_seed,
    taxonomy_spec,
)
from rulearena.errors import SpecValidationError
from rulearena.search import (
    SearchResult,
    TaxonomyLabel,
    bfs_presolve,
    exhaustive_search,
    null_probe_agent,
    random_agent,
    read_report,
    repeated_action_agent,
    taxonomy_classify,
    vuln_scan,
    write_report,
)


def _replays_to_win(spec, labels):
    _, end = replay(spec, search_seed(spec), [Action.parse(s) for s in labels])
    return end.status is Status.SOLVED and not end.crash_win


# -- baseline agents ----------------------------------------------------------


def test_random_agent_deterministic():
    spec = census_specs()[12]
    a, b = random_agent(spec, 42), random_agent(spec, 42)
    assert a.to_jsonl() == b.to_jsonl()
    assert a.action_count == 200 and a.outcome == "unsolved"


def test_random_agent_seeds_differ():
    spec = census_specs()[12]
    assert random_agent(spec, 42).to_jsonl() != random_agent(spec, 43).to_jsonl()
    assert random_agent(spec, 42, cap=10).action_count == 10


def test_random_seed42_on_hard_subset():
    hard = [s for s in census_specs() if s.params["tier"] in ("probe-gated", "repeated")]
    assert sum(random_agent(s, 42).solved for s in hard) == 0


def test_repeated_action_agent():
    spec50 = taxonomy_spec("repeated", "ACTION1", repeat=50)
    t = repeated_action_agent(spec50, A1, 200)
    assert t.solved and t.action_count == 50
    spec200 = taxonomy_spec("repeated", "ACTION1", repeat=200)
    assert not repeated_action_agent(spec200, A1, 100).solved
    assert repeated_action_agent(spec200, A1, 200).solved
    wrong = repeated_action_agent(taxonomy_spec("blind-1", "ACTION6"), Action(2), 30)
    assert not wrong.solved and wrong.action_count == 30
    with pytest.raises(SpecValidationError):
        repeated_action_agent(spec50, A1, 0)


def test_null_probe_agent():
    faulty = taxonomy_spec("repeated", "ACTION1", repeat=50, fault=True)
    assert null_probe_agent(faulty).outcome == "crash-win"
    clean = taxonomy_spec("repeated", "ACTION1", repeat=50)
    t = null_probe_agent(clean)
    assert t.outcome == "unsolved" and t.action_count == 0


# -- BFS ----------------------------------------------------------------------


def test_bfs_blind1():
    r = bfs_presolve(taxonomy_spec("blind-1", "ACTION3"), 3)
    assert r.plan == [Action(3)]


def test_bfs_coordinate_click():
    spec = taxonomy_spec("coordinate-click", repeat=2, target=(5, 5))
    r = bfs_presolve(spec, 3)
    assert r.plan is not None and len(r.plan) == 3
    assert r.plan[-1] == Action.select(5, 5)
    _, end = replay(spec, search_seed(spec), r.plan)
    assert end.status is Status.SOLVED


def test_bfs_repeated_50_none():
    r = bfs_presolve(taxonomy_spec("repeated", "ACTION1", repeat=50), 4)
    assert r.plan is None and not r.timed_out and len(r.cache) > 1


def test_bfs_timeout_keeps_partial_cache():
    r = bfs_presolve(taxonomy_spec("repeated", "ACTION1", repeat=50), 4, time_limit=0.0)
    assert r.plan is None and r.timed_out


@pytest.mark.parametrize("tier", ["blind-1", "probe-gated", "coordinate-click", "repeated"])
def test_bfs_minimality(tier):
    for seed in range(6):
        spec = random_taxonomy_spec(tier, seed)
        L = oracle_baseline(spec)
        if L > 3:
            continue
        r = bfs_presolve(spec, 3)
        assert r.plan is not None and len(r.plan) == L


# -- exhaustive search --------------------------------------------------------


def test_exhaustive_counts():
    r3 = exhaustive_search(census_specs()[0], 3)
    assert r3.sequences_enumerated == 399 and r3.per_depth == [7, 49, 343]
    r4 = exhaustive_search(census_specs()[16], 4)
    assert r4.sequences_enumerated == 2800 and r4.per_depth[-1] == 2401


def test_exhaustive_blind1_depth1():
    spec = census_specs()[0]
    r = exhaustive_search(spec, 3)
    assert [f"ACTION6@{spec.center[0]},{spec.center[1]}"] in r.winning_sequences
    assert all(_replays_to_win(spec, seq) for seq in r.winning_sequences)


def test_exhaustive_repeated50_empty():
    assert exhaustive_search(taxonomy_spec("repeated", "ACTION1", repeat=50), 4).winning_sequences == []


def test_exhaustive_depth_bounds():
    with pytest.raises(SpecValidationError):
        exhaustive_search(census_specs()[0], 5)


def test_no_shorter_win_than_planted():
    for spec in census_specs():
        L = oracle_baseline(spec)
        r = exhaustive_search(spec, min(3, max(L - 1, 1)))
        shorter = [s for s in r.winning_sequences if len(s) < L]
        assert shorter == [], spec.name


# -- vulnerability scan -------------------------------------------------------


def test_vuln_scan():
    faulty = census_specs()[0]
    assert vuln_scan(faulty) == (True, 1) == vuln_scan(faulty)
    assert vuln_scan(census_specs()[20]) == (False, None)


def test_crash_win_exclusivity():
    # without the probe, no action sequence on a faulty game produces a crash-win
    spec = census_specs()[3]
    r = exhaustive_search(spec, 2)
    for seq in r.winning_sequences:
        _, end = replay(spec, 0, [Action.parse(s) for s in seq])
        assert not end.crash_win


# -- taxonomy -----------------------------------------------------------------


def test_taxonomy_examples():
    assert taxonomy_classify(taxonomy_spec("blind-1", "ACTION6")).tier == "blind-1"
    lab = taxonomy_classify(taxonomy_spec("repeated", "ACTION1", repeat=130))
    assert lab.tier == "repeated-action" and lab.evidence["steps"] == 130
    spec = taxonomy_spec("probe-gated", target=(10, 12))
    lab = taxonomy_classify(spec)
    assert lab.tier == "probe-gated"
    assert _replays_to_win(spec, lab.evidence["actions"])


TIER_NAMES = {"blind-1": "blind-1", "probe-gated": "probe-gated", "repeated": "repeated-action", "coordinate-click": "coordinate-click"}


@pytest.mark.parametrize("tier", list(TIER_NAMES))
def test_classification_consistency(tier):
    for seed in range(50):
        spec = random_taxonomy_spec(tier, seed)
        assert taxonomy_classify(spec).tier == TIER_NAMES[tier], (tier, seed)


def test_census_counts():
    labels = [taxonomy_classify(s, budget_threshold=50) for s in census_specs()]
    tiers = [lab.tier for lab in labels]
    assert tiers.count("blind-1") == 10
    assert tiers.count("probe-gated") == 5
    assert tiers.count("repeated-action") == 1
    assert tiers.count("coordinate-click") == 1
    assert tiers.count("budget-constrained") == 8
    assert sum(lab.crash_win_reachable for lab in labels) == 18


def test_label_requires_evidence():
    with pytest.raises(ValueError):
        TaxonomyLabel("g", "blind-1", {}, False)
    TaxonomyLabel("g", "unclassified", {}, False)


def test_reports_roundtrip(tmp_path):
    r = exhaustive_search(census_specs()[0], 1)
    lab = taxonomy_classify(census_specs()[0])
    write_report(tmp_path / "r.jsonl", [r, lab])
    rows = read_report(tmp_path / "r.jsonl")
    assert rows[0]["sequences_enumerated"] == 7 and rows[1]["tier"] == "blind-1"
    assert isinstance(r, SearchResult) and json.dumps(r.to_dict())
