import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulearena.env import (
    A1,
    A5,
    A7,
    CENSUS_LAYOUT,
    DEFAULT_GRID,
    Action,
    EnvironmentSpec,
    Status,
    candidate_actions,
    census_specs,
    estar_policy_script,
    estar_spec,
    load_spec,
    observe,
    oracle_baseline,
    planted_strategy,
    random_taxonomy_spec,
    read_observation_trace,
    replay,
    reset,
    sample_hypothesis,
    save_spec,
    simulate_estar_episode,
    step,
    taxonomy_spec,
    uis_spec,
    winning_plan,
    with_hypothesis,
    write_observation_trace,
)
from rulearena.errors import InvalidActionError, ProtocolError, SpecValidationError

GOLDEN = Path(__file__).parent / "golden"


# -- reset / determinism ------------------------------------------------------


def test_reset_fresh_state():
    s = reset(estar_spec(5, 100), 0)
    assert s.true_hypothesis in {"h1", "h2"}
    assert s.action_count == 0
    assert s.status is Status.NOT_FINISHED


def test_reset_is_deterministic():
    spec = taxonomy_spec("probe-gated", target=(10, 12), seed=3)
    a, b = reset(spec, 5), reset(spec, 5)
    assert a.digest == b.digest
    assert np.array_equal(observe(a).grid, observe(b).grid)


def test_golden_blind1_cell_select_seed7(tmp_path):
    spec = load_spec(GOLDEN / "blind1_action6_seed7.spec.json")
    state = reset(spec, 7)
    grid = observe(state).grid
    assert grid.shape == DEFAULT_GRID
    assert np.array_equal(grid, np.loadtxt(GOLDEN / "blind1_action6_seed7.grid.txt", dtype=np.uint8))
    assert state.status is Status.NOT_FINISHED
    out = tmp_path / "obs.jsonl"
    write_observation_trace(out, spec, 7, [A1, A7, Action.select(*spec.center)])
    assert read_observation_trace(out) == read_observation_trace(GOLDEN / "blind1_action6_seed7.obs.jsonl")


@pytest.mark.parametrize(
    "bad, match",
    [
        (dict(family="toy-estar", hypotheses=(("h1", 0.7), ("h2", 0.3)), params={"k": 5, "M": 100}), "1/2"),
        (dict(family="toy-estar", hypotheses=(("h1", 0.5), ("h2", 0.5)), params={"k": 5, "M": 5}), "M > k"),
        (dict(family="toy-estar", hypotheses=(("h1", 0.5), ("h2", 0.6)), params={"k": 5, "M": 9}), "sum to 1"),
        (dict(family="chess", hypotheses=(("h", 1.0),)), "family"),
    ],
)
def test_invalid_spec_names_invariant(bad, match):
    with pytest.raises(SpecValidationError, match=match):
        reset(EnvironmentSpec(**bad), 0)


def test_spec_roundtrip(tmp_path):
    spec = taxonomy_spec("coordinate-click", repeat=4, target=(3, 9), seed=2, fault=True)
    save_spec(spec, tmp_path / "g.json")
    assert load_spec(tmp_path / "g.json") == spec


# -- step ---------------------------------------------------------------------


def test_blind1_cell_select_wins_in_one():
    spec = taxonomy_spec("blind-1", "ACTION6", seed=1)
    obs, s = step(reset(spec, 0), Action.select(5, 60))
    assert obs.status is Status.SOLVED and s.action_count == 1


def test_repeated_50_solves_at_step_50():
    spec = taxonomy_spec("repeated", "ACTION1", repeat=50)
    s = reset(spec, 0)
    for i in range(1, 51):
        obs, s = step(s, A1)
        assert (obs.status is Status.SOLVED) == (i == 50)


def test_repeated_streak_resets_on_other_action():
    spec = taxonomy_spec("repeated", "ACTION2", repeat=3)
    _, s = replay(spec, 0, [Action(2), Action(2), A1, Action(2), Action(2)])
    assert s.status is Status.NOT_FINISHED
    _, s = step(s, Action(2))
    assert s.status is Status.SOLVED


def test_probe_gated_needs_probe():
    spec = taxonomy_spec("probe-gated", target=(10, 12))
    _, s = step(reset(spec, 0), Action.select(10, 12))
    assert s.status is Status.NOT_FINISHED
    _, s = replay(spec, 0, [A5, Action.select(10, 12)])
    assert s.status is Status.SOLVED


def test_coordinate_click_after_n_steps():
    spec = taxonomy_spec("coordinate-click", repeat=2, target=(5, 5))
    _, s = replay(spec, 0, [Action.select(5, 5)] * 2)
    assert s.status is Status.NOT_FINISHED
    _, s = step(s, Action.select(5, 5))
    assert s.status is Status.SOLVED


def test_null_coordinate_fault_crash_win():
    spec = taxonomy_spec("repeated", "ACTION1", repeat=50, fault=True)
    obs, s = step(reset(spec, 0), Action.null_select())
    assert obs.status is Status.SOLVED and obs.crash_win and s.crash_win


def test_null_coordinate_rejected_without_fault():
    spec = taxonomy_spec("repeated", "ACTION1", repeat=50)
    with pytest.raises(InvalidActionError):
        step(reset(spec, 0), Action.null_select())


def test_step_errors():
    spec = taxonomy_spec("blind-1", "ACTION6")
    s = reset(spec, 0)
    with pytest.raises(InvalidActionError):
        step(s, Action(8))
    with pytest.raises(InvalidActionError):
        step(s, Action.select(64, 0))
    with pytest.raises(InvalidActionError):
        step(s, Action(1, (0, 0)))
    _, done = step(s, Action.select(0, 0))
    with pytest.raises(ProtocolError):
        step(done, A1)


def test_undo_restores_and_counts():
    spec = taxonomy_spec("probe-gated", target=(10, 12))
    s0 = reset(spec, 0)
    _, s1 = step(s0, A1)
    _, s2 = step(s1, A7)
    assert s2.core == s0.core and s2.action_count == 2
    assert np.array_equal(observe(s2).grid, observe(s0).grid)
    _, s3 = step(s0, A7)  # empty stack: counted no-op
    assert s3.core == s0.core and s3.action_count == 1


def test_status_monotone_and_cells_in_range():
    spec = estar_spec(3, 10)
    s = reset(spec, 1)
    seen = []
    for a in [Action.select(0, 1)] + [A1] * 12:
        if s.terminal:
            break
        obs, s = step(s, a)
        assert obs.grid.min() >= 0 and obs.grid.max() <= 15
        seen.append(obs.status)
    changes = [i for i in range(1, len(seen)) if seen[i] != seen[i - 1]]
    assert len(changes) <= 1


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), kinds=st.lists(st.integers(1, 7), min_size=1, max_size=25))
def test_replay_determinism(seed, kinds):
    spec = census_specs()[seed % 25]
    actions = [Action.select(*spec.center) if k == 6 else Action(k) for k in kinds]
    o1, s1 = replay(spec, seed, actions)
    o2, s2 = replay(spec, seed, actions)
    assert [o.digest for o in o1] == [o.digest for o in o2]
    assert s1.digest == s2.digest


# -- E* -----------------------------------------------------------------------


def test_estar_probe_reveals_and_plan_costs():
    spec = estar_spec(5, 100)
    s = reset(spec, 0)
    obs, s = step(s, A5)
    truth = spec.hypothesis_ids.index(s.true_hypothesis)
    assert obs.signal == (truth,)
    plan = winning_plan(s)
    assert len(plan) == 5
    _, end = replay(spec, 0, [A5] + plan)
    assert end.status is Status.SOLVED and end.action_count == 6


def test_estar_wrong_commit_fails_at_M():
    spec = estar_spec(5, 100)
    s = reset(spec, 0)
    wrong = 1 - spec.hypothesis_ids.index(s.true_hypothesis)
    _, end = replay(spec, 0, [Action.select(0, wrong)] + [A1] * 200)
    assert end.status is Status.FAILED and end.action_count == 100


def test_simulate_estar_p1():
    spec = estar_spec(5, 100)
    assert all(simulate_estar_episode(spec, s, 1.0) == (6, True) for s in range(20))


def test_simulate_estar_p0_mean():
    spec = estar_spec(5, 100)
    counts = np.array([simulate_estar_episode(spec, s, 0.0)[0] for s in range(4000)])
    sem = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - 52.5) < 3 * sem


@pytest.mark.parametrize("p", [0.0, 0.5, 1.0])
def test_simulated_counts_match_environment_replay(p):
    spec = estar_spec(4, 12)
    for seed in range(30):
        n, solved = simulate_estar_episode(spec, seed, p)
        _, end = replay(spec, seed, estar_policy_script(spec, seed, p))
        assert end.action_count == n
        assert (end.status is Status.SOLVED) == solved


def test_simulate_rejects_bad_p():
    with pytest.raises(SpecValidationError):
        simulate_estar_episode(estar_spec(), 0, 1.5)


# -- UIS ----------------------------------------------------------------------


def test_uis_probes_reveal_digits():
    spec = uis_spec(branching=3, digits=2)
    s = reset(spec, 4)
    truth = spec.hypothesis_ids.index(s.true_hypothesis)
    o1, s = step(s, A5)
    o2, s = step(s, A5)
    assert o2.signal == divmod(truth, 3)


def test_uis_rejects_non_integer_branching():
    spec = uis_spec()
    bad = EnvironmentSpec(spec.family, spec.hypotheses, {**spec.params, "delta_h": 0.9})
    with pytest.raises(SpecValidationError, match="ln"):
        bad.validate()


# -- baselines and planning ---------------------------------------------------


def test_oracle_baselines():
    assert oracle_baseline(estar_spec(5, 100)) == 6
    assert oracle_baseline(taxonomy_spec("blind-1", "ACTION3")) == 1
    assert oracle_baseline(taxonomy_spec("repeated", "ACTION1", repeat=50)) == 50
    assert oracle_baseline(taxonomy_spec("probe-gated", target=(1, 1))) == 2
    assert oracle_baseline(taxonomy_spec("coordinate-click", repeat=8, target=(1, 1))) == 9
    spec = taxonomy_spec("blind-1", "ACTION3")
    assert oracle_baseline(EnvironmentSpec(**{**spec.__dict__, "human_baseline_override": 12})) == 12


def test_oracle_baseline_estar_small_M():
    # guessing beats probing when M is close to k
    assert oracle_baseline(estar_spec(5, 6)) == math.ceil(5.5)


def test_oracle_baseline_uis_enumeration():
    # b=2, two digits, k=5, M=100: probing both digits is optimal -> 2 + 5
    assert oracle_baseline(uis_spec(2, 2, 5, 100)) == 7


def test_census_layout():
    specs = census_specs()
    assert len(specs) == len(CENSUS_LAYOUT) == 25
    assert sum(s.null_coord_fault for s in specs) == 18
    baselines = [oracle_baseline(s) for s in specs]
    assert baselines[:10] == [1] * 10 and baselines[10:15] == [2] * 5
    assert baselines[15:] == [9, 30, 50, 100, 128, 100, 129, 52, 130, 200]


@pytest.mark.parametrize("tier", ["blind-1", "probe-gated", "repeated", "coordinate-click"])
def test_planted_strategy_replays(tier):
    for seed in range(10):
        spec = random_taxonomy_spec(tier, seed)
        plan = planted_strategy(spec)
        _, end = replay(spec, spec.params["seed"], plan)
        assert end.status is Status.SOLVED and not end.crash_win
        assert len(plan) == oracle_baseline(spec)
        assert tuple(spec.params.get("target", (0, 0))) != spec.center


def test_winning_plan_walks_back_with_undo():
    spec = taxonomy_spec("blind-1", "ACTION4")
    _, s = replay(spec, 0, [A1, Action(2)])
    plan = winning_plan(s)
    assert plan[:2] == [A7, A7] and plan[-1] == Action(4)
    _, end = replay(spec, 0, [A1, Action(2)] + plan)
    assert end.status is Status.SOLVED


def test_with_hypothesis_is_counterfactual():
    spec = census_specs()[0]
    s = reset(spec, 0)
    alt = with_hypothesis(s, "ACTION2")
    assert step(alt, Action(2))[1].status is Status.SOLVED
    assert step(s, Action(2))[1].status is Status.NOT_FINISHED


def test_sample_hypothesis_follows_prior():
    spec = estar_spec()
    draws = [sample_hypothesis(spec, s) for s in range(2000)]
    assert abs(draws.count("h1") / 2000 - 0.5) < 0.05


def test_candidate_actions_include_markers():
    spec = taxonomy_spec("probe-gated", target=(10, 12))
    labels = [a.label for a in candidate_actions(reset(spec, 0))]
    assert "ACTION6@10,12" in labels and "ACTION6@32,32" in labels and labels[-1] == "ACTION7"


def test_action_label_roundtrip():
    for a in [A1, Action.select(3, 4), Action.null_select(), A7]:
        assert Action.parse(a.label) == a
