"""Exploration budget ablation on probe-priced games, then run-to-run
spread of the adaptive agent on a small mixed set.
"""

import tempfile

from rulearena.harness import ExperimentConfig, run_ablate_budget, run_multi

GAMES = [
    {"recipe": "estar", "k": 5, "M": 100},
    {"recipe": "estar", "k": 2, "M": 9, "name": "estar-cheap"},
    {"recipe": "uis", "branching": 2, "digits": 2},
    {"recipe": "uis", "branching": 2, "digits": 3, "k": 3, "M": 60},
]


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        cfg = ExperimentConfig.from_dict(
            {
                "experiment": "ablate-budget",
                "game_set": GAMES,
                "agents": [{}],
                "budgets": [0, 1, 2, 3, 5],
                "seeds": [0, 1, 2],
                "output_dir": f"{tmp}/ablate",
            }
        )
        rec = run_ablate_budget(cfg)
        print(f"{'budget':>6} {'RHAE':>7} {'solved':>7}  games")
        for row in rec.report["table"]:
            print(f"{row['budget']:>6} {row['rhae']:7.4f} {row['solved']:>7}  {', '.join(row['solved_games'])}")
        for tie in rec.report["equal_score_different_games"]:
            print(f"budgets {tie['budgets']} tie at {tie['rhae']:.4f} with different solved games")

        multi = ExperimentConfig.from_dict(
            {
                "experiment": "multi-run",
                "game_set": [{"recipe": "random-taxonomy", "tiers": ["probe-gated", "coordinate-click", "blind-1"], "seeds": [1, 2]}],
                "agents": [{}],
                "seeds": list(range(8)),
                "n_runs": 8,
                "output_dir": f"{tmp}/multi",
            }
        )
        rec = run_multi(multi)
        r = rec.report
        print(f"\n8 runs: mean {r['mean']:.4f}, std {r['std']:.4f}, 95% CI [{r['ci95'][0]:.4f}, {r['ci95'][1]:.4f}]")
        for game, freq in r["solve_frequency"].items():
            print(f"  {game:<28} solved {freq}")
        for w in r["warnings"]:
            print(f"  warning: {w}")


if __name__ == "__main__":
    main()
