"""Two-hypothesis toy game: what one probe buys.

A probe costs one action and settles which of two rules holds.  Skipping it
means guessing: right, the plan costs k; wrong, M actions are wasted.  This
script sweeps the probe probability p and compares Monte-Carlo episodes with
the closed-form curve.
"""

import math

from rulearena.env import estar_spec
from rulearena.harness import estar_policy_summaries, summaries_rhae
from rulearena.scoring import LN2, convexity_certificate, estar_A_of_p, estar_curve, pareto_frontier, speed_depth

K, M, EPISODES = 5, 100, 10_000


def main() -> None:
    spec = estar_spec(K, M)
    curve = estar_curve(K, M)
    print(f"toy game k={K}, M={M}: A(p) = {curve.c0} - {curve.c0 - estar_A_of_p(curve, 1):.1f} p")
    print(f"{'p':>5} {'mean A':>8} {'A(p)':>8} {'z':>6} {'Speed':>8} {'Depth':>7} {'RHAE':>7}")
    points = []
    for p in (0.0, 0.25, 0.5, 0.75, 1.0):
        runs = estar_policy_summaries(spec, p, EPISODES)
        pt = speed_depth(runs, label=f"p={p:g}")
        points.append(pt)
        mean_a, sem = pt.stats["mean_actions"], pt.stats["sem_actions"]
        exact = estar_A_of_p(curve, p)
        z = abs(mean_a - exact) / sem if sem else 0.0
        print(f"{p:5.2f} {mean_a:8.2f} {exact:8.2f} {z:6.2f} {pt.speed:8.4f} {pt.depth:7.4f} {summaries_rhae(runs, 6):7.4f}")

    # Speed and Depth both rise with p here, so always probing dominates
    front = [p.label for p in pareto_frontier(points)]
    print(f"\nnon-dominated policies: {front}")
    cert = convexity_certificate(curve.sample(101))
    print(f"S(D) convex on [0, ln 2]: {bool(cert)} (min second difference {cert.min_second_difference:.3g})")
    print(f"S(ln 2) = {curve.speed(LN2):.6f} = 1/{1 / curve.speed(LN2):.0f}; S(0) = 1/{1 / curve.speed(0.0):.1f}")
    assert math.isclose(curve.speed(LN2), 1 / 6)


if __name__ == "__main__":
    main()
