"""Estimate E|X| under a standard Gaussian in d=10 with the multilevel
pathwise-average estimator, end to end: tune, inspect the plan, run, and
compare the measured cost against the closed-form bound.

Run with:  python3 demos/flagship_gaussian.py
"""

import numpy as np

from mlangevin import (
    QuadraticPotential,
    complexity_bound,
    estimate,
    make_langevin_model,
    norm_observable,
    ou_reference_value,
    plan_b2,
)

D = 10
EPS = 0.1


def main():
    model = make_langevin_model(QuadraticPotential(D), "auto")
    plan = plan_b2(model, EPS)

    print(f"target accuracy eps = {EPS}, dimension d = {D}")
    print(f"levels R = {plan.R}, burn-in tau = {plan.tau:.4f}"
          f" (clamped to {plan.tau_effective:.4f})")
    print(f"predicted complexity: {plan.predicted_complexity}")
    print(f"closed-form bound:    {complexity_bound(plan):.1f}")

    out = estimate(model, plan, np.zeros(D), norm_observable(), master_seed=7)
    for message in out.warnings:
        print(f"note: {message}")
    print(f"{'level':>5} {'step':>10} {'horizon':>12} {'iterations':>12}"
          f" {'contribution':>14}")
    for r in range(plan.R + 1):
        print(f"{r:>5} {plan.gamma[r]:>10.6f} {plan.horizons[r]:>12.2f}"
              f" {out.level_iterations[r]:>12}"
              f" {out.level_contributions[r]:>14.6f}")

    truth = ou_reference_value(D)
    print(f"estimate:  {out.estimate:.6f}")
    print(f"reference: {truth:.6f}  (E|Z|, Z standard normal in d={D})")
    print(f"error:     {abs(out.estimate - truth):.6f}  (target {EPS})")
    print(f"iterations used: {out.total_complexity}")


if __name__ == "__main__":
    main()
