"""How fast the public belief learns, model by model.

The all-correct path ell* iterates ell -> ell + D_plus(ell) and is the
deterministic backbone of the dynamics.  Its growth is governed by the
left tail of the private-signal distribution and matches the ODE
f' = G_minus(-f):

  * exponential-ish Gaussian tails give the slow sqrt(log t) rate,
  * polynomial tails of order k give t^(1/(k+1)),
  * a discrete model can be reverse-engineered to hit a target rate
    such as t / log t.
"""

import math

import numpy as np

from herdsim import (
    GaussianSignalModel,
    PolyTailSignalModel,
    build_rate_target,
    ell_star_path,
    gaussian_rate_prediction,
    solve_belief_ode,
)

HORIZON = 10**6
decades = [10**3, 10**4, 10**5, 10**6]

print("=== Gaussian sigma=1: ell* vs (2 sqrt(2)/sigma) sqrt(log t) ===")
g = GaussianSignalModel(sigma=1.0)
path = ell_star_path(g, HORIZON)
for t in decades:
    pred = gaussian_rate_prediction(1.0, t)
    print(f"  t={t:>8d}  ell*={path.values[t-1]:8.4f}  pred={pred:8.4f}  ratio={path.values[t-1]/pred:.4f}")

print("\n=== PolyTail k=2: ell* vs the ODE solution (~ t^(1/3)) ===")
pt = PolyTailSignalModel(k=2.0)
path = ell_star_path(pt, HORIZON)
sol = solve_belief_ode(pt, t0=100.0, f0=float(path.values[99]), horizon=float(HORIZON))
for t in decades:
    f = sol(float(t))
    print(f"  t={t:>8d}  ell*={path.values[t-1]:9.3f}  f_ode={f:9.3f}  ratio={path.values[t-1]/f:.4f}")

print("\n=== RateTarget from Q(x) = 1/log(x+e): ell* vs t/log t ===")
rt = build_rate_target(lambda n: 1.0 / math.log(n + 2.0 + math.e), max_support=200000)
path = ell_star_path(rt, HORIZON)
for t in decades:
    r_t = t / math.log(t)
    print(f"  t={t:>8d}  ell*={path.values[t-1]:11.1f}  t/log t={r_t:11.1f}  ratio={path.values[t-1]/r_t:.4f}")

print("\n=== sublinearity: ell*/t -> 0 for every model ===")
for name, model in (("gaussian", g), ("polytail", pt), ("ratetarget", rt)):
    path = ell_star_path(model, HORIZON)
    ratios = "  ".join(f"{path.values[t-1]/t:.2e}" for t in decades)
    print(f"  {name:>10s}: {ratios}")
