"""One herding trajectory, step by step.

Agents act in sequence; each sees a private log-likelihood ratio (LLR)
about the binary state and the actions of everyone before them.  The
public belief summarizes the action history as a log odds ell.  This demo
simulates one trajectory, prints how ell moves after each early action,
and decomposes the action sequence into runs separated by upsets.
"""

import numpy as np

from herdsim import (
    GaussianSignalModel,
    StateOfWorld,
    d_minus,
    d_plus,
    extract_runs_and_upsets,
    public_belief,
    simulate_trajectory,
)

model = GaussianSignalModel(sigma=1.0)
theta = StateOfWorld.PLUS

print("signal model:", model)
print("true state:  +1")
print("increment when +1 observed at ell=0:", float(d_plus(model, 0.0)))
print("increment when -1 observed at ell=0:", float(d_minus(model, 0.0)))
print()

traj, stats = simulate_trajectory(model, theta, horizon=200, master_seed=7, trial_index=0)

ell = 0.0
print(" t  action   ell before   public belief")
for t, a in enumerate(traj.actions[:12], start=1):
    print(f"{t:2d}    {a:+d}    {ell:+9.4f}    {float(public_belief(ell)):.4f}")
    incr = d_plus(model, ell) if a > 0 else d_minus(model, ell)
    ell += float(incr)
print()

print("first mistake at t =", stats.t_first_mistake, "(0 means never)")
print("last mistake at t  =", stats.t_last_mistake)
print("upsets (action flips):", stats.upsets)
print("longest correct run:", stats.max_good_run, " longest wrong run:", stats.max_bad_run)

dec = extract_runs_and_upsets(traj.actions, theta)
print("\nrun decomposition (first 8 blocks):")
for block in dec.blocks[:8]:
    kind = "good" if block.good else "bad "
    print(f"  start {block.start:3d}  length {block.length:3d}  {kind}")

ckpts = dict(traj.ell_checkpoints)
print("\npublic log odds at checkpoints:")
for t in sorted(ckpts):
    print(f"  t={t:4d}  ell={ckpts[t]:+8.4f}  belief={float(public_belief(ckpts[t])):.6f}")
