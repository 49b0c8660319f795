"""The first mistake: rare, but heavy-tailed.

Along the all-correct path the probability that agent t is the first to
act wrongly is an exact product of survival terms — no simulation needed.
For Gaussian signals the tail of this distribution is so heavy that the
expected first-mistake time diverges: the truncated mean keeps growing
with the horizon and never settles.
"""

import numpy as np

from herdsim import GaussianSignalModel, first_mistake_distribution

model = GaussianSignalModel(sigma=1.0)
HORIZON = 10**6

dist = first_mistake_distribution(model, HORIZON)
t = np.arange(1, HORIZON + 1)

print("P(no mistake within 1e6 steps):", f"{dist.survivor_mass:.4f}")
print("P(T1 = 1)                     :", f"{dist.pmf[0]:.4f}")
print()

print("tail of the first-mistake law:")
for T in (10, 10**2, 10**3, 10**4, 10**5):
    mass = float(np.sum(dist.pmf[T:]))
    print(f"  P(T1 > {T:>6d}, within horizon) = {mass:.3e}")

sel = t >= 100
slope = np.polyfit(np.log10(t[sel]), np.log10(dist.pmf[sel]), 1)[0]
print(f"\nlog-log slope of P(T1 = t) over [1e2, 1e6]: {slope:.3f}")
print("(a slope above -2 means sum t * P(T1 = t) diverges)")

print("\ntruncated mean sum_(t<=H) t P(T1 = t) by horizon:")
running = np.cumsum(t * dist.pmf)
for H in (10**3, 10**4, 10**5, 10**6):
    print(f"  H={H:>8d}: {running[H-1]:.4f}")
print("the running mean grows without bound: E[T1] = infinity")
