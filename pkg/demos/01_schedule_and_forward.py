# Noise schedules and the forward process.
#
# A schedule is just the list of betas; everything else (alpha, alpha_bar,
# the posterior variance) follows from it.

import numpy as np

from vciedit import build_schedule, forward_marginal, forward_step, select_timesteps

tiny = build_schedule("linear", T=3, beta_min=0.1, beta_max=0.3)
print(tiny.to_csv())  # alpha_bar = 0.9, 0.72, 0.504

# one noising step from x=[1,0] with noise [0,1]
print(forward_step(np.array([1.0, 0.0]), 1, np.array([0.0, 1.0]), tiny))  # [0.9487, 0.3162]

# the closed form jumps straight to t
print(forward_marginal(np.array([1.0, 0.0]), 2, np.array([0.0, 1.0]), tiny))  # [0.8485, 0.5292]

# iterating single steps agrees with the closed form in distribution
rng = np.random.default_rng(0)
x = np.zeros((100_000, 2))
for t in (1, 2, 3):
    x = forward_step(x, t, rng.standard_normal(x.shape), tiny)
print("variance of x_3:", x.var(axis=0), "expected", 1 - tiny.alpha_bar(3))

# the long schedules
for kind, lo, hi in (("linear", 1e-4, 0.02), ("scaled_linear", 0.00085, 0.012), ("cosine", 1e-4, 0.02)):
    s = build_schedule(kind, 1000, lo, hi)
    print(f"{kind:>14}: alpha_bar_T = {s.alpha_bar(1000):.2e}")

# an 8-step grid, evenly spaced and ending next to the clean end
print(select_timesteps(1000, 8).steps)
