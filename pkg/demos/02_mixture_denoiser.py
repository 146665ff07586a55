# The analytic denoiser.
#
# For a known Gaussian mixture the optimal noise predictor is the scaled score
# of the diffused mixture, so we never train anything.

import numpy as np

from vciedit import GMMDenoiser, cfg_predict, gmm_predict_noise, score_oracle_fd, two_class_gmm
from vciedit.schedule import build_schedule

schedule = build_schedule("linear", 1000, 1e-4, 0.02)
gmm = two_class_gmm(dim=2, separation=2.0, spread=0.25)  # class 0 on the left, class 1 on the right

x = np.array([0.3, -0.4])
t = 250
exact = gmm_predict_noise(gmm, x, t, 1, schedule).eps
fd = score_oracle_fd(gmm, x, t, 1, 1e-4, schedule)
print("closed form    :", exact)
print("finite diff    :", fd)
print("max difference :", np.abs(exact - fd).max())

# classifier-free guidance mixes conditional and unconditional predictions;
# at w=1 it is the conditional branch and costs a single evaluation
den = GMMDenoiser(gmm, schedule)
for w in (0.0, 1.0, 3.0, 15.0):
    p = cfg_predict(den, x, t, 1, w)
    print(f"w={w:>4}: eps={p.eps}, nfe={p.nfe_cost}")
