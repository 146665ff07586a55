# SDEdit and DDIM-inversion editing, and what they cost.

import numpy as np

from vciedit import EditRequest, FeatureEmbedder, GMMDenoiser, GuidanceConfig, feature_distance, run_edit, two_class_gmm
from vciedit.config import DESK_SCHEDULE
from vciedit.schedule import build_schedule, select_timesteps

schedule = build_schedule(**DESK_SCHEDULE)
gmm = two_class_gmm(dim=8, separation=4.0, spread=1.0)
den = GMMDenoiser(gmm, schedule)
emb = FeatureEmbedder(8, seed=0)
x0 = gmm.mixture(0).sample(np.random.default_rng(1), 1)[0]

# SDEdit: the later we start, the further the result wanders
grid = select_timesteps(1000, 50)
for t_start in (250, 500, 750):
    d = np.mean([
        feature_distance(emb, run_edit(EditRequest(x0, 0, 1, grid, mode="sdedit", t_start=t_start,
                                                   guidance=GuidanceConfig(1.0, 1.0), seed=s), den, schedule).output, x0)
        for s in range(50)
    ])
    print(f"sdedit t_start={t_start}: mean feature distance {d:.3f}")

# the evaluation budget of each method at the default guidance (3, 15)
for mode, steps, t_start in (("control_vci", 8, None), ("ddim_inversion", 200, 800), ("sdedit", 200, 500)):
    req = EditRequest(x0, 0, 1, select_timesteps(1000, steps), mode=mode, t_start=t_start)
    res = run_edit(req, den, schedule)
    print(f"{mode:>15}: nfe {res.nfe:4d}, {res.wall_time * 1e3:.1f} ms")
