# The phi sweep behind the fidelity/alignment trade-off curve.
#
# The same table comes out of `vciedit sweep`; here we build the config in code.

import numpy as np

from vciedit import harness
from vciedit.config import RunConfig

config = RunConfig(seeds_per_point=100).with_edit(w_src=1.0, w_tgt=1.0)
table = harness.run_sweep(config, workers=4)
print(table.to_csv())

phi = table.column("value")
print("spearman(phi, feature distance):", harness.spearman(phi, table.column("feature_distance")))
print("spearman(phi, alignment)       :", harness.spearman(phi, table.column("alignment")))

# the benchmark: exact evaluation counts, measured wall time
print(harness.bench(RunConfig()).to_csv(timing=True))
