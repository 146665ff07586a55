# Fidelity and alignment metrics.

import numpy as np

from vciedit import EmbeddingSet, FeatureEmbedder, alignment_score, feature_distance, frechet_distance, pearson_cc, two_class_gmm

rng = np.random.default_rng(0)

# Frechet distance between Gaussian summaries
a = EmbeddingSet(np.zeros(2), np.diag([1.0, 4.0]))
b = EmbeddingSet(np.zeros(2), np.diag([4.0, 1.0]))
print("diag(1,4) vs diag(4,1):", frechet_distance(a, b))  # 2
x = EmbeddingSet.fit(rng.standard_normal((100_000, 2)))
y = EmbeddingSet.fit(rng.standard_normal((100_000, 2)) + [3, 4])
print("shifted by (3,4):", frechet_distance(x, y))  # about 25

# correlation
print(pearson_cc([1, 2, 3], [1, 2, 3]), pearson_cc([1, 2, 3], [3, 2, 1]), pearson_cc([1, 2, 3, 4], [1, 2, 3, 5]))

# point-to-point feature distance through a fixed random network
emb = FeatureEmbedder(dim=4, depth=3, width=16, seed=0)
u, v = rng.standard_normal((2, 4))
print("d(u,v) =", feature_distance(emb, u, v), " d(v,u) =", feature_distance(emb, v, u))

# alignment = log posterior of the class under the known mixture
gmm = two_class_gmm(dim=2, separation=1.0, spread=0.5)
for s in np.linspace(0, 1, 5):
    p = (1 - s) * gmm.mixture(0).means[0] + s * gmm.mixture(1).means[0]
    print(f"s={s:.2f}: log p(class 1 | x) = {alignment_score(gmm, p, 1):.4f}")
