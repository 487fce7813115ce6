"""
Random-hyperplane hashing and collision rates
=============================================

Two QoS vectors at angle theta land on the same side of a random hyperplane
with probability 1 - theta/pi. This script draws many hash families and
compares the observed collision rate with that formula.
"""

import numpy as np

from pdsr.lsh import collision_probability, hash_vector, sample_family
from pdsr.synthetic import pair_with_angle

rng = np.random.default_rng(0)

# %%
# One pair per angle, hashed with 4000 independent single-bit families.

print(f"{'theta':>6} {'observed':>9} {'formula':>8}")
for theta in np.linspace(0.0, np.pi / 2, 7):
    u, v = pair_with_angle(theta, dim=20, rng=rng)
    same = 0
    for seed in range(4000):
        family = sample_family(20, 1, seed)
        same += hash_vector(family, u).bits == hash_vector(family, v).bits
    print(f"{theta:6.3f} {same / 4000:9.3f} {collision_probability(theta):8.3f}")

# %%
# A signature of H bits collides only when every bit agrees, so longer
# signatures separate dissimilar services faster than similar ones.

u, v = pair_with_angle(np.pi / 6, dim=20, rng=rng)
for h in (1, 3, 6):
    family = sample_family(20, h, seed=1)
    print(h, hash_vector(family, u).bits, hash_vector(family, v).bits)
