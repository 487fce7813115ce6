"""
Accuracy versus diversity in a top-K list
=========================================

The greedy selector trades predicted QoS against coverage of the similarity
graph (weighted by lambda) and pairwise Jaccard distance (lambda * xi). On
small pools it can be compared with the exhaustive optimum.
"""

import numpy as np

from pdsr.data import SplitSpec, normalize, split_platforms
from pdsr.graph import build_graph
from pdsr.recommend import RecommendationQuery, brute_force_topk, build_pool, greedy_topk, objective_F
from pdsr.synthetic import make_response_times

matrix = normalize(make_response_times(n_users=120, n_services=600, seed=2))
split = split_platforms(matrix, SplitSpec(platform_user_counts=(50, 70), targets_per_platform=3, seed=1))
graph = build_graph(split.platforms, [6, 6], 9, seed=4)
platform = split.platform(1)
user = split.targets[1][0].user

# %%
# Raising lambda pulls the list away from the top predictions.

for lam in (0.0, 0.1, 0.4, 1.0):
    rec = greedy_topk(graph, platform, RecommendationQuery(user, 1, k=5, lam=lam, xi=0.3))
    print(f"lambda={lam:<4}", rec.services, np.round(rec.predicted, 3))

# %%
# Greedy against brute force on a ten-candidate pool.

pool = build_pool(graph, platform, user)
small = pool.restrict(pool.candidates[:10].tolist())
query = RecommendationQuery(user, 1, k=4, lam=0.3, xi=0.3)
best = brute_force_topk(graph, platform, query, pool=small)
picked = greedy_topk(graph, platform, query, pool=small).services
print("optimum", best.services, round(best.value, 4))
print("greedy ", picked, round(objective_F(graph, small, picked, query.lam, query.xi), 4))
