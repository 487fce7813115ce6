"""
Building the service-similarity graph
=====================================

Services whose concatenated per-platform signatures agree in any of T rounds
are linked. The expansion ratio of a subset (itself plus its neighbours, over
all services) measures how much of the catalogue a recommendation list
"touches".
"""

import numpy as np

from pdsr.data import SplitSpec, normalize, split_platforms
from pdsr.graph import SimilarityGraph, build_graph, expansion_ratio
from pdsr.lsh import edge_probability
from pdsr.synthetic import make_response_times

# %%
# A small 13-vertex graph with two subsets of three services each.

edges = [(0, 3), (1, 3), (2, 3), (0, 4), (1, 5), (2, 6), (2, 7), (8, 4), (8, 9), (12, 10), (12, 11)]
g = SimilarityGraph.from_edges(13, edges)
print(expansion_ratio(g, {0, 1, 2}), 8 / 13)
print(expansion_ratio(g, {3, 8, 12}), 10 / 13)

# %%
# On synthetic response times, more bits per platform (H) make edges rarer
# and more rounds (T) make them more common.

matrix = normalize(make_response_times(n_users=120, n_services=400, seed=0))
split = split_platforms(matrix, SplitSpec(platform_user_counts=(50, 70), targets_per_platform=0))
for h, t in ((3, 3), (6, 3), (6, 9)):
    graph = build_graph(split.platforms, [h, h], t, seed=0)
    print(f"H={h} T={t}", graph.stats())

# %%
# Edge probability for a pair at angles (0.3, 0.5) rad on the two platforms.

print(edge_probability([0.3, 0.5], [6, 6], 9))
