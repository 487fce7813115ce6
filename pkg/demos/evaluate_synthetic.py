"""
End-to-end evaluation without downloads
=======================================

Runs split, indexing, graph, prediction and selection on a WS-DREAM-shaped
synthetic matrix and prints the metrics CSV the CLI writes. The candidate
scope matters a great deal here: with ``unrated`` most recommended services
have no ground truth, with ``holdout`` every one does.
"""

import dataclasses

from pdsr.pipeline import PipelineConfig, metrics_csv, run_pipeline

config = PipelineConfig(
    dataset="synthetic-wsdream",
    synthetic_services=1500,
    repetitions=3,
    lam_by_platform={1: 0.1, 2: 0.3},
    record_seconds=False,
)

# %%
print(metrics_csv(run_pipeline(config), record_seconds=False))

# %%
held = dataclasses.replace(config, candidates="holdout")
print(metrics_csv(run_pipeline(held), record_seconds=False))
