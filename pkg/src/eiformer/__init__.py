"""Spatial-temporal forecasting over entity sets of any size.

The core model embeds each entity's history as one token and routes it
through fixed-size latent attention, so compute and memory grow linearly
in the number of entities and a trained model can be applied to entity
sets it never saw. Baselines, synthetic scenario data, training, metric
evaluation, representation-similarity analysis, and a scaling benchmark
live in the subpackages.
"""

__version__ = "0.1.0"
