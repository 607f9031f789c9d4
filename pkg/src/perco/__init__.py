"""Multi-range Bernoulli percolation on oriented d-ary trees."""

from .explorer import (
    cluster_bfs,
    exit_sets,
    explore,
    explore_short,
    level_count,
    recursive_cluster,
    survives,
)
from .sampler import ConfigSample, derive_seed, edge_state, new_config
from .tree import ROOT, Edge, Kind, ModelParams, SeedSet, ancestry, concat, shift, trace

__version__ = "0.1.0"
