"""Directed-graph node classification with direction- and degree-aware
structural fingerprints and latent-space geometric attention."""

from .fingerprint import (ConvergenceError, Fingerprint, compute_fingerprints, ddrwr_direct,
                          ddrwr_fixed_point, fingerprint, reach_probability_1hop,
                          transition_weights)
from .graph import (DirectedGraph, GraphFormatError, NodeTable, dataset_stats, degrees,
                    khop_subgraph, load_edge_list, load_features, load_labels,
                    stratified_split)
from .harness import (Dataset, RunConfig, RunReport, StageError, ablation_table, preprocess,
                      run_pipeline, sweep, timing_report)
from .latent import (NUM_RELATIONS, LatentEmbedding, RelationPartition, apply_ablation,
                     classical_mds, isomap_embed, partition_neighbors, select_rho)
from .model import (ModelConfig, TrainResult, assemble_input, forward, init_params,
                    loss_and_grads, predict, train)
from .structural import StructuralFeatureMatrix, build_structural_features, weighted_jaccard
from .synthetic import SyntheticSpec, generate_synthetic

__version__ = "0.1.0"
