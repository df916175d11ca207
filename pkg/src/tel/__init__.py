"""Minimum-spanning-tree filtering and tree energy loss for sparsely
annotated segmentation.

The pipeline: build a 4-connected grid over an image, contract it to
its minimum spanning tree, filter per-pixel fields along the tree with
exponential path-length affinities, and use cascaded filtered
predictions as soft pseudo labels next to a partial cross entropy on
the few labeled pixels.  Everything is exactly differentiable; a small
self-training demo ties it together.
"""

from .annotations import (SparsityConfig, boundary_distance,
                          sample_point_annotation, sample_scribble_annotation,
                          synth_block_annotation, synthesize)
from .backend import HAVE_COMPILED, active_name, get_backend, set_backend
from .errors import (ArgumentError, CapacityError, ContractError, FormatError,
                     StructuralError, TelError, ValidationError)
from .filter import (FilterWorkspace, Transmittances, dense_distance,
                     dense_filter, transmittances, tree_filter,
                     tree_filter_backward, tree_filter_forward)
from .grid import EdgeList, build_edges, edge_weights, weighted_grid
from .losses import (SIGMA_HIGH, LossConfig, LossResult, cascaded_pseudo_label,
                     partial_cross_entropy, total_loss, tree_energy_loss)
from .mst import RootedTree, boruvka_mst, kruskal_mst, mst_tree, root_tree
from .tensors import (IGNORE, DenseTensor, LabelMap, load_image,
                      load_label_map, load_tensor, save_image, save_label_map,
                      save_tensor)
from .toy import (EvalResult, StepMetrics, ToyModel, TrainConfig,
                  build_low_stage, checkerboard_fixture, descriptors,
                  evaluate, forward, init_model, load_checkpoint,
                  run_training, save_checkpoint, train_step,
                  two_region_fixture, write_metrics_csv)

__version__ = "0.1.0"
