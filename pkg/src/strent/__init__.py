"""Structured entropy, structured losses, and boosting that uses them.

A random partition assigns probabilities to partitions of the label set;
entropies, divergences and cross-entropy losses computed through it reward
a classifier for being close in structure, not just exactly right.  The
package provides the information-theoretic quantities, the loss with its
gradient and diagonal Hessian, builders for hierarchical / circular /
graph-based structures, and a gradient-boosting classifier that trains
against either a fixed or a per-round resampled structured loss.
"""

from .boosting import StructuredGradientBoostingClassifier
from .datasets import (
    load_cifar100_hierarchy,
    make_circular_dataset,
    make_grid_dataset,
    save_dataset_csv,
)
from .entropy import (
    conditional_structured_entropy,
    joint_structure,
    joint_structured_entropy,
    max_entropy_three_state,
    shannon_entropy,
    structured_entropy,
    structured_mutual_information,
    structured_relative_entropy,
)
from .losses import (
    GradHess,
    coarsened_accuracy,
    log_loss,
    softmax,
    structured_grad_hess,
    structured_log_loss,
)
from .partitions import (
    BlockUnionDist,
    Partition,
    PartitionError,
    RandomPartition,
    random_block_dist,
)
from .structures import (
    Graph,
    HierarchySpec,
    VariableGraphStructure,
    circular_structure,
    hierarchy_structure,
    random_connected_partition,
    read_graph_file,
    read_hierarchy_file,
    variable_random_partition,
    wilson_spanning_tree,
)

__version__ = "0.1.0"

__all__ = [
    "BlockUnionDist",
    "GradHess",
    "Graph",
    "HierarchySpec",
    "Partition",
    "PartitionError",
    "RandomPartition",
    "StructuredGradientBoostingClassifier",
    "VariableGraphStructure",
    "circular_structure",
    "coarsened_accuracy",
    "conditional_structured_entropy",
    "hierarchy_structure",
    "joint_structure",
    "joint_structured_entropy",
    "load_cifar100_hierarchy",
    "log_loss",
    "make_circular_dataset",
    "make_grid_dataset",
    "max_entropy_three_state",
    "random_block_dist",
    "random_connected_partition",
    "read_graph_file",
    "read_hierarchy_file",
    "save_dataset_csv",
    "shannon_entropy",
    "softmax",
    "structured_entropy",
    "structured_grad_hess",
    "structured_log_loss",
    "structured_mutual_information",
    "structured_relative_entropy",
    "variable_random_partition",
    "wilson_spanning_tree",
]
