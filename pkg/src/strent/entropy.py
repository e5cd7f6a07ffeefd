"""Entropy of a label distribution under a weighted family of coarsenings.

The central quantity averages the Shannon entropy of the coarsened
distribution over the partitions of a :class:`~strent.partitions.RandomPartition`:

    H_rp(p) = sum_i  w_i * H(p coarsened by partition i)

All derived quantities (conditional, relative, mutual, joint) follow the same
pattern: compute the standard quantity at each pair of coarsenings and take
the weight-averaged sum.  ``base=None`` means natural log (nats); pass
``base=2`` for bits.
"""

import math

import numpy as np

from ._validation import check_joint_table, check_prob_vector
from .partitions import Partition, RandomPartition

__all__ = [
    "shannon_entropy",
    "structured_entropy",
    "conditional_structured_entropy",
    "structured_relative_entropy",
    "structured_mutual_information",
    "joint_structure",
    "joint_structured_entropy",
    "max_entropy_three_state",
]


def _log_scale(base):
    if base is None:
        return 1.0
    if base <= 0 or base == 1:
        raise ValueError(f"invalid log base {base}")
    return 1.0 / math.log(base)


def _plogp_sum(p):
    """-sum p*log(p) in nats, with 0*log(0) = 0."""
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def shannon_entropy(dist, base=None):
    """Shannon entropy of a probability vector; non-negative."""
    dist = check_prob_vector(dist)
    return _plogp_sum(dist) * _log_scale(base)


def structured_entropy(dist, rp, base=None):
    """Weight-averaged entropy of ``dist`` across the coarsenings in ``rp``.

    Equals the plain Shannon entropy under the trivial (all-singletons)
    random partition, and never exceeds it.
    """
    dist = check_prob_vector(dist, rp.num_classes)
    total = 0.0
    for part, w in rp:
        if w == 0.0:
            continue
        block_mass = np.bincount(part.block_index, weights=dist, minlength=part.num_blocks)
        total += w * _plogp_sum(block_mass)
    return total * _log_scale(base)


def _conditional_entropy_nats(joint):
    """Standard H(col | row) of a joint table, in nats.

    Rows with zero marginal mass are skipped: their conditional distribution
    is undefined and they carry no weight.
    """
    row_mass = joint.sum(axis=1)
    h = 0.0
    for a in range(joint.shape[0]):
        if row_mass[a] <= 0.0:
            continue
        h += row_mass[a] * _plogp_sum(joint[a] / row_mass[a])
    return h


def _coarsen_joint(joint, part_rows, part_cols):
    """Aggregate a joint table into block-by-block cell masses."""
    return part_rows.membership @ joint @ part_cols.membership.T


def conditional_structured_entropy(joint, w_on_x, z_on_y, base=None):
    """Conditional entropy of the column variable given the row variable,
    averaged over both families of coarsenings.

    ``joint`` is |S_X| x |S_Y| with rows indexing the conditioning variable.
    """
    joint = check_joint_table(joint)
    _check_joint_dims(joint, w_on_x, z_on_y)
    total = 0.0
    for px, r in w_on_x:
        if r == 0.0:
            continue
        for py, q in z_on_y:
            if q == 0.0:
                continue
            total += r * q * _conditional_entropy_nats(_coarsen_joint(joint, px, py))
    return total * _log_scale(base)


def structured_relative_entropy(p, q, rp, base=None):
    """Weight-averaged KL divergence between the coarsened distributions.

    Returns ``inf`` when some block carries p-mass but no q-mass under a
    positive-weight partition (the divergence is infinite by convention).
    """
    p = check_prob_vector(p, rp.num_classes)
    q = check_prob_vector(q, rp.num_classes)
    total = 0.0
    for part, w in rp:
        if w == 0.0:
            continue
        pb = part.coarsen_dist(p)
        qb = part.coarsen_dist(q)
        mask = pb > 0
        if np.any(qb[mask] == 0.0):
            return math.inf
        total += w * float((pb[mask] * np.log(pb[mask] / qb[mask])).sum())
    return total * _log_scale(base)


def structured_mutual_information(joint, w_on_x, z_on_y, base=None):
    """Blended mutual information between the row and column variables.

    Computed as H(Y_blend) - H(Y_blend | X_blend); symmetric in the two
    variable/partition pairs up to float round-off.
    """
    joint = check_joint_table(joint)
    _check_joint_dims(joint, w_on_x, z_on_y)
    y_marginal = joint.sum(axis=0)
    h_y = structured_entropy(y_marginal, z_on_y)
    h_y_given_x = conditional_structured_entropy(joint, w_on_x, z_on_y)
    return (h_y - h_y_given_x) * _log_scale(base)


def _product_partition(part_rows, part_cols):
    """Partition of the flattened product space (row * k_cols + col)."""
    k_cols = part_cols.num_classes
    blocks = tuple(
        tuple(sorted(a * k_cols + b for a in A for b in B))
        for A in part_rows.blocks
        for B in part_cols.blocks
    )
    return Partition(blocks, part_rows.num_classes * k_cols)


def joint_structure(w_on_x, z_on_y):
    """Product random partition on the flattened (row, col) space.

    Each pair of partitions yields one product partition with blocks
    {(a, b): a in A, b in B} and weight r_i * q_j; the flat index of a pair
    is ``row * k_cols + col``, matching ``joint.ravel()``.
    """
    parts = []
    weights = []
    for px, r in w_on_x:
        for py, q in z_on_y:
            parts.append(_product_partition(px, py))
            weights.append(r * q)
    return RandomPartition(tuple(parts), tuple(weights))


def joint_structured_entropy(joint, w_on_x, z_on_y, base=None):
    """Blended entropy of the pair (row, col) under the product structure."""
    joint = check_joint_table(joint)
    _check_joint_dims(joint, w_on_x, z_on_y)
    return structured_entropy(joint.ravel(), joint_structure(w_on_x, z_on_y), base=base)


def _check_joint_dims(joint, w_on_x, z_on_y):
    if joint.shape[0] != w_on_x.num_classes:
        raise ValueError(
            f"joint has {joint.shape[0]} rows but row partition expects "
            f"{w_on_x.num_classes}"
        )
    if joint.shape[1] != z_on_y.num_classes:
        raise ValueError(
            f"joint has {joint.shape[1]} columns but column partition expects "
            f"{z_on_y.num_classes}"
        )


def max_entropy_three_state(q1):
    """Maximizer of the blended entropy for the 3-class example structure
    {singletons: q1, {{0,1},{2}}: 1-q1}, with base-2 logs.

    Closed form: p0 = p1 = 1 / (2 * (1 + 2**(-q1))), the rest on class 2.
    At q1=1 this is the uniform distribution; at q1=0 it is (.25, .25, .5).
    """
    if not 0.0 <= q1 <= 1.0:
        raise ValueError(f"q1 must lie in [0, 1], got {q1}")
    p1 = 1.0 / (2.0 * (1.0 + 2.0 ** (-q1)))
    return np.array([p1, p1, 1.0 - 2.0 * p1])
