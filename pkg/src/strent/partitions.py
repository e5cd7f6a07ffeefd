"""Partitions of a finite label set and distributions over them.

A :class:`Partition` splits the class indices ``0..k-1`` into disjoint
non-empty blocks.  A :class:`RandomPartition` assigns probability weights to a
family of partitions of the same label set; it is the object that "blends"
several coarsenings of the labels into one view.  Both are immutable value
types: equal contents compare equal regardless of the order blocks or
partitions were supplied in.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._validation import PROB_ATOL, check_prob_vector

__all__ = [
    "Partition",
    "RandomPartition",
    "BlockUnionDist",
    "PartitionError",
    "random_block_dist",
]


class PartitionError(ValueError):
    """Raised when a block family is not a valid partition of 0..k-1."""


def _canonical_blocks(blocks, num_classes):
    """Validate and canonicalize a block family covering 0..num_classes-1.

    Canonical form: members ascending within each block, blocks ordered by
    smallest member.  Raises :class:`PartitionError` on empty blocks, repeated
    or out-of-range indices, or missed indices.
    """
    if num_classes < 1:
        raise PartitionError(f"num_classes must be >= 1, got {num_classes}")
    seen = [False] * num_classes
    cleaned = []
    for block in blocks:
        members = sorted(block)
        if not members:
            raise PartitionError("empty block in partition")
        for y in members:
            if not isinstance(y, (int, np.integer)):
                raise PartitionError(f"class index {y!r} is not an integer")
            if y < 0 or y >= num_classes:
                raise PartitionError(
                    f"class index {y} out of range [0, {num_classes})"
                )
            if seen[y]:
                raise PartitionError(f"class index {y} appears in two blocks")
            seen[y] = True
        cleaned.append(tuple(int(y) for y in members))
    missing = [y for y in range(num_classes) if not seen[y]]
    if missing:
        raise PartitionError(f"class index {missing[0]} not covered by any block")
    cleaned.sort(key=lambda b: b[0])
    return tuple(cleaned)


@dataclass(frozen=True)
class Partition:
    """A partition of the class indices ``0..num_classes-1`` into blocks.

    Blocks are stored canonically (sorted by smallest member, members
    ascending), so two partitions with the same blocks compare and hash equal
    however they were constructed.
    """

    blocks: tuple
    num_classes: int

    def __post_init__(self):
        object.__setattr__(
            self, "blocks", _canonical_blocks(self.blocks, self.num_classes)
        )

    @classmethod
    def singletons(cls, num_classes):
        """The all-singletons partition {{0}, {1}, ..., {k-1}}."""
        return cls(tuple((i,) for i in range(num_classes)), num_classes)

    @classmethod
    def one_block(cls, num_classes):
        """The single-block partition {{0, ..., k-1}}."""
        return cls((tuple(range(num_classes)),), num_classes)

    @property
    def num_blocks(self):
        return len(self.blocks)

    @cached_property
    def block_index(self):
        """int64 array mapping each class index to its block index."""
        idx = np.empty(self.num_classes, dtype=np.int64)
        for b, members in enumerate(self.blocks):
            for y in members:
                idx[y] = b
        idx.setflags(write=False)
        return idx

    @cached_property
    def membership(self):
        """num_blocks x num_classes 0/1 float matrix; row b marks block b."""
        A = np.zeros((self.num_blocks, self.num_classes))
        for b, members in enumerate(self.blocks):
            A[b, list(members)] = 1.0
        A.setflags(write=False)
        return A

    def block_of(self, y):
        """Index of the unique block containing class ``y``."""
        if not 0 <= y < self.num_classes:
            raise PartitionError(
                f"class index {y} out of range [0, {self.num_classes})"
            )
        return int(self.block_index[y])

    def coarsen_labels(self, y):
        """Map an array of class labels to their block indices."""
        y = np.asarray(y, dtype=np.int64)
        return self.block_index[y]

    def coarsen_dist(self, dist):
        """Aggregate a class distribution into block masses."""
        dist = check_prob_vector(dist, self.num_classes)
        return np.bincount(self.block_index, weights=dist, minlength=self.num_blocks)

    def is_singletons(self):
        return all(len(b) == 1 for b in self.blocks)

    def __repr__(self):
        body = ", ".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)
        return f"Partition([{body}], k={self.num_classes})"


@dataclass(frozen=True)
class RandomPartition:
    """A weighted family of partitions of the same label set.

    Weights are non-negative and sum to 1 (within ``PROB_ATOL``).  Duplicate
    partitions are allowed and are not merged: callers control the family.
    """

    partitions: tuple
    weights: tuple

    def __post_init__(self):
        parts = tuple(self.partitions)
        weights = tuple(float(w) for w in self.weights)
        if not parts:
            raise PartitionError("random partition needs at least one partition")
        if len(parts) != len(weights):
            raise PartitionError(
                f"{len(parts)} partitions but {len(weights)} weights"
            )
        k = parts[0].num_classes
        for p in parts:
            if not isinstance(p, Partition):
                raise PartitionError(f"expected Partition, got {type(p).__name__}")
            if p.num_classes != k:
                raise PartitionError(
                    f"partitions disagree on num_classes: {p.num_classes} != {k}"
                )
        if any(w < 0 for w in weights):
            raise PartitionError("weights must be non-negative")
        total = sum(weights)
        if abs(total - 1.0) > PROB_ATOL:
            raise PartitionError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "partitions", parts)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def trivial(cls, num_classes):
        """The all-singletons partition with probability one."""
        return cls((Partition.singletons(num_classes),), (1.0,))

    @property
    def num_classes(self):
        return self.partitions[0].num_classes

    def __len__(self):
        return len(self.partitions)

    def __iter__(self):
        return iter(zip(self.partitions, self.weights))

    def is_trivial(self):
        """True when all weight sits on all-singletons partitions."""
        return all(p.is_singletons() for p, w in self if w > 0)


@dataclass(frozen=True)
class BlockUnionDist:
    """Distribution of the sampled block over the union of all blocks.

    ``blocks[i]`` occurs with probability ``probs[i]``; blocks shared by
    several partitions appear once, with their probabilities merged.
    """

    blocks: tuple
    probs: np.ndarray = field(compare=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def as_dict(self):
        return {b: float(p) for b, p in zip(self.blocks, self.probs)}


def random_block_dist(rp, dist):
    """Distribution of the random block: sample a partition, then read off
    the block containing a label drawn from ``dist``.

    P(block B) sums partition_weight * P(Y in B) over every partition that
    contains B; identical blocks from different partitions are merged.
    """
    dist = check_prob_vector(dist, rp.num_classes)
    acc = {}
    for part, w in rp:
        for members in part.blocks:
            mass = w * dist[list(members)].sum()
            acc[members] = acc.get(members, 0.0) + mass
    blocks = tuple(sorted(acc))
    probs = np.array([acc[b] for b in blocks])
    return BlockUnionDist(blocks, probs)
