"""Builders that turn domain structure into random partitions.

Three sources are supported: leveled hierarchies (one partition per level),
circular label layouts (rotated contiguous windows), and adjacency graphs.
For graphs, a partition into connected blocks is drawn by sampling a uniform
spanning tree and deleting a uniform subset of its edges; redrawing this
partition every boosting round gives the "variable" loss.

All sampling goes through a numpy ``Generator`` (PCG64 via
``np.random.default_rng``), which is seedable, splittable through
``SeedSequence`` and produces identical streams across platforms.
"""

import csv
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .partitions import Partition, RandomPartition

__all__ = [
    "HierarchySpec",
    "Graph",
    "VariableGraphStructure",
    "hierarchy_structure",
    "circular_structure",
    "wilson_spanning_tree",
    "random_connected_partition",
    "variable_random_partition",
    "read_graph_file",
    "read_hierarchy_file",
]


@dataclass(frozen=True)
class HierarchySpec:
    """Leveled group assignments for each class.

    ``levels[i]`` is a length-``num_classes`` tuple giving every class its
    group id at level ``i``; the identity (singleton) level is implicit and
    not stored.  Levels are not required to be nested: any family of group
    maps defines a usable structure.
    """

    num_classes: int
    levels: tuple

    def __post_init__(self):
        levels = tuple(tuple(level) for level in self.levels)
        for i, level in enumerate(levels):
            if len(level) != self.num_classes:
                raise ValueError(
                    f"level {i} assigns {len(level)} classes, expected "
                    f"{self.num_classes}"
                )
        object.__setattr__(self, "levels", levels)

    @property
    def num_levels(self):
        """Number of levels including the implicit singleton level."""
        return len(self.levels) + 1

    def level_partition(self, i):
        """Partition whose blocks are the preimages of level ``i``'s groups."""
        groups = defaultdict(list)
        for y, g in enumerate(self.levels[i]):
            groups[g].append(y)
        return Partition(tuple(tuple(v) for v in groups.values()), self.num_classes)


def hierarchy_structure(spec, weights):
    """Random partition with one partition per hierarchy level.

    ``weights[0]`` goes to the singleton level, ``weights[i]`` to level i of
    the spec; the weights must form a probability vector over all levels.
    """
    weights = tuple(float(w) for w in weights)
    if len(weights) != spec.num_levels:
        raise ValueError(
            f"{len(weights)} weights for {spec.num_levels} levels "
            "(singleton level included)"
        )
    parts = [Partition.singletons(spec.num_classes)]
    parts.extend(spec.level_partition(i) for i in range(len(spec.levels)))
    return RandomPartition(tuple(parts), weights)


def circular_structure(num_classes, window, p0):
    """Random partition for labels arranged on a circle.

    Blocks are contiguous runs of ``window`` labels (modulo ``num_classes``);
    each of the ``window`` rotated alignments forms one partition with weight
    ``(1 - p0) / window``, and the singleton partition carries ``p0``.
    """
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0 must lie in [0, 1], got {p0}")
    if window < 1 or num_classes % window != 0:
        raise ValueError(
            f"window {window} must be >= 1 and divide num_classes {num_classes}"
        )
    parts = [Partition.singletons(num_classes)]
    for offset in range(window):
        blocks = []
        for start in range(offset, num_classes + offset, window):
            blocks.append(tuple((start + i) % num_classes for i in range(window)))
        parts.append(Partition(tuple(blocks), num_classes))
    weights = [p0] + [(1.0 - p0) / window] * window
    return RandomPartition(tuple(parts), tuple(weights))


@dataclass(frozen=True)
class Graph:
    """Undirected graph on vertices 0..num_vertices-1.

    Edges are stored canonically as sorted (u, v) pairs with u < v,
    deduplicated; self-loops are rejected.
    """

    num_vertices: int
    edges: tuple

    def __post_init__(self):
        if self.num_vertices < 1:
            raise ValueError("graph needs at least one vertex")
        canon = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise ValueError(f"edge ({u}, {v}) out of range")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            canon.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @classmethod
    def cycle(cls, n):
        """The n-cycle 0-1-...-(n-1)-0."""
        return cls(n, tuple((i, (i + 1) % n) for i in range(n)))

    @classmethod
    def grid(cls, rows, cols):
        """The rows x cols grid graph, vertex (r, c) -> r * cols + c."""
        edges = []
        for r in range(rows):
            for c in range(cols):
                v = r * cols + c
                if c + 1 < cols:
                    edges.append((v, v + 1))
                if r + 1 < rows:
                    edges.append((v, v + cols))
        return cls(rows * cols, tuple(edges))

    @cached_property
    def adjacency(self):
        """Tuple of sorted neighbor tuples, one per vertex."""
        nbrs = [[] for _ in range(self.num_vertices)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(tuple(sorted(n)) for n in nbrs)

    def is_connected(self):
        seen = np.zeros(self.num_vertices, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for v in self.adjacency[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        return bool(seen.all())


@dataclass(frozen=True)
class VariableGraphStructure:
    """Recipe for a per-round resampled structure over a graph.

    Each draw pairs the singleton partition (weight ``singleton_weight``)
    with a fresh partition of the graph into ``num_blocks`` connected blocks
    (weight ``1 - singleton_weight``).
    """

    graph: Graph
    num_blocks: int
    singleton_weight: float

    def __post_init__(self):
        if not 1 <= self.num_blocks <= self.graph.num_vertices:
            raise ValueError(
                f"num_blocks must lie in [1, {self.graph.num_vertices}], "
                f"got {self.num_blocks}"
            )
        if not 0.0 <= self.singleton_weight <= 1.0:
            raise ValueError(
                f"singleton_weight must lie in [0, 1], got {self.singleton_weight}"
            )

    @property
    def num_classes(self):
        return self.graph.num_vertices

    def sample(self, rng):
        """Draw one random partition; a fresh block partition every call."""
        return variable_random_partition(
            self.graph, self.num_blocks, self.singleton_weight, rng
        )


def wilson_spanning_tree(graph, random_state=None):
    """Uniform spanning tree via loop-erased random walks, rooted at vertex 0.

    Returns the tree as a sorted tuple of (u, v) edges with u < v; the root
    choice does not affect the uniform distribution over trees.  Deterministic
    given the seed.
    """
    rng = np.random.default_rng(random_state)
    k = graph.num_vertices
    if k == 1:
        return ()
    if not graph.is_connected():
        raise ValueError("graph is not connected; no spanning tree exists")
    adj = graph.adjacency
    in_tree = [False] * k
    parent = [-1] * k
    in_tree[0] = True
    for start in range(1, k):
        u = start
        while not in_tree[u]:
            nbrs = adj[u]
            parent[u] = nbrs[rng.integers(len(nbrs))]
            u = parent[u]
        u = start
        while not in_tree[u]:
            in_tree[u] = True
            u = parent[u]
    return tuple(sorted((min(v, parent[v]), max(v, parent[v])) for v in range(1, k)))


def random_connected_partition(graph, num_blocks, random_state=None):
    """Partition the vertices into ``num_blocks`` connected blocks.

    Samples a uniform spanning tree, removes a uniformly random subset of
    ``num_blocks - 1`` of its edges, and takes the resulting components as
    blocks.  Every block induces a connected subgraph of ``graph``.
    """
    rng = np.random.default_rng(random_state)
    k = graph.num_vertices
    if not 1 <= num_blocks <= k:
        raise ValueError(f"num_blocks must lie in [1, {k}], got {num_blocks}")
    tree = list(wilson_spanning_tree(graph, rng))
    # Partial Fisher-Yates: the first num_blocks-1 slots end up holding a
    # uniform random subset of tree edges.
    for i in range(num_blocks - 1):
        j = int(rng.integers(i, len(tree)))
        tree[i], tree[j] = tree[j], tree[i]
    kept = tree[num_blocks - 1 :]
    nbrs = [[] for _ in range(k)]
    for u, v in kept:
        nbrs[u].append(v)
        nbrs[v].append(u)
    blocks = []
    seen = [False] * k
    for root in range(k):
        if seen[root]:
            continue
        comp = [root]
        seen[root] = True
        stack = [root]
        while stack:
            u = stack.pop()
            for v in nbrs[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    stack.append(v)
        blocks.append(tuple(sorted(comp)))
    return Partition(tuple(blocks), k)


def variable_random_partition(graph, num_blocks, p0, random_state=None):
    """One draw of the resampled graph structure.

    Pairs the singleton partition (weight ``p0``) with a freshly sampled
    connected-block partition (weight ``1 - p0``).  With ``p0 == 1`` the
    block partition is omitted entirely.
    """
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0 must lie in [0, 1], got {p0}")
    k = graph.num_vertices
    if p0 == 1.0:
        return RandomPartition.trivial(k)
    sampled = random_connected_partition(graph, num_blocks, random_state)
    return RandomPartition(
        (Partition.singletons(k), sampled), (p0, 1.0 - p0)
    )


def read_graph_file(path):
    """Parse a plain-text graph file: first line k, then one 'u v' per line."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty graph file")
    try:
        k = int(lines[0])
    except ValueError:
        raise ValueError(f"{path}: first line must be the vertex count") from None
    edges = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'u v', got {ln!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-integer vertex in {ln!r}") from None
    return Graph(k, tuple(edges))


def read_hierarchy_file(path, delimiter=","):
    """Parse a delimited hierarchy table into class names and a spec.

    One row per class; the first column is the class name (row order defines
    the class indices), remaining columns give the group id at each level.
    Returns (class_names, HierarchySpec).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if len(rows) < 2:
        raise ValueError(f"{path}: need a header row and at least one class row")
    header, body = rows[0], rows[1:]
    width = len(header)
    if width < 2:
        raise ValueError(f"{path}: need a class column and at least one level column")
    names = []
    columns = [[] for _ in range(width - 1)]
    for lineno, row in enumerate(body, start=2):
        if len(row) != width:
            raise ValueError(
                f"{path}:{lineno}: expected {width} columns, got {len(row)}"
            )
        names.append(row[0].strip())
        for j in range(1, width):
            columns[j - 1].append(row[j].strip())
    if len(set(names)) != len(names):
        raise ValueError(f"{path}: duplicate class names")
    spec = HierarchySpec(len(names), tuple(tuple(col) for col in columns))
    return names, spec
