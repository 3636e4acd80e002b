"""Relation graphs over a set of detected regions.

Three kinds are built over the same vertex set (one vertex per region):

* ``implicit``: complete graph with self-edges, a single label. Attention
  over it is free to look at every region.
* ``spatial``: one directed edge (i, j) per ordered pair whose
  ``classify_spatial`` class is nonzero, labeled with that class, plus a
  mandatory ``identical`` self-loop per vertex. Edges always come in inverse
  pairs.
* ``semantic``: one directed edge per supplied (subject, predicate, object)
  triple plus the ``identical`` self-loops. Reverse edges may be absent.

Each vertex's attention neighborhood is indexed at build time. For explicit
graphs a neighbor j of i carries a direction tag: ``out`` when the stored
edge runs i -> j, ``in`` when only j -> i exists, ``self`` on the loop. A
spatial graph therefore only ever uses ``out``/``self`` (the reverse edge is
always stored in its own right), while semantic graphs use all three.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .autodiff import ValidationError
from .geometry import BBox, classify_spatial

IDENTICAL = 0  # label code of self-loop edges; spatial labels are 1..11, semantic 1..14
N_SEMANTIC_PREDICATES = 14

DIR_SELF = 0
DIR_OUT = 1
DIR_IN = 2
DIR_NAMES = ("self", "out", "in")

KINDS = ("implicit", "spatial", "semantic")


@dataclass
class RegionSet:
    """K detected regions: a (K, d_v) feature matrix plus one box per region."""

    features: np.ndarray
    boxes: list[BBox]

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValidationError(f"features must be a (K, d_v) matrix with K >= 1, got {self.features.shape}")
        if not np.isfinite(self.features).all():
            raise ValidationError("region features must be finite")
        if len(self.boxes) != self.features.shape[0]:
            raise ValidationError(f"{len(self.boxes)} boxes for {self.features.shape[0]} feature rows")

    @property
    def k(self) -> int:
        return self.features.shape[0]

    @property
    def d_v(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SemanticTriple:
    """Directed relation <subject - predicate - object> between two regions."""

    subject: int
    predicate: int
    object: int

    def __post_init__(self):
        if self.subject == self.object:
            raise ValidationError(f"triple subject and object must differ, got index {self.subject} twice")
        if not (1 <= self.predicate <= N_SEMANTIC_PREDICATES):
            raise ValidationError(f"predicate label {self.predicate} outside 1..{N_SEMANTIC_PREDICATES}")


@dataclass
class RelationGraph:
    kind: str
    n_vertices: int
    edges: list[tuple[int, int, int, int]]  # (src, dst, label, dir code)
    # neighbors[i] lists (j, label, dir code) for every j vertex i attends to
    neighbors: list[list[tuple[int, int, int]]] = field(repr=False)

    def __post_init__(self):
        k = self.n_vertices
        self._lab = np.full((k, k), -1, dtype=np.intp)
        self._dir = np.full((k, k), -1, dtype=np.intp)
        for i, row in enumerate(self.neighbors):
            for j, label, d in row:
                self._lab[i, j] = label
                self._dir[i, j] = d
        self._adj = self._lab >= 0
        self._dir_masks = {d: (self._dir == d).astype(np.float64) for d in np.unique(self._dir) if d >= 0}

    def label_set(self) -> set[int]:
        return {label for _, _, label, _ in self.edges}

    def adjacency_mask(self) -> np.ndarray:
        return self._adj

    def label_matrix(self) -> np.ndarray:
        return self._lab

    def dir_matrix(self) -> np.ndarray:
        return self._dir

    def dir_masks(self) -> dict[int, np.ndarray]:
        """Direction code -> 0/1 float mask over the attention support."""
        return self._dir_masks

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "K": self.n_vertices,
            "edges": [[s, d, label, DIR_NAMES[dcode]] for s, d, label, dcode in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def _neighbors_from_edges(k: int, edges: list[tuple[int, int, int, int]]) -> list[list[tuple[int, int, int]]]:
    """Attention index with out-edge precedence when both directions exist."""
    out_edges: dict[tuple[int, int], int] = {}
    for s, d, label, dcode in edges:
        if dcode != DIR_SELF:
            out_edges[(s, d)] = label
    neighbors: list[list[tuple[int, int, int]]] = [[] for _ in range(k)]
    for i in range(k):
        neighbors[i].append((i, IDENTICAL, DIR_SELF))
    for (s, d), label in out_edges.items():
        neighbors[s].append((d, label, DIR_OUT))
        if (d, s) not in out_edges:
            neighbors[d].append((s, label, DIR_IN))
    return neighbors


def build_implicit(regions: RegionSet) -> RelationGraph:
    """Complete graph with self-edges; every vertex attends to every vertex."""
    k = regions.k
    edges = []
    for i in range(k):
        for j in range(k):
            edges.append((i, j, IDENTICAL, DIR_SELF if i == j else DIR_OUT))
    neighbors = [[(j, IDENTICAL, DIR_SELF if i == j else DIR_OUT) for j in range(k)] for i in range(k)]
    return RelationGraph(kind="implicit", n_vertices=k, edges=edges, neighbors=neighbors)


def build_spatial(regions: RegionSet, far_threshold: float = 4.0) -> RelationGraph:
    """Prune the complete graph to pairs with a nonzero spatial class."""
    k = regions.k
    edges = [(i, i, IDENTICAL, DIR_SELF) for i in range(k)]
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            cls = classify_spatial(regions.boxes[i], regions.boxes[j], far_threshold)
            if cls != 0:
                edges.append((i, j, cls, DIR_OUT))
    return RelationGraph(kind="spatial", n_vertices=k, edges=edges, neighbors=_neighbors_from_edges(k, edges))


def build_semantic(regions: RegionSet, triples) -> RelationGraph:
    """One directed labeled edge per triple; the reverse edge may legitimately be absent."""
    k = regions.k
    edges = [(i, i, IDENTICAL, DIR_SELF) for i in range(k)]
    seen: set[tuple[int, int]] = set()
    for t in triples:
        if not isinstance(t, SemanticTriple):
            t = SemanticTriple(*t)
        if not (0 <= t.subject < k and 0 <= t.object < k):
            raise ValidationError(f"triple ({t.subject}, {t.predicate}, {t.object}) references a vertex outside 0..{k - 1}")
        if (t.subject, t.object) in seen:
            warnings.warn(
                f"duplicate semantic edge ({t.subject} -> {t.object}); keeping the first label",
                RuntimeWarning,
                stacklevel=2,
            )
            continue
        seen.add((t.subject, t.object))
        edges.append((t.subject, t.object, t.predicate, DIR_OUT))
    return RelationGraph(kind="semantic", n_vertices=k, edges=edges, neighbors=_neighbors_from_edges(k, edges))


def n_graph_labels(kind: str) -> int:
    """Size of the label vocabulary a parameter set must cover for this kind."""
    if kind == "spatial":
        return 1 + 11  # identical + the 11 spatial classes
    if kind == "semantic":
        return 1 + N_SEMANTIC_PREDICATES
    if kind == "implicit":
        return 1
    raise ValidationError(f"unknown graph kind {kind!r}")


def directions_for_kind(kind: str) -> tuple[int, ...]:
    """Direction tags that can occur in a graph of this kind."""
    if kind == "spatial":
        return (DIR_SELF, DIR_OUT)
    if kind == "semantic":
        return (DIR_SELF, DIR_OUT, DIR_IN)
    if kind == "implicit":
        return (DIR_SELF, DIR_OUT)
    raise ValidationError(f"unknown graph kind {kind!r}")
