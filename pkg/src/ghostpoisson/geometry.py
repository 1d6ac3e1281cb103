"""Uniform grid on [-1, 1]^2, grid fields and node classification.

Nodes are numbered row by row: ``k = i + j*(N+1)`` with ``i`` the x index and
``j`` the y index. Two-dimensional views of grid arrays are therefore indexed
``[j, i]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable, Iterable

import numpy as np

from ghostpoisson.errors import StencilError

Node = tuple[int, int]


@dataclass(frozen=True)
class GridSpec:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"grid needs an integer N >= 8, got {self.n!r}")

    @property
    def h(self) -> float:
        return 2.0 / self.n

    @property
    def size(self) -> int:
        return (self.n + 1) ** 2

    @property
    def coords(self) -> np.ndarray:
        return -1.0 + self.h * np.arange(self.n + 1)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat x and y coordinate arrays in node order."""
        x, y = np.meshgrid(self.coords, self.coords, indexing="xy")
        return x.ravel(), y.ravel()

    def contains(self, i: int, j: int) -> bool:
        return 0 <= i <= self.n and 0 <= j <= self.n

    def point(self, i: int, j: int) -> tuple[float, float]:
        return -1.0 + i * self.h, -1.0 + j * self.h


def linear_index(i: int, j: int, spec: GridSpec) -> int:
    if not spec.contains(i, j):
        raise IndexError(f"node ({i}, {j}) outside a grid with N={spec.n}")
    return i + j * (spec.n + 1)


def node_of(k: int, spec: GridSpec) -> Node:
    j, i = divmod(int(k), spec.n + 1)
    return i, j


@dataclass(frozen=True)
class GridField:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != self.spec.size:
            raise ValueError(f"field has {v.size} samples, grid needs {self.spec.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite samples")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, spec: GridSpec, func: Callable) -> "GridField":
        x, y = spec.mesh()
        return cls(spec, np.broadcast_to(func(x, y), x.shape).astype(float))

    @property
    def grid(self) -> np.ndarray:
        return self.values.reshape(self.spec.n + 1, self.spec.n + 1)

    def __getitem__(self, node: Node) -> float:
        i, j = node
        return float(self.grid[j, i])


class NodeClass(IntEnum):
    INTERNAL = 0
    GHOST_STAR1 = 1
    GHOST_STAR2 = 2
    GHOST_BOX = 3
    INACTIVE = 4


GHOST_LABELS = (NodeClass.GHOST_STAR1, NodeClass.GHOST_STAR2, NodeClass.GHOST_BOX)


class Family(str, Enum):
    STAR = "star"
    BOX = "box"


class NeighborKind(str, Enum):
    STAR1 = "star1"
    STAR2 = "star2"
    BOX = "box"


_OFFSETS = {
    NeighborKind.STAR1: [(1, 0), (-1, 0), (0, 1), (0, -1)],
    NeighborKind.STAR2: [(2, 0), (-2, 0), (0, 2), (0, -2)],
    NeighborKind.BOX: [(a, b) for b in (-1, 0, 1) for a in (-1, 0, 1) if (a, b) != (0, 0)],
}


def neighbor_set(node: Node, kind: NeighborKind | str, spec: GridSpec) -> list[Node]:
    i, j = node
    return [
        (i + a, j + b)
        for a, b in _OFFSETS[NeighborKind(kind)]
        if spec.contains(i + a, j + b)
    ]


@dataclass(frozen=True)
class Classification:
    spec: GridSpec
    labels: np.ndarray
    family: Family
    promoted: tuple[Node, ...] = field(default=())

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int8).ravel()
        if lab.size != self.spec.size:
            raise ValueError("label array does not match the grid")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "family", Family(self.family))

    @property
    def grid(self) -> np.ndarray:
        return self.labels.reshape(self.spec.n + 1, self.spec.n + 1)

    def label(self, node: Node) -> NodeClass:
        i, j = node
        return NodeClass(int(self.grid[j, i]))

    def mask(self, *labels: NodeClass) -> np.ndarray:
        return np.isin(self.labels, [int(c) for c in labels])

    @property
    def internal(self) -> np.ndarray:
        return self.labels == NodeClass.INTERNAL

    @property
    def ghost(self) -> np.ndarray:
        return self.mask(*GHOST_LABELS)

    @property
    def active(self) -> np.ndarray:
        return self.labels != NodeClass.INACTIVE

    def ghost_nodes(self) -> list[Node]:
        """Ghost nodes in increasing linear-index order."""
        ks = np.flatnonzero(self.ghost)
        return [node_of(k, self.spec) for k in ks]

    def counts(self) -> dict[NodeClass, int]:
        return {c: int(np.count_nonzero(self.labels == c)) for c in NodeClass}


def _shifted(mask: np.ndarray, di: int, dj: int) -> np.ndarray:
    """out[j, i] = mask[j + dj, i + di], False where that node is off the grid."""
    out = np.zeros_like(mask)
    n = mask.shape[0]
    src_j = slice(max(dj, 0), n + min(dj, 0))
    dst_j = slice(max(-dj, 0), n + min(-dj, 0))
    src_i = slice(max(di, 0), n + min(di, 0))
    dst_i = slice(max(-di, 0), n + min(-di, 0))
    out[dst_j, dst_i] = mask[src_j, src_i]
    return out


def _any_neighbor(mask: np.ndarray, kind: NeighborKind) -> np.ndarray:
    hit = np.zeros_like(mask)
    for di, dj in _OFFSETS[kind]:
        hit |= _shifted(mask, di, dj)
    return hit


def classify_points(phi: GridField, family: Family | str) -> Classification:
    """Label nodes as internal (phi < 0), ghost by neighbor sets, or inactive.

    Nodes with phi == 0 exactly count as external.
    """
    family = Family(family)
    values = np.asarray(phi.values)
    if np.isnan(values).any():
        raise ValueError("level set contains NaN")
    inside = phi.grid < 0.0
    labels = np.full(inside.shape, NodeClass.INACTIVE, dtype=np.int8)
    labels[inside] = NodeClass.INTERNAL
    outside = ~inside
    if family is Family.STAR:
        g1 = outside & _any_neighbor(inside, NeighborKind.STAR1)
        g2 = outside & ~g1 & _any_neighbor(inside, NeighborKind.STAR2)
        labels[g1] = NodeClass.GHOST_STAR1
        labels[g2] = NodeClass.GHOST_STAR2
    else:
        labels[outside & _any_neighbor(inside, NeighborKind.BOX)] = NodeClass.GHOST_BOX
    return Classification(phi.spec, labels.ravel(), family)


def close_ghost_set(
    classification: Classification,
    stencil_of: Callable[[Node, NodeClass, bool], Iterable[Node]],
    max_rounds: int = 50,
) -> Classification:
    """Promote inactive nodes touched by ghost stencils until none remain.

    ``stencil_of(node, label, promoted)`` returns the interpolation stencil of a
    ghost and raises :class:`StencilError` when the stencil leaves the grid.
    Promoted nodes are labelled as outer-layer ghosts (GHOST_STAR2 or
    GHOST_BOX) and listed in ``Classification.promoted``.
    """
    spec = classification.spec
    promote_as = (
        NodeClass.GHOST_STAR2 if classification.family is Family.STAR else NodeClass.GHOST_BOX
    )
    labels = classification.grid.copy()
    promoted = list(classification.promoted)
    is_promoted = set(promoted)
    pending = classification.ghost_nodes()
    for _ in range(max_rounds):
        fresh: list[Node] = []
        for node in pending:
            label = NodeClass(int(labels[node[1], node[0]]))
            for i, j in stencil_of(node, label, node in is_promoted):
                if not spec.contains(i, j):
                    raise StencilError("ghost stencil leaves the grid", node)
                if labels[j, i] == NodeClass.INACTIVE:
                    labels[j, i] = promote_as
                    fresh.append((i, j))
        if not fresh:
            return Classification(spec, labels.ravel(), classification.family, tuple(promoted))
        promoted.extend(fresh)
        is_promoted.update(fresh)
        pending = fresh
    raise StencilError(f"ghost promotion did not reach a fixed point in {max_rounds} rounds")
