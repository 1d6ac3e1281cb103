"""Sparse system for internal, ghost and inactive nodes.

Internal nodes carry the fourth-order star (5+5 point) or Mehrstellen (3x3)
Laplacian, ghost nodes a biquartic Dirichlet or Neumann condition at their
boundary point, and inactive nodes an identity row with zero right-hand side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from ghostpoisson.boundary import (
    BCKind,
    GhostRecord,
    Method,
    build_ghost_records,
    close_for_method,
    quadrant_signs,
)
from ghostpoisson.domains import dirichlet_left_half
from ghostpoisson.errors import AssemblyError, StencilError
from ghostpoisson.geometry import (
    Classification,
    GridField,
    Node,
    NodeClass,
    classify_points,
    node_of,
)
from ghostpoisson.interp import derivative_coeffs, tensor_weights, value_coeffs

STAR_OFFSETS = [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1), (-2, 0), (2, 0), (0, -2), (0, 2)]
STAR_WEIGHTS = np.array([60.0, -16, -16, -16, -16, 1, 1, 1, 1]) / 12.0
BOX_OFFSETS = [(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)]
BOX_WEIGHTS = np.array([20.0, -4, -4, -4, -4, -1, -1, -1, -1]) / 6.0
AXIS_OFFSETS = [(-1, 0), (1, 0), (0, -1), (0, 1)]

EXTENSION_MAX_SHIFT = 3


class RowKind(IntEnum):
    INTERIOR_STAR = 0
    INTERIOR_BOX = 1
    GHOST_DIRICHLET = 2
    GHOST_NEUMANN = 3
    INACTIVE_IDENTITY = 4


@dataclass
class ProblemData:
    """Source samples and boundary data.

    ``f`` holds grid samples of the source (only internal values are used
    unless ``f_exact`` is given and ``source_mode == "analytic"``).
    ``g_neumann`` is called as ``g_neumann(x, y, nx, ny)`` with the discrete
    unit normal at the boundary point.
    """

    f: np.ndarray
    g_dirichlet: Callable
    g_neumann: Callable
    f_exact: Callable | None = None
    source_mode: str = "extrapolate"

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float).ravel()
        if self.source_mode not in ("extrapolate", "analytic"):
            raise ValueError(f"unknown source mode {self.source_mode!r}")
        if self.source_mode == "analytic" and self.f_exact is None:
            raise ValueError("analytic source mode needs f_exact")


@dataclass
class SparseSystem:
    n: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    rhs: np.ndarray
    row_kind: np.ndarray
    classification: Classification | None = None
    records: list[GhostRecord] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n, self.n

    def matrix(self) -> sp.csr_matrix:
        """CSR matrix with duplicate triplets summed."""
        a = sp.coo_matrix((self.vals, (self.rows, self.cols)), shape=self.shape).tocsr()
        a.sum_duplicates()
        return a

    def kind_counts(self) -> dict[RowKind, int]:
        return {k: int(np.count_nonzero(self.row_kind == k)) for k in RowKind}

    def write_matrix(self, path, rhs_path=None) -> None:
        """Coordinate text dump: ``rows cols nnz`` header then ``row col value`` lines."""
        a = self.matrix().tocoo()
        order = np.lexsort((a.col, a.row))
        with open(path, "w") as fh:
            fh.write(f"{self.n} {self.n} {a.nnz}\n")
            for r, c, v in zip(a.row[order], a.col[order], a.data[order]):
                fh.write(f"{r} {c} {v:.17g}\n")
        if rhs_path is not None:
            with open(rhs_path, "w") as fh:
                for v in self.rhs:
                    fh.write(f"{v:.17g}\n")


def _stencil_indices(classification: Classification, ks: np.ndarray, offsets) -> np.ndarray:
    spec = classification.spec
    n1 = spec.n + 1
    i, j = ks % n1, ks // n1
    out = np.empty((ks.size, len(offsets)), dtype=np.int64)
    for c, (di, dj) in enumerate(offsets):
        ii, jj = i + di, j + dj
        off = (ii < 0) | (ii > spec.n) | (jj < 0) | (jj > spec.n)
        if off.any():
            raise AssemblyError("interior stencil leaves the grid", node_of(ks[off][0], spec))
        out[:, c] = ii + jj * n1
    bad = classification.labels[out] == NodeClass.INACTIVE
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise AssemblyError(
            f"interior stencil touches inactive node {node_of(out[r, c], spec)}",
            node_of(ks[r], spec),
        )
    return out


def interior_row_star(node: Node, classification: Classification, f: np.ndarray):
    """Entries ``[(col, value)]`` and rhs of the star row at one internal node."""
    spec = classification.spec
    k = np.array([node[0] + node[1] * (spec.n + 1)])
    cols = _stencil_indices(classification, k, STAR_OFFSETS)[0]
    return list(zip(cols.tolist(), (STAR_WEIGHTS / spec.h**2).tolist())), float(f[k[0]])


def interior_row_box(node: Node, classification: Classification, f_extended: np.ndarray):
    spec = classification.spec
    k = np.array([node[0] + node[1] * (spec.n + 1)])
    cols = _stencil_indices(classification, k, BOX_OFFSETS)[0]
    axis = _stencil_indices(classification, k, AXIS_OFFSETS)[0]
    fv = f_extended[np.concatenate([k, axis])]
    if not np.all(np.isfinite(fv)):
        raise AssemblyError("missing extended source value", node)
    rhs = (8.0 * fv[0] + fv[1:].sum()) / 12.0
    return list(zip(cols.tolist(), (BOX_WEIGHTS / spec.h**2).tolist())), float(rhs)


def ghost_row_weights(record: GhostRecord, h: float) -> np.ndarray:
    """Row weights on the record's 25 stencil nodes (before the data value)."""
    tx, ty = record.thetas
    cx, cy = value_coeffs(tx), value_coeffs(ty)
    if record.bc_kind is BCKind.DIRICHLET:
        return tensor_weights(cx, cy)
    sx, sy = (s or 1 for s in record.signs)
    rx, ry = record.steps
    dx = tensor_weights(derivative_coeffs(tx), cy) * sx / (rx * h)
    dy = tensor_weights(cx, derivative_coeffs(ty)) * sy / (ry * h)
    nx, ny = record.normal
    return nx * dx + ny * dy


def ghost_row(record: GhostRecord, data: ProblemData, h: float):
    """Entries ``[(col, value)]`` and rhs of the boundary-condition row."""
    w = ghost_row_weights(record, h)
    xb, yb = record.boundary_point
    if record.bc_kind is BCKind.DIRICHLET:
        rhs = float(data.g_dirichlet(xb, yb))
    else:
        rhs = float(data.g_neumann(xb, yb, *record.normal))
    return list(zip(record.indices.tolist(), w.tolist())), rhs


def source_extension_nodes(classification: Classification) -> np.ndarray:
    """External nodes that are axis neighbors of internal nodes (linear indices)."""
    inside = classification.grid == NodeClass.INTERNAL
    need = np.zeros_like(inside)
    need[:, 1:] |= inside[:, :-1]
    need[:, :-1] |= inside[:, 1:]
    need[1:, :] |= inside[:-1, :]
    need[:-1, :] |= inside[1:, :]
    need &= ~inside
    return np.flatnonzero(need.ravel())


def extend_source(
    f: np.ndarray,
    classification: Classification,
    phi: GridField,
    needed: Sequence[int] | None = None,
    max_shift: int = EXTENSION_MAX_SHIFT,
) -> np.ndarray:
    """Copy of ``f`` with values at external ``needed`` nodes extrapolated.

    Each external node takes the biquartic extrapolation from its upwind 5x5
    stencil, slid inward by ``(a, b)`` cells along the upwind signs, using the
    smallest shift (``max(a, b) <= max_shift``, diagonal shifts first among
    equals) that makes all 25 nodes internal. The evaluation point then sits at
    ``theta = (-a, -b)``. Other external entries are set to NaN.
    """
    spec = classification.spec
    n1 = spec.n + 1
    f = np.asarray(f, dtype=float).ravel()
    out = np.where(classification.internal, f, np.nan)
    if needed is None:
        needed = source_extension_nodes(classification)
    inside = classification.grid == NodeClass.INTERNAL
    shifts = sorted(
        ((a, b) for a in range(max_shift + 1) for b in range(max_shift + 1) if a or b),
        key=lambda ab: (max(ab), ab[0] + ab[1], abs(ab[0] - ab[1])),
    )
    for k in np.asarray(needed, dtype=np.int64):
        l, m = node_of(k, spec)
        sx, sy = (s or 1 for s in quadrant_signs(phi, (l, m)))
        for a, b in shifts:
            ii = l + sx * (a + np.arange(5))
            jj = m + sy * (b + np.arange(5))
            if ii.min() < 0 or jj.min() < 0 or ii.max() > spec.n or jj.max() > spec.n:
                continue
            if inside[np.ix_(jj, ii)].all():
                vals = f[(ii[None, :] + n1 * jj[:, None]).ravel()]
                w = tensor_weights(value_coeffs(-float(a)), value_coeffs(-float(b)))
                out[k] = w @ vals
                break
        else:
            raise StencilError(f"no internal 5x5 block within {max_shift} upwind shifts", (l, m))
    return out


def _interior_triplets(classification, ks, offsets, weights, h):
    cols = _stencil_indices(classification, ks, offsets)
    rows = np.repeat(ks, len(offsets))
    vals = np.tile(weights / h**2, ks.size)
    return rows, cols.ravel(), vals


def assemble(
    method: Method | str,
    phi: GridField,
    data: ProblemData,
    bc_rule: Callable = dirichlet_left_half,
    classification: Classification | None = None,
    **projection_kwargs,
) -> SparseSystem:
    """Classify, close the ghost set, build ghost records and emit all rows."""
    method = Method(method)
    spec = phi.spec
    h = spec.h
    if classification is None:
        classification = close_for_method(classify_points(phi, method.family), phi, method)
    records = build_ghost_records(classification, phi, method, bc_rule, **projection_kwargs)

    size = spec.size
    rhs = np.zeros(size)
    row_kind = np.full(size, RowKind.INACTIVE_IDENTITY, dtype=np.int8)
    internal = np.flatnonzero(classification.internal)
    if method.family.value == "star":
        r, c, v = _interior_triplets(classification, internal, STAR_OFFSETS, STAR_WEIGHTS, h)
        rhs[internal] = data.f[internal]
        row_kind[internal] = RowKind.INTERIOR_STAR
    else:
        if data.source_mode == "analytic":
            x, y = spec.mesh()
            f_ext = np.asarray(data.f_exact(x, y), dtype=float)
        else:
            f_ext = extend_source(data.f, classification, phi)
        r, c, v = _interior_triplets(classification, internal, BOX_OFFSETS, BOX_WEIGHTS, h)
        axis = _stencil_indices(classification, internal, AXIS_OFFSETS)
        fv = f_ext[axis]
        if not np.all(np.isfinite(fv)):
            bad = internal[np.flatnonzero(~np.isfinite(fv).all(axis=1))[0]]
            raise AssemblyError("missing extended source value", node_of(bad, spec))
        rhs[internal] = (8.0 * f_ext[internal] + fv.sum(axis=1)) / 12.0
        row_kind[internal] = RowKind.INTERIOR_BOX
    rows, cols, vals = [r], [c], [v]

    for rec in records:
        k = rec.node[0] + rec.node[1] * (spec.n + 1)
        entries, b = ghost_row(rec, data, h)
        rows.append(np.full(25, k, dtype=np.int64))
        cols.append(rec.indices.astype(np.int64))
        vals.append(np.array([w for _, w in entries]))
        rhs[k] = b
        row_kind[k] = (
            RowKind.GHOST_DIRICHLET if rec.bc_kind is BCKind.DIRICHLET else RowKind.GHOST_NEUMANN
        )

    inactive = np.flatnonzero(~classification.active)
    rows.append(inactive)
    cols.append(inactive)
    vals.append(np.ones(inactive.size))

    return SparseSystem(
        n=size,
        rows=np.concatenate(rows).astype(np.int64),
        cols=np.concatenate(cols).astype(np.int64),
        vals=np.concatenate(vals),
        rhs=rhs,
        row_kind=row_kind,
        classification=classification,
        records=records,
    )
