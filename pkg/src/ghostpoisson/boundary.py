"""Ghost-node geometry: upwind quadrant, 5x5 interpolation stencil, and the
closest boundary point found by a damped walk along the interpolated
level-set gradient."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from ghostpoisson.errors import ProjectionError, StencilError
from ghostpoisson.geometry import (
    Classification,
    Family,
    GridField,
    GridSpec,
    Node,
    NodeClass,
    close_ghost_set,
    linear_index,
)
from ghostpoisson.interp import (
    THETA_TRUST,
    biquartic_eval,
    biquartic_grad,
    value_coeffs,
)
from ghostpoisson.domains import dirichlet_left_half

PROJ_RELTOL = 1e-13
PROJ_MAX_ITER = 10_000
PROJ_RELAXATION = 0.1


class Method(str, Enum):
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"

    @property
    def family(self) -> Family:
        return Family.BOX if self is Method.M3 else Family.STAR

    def steps_for(self, label: NodeClass) -> tuple[int, int]:
        if self is Method.M2 and label == NodeClass.GHOST_STAR2:
            return 2, 2
        return 1, 1


class BCKind(str, Enum):
    DIRICHLET = "D"
    NEUMANN = "N"


@dataclass(frozen=True)
class GhostRecord:
    node: Node
    label: NodeClass
    signs: tuple[int, int]
    steps: tuple[int, int]
    stencil: tuple[Node, ...]
    indices: np.ndarray
    boundary_point: tuple[float, float]
    thetas: tuple[float, float]
    bc_kind: BCKind
    normal: tuple[float, float]
    iterations: int = 0

    @property
    def min_c0(self) -> float:
        cx = value_coeffs(self.thetas[0])[0]
        cy = value_coeffs(self.thetas[1])[0]
        return float(min(abs(cx), abs(cy)))


def _sgn(v: float) -> int:
    return int(v > 0) - int(v < 0)


def quadrant_signs(phi: GridField, node: Node) -> tuple[int, int]:
    """Signs of the central difference of -grad(phi) at a node.

    On the edge of the rectangle the missing neighbor is replaced by the node
    itself (one-sided difference).
    """
    spec = phi.spec
    i, j = node
    if not spec.contains(i, j):
        raise StencilError("node outside the grid", node)
    g = phi.grid
    il, ir = max(i - 1, 0), min(i + 1, spec.n)
    jd, ju = max(j - 1, 0), min(j + 1, spec.n)
    sx = _sgn(g[j, il] - g[j, ir])
    sy = _sgn(g[jd, i] - g[ju, i])
    if sx == 0 and sy == 0:
        raise StencilError("level-set gradient vanishes; no upwind quadrant", node)
    return sx, sy


def upwind_stencil(
    node: Node, signs: tuple[int, int], steps: tuple[int, int], spec: GridSpec
) -> list[Node]:
    """25 stencil nodes, ``stencil[p + 5q] = (l + s_x r_x p, m + s_y r_y q)``.

    A zero sign is treated as +1.
    """
    l, m = node
    sx, sy = (s or 1 for s in signs)
    rx, ry = steps
    out = [(l + sx * rx * p, m + sy * ry * q) for q in range(5) for p in range(5)]
    far = out[-1]
    if not (spec.contains(l, m) and spec.contains(*far)):
        raise StencilError(
            f"upwind stencil with signs {signs} and steps {steps} reaches {far}", node
        )
    return out


_OK, _LEFT_STENCIL, _NO_CONVERGENCE, _FLAT = 0, 1, 2, 3


def _walk(phi, nodes, signs, steps, stencils, relaxation, tol, max_iter):
    """Vectorized projection walk. Returns points, thetas, iterations, status."""
    spec = phi.spec
    h = spec.h
    n = len(nodes)
    signs = np.where(np.asarray(signs) == 0, 1, np.asarray(signs)).astype(float).reshape(n, 2)
    steps = np.asarray(steps, dtype=float).reshape(n, 2)
    vals = phi.values[np.asarray(stencils).reshape(n, 25)]
    origin = np.array([spec.point(*nd) for nd in nodes], dtype=float).reshape(n, 2)
    x = origin.copy()
    iters = np.zeros(n, dtype=int)
    status = np.full(n, _NO_CONVERGENCE)
    active = np.ones(n, dtype=bool)
    scale = steps * h / signs  # physical displacement per unit theta
    detail = {}

    for it in range(max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        th = (x[idx] - origin[idx]) / scale[idx]
        outside = ((th < -0.5) | (th > THETA_TRUST)).any(axis=1)
        if outside.any():
            for k, t in zip(idx[outside], th[outside]):
                detail[int(k)] = tuple(float(v) for v in t)
            status[idx[outside]] = _LEFT_STENCIL
            active[idx[outside]] = False
            idx, th = idx[~outside], th[~outside]
        f = biquartic_eval(vals[idx], th[:, 0], th[:, 1])
        done = np.abs(f) <= tol
        status[idx[done]] = _OK
        active[idx[done]] = False
        if it == max_iter:
            break
        go = idx[~done]
        if go.size == 0:
            continue
        thg, fg = th[~done], f[~done]
        gx, gy = biquartic_grad(vals[go], thg[:, 0], thg[:, 1], signs[go].T, steps[go].T, h)
        g2 = gx * gx + gy * gy
        flat = g2 == 0.0
        if flat.any():
            status[go[flat]] = _FLAT
            active[go[flat]] = False
            go, fg, gx, gy, g2 = go[~flat], fg[~flat], gx[~flat], gy[~flat], g2[~flat]
        x[go, 0] -= relaxation * fg * gx / g2
        x[go, 1] -= relaxation * fg * gy / g2
        iters[go] += 1
    thetas = (x - origin) / scale
    return x, thetas, iters, status, detail


def _raise_for(status, detail, nodes, max_iter):
    bad = np.flatnonzero(status != _OK)
    if bad.size == 0:
        return
    k = int(bad[0])
    node = tuple(nodes[k])
    if status[k] == _LEFT_STENCIL:
        raise ProjectionError(f"projection walk left the stencil (theta={detail[k]})", node)
    if status[k] == _FLAT:
        raise ProjectionError("interpolated level-set gradient vanishes", node)
    raise ProjectionError(f"boundary projection did not converge in {max_iter} steps", node)


def _resolve_tol(phi, tol):
    return PROJ_RELTOL * float(np.max(np.abs(phi.values))) if tol is None else tol


def project_batch(
    phi: GridField,
    nodes: Sequence[Node],
    signs: np.ndarray,
    steps: np.ndarray,
    stencils: np.ndarray,
    *,
    relaxation: float = PROJ_RELAXATION,
    tol: float | None = None,
    max_iter: int = PROJ_MAX_ITER,
):
    """Walk every ghost in ``nodes`` to the zero level of the interpolated phi.

    ``signs``/``steps`` have shape (n, 2) and ``stencils`` holds the linear
    indices of each ghost's 25 stencil nodes. Each step moves by
    ``-relaxation * phi * grad(phi) / |grad(phi)|^2`` with both quantities
    re-interpolated at the current iterate. Returns ``(points, thetas, iters)``.
    """
    if len(nodes) == 0:
        return np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0, dtype=int)
    tol = _resolve_tol(phi, tol)
    x, th, iters, status, detail = _walk(phi, nodes, signs, steps, stencils, relaxation, tol, max_iter)
    _raise_for(status, detail, nodes, max_iter)
    return x, th, iters


def project_to_boundary(
    node: Node,
    phi: GridField,
    signs: tuple[int, int],
    steps: tuple[int, int] = (1, 1),
    **kwargs,
) -> tuple[tuple[float, float], tuple[float, float], int]:
    """Boundary point, its stencil offsets (theta_x, theta_y), and step count."""
    stencil = upwind_stencil(node, signs, steps, phi.spec)
    ks = np.array([[linear_index(i, j, phi.spec) for i, j in stencil]])
    pts, th, it = project_batch(phi, [node], np.array([signs]), np.array([steps]), ks, **kwargs)
    return tuple(pts[0]), tuple(th[0]), int(it[0])


def ghost_stencil_fn(phi: GridField, method: Method) -> Callable[..., list[Node]]:
    def stencil_of(node: Node, label: NodeClass, promoted: bool = False) -> list[Node]:
        steps = method.steps_for(label)
        return upwind_stencil(node, quadrant_signs(phi, node), steps, phi.spec)

    return stencil_of


def close_for_method(classification: Classification, phi: GridField, method: Method) -> Classification:
    return close_ghost_set(classification, ghost_stencil_fn(phi, Method(method)))


def _tie_flips(raw: tuple[int, int]) -> list[tuple[int, int]]:
    fx = [1, -1] if raw[0] == 0 else [1]
    fy = [1, -1] if raw[1] == 0 else [1]
    return [(a, b) for a in fx for b in fy if (a, b) != (1, 1)]


def build_ghost_records(
    classification: Classification,
    phi: GridField,
    method: Method | str,
    bc_rule: Callable = dirichlet_left_half,
    **projection_kwargs,
) -> list[GhostRecord]:
    """One record per ghost node, in increasing linear-index order."""
    method = Method(method)
    if classification.family is not method.family:
        raise ValueError(f"{method.value} needs a {method.family.value}-family classification")
    spec = phi.spec
    nodes = classification.ghost_nodes()
    labels = [classification.label(nd) for nd in nodes]
    raw_signs = [quadrant_signs(phi, nd) for nd in nodes]
    signs = list(raw_signs)
    steps = [method.steps_for(lab) for lab in labels]
    signs = [(sx or 1, sy or 1) for sx, sy in signs]
    stencils = [upwind_stencil(nd, s, r, spec) for nd, s, r in zip(nodes, signs, steps)]
    ks = np.array([[linear_index(i, j, spec) for i, j in st] for st in stencils], dtype=np.int64)
    ks = ks.reshape(len(nodes), 25)
    relaxation = projection_kwargs.get("relaxation", PROJ_RELAXATION)
    tol = _resolve_tol(phi, projection_kwargs.get("tol"))
    max_iter = projection_kwargs.get("max_iter", PROJ_MAX_ITER)
    if nodes:
        pts, thetas, iters, status, detail = _walk(
            phi, nodes, np.array(signs), np.array(steps), ks, relaxation, tol, max_iter
        )
    else:
        pts, thetas, iters = np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0, dtype=int)
        status, detail = np.zeros(0, dtype=int), {}
    # A tied quadrant sign (symmetric level set across the node) leaves the side
    # of the stencil arbitrary; if the walk fails there, use the other side.
    for a in np.flatnonzero(status != _OK):
        for flip in _tie_flips(raw_signs[a]):
            trial = (signs[a][0] * flip[0], signs[a][1] * flip[1])
            try:
                st = upwind_stencil(nodes[a], trial, steps[a], spec)
            except StencilError:
                continue
            k_try = np.array([[linear_index(i, j, spec) for i, j in st]])
            if not classification.active[k_try[0]].all():
                continue
            p_, t_, i_, s_, _ = _walk(
                phi, [nodes[a]], np.array([trial]), np.array([steps[a]]), k_try,
                relaxation, tol, max_iter,
            )
            if s_[0] == _OK:
                signs[a], stencils[a], ks[a] = trial, st, k_try[0]
                pts[a], thetas[a], iters[a], status[a] = p_[0], t_[0], i_[0], _OK
                break
    _raise_for(status, detail, nodes, max_iter)
    eff_signs = np.array(signs).reshape(-1, 2)
    if nodes:
        gx, gy = biquartic_grad(
            phi.values[ks], thetas[:, 0], thetas[:, 1],
            eff_signs.T, np.array(steps).reshape(-1, 2).T, spec.h,
        )
        norm = np.hypot(gx, gy)
        nx, ny = gx / norm, gy / norm
        dirichlet = np.asarray(bc_rule(pts[:, 0], pts[:, 1]), dtype=bool)
    records = []
    for a, nd in enumerate(nodes):
        records.append(
            GhostRecord(
                node=nd,
                label=labels[a],
                signs=signs[a],
                steps=steps[a],
                stencil=tuple(stencils[a]),
                indices=ks[a],
                boundary_point=(float(pts[a, 0]), float(pts[a, 1])),
                thetas=(float(thetas[a, 0]), float(thetas[a, 1])),
                bc_kind=BCKind.DIRICHLET if dirichlet[a] else BCKind.NEUMANN,
                normal=(float(nx[a]), float(ny[a])),
                iterations=int(iters[a]),
            )
        )
    return records


def layer2_small_c0_fraction(records: Sequence[GhostRecord], threshold: float = 1e-3) -> float:
    """Fraction of outer-layer star ghosts whose smaller |c_0| is below ``threshold``."""
    outer = [r for r in records if r.label == NodeClass.GHOST_STAR2]
    if not outer:
        return 0.0
    return sum(r.min_c0 < threshold for r in outer) / len(outer)


GHOST_CSV_FIELDS = [
    "i", "j", "label", "s_x", "s_y", "r_x", "r_y",
    "x_B", "y_B", "theta_x", "theta_y", "bc_kind", "min_c0",
]


def write_ghost_diagnostics(records: Sequence[GhostRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GHOST_CSV_FIELDS)
        for r in records:
            w.writerow([
                r.node[0], r.node[1], r.label.name, r.signs[0], r.signs[1],
                r.steps[0], r.steps[1],
                f"{r.boundary_point[0]:.17g}", f"{r.boundary_point[1]:.17g}",
                f"{r.thetas[0]:.17g}", f"{r.thetas[1]:.17g}",
                r.bc_kind.value, f"{r.min_c0:.6e}",
            ])
