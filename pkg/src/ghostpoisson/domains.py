"""Test geometries (shifted circle, five-petal flower, level sets read from
file) and manufactured solutions with their analytic derivatives."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from ghostpoisson.geometry import Family, GridField, GridSpec, Node, classify_points

CIRCLE_CENTER = (math.sqrt(2.0) / 10.0, -math.sqrt(3.0) / 20.0)
CIRCLE_RADIUS = math.sqrt(5.0) / 3.0
FLOWER_R1 = 0.5
FLOWER_R2 = 0.2


def dirichlet_left_half(x, y):
    """Default boundary split: Dirichlet where x <= 0, Neumann elsewhere."""
    return np.asarray(x) <= 0.0


@dataclass(frozen=True)
class DomainSpec:
    kind: str = "circle"
    center: tuple[float, float] = CIRCLE_CENTER
    radius: float = CIRCLE_RADIUS
    r1: float = FLOWER_R1
    r2: float = FLOWER_R2
    path: str | None = None
    is_dirichlet: Callable = dirichlet_left_half

    def __post_init__(self):
        if self.kind not in ("circle", "flower", "file"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "circle" and not self.radius > 0:
            raise ValueError("circle radius must be positive")
        if self.kind == "flower" and not self.r1 > self.r2 > 0:
            raise ValueError("flower needs r1 > r2 > 0")
        if self.kind == "file" and not self.path:
            raise ValueError("file domain needs a path")

    @classmethod
    def circle(cls, center=CIRCLE_CENTER, radius=CIRCLE_RADIUS, **kw) -> "DomainSpec":
        return cls("circle", center=tuple(center), radius=radius, **kw)

    @classmethod
    def flower(cls, r1=FLOWER_R1, r2=FLOWER_R2, center=(0.0, 0.0), **kw) -> "DomainSpec":
        return cls("flower", center=tuple(center), r1=r1, r2=r2, **kw)

    @classmethod
    def from_file(cls, path, **kw) -> "DomainSpec":
        return cls("file", path=str(path), **kw)

    @property
    def name(self) -> str:
        return self.kind

    @property
    def analytic(self) -> bool:
        return self.kind != "file"

    def phi(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "circle":
            return np.hypot(x - self.center[0], y - self.center[1]) - self.radius
        if self.kind == "flower":
            # Offsets enter the quintic only; the radius is taken about the
            # origin exactly as the closed form is usually written.
            X, Y = x - self.center[0], y - self.center[1]
            r = np.hypot(x, y)
            quintic = Y**5 + 5.0 * X**4 * Y - 10.0 * X**2 * Y**3
            # the petal term is bounded but has no limit at r = 0; take it as 0 there
            safe = np.where(r > 0.0, r, 1.0)
            return r - self.r1 - self.r2 * np.where(r > 0.0, quintic / safe**5, 0.0)
        raise TypeError("a level set read from file has no analytic form")

    def grad_phi(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "circle":
            dx, dy = x - self.center[0], y - self.center[1]
            r = np.hypot(dx, dy)
            return dx / r, dy / r
        if self.kind == "flower":
            X, Y = x - self.center[0], y - self.center[1]
            r = np.hypot(x, y)
            quintic = Y**5 + 5.0 * X**4 * Y - 10.0 * X**2 * Y**3
            qx = 20.0 * X**3 * Y - 20.0 * X * Y**3
            qy = 5.0 * Y**4 + 5.0 * X**4 - 30.0 * X**2 * Y**2
            r5, r7 = r**5, r**7
            gx = x / r - self.r2 * (qx / r5 - 5.0 * quintic * x / r7)
            gy = y / r - self.r2 * (qy / r5 - 5.0 * quintic * y / r7)
            return gx, gy
        raise TypeError("a level set read from file has no analytic form")

    def normal(self, x, y):
        gx, gy = self.grad_phi(x, y)
        norm = np.hypot(gx, gy)
        return gx / norm, gy / norm

    def parametric(self, gamma):
        """Boundary point at angle ``gamma`` (flower and circle only)."""
        gamma = np.asarray(gamma, dtype=float)
        if self.kind == "circle":
            return (
                self.center[0] + self.radius * np.cos(gamma),
                self.center[1] + self.radius * np.sin(gamma),
            )
        if self.kind == "flower":
            r = self.r1 + self.r2 * np.sin(5.0 * gamma)
            return r * np.cos(gamma) + self.center[0], r * np.sin(gamma) + self.center[1]
        raise TypeError("a level set read from file has no parametric form")


def read_levelset_file(path) -> tuple[int, np.ndarray]:
    tokens = Path(path).read_text().split()
    if not tokens:
        raise ValueError(f"{path}: empty level-set file")
    n = int(tokens[0])
    values = np.array(tokens[1:], dtype=float)
    if values.size != (n + 1) ** 2:
        raise ValueError(f"{path}: expected {(n + 1) ** 2} values for N={n}, found {values.size}")
    return n, values


def write_levelset_file(path, phi: GridField) -> None:
    n = phi.spec.n
    rows = phi.grid
    with open(path, "w") as fh:
        fh.write(f"{n}\n")
        for row in rows:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def sample_levelset(spec: DomainSpec, grid: GridSpec) -> GridField:
    if spec.kind == "file":
        n, values = read_levelset_file(spec.path)
        if n != grid.n:
            raise ValueError(f"{spec.path}: level set is for N={n}, grid has N={grid.n}")
        return GridField(grid, values)
    x, y = grid.mesh()
    return GridField(grid, spec.phi(x, y))


class MarginCheck(NamedTuple):
    ok: bool
    offending: list[Node]


def boundary_margin_check(spec: DomainSpec, grid: GridSpec) -> MarginCheck:
    """Check the domain keeps every stencil the methods may build on the grid.

    Internal nodes need two grid layers on each side (star stencil), and every
    ghost of either family needs room for an upwind stencil with steps (2, 2).
    """
    from ghostpoisson.boundary import quadrant_signs

    phi = sample_levelset(spec, grid)
    n = grid.n
    bad: set[Node] = set()
    star = classify_points(phi, Family.STAR)
    box = classify_points(phi, Family.BOX)
    for j, i in zip(*np.nonzero(star.grid == 0)):
        if min(i, j) < 2 or max(i, j) > n - 2:
            bad.add((int(i), int(j)))
    ghosts = set(star.ghost_nodes()) | set(box.ghost_nodes())
    for node in sorted(ghosts):
        sx, sy = quadrant_signs(phi, node)
        sx, sy = sx or 1, sy or 1
        i_end, j_end = node[0] + 8 * sx, node[1] + 8 * sy
        if not (grid.contains(i_end, j_end)):
            bad.add(node)
    offending = sorted(bad, key=lambda nd: (nd[1], nd[0]))
    return MarginCheck(not offending, offending)


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact solution u with gradient and source f = -lap(u)."""

    name: str
    u: Callable
    grad: Callable
    f: Callable


def _sin_product() -> ManufacturedSolution:
    def u(x, y):
        return np.sin(2.0 * x) * np.sin(5.0 * y)

    def grad(x, y):
        return 2.0 * np.cos(2.0 * x) * np.sin(5.0 * y), 5.0 * np.sin(2.0 * x) * np.cos(5.0 * y)

    def f(x, y):
        return 29.0 * np.sin(2.0 * x) * np.sin(5.0 * y)

    return ManufacturedSolution("sin-product", u, grad, f)


def _log_product() -> ManufacturedSolution:
    def u(x, y):
        return np.log1p(3.0 * np.asarray(x) * np.asarray(y))

    def grad(x, y):
        d = 1.0 + 3.0 * np.asarray(x) * np.asarray(y)
        return 3.0 * np.asarray(y) / d, 3.0 * np.asarray(x) / d

    def f(x, y):
        x, y = np.asarray(x), np.asarray(y)
        d = 1.0 + 3.0 * x * y
        return 9.0 * (x * x + y * y) / (d * d)

    return ManufacturedSolution("log-product", u, grad, f)


def polynomial_solution(coeffs: dict[tuple[int, int], float], name="polynomial") -> ManufacturedSolution:
    """u = sum c_ab x^a y^b, with exact gradient and source."""

    def u(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        return sum(c * x**a * y**b for (a, b), c in coeffs.items()) + 0.0 * x

    def grad(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        gx = sum(c * a * x ** max(a - 1, 0) * y**b for (a, b), c in coeffs.items() if a) + 0.0 * x
        gy = sum(c * b * x**a * y ** max(b - 1, 0) for (a, b), c in coeffs.items() if b) + 0.0 * x
        return gx, gy

    def f(x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        lap = 0.0 * x
        for (a, b), c in coeffs.items():
            if a >= 2:
                lap = lap + c * a * (a - 1) * x ** (a - 2) * y**b
            if b >= 2:
                lap = lap + c * b * (b - 1) * x**a * y ** (b - 2)
        return -lap

    return ManufacturedSolution(name, u, grad, f)


SOLUTIONS: dict[str, Callable[[], ManufacturedSolution]] = {
    "sin-product": _sin_product,
    "log-product": _log_product,
}


def manufactured(name: str) -> ManufacturedSolution:
    try:
        return SOLUTIONS[name]()
    except KeyError:
        raise ValueError(f"unknown exact solution {name!r}; choose from {sorted(SOLUTIONS)}") from None


def default_solution_for(domain: DomainSpec) -> str:
    return "log-product" if domain.kind == "flower" else "sin-product"
