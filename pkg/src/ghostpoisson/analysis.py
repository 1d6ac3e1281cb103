"""Gradient reconstruction, relative error norms, order fitting and the
grid-refinement study driver."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ghostpoisson.assembly import ProblemData, SparseSystem, assemble
from ghostpoisson.boundary import Method
from ghostpoisson.domains import (
    DomainSpec,
    ManufacturedSolution,
    default_solution_for,
    manufactured,
    sample_levelset,
)
from ghostpoisson.errors import GhostPoissonError, StencilError
from ghostpoisson.geometry import Classification, GridField, GridSpec, node_of
from ghostpoisson.interp import derivative_coeffs
from ghostpoisson.solver import SolveReport, condition_estimate, solve

DEFAULT_NS = (20, 40, 80, 160)
GRADIENT_MAX_SHIFT = 3
CSV_COLUMNS = [
    "method", "domain", "N", "h", "e1_u", "einf_u", "e1_grad", "einf_grad", "cond_est", "solve_ms",
]


def _shift_order(interior_sign: np.ndarray, max_shift: int) -> list[tuple[int, np.ndarray]]:
    """Candidate window shifts, smallest |d| first, the interior side winning ties."""
    out = [(0, np.ones_like(interior_sign, dtype=bool))]
    for a in range(1, max_shift + 1):
        toward = interior_sign >= 0  # positive shift first where interior lies at +
        out.append((a, toward))
        out.append((-a, ~toward))
        out.append((a, ~toward))
        out.append((-a, toward))
    return out


def _axis_derivative(u2, ok2, phi2, h, axis, max_shift):
    """Derivative along ``axis`` (1 = x, 0 = y) of a [j, i] array.

    The 5-node window for shift ``d`` covers offsets ``d-2 .. d+2`` and the
    derivative is taken at ``theta = 2 - d`` inside it, so ``d = 0`` is the
    centered formula.
    """
    n1 = u2.shape[0]
    u = np.moveaxis(u2, axis, -1)
    ok = np.moveaxis(ok2, axis, -1)
    ph = np.moveaxis(phi2, axis, -1)
    idx = np.arange(n1)
    # interior direction: toward decreasing phi
    lo = ph[..., np.maximum(idx - 1, 0)]
    hi = ph[..., np.minimum(idx + 1, n1 - 1)]
    interior_sign = np.sign(lo - hi)
    result = np.full(u.shape, np.nan)
    pending = np.ones(u.shape, dtype=bool)
    for d, prefer in _shift_order(interior_sign, max_shift):
        w = derivative_coeffs(float(2 - d))
        pos = idx[:, None] + d - 2 + np.arange(5)[None, :]  # (n1, 5)
        inside = ((pos >= 0) & (pos < n1)).all(axis=1)
        posc = np.clip(pos, 0, n1 - 1)
        valid = ok[..., posc].all(axis=-1) & inside
        take = pending & valid & prefer
        if take.any():
            vals = u[..., posc]
            deriv = np.einsum("...p,p->...", np.where(np.isfinite(vals), vals, 0.0), w) / h
            result[take] = deriv[take]
            pending &= ~take
    return np.moveaxis(result, -1, axis), np.moveaxis(pending, -1, axis)


def gradient_field(
    u: GridField | np.ndarray,
    classification: Classification,
    phi: GridField | None = None,
    max_shift: int = GRADIENT_MAX_SHIFT,
) -> tuple[np.ndarray, np.ndarray]:
    """Fourth-order gradient on every internal node.

    Uses the centered five-point formula where both axis neighbors at
    distance 1 and 2 carry values (internal or ghost), and otherwise the
    nearest shifted five-point window with quartic derivative weights at the
    matching integer offset. Returns flat ``(gx, gy)`` arrays, NaN off the
    internal set.
    """
    spec = classification.spec
    n1 = spec.n + 1
    vals = np.asarray(u.values if isinstance(u, GridField) else u, dtype=float).ravel()
    u2 = vals.reshape(n1, n1)
    ok2 = classification.active.reshape(n1, n1) & np.isfinite(u2)
    phi2 = phi.grid if phi is not None else np.where(classification.grid == 0, -1.0, 1.0)
    gx, miss_x = _axis_derivative(u2, ok2, phi2, spec.h, 1, max_shift)
    gy, miss_y = _axis_derivative(u2, ok2, phi2, spec.h, 0, max_shift)
    internal = classification.internal.reshape(n1, n1)
    missing = internal & (miss_x | miss_y)
    if missing.any():
        k = int(np.flatnonzero(missing.ravel())[0])
        raise StencilError(f"no valid five-point axis stencil within shift {max_shift}", node_of(k, spec))
    gx = np.where(internal, gx, np.nan).ravel()
    gy = np.where(internal, gy, np.nan).ravel()
    return gx, gy


def _modulus(v) -> np.ndarray:
    if isinstance(v, (tuple, list)):
        comps = [np.asarray(c, dtype=float).ravel() for c in v]
        return np.sqrt(sum(c * c for c in comps))
    return np.abs(np.asarray(v, dtype=float).ravel())


def relative_error(approx, exact, mask=None, p: float | str = np.inf) -> float:
    """Relative discrete p-norm error, p in {1, inf}.

    ``approx``/``exact`` are arrays or, for vector fields, ``(vx, vy)`` tuples;
    vector errors use the pointwise Euclidean modulus. ``exact`` may also be a
    callable ``exact(x, y)`` when ``approx`` is a :class:`GridField`.
    """
    if callable(exact):
        if not isinstance(approx, GridField):
            raise TypeError("a callable exact solution needs a GridField approximation")
        exact = exact(*approx.spec.mesh())
    if isinstance(approx, GridField):
        approx = approx.values
    if isinstance(approx, (tuple, list)):
        diff = _modulus([np.asarray(a, float).ravel() - np.asarray(e, float).ravel()
                         for a, e in zip(approx, exact)])
    else:
        diff = _modulus(np.asarray(approx, float).ravel() - np.asarray(exact, float).ravel())
    ref = _modulus(exact)
    if mask is not None:
        m = np.asarray(mask, dtype=bool).ravel()
        diff, ref = diff[m], ref[m]
    if p in (np.inf, "inf", float("inf")):
        num, den = np.max(diff, initial=0.0), np.max(ref, initial=0.0)
    elif p == 1:
        num, den = np.sum(diff), np.sum(ref)
    else:
        raise ValueError(f"p must be 1 or inf, got {p!r}")
    if den == 0.0:
        raise ValueError("relative error undefined: exact values vanish on the node set")
    return float(num / den)


def fit_order(ns: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(e) against log(h), h = 2/N."""
    ns = np.asarray(ns, dtype=float)
    e = np.asarray(errors, dtype=float)
    if ns.size != e.size:
        raise ValueError("N and error lists differ in length")
    if ns.size < 3:
        raise ValueError("an order fit needs at least three grid levels")
    if not np.all(np.isfinite(e)) or np.any(e <= 0.0):
        raise ValueError("errors must be finite and positive to fit an order")
    slope = np.polyfit(np.log(2.0 / ns), np.log(e), 1)[0]
    return float(slope)


def fit_growth(ns: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(N) (e.g. condition numbers)."""
    return -fit_order(ns, values)


@dataclass
class StudyRow:
    n: int
    e1_u: float = math.nan
    einf_u: float = math.nan
    e1_grad: float = math.nan
    einf_grad: float = math.nan
    cond_est: float = math.nan
    solve_ms: float = math.nan
    failure: str | None = None

    @property
    def h(self) -> float:
        return 2.0 / self.n

    @property
    def ok(self) -> bool:
        return self.failure is None


ERROR_COLUMNS = ("e1_u", "einf_u", "e1_grad", "einf_grad")


def _fmt(v: float) -> str:
    return "nan" if not np.isfinite(v) and np.isnan(v) else f"{v:.17g}"


@dataclass
class ConvergenceReport:
    method: str
    domain: str
    solution: str
    rows: list[StudyRow] = field(default_factory=list)

    def __post_init__(self):
        ns = [r.n for r in self.rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("grid sizes must be strictly increasing")

    @property
    def ns(self) -> list[int]:
        return [r.n for r in self.rows]

    @property
    def failures(self) -> dict[int, str]:
        return {r.n: r.failure for r in self.rows if r.failure is not None}

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def orders(self) -> dict[str, float]:
        """Fitted order per error column over the successful levels (NaN if < 3)."""
        out = {}
        for name in ERROR_COLUMNS:
            ns, es = self._usable(name)
            out[name] = fit_order(ns, es) if len(ns) >= 3 else math.nan
        return out

    def condition_slope(self) -> float:
        ns, ks = self._usable("cond_est")
        return fit_growth(ns, ks) if len(ns) >= 3 else math.nan

    def _usable(self, name):
        pairs = [(r.n, getattr(r, name)) for r in self.rows
                 if r.ok and np.isfinite(getattr(r, name)) and getattr(r, name) > 0]
        return [p[0] for p in pairs], [p[1] for p in pairs]

    def to_csv(self, timing: bool = True) -> str:
        """CSV text: one row per N, then a ``fit`` footer row and failure comments.

        The footer holds the fitted order of each error column and, under
        ``cond_est``, the growth exponent of the condition estimate in N.
        With ``timing=False`` the wall-time column is written as ``nan`` so
        repeated runs are byte-identical.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([
                self.method, self.domain, r.n, _fmt(r.h),
                _fmt(r.e1_u), _fmt(r.einf_u), _fmt(r.e1_grad), _fmt(r.einf_grad),
                _fmt(r.cond_est), f"{r.solve_ms:.3f}" if timing and np.isfinite(r.solve_ms) else "nan",
            ])
        o = self.orders()
        w.writerow([self.method, self.domain, "fit", "",
                    *(_fmt(o[c]) for c in ERROR_COLUMNS), _fmt(self.condition_slope()), ""])
        for n, msg in self.failures.items():
            buf.write(f"# N={n} failed: {msg}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, solution: str = "") -> "ConvergenceReport":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        failures = {}
        for ln in text.splitlines():
            if ln.startswith("# N="):
                head, msg = ln[4:].split(" failed: ", 1)
                failures[int(head)] = msg
        reader = csv.DictReader(lines)
        rows, method, domain = [], "", ""
        for rec in reader:
            method, domain = rec["method"], rec["domain"]
            if rec["N"] == "fit":
                continue
            n = int(rec["N"])
            rows.append(StudyRow(
                n,
                *(float(rec[c]) for c in ERROR_COLUMNS),
                cond_est=float(rec["cond_est"]),
                solve_ms=float(rec["solve_ms"]),
                failure=failures.get(n),
            ))
        return cls(method, domain, solution, rows)


def check_solution_domain(solution: ManufacturedSolution, x: np.ndarray, y: np.ndarray) -> None:
    """Reject a manufactured solution that is not finite at the nodes it is used on."""
    with np.errstate(all="ignore"):
        u = np.asarray(solution.u(x, y), dtype=float)
    if solution.name == "log-product":
        arg = 1.0 + 3.0 * x * y
        if np.any(arg <= 0.0):
            k = int(np.argmin(arg))
            raise GhostPoissonError(
                f"log(1+3xy) undefined at ({x[k]:.6g}, {y[k]:.6g}); domain leaves 1+3xy > 0"
            )
    if not np.all(np.isfinite(u)):
        raise GhostPoissonError(f"exact solution {solution.name!r} is not finite on the active nodes")


def problem_for(
    domain: DomainSpec,
    solution: ManufacturedSolution,
    phi: GridField,
    source_mode: str = "extrapolate",
) -> ProblemData:
    """Source and boundary data manufactured from ``solution``.

    The source is sampled on internal nodes only. The Neumann data uses the
    analytic normal of the domain at the boundary point when one exists and
    the interpolated normal otherwise.
    """
    x, y = phi.spec.mesh()
    inside = phi.values < 0.0
    f = np.zeros(x.size)
    f[inside] = solution.f(x[inside], y[inside])

    def g_neumann(xb, yb, nx, ny):
        if domain.analytic:
            nx, ny = domain.normal(xb, yb)
        gx, gy = solution.grad(xb, yb)
        return gx * nx + gy * ny

    return ProblemData(f, solution.u, g_neumann, f_exact=solution.f, source_mode=source_mode)


@dataclass
class LevelResult:
    """Everything produced at one grid level (kept only when requested)."""

    n: int
    system: SparseSystem
    report: SolveReport
    gradient: tuple[np.ndarray, np.ndarray]


def solve_level(
    method: Method | str,
    domain: DomainSpec,
    solution: ManufacturedSolution,
    n: int,
    *,
    source_mode: str = "extrapolate",
    solver: str = "direct",
    tol: float = 1e-12,
    condition: bool = True,
    **projection_kwargs,
) -> tuple[StudyRow, LevelResult]:
    spec = GridSpec(n)
    phi = sample_levelset(domain, spec)
    data = problem_for(domain, solution, phi, source_mode)
    system = assemble(method, phi, data, domain.is_dirichlet, **projection_kwargs)
    cl = system.classification
    x, y = spec.mesh()
    act = cl.active
    check_solution_domain(solution, x[act], y[act])
    t0 = time.perf_counter()
    rep = solve(system, tol=tol, method=solver)
    solve_ms = 1e3 * (time.perf_counter() - t0)
    u_exact = np.zeros(spec.size)
    u_exact[act] = solution.u(x[act], y[act])
    gx, gy = gradient_field(rep.values, cl, phi)
    inner = cl.internal
    ex_gx, ex_gy = np.zeros(spec.size), np.zeros(spec.size)
    ex_gx[inner], ex_gy[inner] = solution.grad(x[inner], y[inner])
    vals = np.where(act, rep.values, 0.0)
    row = StudyRow(
        n,
        e1_u=relative_error(vals, u_exact, act, 1),
        einf_u=relative_error(vals, u_exact, act, np.inf),
        e1_grad=relative_error((gx, gy), (ex_gx, ex_gy), inner, 1),
        einf_grad=relative_error((gx, gy), (ex_gx, ex_gy), inner, np.inf),
        cond_est=condition_estimate(system) if condition else math.nan,
        solve_ms=solve_ms,
    )
    rep.condition_estimate = row.cond_est
    return row, LevelResult(n, system, rep, (gx, gy))


def run_convergence_study(
    method: Method | str,
    domain: DomainSpec,
    solution: ManufacturedSolution | str | None = None,
    ns: Sequence[int] = DEFAULT_NS,
    *,
    source_mode: str = "extrapolate",
    solver: str = "direct",
    tol: float = 1e-12,
    condition: bool = True,
    on_level: Callable[[LevelResult], None] | None = None,
    **projection_kwargs,
) -> ConvergenceReport:
    """Assemble, solve and measure errors for each grid size in ``ns``.

    A level that fails (stencil off the grid, projection failure, singular or
    inaccurate solve) is recorded in the report with its message instead of
    aborting the study.
    """
    method = Method(method)
    if solution is None:
        solution = default_solution_for(domain)
    if isinstance(solution, str):
        solution = manufactured(solution)
    ns = [int(n) for n in ns]
    if not ns:
        raise ValueError("the list of grid sizes is empty")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("grid sizes must be strictly increasing")
    rows = []
    for n in ns:
        try:
            row, level = solve_level(
                method, domain, solution, n, source_mode=source_mode, solver=solver,
                tol=tol, condition=condition, **projection_kwargs,
            )
        except GhostPoissonError as exc:
            rows.append(StudyRow(n, failure=f"{type(exc).__name__}: {exc}"))
            continue
        rows.append(row)
        if on_level is not None:
            on_level(level)
    return ConvergenceReport(method.value, domain.name, solution.name, rows)
