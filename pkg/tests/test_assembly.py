import numpy as np
import pytest

from ghostpoisson.assembly import (
    ProblemData,
    RowKind,
    assemble,
    extend_source,
    interior_row_box,
    interior_row_star,
    source_extension_nodes,
)
from ghostpoisson.boundary import Method
from ghostpoisson.domains import DomainSpec, manufactured, polynomial_solution, sample_levelset
from ghostpoisson.errors import AssemblyError
from ghostpoisson.geometry import Family, GridSpec, classify_points
from ghostpoisson.solver import solve

from oracles import algorithm1_triplets, row_residuals


def _data(sol, spec, mode="extrapolate"):
    x, y = spec.mesh()

    def gn(xb, yb, nx, ny):
        gx, gy = sol.grad(xb, yb)
        return gx * nx + gy * ny

    return ProblemData(sol.f(x, y), sol.u, gn, f_exact=sol.f, source_mode=mode)


QUAD = polynomial_solution({(0, 0): 2.0, (1, 0): -1.0, (0, 1): 0.5, (2, 0): 1.0, (1, 1): -2.0, (0, 2): 3.0})


@pytest.mark.parametrize("method", list(Method))
def test_quadratic_rows_are_exact(method):
    spec = GridSpec(24)
    phi = sample_levelset(DomainSpec.circle(), spec)
    s = assemble(method, phi, _data(QUAD, spec, "analytic"))
    x, y = spec.mesh()
    assert np.max(row_residuals(s, QUAD.u(x, y))) < 1e-10


@pytest.mark.parametrize("method", list(Method))
def test_matches_reference_transcription(method):
    spec = GridSpec(20)
    phi = sample_levelset(DomainSpec.circle(), spec)
    data = _data(QUAD, spec, "analytic")
    s = assemble(method, phi, data)
    a = s.matrix().tocoo()
    ours = {(int(r), int(c)): v for r, c, v in zip(a.row, a.col, a.data)}
    ref, rhs = algorithm1_triplets(method, phi, data, s.classification)
    assert set(ours) == set(ref)
    for key, v in ref.items():
        assert ours[key] == pytest.approx(v, rel=1e-10, abs=1e-10)
    assert np.allclose(s.rhs, rhs, rtol=1e-10, atol=1e-10)


def test_row_kinds_and_inactive_identity():
    spec = GridSpec(20)
    phi = sample_levelset(DomainSpec.circle(), spec)
    s = assemble(Method.M3, phi, _data(QUAD, spec))
    counts = s.kind_counts()
    assert counts[RowKind.INTERIOR_BOX] == int(s.classification.internal.sum())
    assert sum(counts.values()) == spec.size
    a = s.matrix()
    for k in np.flatnonzero(~s.classification.active)[:20]:
        row = a.getrow(k)
        assert row.nnz == 1 and row[0, k] == 1.0 and s.rhs[k] == 0.0
    nnz_per_row = np.diff(a.indptr)
    assert nnz_per_row.min() >= 1 and nnz_per_row.max() <= 25


def test_interior_helpers():
    spec = GridSpec(20)
    phi = sample_levelset(DomainSpec.circle(), spec)
    cl = classify_points(phi, "star")
    f = np.arange(spec.size, dtype=float)
    entries, rhs = interior_row_star((10, 10), cl, f)
    assert len(entries) == 9 and rhs == f[10 + 10 * 21]
    assert sum(v for _, v in entries) == pytest.approx(0.0, abs=1e-9)
    clb = classify_points(phi, "box")
    entries, rhs = interior_row_box((10, 10), clb, f)
    k = 10 + 10 * 21
    assert rhs == pytest.approx((8 * f[k] + f[k - 1] + f[k + 1] + f[k - 21] + f[k + 21]) / 12)


def test_interior_row_touching_inactive_raises():
    spec = GridSpec(20)
    phi = sample_levelset(DomainSpec.circle(), spec)
    cl = classify_points(phi, "box")
    node = next(nd for nd in cl.ghost_nodes())
    with pytest.raises(AssemblyError):
        interior_row_box(node, cl, np.zeros(spec.size))


def test_source_extension_reproduces_cubic_quartic():
    spec = GridSpec(32)
    phi = sample_levelset(DomainSpec.circle(), spec)
    cl = classify_points(phi, Family.BOX)
    x, y = spec.mesh()
    f = 1 + x**4 - 3 * x**2 * y**3 + y
    need = source_extension_nodes(cl)
    fe = extend_source(f, cl, phi, need)
    assert np.allclose(fe[need], f[need], atol=1e-10)
    others = ~cl.internal
    others[need] = False
    assert np.all(np.isnan(fe[others]))


def test_source_extension_order_for_smooth_source():
    from test_acceptance import extension_errors
    from ghostpoisson.analysis import fit_order

    ns = (32, 64, 128)
    errs = extension_errors(lambda x, y: np.sin(2 * x) * np.sin(5 * y) * 29, ns)
    assert fit_order(ns, errs) >= 4.5


def test_full_grid_fourth_order():
    sol = manufactured("sin-product")
    big = DomainSpec.circle(center=(0.0, 0.0), radius=0.5)
    errs = []
    for n in (16, 32, 64):
        spec = GridSpec(n)
        phi = sample_levelset(big, spec)
        s = assemble(Method.M3, phi, _data(sol, spec, "analytic"))
        u = solve(s).values
        x, y = spec.mesh()
        inner = s.classification.internal
        errs.append(np.max(np.abs(u - sol.u(x, y))[inner]))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert rates[-1] > 3.5


def test_matrix_dump(tmp_path):
    spec = GridSpec(20)
    phi = sample_levelset(DomainSpec.circle(), spec)
    s = assemble(Method.M1, phi, _data(QUAD, spec))
    s.write_matrix(tmp_path / "A.txt", tmp_path / "b.txt")
    lines = (tmp_path / "A.txt").read_text().splitlines()
    r, c, nnz = map(int, lines[0].split())
    assert r == c == spec.size and nnz == len(lines) - 1
    assert len((tmp_path / "b.txt").read_text().splitlines()) == spec.size
