import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ghostpoisson.analysis import (
    ConvergenceReport,
    StudyRow,
    check_solution_domain,
    fit_order,
    gradient_field,
    relative_error,
    run_convergence_study,
)
from ghostpoisson.boundary import Method, close_for_method
from ghostpoisson.domains import DomainSpec, manufactured, sample_levelset
from ghostpoisson.errors import GhostPoissonError, StencilError
from ghostpoisson.geometry import GridSpec, classify_points


def _cl(n=40, method=Method.M1):
    spec = GridSpec(n)
    phi = sample_levelset(DomainSpec.circle(), spec)
    cl = close_for_method(classify_points(phi, method.family), phi, method)
    return spec, phi, cl


def test_gradient_exact_for_linears():
    spec, phi, cl = _cl()
    x, y = spec.mesh()
    gx, gy = gradient_field(x + 2 * y, cl, phi)
    inner = cl.internal
    assert np.allclose(gx[inner], 1.0, atol=1e-10)
    assert np.allclose(gy[inner], 2.0, atol=1e-10)
    assert np.all(np.isnan(gx[~inner]))


@pytest.mark.parametrize("method", [Method.M1, Method.M3])
def test_gradient_exact_for_quartics(method):
    spec, phi, cl = _cl(40, method)
    x, y = spec.mesh()
    u = x**4 * y - 2 * x * y**4 + x**2 * y**3
    gx, gy = gradient_field(u, cl, phi)
    inner = cl.internal
    ex = 4 * x**3 * y - 2 * y**4 + 2 * x * y**3
    ey = x**4 - 8 * x * y**3 + 3 * x**2 * y**2
    assert np.max(np.abs(gx - ex)[inner]) < 1e-10
    assert np.max(np.abs(gy - ey)[inner]) < 1e-10


def test_gradient_uses_shifted_stencil_near_box_boundary():
    # with box ghosts only one external layer exists, so some internal nodes
    # need the one-sided window
    spec, phi, cl = _cl(40, Method.M3)
    x, y = spec.mesh()
    u = np.where(cl.active, x**3, np.nan)
    gx, _ = gradient_field(u, cl, phi)
    assert np.allclose(gx[cl.internal], 3 * x[cl.internal] ** 2, atol=1e-10)


def test_gradient_missing_stencil_raises():
    spec, phi, cl = _cl(40, Method.M3)
    u = np.where(cl.internal, 1.0, np.nan)
    with pytest.raises(StencilError):
        gradient_field(u, cl, phi, max_shift=0)


def test_relative_error_basics():
    u = np.array([1.0, -2.0, 3.0])
    assert relative_error(u, u, p=1) == 0.0
    assert relative_error(2 * u, u, p=np.inf) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        relative_error(u, np.zeros(3), p=1)
    with pytest.raises(ValueError):
        relative_error(u, u, p=2)


def test_relative_error_hand_computed():
    rng = np.random.default_rng(7)
    exact = rng.uniform(1, 2, 9)
    delta = rng.normal(scale=0.1, size=9)
    mask = np.zeros(12, dtype=bool)
    mask[:9] = True
    ue, uh = np.ones(12), np.ones(12)
    ue[:9], uh[:9] = exact, exact + delta
    assert relative_error(uh, ue, mask, 1) == pytest.approx(np.sum(np.abs(delta)) / np.sum(exact))


def test_relative_error_vector_modulus():
    ex = (np.array([3.0, 0.0]), np.array([4.0, 1.0]))
    ap = (np.array([3.0, 0.0]), np.array([4.0, 2.0]))
    assert relative_error(ap, ex, p=np.inf) == pytest.approx(1.0 / 5.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 10.0))
def test_relative_error_homogeneous(scale):
    rng = np.random.default_rng(3)
    exact = rng.uniform(1, 2, 20)
    d = rng.normal(size=20)
    e1 = relative_error(exact + d, exact, p=1)
    e2 = relative_error(exact + scale * d, exact, p=1)
    assert e2 == pytest.approx(scale * e1, rel=1e-12)


def test_fit_order():
    ns = np.array([20, 40, 80, 160])
    h = 2.0 / ns
    assert fit_order(ns, 3.0 * h**4) == pytest.approx(4.0)
    assert fit_order(ns, 0.5 * h**2) == pytest.approx(2.0)
    noisy = h**4 * (1 + 0.1 * np.sin(ns))
    assert abs(fit_order(ns, noisy) - 4.0) < 0.15
    with pytest.raises(ValueError):
        fit_order(ns, [1e-3, 0.0, 1e-5, 1e-6])
    with pytest.raises(ValueError):
        fit_order(ns[:2], h[:2])


def test_log_solution_positivity_check():
    sol = manufactured("log-product")
    check_solution_domain(sol, np.array([0.5, -0.5]), np.array([0.5, 0.5]))
    with pytest.raises(GhostPoissonError):
        check_solution_domain(sol, np.array([0.9]), np.array([-0.9]))


def test_flower_fits_log_solution():
    d = DomainSpec.flower()
    g = np.linspace(0, 2 * np.pi, 2000)
    x, y = d.parametric(g)
    assert np.min(1 + 3 * x * y) > 0


def test_study_m3_circle_converges():
    rep = run_convergence_study("M3", DomainSpec.circle(), "sin-product", (40, 80, 160))
    assert not rep.failures
    orders = rep.orders()
    assert all(v >= 3.5 for v in orders.values()), orders


def test_study_m1_is_not_convergent():
    rep = run_convergence_study("M1", DomainSpec.circle(), None, (20, 40, 80, 160))
    assert max(r.cond_est for r in rep.rows) > 1e14
    assert rep.rows[-1].einf_u > rep.rows[0].einf_u


def test_study_records_failures():
    # the default flower is too thin for the coarsest grid
    rep = run_convergence_study("M3", DomainSpec.flower(), None, (20, 160), condition=False)
    assert 20 in rep.failures and 160 not in rep.failures
    assert math.isnan(rep.rows[0].e1_u)


def test_study_is_deterministic():
    a = run_convergence_study("M2", DomainSpec.circle(), None, (20, 40, 80)).to_csv(timing=False)
    b = run_convergence_study("M2", DomainSpec.circle(), None, (20, 40, 80)).to_csv(timing=False)
    assert a == b


def test_report_csv_roundtrip():
    rows = [StudyRow(n, 1.0 / n**4, 2.0 / n**4, 3.0 / n**4, 4.0 / n**4, n**2, 1.0) for n in (20, 40, 80)]
    rep = ConvergenceReport("M3", "circle", "sin-product", rows + [StudyRow(160, failure="boom")])
    text = rep.to_csv()
    assert text.splitlines()[0] == "method,domain,N,h,e1_u,einf_u,e1_grad,einf_grad,cond_est,solve_ms"
    assert text.splitlines()[5].startswith("M3,circle,fit,")
    assert "# N=160 failed: boom" in text
    back = ConvergenceReport.from_csv(text)
    assert back.ns == [20, 40, 80, 160]
    assert back.orders()["e1_u"] == pytest.approx(4.0)
    assert back.condition_slope() == pytest.approx(2.0)
    assert back.failures == {160: "boom"}


def test_report_requires_increasing_n():
    with pytest.raises(ValueError):
        ConvergenceReport("M1", "circle", "x", [StudyRow(40), StudyRow(20)])
    with pytest.raises(ValueError):
        run_convergence_study("M1", DomainSpec.circle(), None, ())
