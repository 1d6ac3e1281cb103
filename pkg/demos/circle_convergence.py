"""Convergence of the three ghost-point discretizations on the disc.

The disc is centred off the origin so that the grid has no symmetry to exploit.
The left half of its boundary carries Dirichlet data and the right half Neumann
data. For each method we refine N = 20..160, print the relative errors in u and
in its gradient, and fit the observed order.
"""

from __future__ import annotations

from ghostpoisson.analysis import run_convergence_study
from ghostpoisson.domains import DomainSpec

NS = (20, 40, 80, 160)

if __name__ == "__main__":
    domain = DomainSpec.circle()
    for method in ("M1", "M2", "M3"):
        rep = run_convergence_study(method, domain, None, NS)
        print(f"\n{method} on the disc, exact solution {rep.solution}")
        print(f"{'N':>5} {'e1_u':>10} {'einf_u':>10} {'e1_grad':>10} {'einf_grad':>10} {'cond':>10}")
        for r in rep.rows:
            print(f"{r.n:5d} {r.e1_u:10.2e} {r.einf_u:10.2e} {r.e1_grad:10.2e} {r.einf_grad:10.2e} {r.cond_est:10.2e}")
        print("fitted orders:", {k: round(v, 2) for k, v in rep.orders().items()})
    # M1 extrapolates second-layer ghosts from first-layer ghosts that are
    # themselves unknowns, and the matrix becomes nearly singular. M2 and M3
    # keep every interpolation stencil anchored in the interior and recover
    # fourth-order accuracy.
