"""The five-petal flower at increasing resolution.

Petal tips and the valleys between petals are only a few hundredths wide, so
the coarse grids cannot fit a 5x5 interpolation block on the correct side of
the boundary. The study records those levels as failures and carries on; the
finest level resolves the geometry.
"""

from __future__ import annotations

from ghostpoisson.analysis import run_convergence_study
from ghostpoisson.domains import DomainSpec, boundary_margin_check
from ghostpoisson.geometry import GridSpec

NS = (20, 40, 80, 160)

if __name__ == "__main__":
    domain = DomainSpec.flower()
    for n in NS:
        print(f"N={n:3d} margin check: {boundary_margin_check(domain, GridSpec(n))}")
    for method in ("M2", "M3"):
        rep = run_convergence_study(method, domain, None, NS, condition=False)
        print(f"\n{method} on the flower, exact solution {rep.solution}")
        for r in rep.rows:
            if r.ok:
                print(f"  N={r.n:3d} einf_u {r.einf_u:.2e} einf_grad {r.einf_grad:.2e}")
            else:
                print(f"  N={r.n:3d} failed: {r.failure}")
