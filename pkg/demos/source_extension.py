"""Accuracy of the source extension used by the compact box stencil.

The box scheme needs f on the four axis neighbours of each internal node,
including neighbours outside the domain. Those values come from a shifted
quartic extrapolation of the interior samples. Here we compare them to the
exact source for a smooth non-polynomial f.
"""

from __future__ import annotations

import numpy as np

from ghostpoisson.analysis import fit_order
from ghostpoisson.assembly import extend_source, source_extension_nodes
from ghostpoisson.domains import DomainSpec, sample_levelset
from ghostpoisson.geometry import Family, GridSpec, classify_points


def f(x, y):
    return np.sin(2 * x + 1) * np.cos(3 * y) + np.exp(x * y)


if __name__ == "__main__":
    domain = DomainSpec.circle()
    ns, errs = (32, 64, 128, 256), []
    for n in ns:
        spec = GridSpec(n)
        phi = sample_levelset(domain, spec)
        cl = classify_points(phi, Family.BOX)
        x, y = spec.mesh()
        need = source_extension_nodes(cl)
        fe = extend_source(f(x, y), cl, phi, need)
        errs.append(np.max(np.abs(fe[need] - f(x, y)[need])))
        print(f"N={n:3d} {need.size:4d} extended values, max error {errs[-1]:.2e}")
    print(f"observed order {fit_order(ns, errs):.2f}")
