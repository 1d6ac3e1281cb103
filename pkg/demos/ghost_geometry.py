"""Where the ghost points sit and how close their boundary projections get.

For each ghost node the walk on the biquartic interpolant of phi locates a
boundary point B. This script reports the spread of the local coordinates
(theta_x, theta_y) of B, the smallest interpolation weight c_0 on the ghost
node itself, and the distance from B to the exact circle.
"""

from __future__ import annotations

import numpy as np

from ghostpoisson.boundary import Method, build_ghost_records, close_for_method
from ghostpoisson.domains import DomainSpec, sample_levelset
from ghostpoisson.geometry import GridSpec, NodeClass, classify_points

if __name__ == "__main__":
    domain = DomainSpec.circle()
    c = np.array(domain.center)
    for n in (20, 40, 80):
        spec = GridSpec(n)
        phi = sample_levelset(domain, spec)
        for method in Method:
            cl = close_for_method(classify_points(phi, method.family), phi, method)
            recs = build_ghost_records(cl, phi, method)
            th = np.array([r.thetas for r in recs])
            c0 = np.array([r.min_c0 for r in recs])
            bp = np.array([r.boundary_point for r in recs])
            dist = np.abs(np.linalg.norm(bp - c, axis=1) - domain.radius)
            layer2 = sum(r.label == NodeClass.GHOST_STAR2 for r in recs)
            print(f"N={n:3d} {method.value}: {len(recs):4d} ghosts ({layer2} second layer), "
                  f"theta in [{th.min():.3f}, {th.max():.3f}], min c0 {c0.min():.1e}, "
                  f"max |B - circle| / h {dist.max() / spec.h:.1e}")
    # Small c0 means the ghost value is a near-cancellation of its neighbours,
    # which is the dominant source of large condition numbers.
