#!/usr/bin/env python3
"""Second variation of test functions v*g, written as a sum of squares.

For g = N_{n+1} (vertical graphs) or g = h (radial graphs) the quadratic form
Q[v g] equals an integral of g^2 |grad v|^2 plus a density term.  The
discrete gap between the two sides is a discretization error that shrinks
like h^2.
"""
import numpy as np

from densgraph import fixtures as F
from densgraph import spectrum as Sp
from densgraph.surface import geometry, triangulate


def bump(g):
    v = np.ones(g.shape)
    for k, (ax, (a, b)) in enumerate(zip(g.axes, g.bounds)):
        shape = [1] * g.n
        shape[k] = -1
        v = v * (np.sin(np.pi * (ax - a) / (b - a)) ** 2).reshape(shape)
    return v[g.interior_mask]


for name, levels in [("expander_vertical", (17, 33, 65)), ("shrinker_sphere", (17, 33, 65)),
                     ("grim_reaper", (65, 129, 257)), ("catenary", (65, 129, 257))]:
    fx = F.get(name)
    row = []
    for m in levels:
        g = fx.graph(nodes=m)
        lhs, rhs, gap = Sp.decomposition_check(triangulate(g), geometry(g, fx.density),
                                               fx.density, bump(g), fx.decomposition_mode,
                                               lam=fx.lam)
        row.append(f"{m}: Q={lhs:.6f} gap={gap:.2e}")
    print(f"{name:18s} [{fx.decomposition_mode}]\n    " + "   ".join(row))
