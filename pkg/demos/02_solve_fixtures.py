#!/usr/bin/env python3
"""Solving H_phi = lambda for graphs, with convergence against closed forms.

The grim reaper (-log cos x), the catenary (cosh x) and a circular arc are
solved by damped Newton on finer and finer grids; the sup error falls by
four for every halving of the spacing.  A rotational bowl profile is then
integrated from its apex and resampled on a square grid.
"""
import numpy as np

from densgraph import density as D
from densgraph import fixtures as F
from densgraph.solver import (harmonic_extension, profile_residual,
                              solve_rotational_vertical, solve_vertical)
from densgraph.surface import VerticalGraph

cases = [
    ("grim reaper", D.translator(2), 0.0, F.grim_reaper_height, (-1.0, 1.0)),
    ("catenary", D.singular_minimal(2, 1.0), 0.0, np.cosh, (-1.0, 1.0)),
    ("cmc arc", D.constant(2), 1.0, F.cmc_arc_height, (-0.5, 0.5)),
]
for name, d, lam, exact, (a, b) in cases:
    errs = []
    for m in (33, 65, 129, 257):
        f = np.zeros(m)
        f[0], f[-1] = exact(np.array([a, b]))
        g, rep = solve_vertical(d, lam, None, harmonic_extension(VerticalGraph(1, [(a, b)], f)))
        errs.append(np.abs(g.heights - exact(g.axes[0])).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    print(f"{name:12s} errors {' '.join(f'{e:.2e}' for e in errs)}  orders {np.round(orders, 2)}")

prof = solve_rotational_vertical(D.translator(3), 0.0, 0.0, 1.5, 3000)
print("bowl profile: f(1.5) =", prof.f[-1], " sup residual", np.abs(profile_residual(prof, D.translator(3))).max())
grid = prof.to_vertical_graph(1.0, 33)
print("resampled on", grid)
