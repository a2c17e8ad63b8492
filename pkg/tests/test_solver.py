import json
import math

import numpy as np
import pytest

from densgraph import density as D
from densgraph import fixtures as F
from densgraph import solver as V
from densgraph.errors import BlowUp, NonConvergence
from densgraph.surface import VerticalGraph, geometry_vertical


def solve_line(density, lam, exact, a, b, m):
    f = np.zeros(m)
    f[0], f[-1] = exact(np.array([a, b]))
    # the linear guess selects the wanted branch; zero can land on a deeper one
    g0 = V.harmonic_extension(VerticalGraph(1, [(a, b)], f))
    g, rep = V.solve_vertical(density, lam, None, g0)
    assert rep.converged
    return g, rep, np.abs(g.heights - exact(g.axes[0])).max()


@pytest.mark.parametrize(
    "density, lam, exact, a, b",
    [
        (D.translator(2), 0.0, F.grim_reaper_height, -1.0, 1.0),
        (D.singular_minimal(2, 1.0), 0.0, np.cosh, -1.0, 1.0),
        (D.constant(2), 1.0, F.cmc_arc_height, -0.5, 0.5),
    ],
    ids=["grim_reaper", "catenary", "cmc_arc"],
)
def test_vertical_solver_second_order(density, lam, exact, a, b):
    errs = [solve_line(density, lam, exact, a, b, m)[2] for m in (33, 65, 129)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9), (errs, orders)


def test_grim_reaper_symmetry_and_report():
    g, rep, _ = solve_line(D.translator(2), 0.0, F.grim_reaper_height, -1.0, 1.0, 65)
    assert np.abs(g.heights - g.heights[::-1]).max() <= 1e-9
    assert rep.final_residual <= 1e-10
    assert rep.iterations == len(rep.residual_history)
    assert rep.final_residual == rep.residual_history[-1]
    # re-evaluating the geometry reproduces the residual the solver saw
    H = geometry_vertical(g, D.translator(2)).H_phi
    assert np.abs(H[1:-1]).max() == pytest.approx(rep.final_residual, rel=1e-6, abs=1e-14)
    d = json.loads(rep.to_json())
    assert d["lambda"] == 0.0 and d["converged"] is True


def test_solve_on_surface_grid():
    g = F.get("bowl").graph(nodes=17)
    H = geometry_vertical(g, D.translator(3)).H_phi
    assert np.abs(H[g.interior_mask]).max() <= 1e-10
    # symmetric under the dihedral group of the square
    f = g.heights
    assert np.abs(f - f.T).max() <= 1e-9
    assert np.abs(f - f[::-1]).max() <= 1e-9


def test_nonconvergence_reports_last_iterate():
    g0 = VerticalGraph(1, [(-1.0, 1.0)], np.zeros(33))
    bnd = lambda q: F.grim_reaper_height(q[:, 0])
    g, rep = V.solve_vertical(D.translator(2), 0.0, bnd, g0, max_iter=1)
    assert not rep.converged and rep.final_residual > 1e-10
    with pytest.raises(NonConvergence):
        V.solve_vertical(D.translator(2), 0.0, bnd, g0, max_iter=1, raise_on_failure=True)


def test_rotational_bowl_profile():
    prof = V.solve_rotational_vertical(D.translator(3), 0.0, 0.0, 1.5, 3000)
    assert np.abs(V.profile_residual(prof, D.translator(3))).max() <= 5e-6
    assert np.all(np.diff(prof.f) >= 0)


def test_rotational_cap():
    prof = V.solve_rotational_vertical(D.constant(3), -2.0, 0.0, 0.9, 2000)
    exact = np.sqrt(1 - prof.s**2) - 1
    assert np.abs(prof.f - exact).max() <= 1e-8


def test_rotational_expander_through_origin_is_flat():
    prof = V.solve_rotational_vertical(D.expander(2), 0.0, 0.0, 2.0, 500)
    assert np.abs(prof.f).max() == 0.0


def test_rotational_blow_up():
    # a cap of radius 1 stops being a graph at s = 1
    with pytest.raises(BlowUp):
        V.solve_rotational_vertical(D.constant(3), -2.0, 0.0, 1.5, 3000)


def test_radial_sphere():
    # other constant-curvature branches exist; start on the sphere's side
    band = (np.pi / 4, 3 * np.pi / 4)
    g, rep = V.solve_radial_axisymmetric(D.constant(3), -1.0, (2.0, 2.0), band, np.full(17, 2.1))
    assert rep.converged
    assert np.abs(g.radii - 2.0).max() <= 1e-10


def test_radial_shrinker_circle():
    band = (np.pi / 3, 2 * np.pi / 3)
    r = math.sqrt(2.0)
    g, rep = V.solve_radial_axisymmetric(D.shrinker(2), 0.0, (r, r), band, np.full(33, 1.4))
    assert rep.converged
    assert np.abs(g.radii - r).max() <= 1e-10


def test_radial_expander_idempotent():
    g = F.get("expander_radial").graph(nodes=33)
    rho = g.radii[:, 0]
    g2, rep = V.solve_radial_axisymmetric(
        D.expander(3), 0.0, (rho[0], rho[-1]), F.EXPANDER_BAND, rho, phi_nodes=33
    )
    assert rep.iterations == 0
    np.testing.assert_array_equal(g2.radii, g.radii)


def test_harmonic_extension_of_affine_boundary():
    g = VerticalGraph(2, [(0, 1), (0, 2)], np.zeros((9, 9)))
    q = g.chart_points()
    f = 1 + 2 * q[..., 0] - q[..., 1]
    ext = V.harmonic_extension(g.with_heights(np.where(g.boundary_mask, f, 0.0)))
    np.testing.assert_allclose(ext.heights, f, atol=1e-12)
